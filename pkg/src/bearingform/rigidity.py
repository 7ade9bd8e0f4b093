"""Bearing rigidity of frameworks in arbitrary dimension.

Configurations are handled as ``(n, d)`` arrays; the stacked vector used by
the matrices is ``p.ravel()`` (agent-major ordering).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateError, ValidationError
from .graph import Graph, complete_graph

EPS_SEP = 1e-9
RANK_TOL = 1e-10
EQUIV_TOL = 1e-8


def as_configuration(p, n: int | None = None, d: int | None = None) -> np.ndarray:
    """Coerce ``p`` to a float ``(n, d)`` array; a flat vector needs ``d``."""
    arr = np.asarray(p, dtype=float)
    if arr.ndim == 1:
        if d is None:
            raise ValidationError("flat configuration needs an explicit dimension")
        if arr.size % d:
            raise ValidationError(f"configuration length {arr.size} not divisible by d={d}")
        arr = arr.reshape(-1, d)
    if arr.ndim != 2:
        raise ValidationError(f"configuration must be 1-D or 2-D, got shape {arr.shape}")
    if n is not None and arr.shape[0] != n:
        raise ValidationError(f"configuration has {arr.shape[0]} points, expected {n}")
    if d is not None and arr.shape[1] != d:
        raise ValidationError(f"configuration has dimension {arr.shape[1]}, expected {d}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("configuration contains non-finite entries")
    return arr


@dataclass(frozen=True, eq=False)
class Framework:
    graph: Graph
    p: np.ndarray
    eps_sep: float = EPS_SEP

    def __post_init__(self):
        p = as_configuration(self.p, n=self.graph.n)
        if p.shape[1] < 2:
            raise ValidationError(f"framework dimension must be >= 2, got {p.shape[1]}")
        p = p.copy()
        p.setflags(write=False)
        object.__setattr__(self, "p", p)
        lengths = np.linalg.norm(p[self.graph.heads] - p[self.graph.tails], axis=1)
        bad = np.flatnonzero(lengths <= self.eps_sep)
        if bad.size:
            edge = self.graph.edges[bad[0]]
            raise DegenerateError(f"edge {edge} has coincident endpoints", edge)

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def d(self) -> int:
        return self.p.shape[1]


@dataclass(frozen=True)
class BearingSet:
    e: np.ndarray        # (m, d) edge vectors p_head - p_tail
    g: np.ndarray        # (m, d) unit bearings
    lengths: np.ndarray  # (m,)

    def stacked(self) -> np.ndarray:
        return self.g.ravel()


@dataclass(frozen=True)
class RigidityReport:
    n: int
    d: int
    rank_R: int
    nullity_R: int
    rank_R_complete: int
    infinitesimally_bearing_rigid: bool
    globally_bearing_rigid: bool
    bearing_rigid: bool
    null_basis: np.ndarray
    tolerance: float

    @property
    def required_rank(self) -> int:
        return self.d * self.n - self.d - 1

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "d": self.d,
            "rank_R": self.rank_R,
            "nullity_R": self.nullity_R,
            "rank_R_complete": self.rank_R_complete,
            "required_rank": self.required_rank,
            "infinitesimally_bearing_rigid": self.infinitesimally_bearing_rigid,
            "globally_bearing_rigid": self.globally_bearing_rigid,
            "bearing_rigid": self.bearing_rigid,
            "tolerance": self.tolerance,
        }


def projection(x, eps: float = EPS_SEP) -> np.ndarray:
    """Orthogonal projector I - x x^T / |x|^2 onto the complement of ``x``."""
    x = np.asarray(x, dtype=float).ravel()
    nx = np.linalg.norm(x)
    if not nx > eps:
        raise DegenerateError(f"cannot project onto the complement of a near-zero vector (|x|={nx:g})")
    u = x / nx
    return np.eye(x.size) - np.outer(u, u)


def projections(g: np.ndarray) -> np.ndarray:
    """Stack of projectors for unit rows of ``g``: shape ``(m, d, d)``."""
    d = g.shape[-1]
    return np.eye(d) - g[..., :, None] * g[..., None, :]


def edge_vectors(graph: Graph, p: np.ndarray) -> np.ndarray:
    return p[graph.heads] - p[graph.tails]


def bearing_set(f: Framework) -> BearingSet:
    e = edge_vectors(f.graph, f.p)
    lengths = np.linalg.norm(e, axis=1)
    return BearingSet(e=e, g=e / lengths[:, None], lengths=lengths)


def bearing_function(graph: Graph, p) -> np.ndarray:
    """Stacked unit bearings F_B(p) for an arbitrary (possibly invalid) configuration."""
    p = np.asarray(p, dtype=float)
    e = edge_vectors(graph, p)
    return (e / np.linalg.norm(e, axis=1)[:, None]).ravel()


def _block_rows(graph: Graph, blocks: np.ndarray, n: int) -> np.ndarray:
    """Assemble diag(blocks_k) (H (x) I_d) without forming the Kronecker product."""
    m, r, d = blocks.shape
    M = np.zeros((m * r, n * d))
    for k in range(m):
        t, h = graph.tails[k], graph.heads[k]
        M[k * r:(k + 1) * r, t * d:(t + 1) * d] = -blocks[k]
        M[k * r:(k + 1) * r, h * d:(h + 1) * d] = blocks[k]
    return M


def bearing_rigidity_matrix(f: Framework) -> np.ndarray:
    """R(p) = diag(P_{g_k} / |e_k|) H_bar, shape (dm, dn)."""
    bs = bearing_set(f)
    blocks = projections(bs.g) / bs.lengths[:, None, None]
    return _block_rows(f.graph, blocks, f.n)


def rank_nullspace(M, tol: float = RANK_TOL) -> tuple[int, np.ndarray]:
    """Numerical rank and an orthonormal null-space basis (columns) via SVD.

    Singular values above ``tol * s_max * max(rows, cols)`` count towards the rank.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        raise ValidationError("rank of an empty matrix is undefined")
    if not np.all(np.isfinite(M)):
        raise ValidationError("matrix contains non-finite entries")
    _, s, vh = np.linalg.svd(M, full_matrices=True)
    smax = s[0] if s.size else 0.0
    rank = int(np.count_nonzero(s > tol * smax * max(M.shape))) if smax > 0 else 0
    return rank, vh[rank:].T.copy()


def matrix_rank(M, tol: float = RANK_TOL) -> int:
    return rank_nullspace(M, tol)[0]


def _complete_framework(f: Framework) -> Framework:
    try:
        return Framework(complete_graph(f.n), f.p, f.eps_sep)
    except DegenerateError as exc:
        raise DegenerateError(
            f"vertices {exc.edge} coincide; the complete-graph rigidity matrix is undefined", exc.edge
        ) from None


def complete_rigidity_matrix(f: Framework) -> np.ndarray:
    """R^kappa(p): bearing rigidity matrix over the complete graph on the same points."""
    return bearing_rigidity_matrix(_complete_framework(f))


def rigidity_report(f: Framework, tol: float = RANK_TOL) -> RigidityReport:
    Rk = complete_rigidity_matrix(f)
    rank, null = rank_nullspace(bearing_rigidity_matrix(f), tol)
    rank_k = matrix_rank(Rk, tol)
    dn = f.d * f.n
    ibr = rank == dn - f.d - 1
    gbr = rank == rank_k
    return RigidityReport(
        n=f.n,
        d=f.d,
        rank_R=rank,
        nullity_R=dn - rank,
        rank_R_complete=rank_k,
        infinitesimally_bearing_rigid=ibr,
        globally_bearing_rigid=gbr,
        bearing_rigid=gbr,
        null_basis=null,
        tolerance=tol,
    )


def _other(f: Framework, p_other) -> np.ndarray:
    return as_configuration(p_other, n=f.n, d=f.d).ravel()


def bearing_equivalent(f: Framework, p_other, tol: float = EQUIV_TOL) -> bool:
    """Every edge vector of ``p_other`` is parallel to the matching edge of ``f`` (|R(p) p'| ~ 0)."""
    q = _other(f, p_other)
    return bool(np.linalg.norm(bearing_rigidity_matrix(f) @ q) <= tol * np.linalg.norm(q))


def bearing_congruent(f: Framework, p_other, tol: float = EQUIV_TOL) -> bool:
    """Same bearings between every pair of vertices, via |R^kappa(p) p'|."""
    q = _other(f, p_other)
    return bool(np.linalg.norm(complete_rigidity_matrix(f) @ q) <= tol * np.linalg.norm(q))


def trivial_motion_basis(p: np.ndarray) -> np.ndarray:
    """Orthonormal basis (columns) of span{1 (x) I_d, p - 1 (x) p_bar}."""
    n, d = p.shape
    T = np.kron(np.ones((n, 1)), np.eye(d)) / np.sqrt(n)
    r = (p - p.mean(axis=0)).ravel()
    nr = np.linalg.norm(r)
    if nr == 0:
        return T
    return np.column_stack([T, r / nr])


def shape_decomposition(p, p_other) -> tuple[float, np.ndarray, np.ndarray]:
    """Split p' = c p + 1 (x) eta + q with q orthogonal to translations and to p.

    Returns ``(c, eta, q)`` with ``q`` shaped like the configuration.
    """
    p = np.asarray(p, dtype=float)
    po = np.asarray(p_other, dtype=float).reshape(p.shape)
    r = p - p.mean(axis=0)
    ro = po - po.mean(axis=0)
    rr = float(np.sum(r * r))
    c = float(np.sum(ro * r) / rr) if rr > 0 else 0.0
    q = ro - c * r
    eta = po.mean(axis=0) - c * p.mean(axis=0)
    return c, eta, q


def lift_dimension(f: Framework, d_new: int) -> Framework:
    """Zero-pad every point to ``d_new`` coordinates."""
    if d_new <= f.d:
        raise ValidationError(f"lifted dimension {d_new} must exceed current dimension {f.d}")
    p = np.zeros((f.n, d_new))
    p[:, : f.d] = f.p
    return Framework(f.graph, p, f.eps_sep)


def centroid(p) -> np.ndarray:
    return np.asarray(p, dtype=float).mean(axis=0)


def scale(p) -> float:
    """Quadratic mean distance of the points to their centroid."""
    p = np.asarray(p, dtype=float)
    return float(np.sqrt(np.mean(np.sum((p - p.mean(axis=0)) ** 2, axis=1))))
