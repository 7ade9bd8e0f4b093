"""Bearing constraints, their feasibility, and the unique target formation."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import DegenerateError, InfeasibleError, NotRigidError, ValidationError
from .graph import Graph
from .rigidity import (
    EPS_SEP,
    RANK_TOL,
    Framework,
    _block_rows,
    as_configuration,
    bearing_set,
    projections,
    rank_nullspace,
    scale,
)

UNIT_TOL = 1e-9
SIGN_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class BearingConstraints:
    """One desired unit bearing per canonically oriented edge (row k of ``g``)."""

    graph: Graph
    g: np.ndarray

    def __post_init__(self):
        g = np.array(self.g, dtype=float)
        if g.ndim != 2 or g.shape[0] != self.graph.m:
            raise ValidationError(f"expected {self.graph.m} bearing rows, got shape {g.shape}")
        if g.shape[1] < 2:
            raise ValidationError("bearings need dimension >= 2")
        norms = np.linalg.norm(g, axis=1)
        bad = np.flatnonzero(np.abs(norms - 1.0) > UNIT_TOL)
        if bad.size:
            k = bad[0]
            raise ValidationError(
                f"bearing for edge {self.graph.edges[k]} has norm {norms[k]:.12g}, expected 1",
                location=f"/bearings/{k}/g",
            )
        g.setflags(write=False)
        object.__setattr__(self, "g", g)

    @property
    def d(self) -> int:
        return self.g.shape[1]

    def bearing(self, i: int, j: int) -> np.ndarray:
        """g*_ij for either direction of a stored edge (g*_ji = -g*_ij)."""
        k, sign = self.graph.edge_index(i, j)
        return sign * self.g[k]

    def stacked(self) -> np.ndarray:
        return self.g.ravel()

    def rotated(self, Q) -> "BearingConstraints":
        """Constraints with every bearing mapped through the rotation ``Q``."""
        return BearingConstraints(self.graph, self.g @ np.asarray(Q, dtype=float).T)

    @classmethod
    def from_pairs(
        cls, graph: Graph, pairs: Mapping[tuple[int, int], Sequence[float]], tol: float = UNIT_TOL
    ) -> "BearingConstraints":
        """Build from ``{(i, j): g_ij}``; both directions may be given if they agree."""
        rows: list[np.ndarray | None] = [None] * graph.m
        for (i, j), vec in pairs.items():
            k, sign = graph.edge_index(i, j)
            v = sign * np.asarray(vec, dtype=float)
            if rows[k] is not None and np.linalg.norm(rows[k] - v) > tol:
                raise ValidationError(f"inconsistent bearings for edge ({i}, {j}): g_ij != -g_ji")
            rows[k] = v
        missing = [graph.edges[k] for k, r in enumerate(rows) if r is None]
        if missing:
            raise ValidationError(f"no bearing given for edge {missing[0]}")
        return cls(graph, np.array(rows))

    @classmethod
    def from_configuration(cls, graph: Graph, p) -> "BearingConstraints":
        """Read the bearings off a configuration that has the desired shape."""
        return cls(graph, bearing_set(Framework(graph, p)).g)


@dataclass(frozen=True, eq=False)
class TargetSolution:
    p_star: np.ndarray
    alpha: float
    x_shift: np.ndarray
    q_basis: np.ndarray
    feasible: bool

    def to_dict(self) -> dict:
        return {
            "feasible": self.feasible,
            "alpha": self.alpha,
            "x_shift": self.x_shift.tolist(),
            "p_star": self.p_star.tolist(),
            "q_basis": self.q_basis.tolist(),
        }


def constraint_matrix(constraints: BearingConstraints) -> np.ndarray:
    """R_tilde = diag(P_{g*_k}) H_bar, shape (dm, dn)."""
    return _block_rows(constraints.graph, projections(constraints.g), constraints.graph.n)


def _translation_basis(n: int, d: int) -> np.ndarray:
    return np.kron(np.ones((n, 1)), np.eye(d)) / np.sqrt(n)


def nontrivial_null_space(constraints: BearingConstraints, tol: float = RANK_TOL) -> np.ndarray:
    """Orthonormal basis of Null(R_tilde) with the translations projected out (columns)."""
    n, d = constraints.graph.n, constraints.d
    _, null = rank_nullspace(constraint_matrix(constraints), tol)
    T = _translation_basis(n, d)
    rest = null - T @ (T.T @ null)
    if rest.size == 0:
        return rest.reshape(n * d, 0)
    u, s, _ = np.linalg.svd(rest, full_matrices=False)
    keep = s > 1e-8
    return u[:, keep]


def _sign_consistent(constraints: BearingConstraints, q: np.ndarray) -> bool:
    """Every edge of ``q`` points along its constraint with nonzero length."""
    p = q.reshape(constraints.graph.n, constraints.d)
    e = p[constraints.graph.heads] - p[constraints.graph.tails]
    lengths = np.linalg.norm(e, axis=1)
    if np.any(lengths <= EPS_SEP * max(1.0, lengths.max(initial=0.0))):
        return False
    cos = np.sum(e * constraints.g, axis=1) / lengths
    return bool(np.all(cos > 1.0 - 1e-6))


def feasibility_witness(
    constraints: BearingConstraints, draws: int = 100, seed: int = 0, tol: float = RANK_TOL
) -> tuple[bool, np.ndarray | None]:
    """Search Null(R_tilde) for a configuration whose edge bearings equal the constraints.

    Returns ``(feasible, witness)`` with the witness as an ``(n, d)`` array or ``None``.
    """
    graph = constraints.graph
    if not graph.is_connected():
        raise ValidationError("feasibility search needs a connected graph")
    basis = nontrivial_null_space(constraints, tol)
    n, d = graph.n, constraints.d
    if basis.shape[1] == 0:
        return False, None
    candidates = [basis[:, k] for k in range(basis.shape[1])]
    if basis.shape[1] > 1:
        rng = np.random.default_rng(seed)
        candidates += [basis @ rng.standard_normal(basis.shape[1]) for _ in range(draws)]
    for q in candidates:
        for sgn in (1.0, -1.0):
            if _sign_consistent(constraints, sgn * q):
                return True, (sgn * q).reshape(n, d)
    return False, None


def compute_target(constraints: BearingConstraints, p0, tol: float = RANK_TOL) -> TargetSolution:
    """Unique formation with the bearings of ``constraints`` and the centroid and scale of ``p0``."""
    graph = constraints.graph
    n, d = graph.n, constraints.d
    p0 = as_configuration(p0, n=n, d=d)
    basis = nontrivial_null_space(constraints, tol)
    if basis.shape[1] != 1:
        raise NotRigidError(
            f"constraint null space has dimension {basis.shape[1] + d}, expected {d + 1}: "
            "the constraints do not ensure infinitesimal bearing rigidity"
        )
    q = basis[:, 0]
    Q = q.reshape(n, d)
    dots = np.sum((Q[graph.heads] - Q[graph.tails]) * constraints.g, axis=1)
    idx = np.flatnonzero(np.abs(dots) > SIGN_TOL)
    if idx.size == 0:
        raise DegenerateError("null direction is orthogonal to every constraint; sign is ambiguous")
    sign = 1.0 if dots[idx[0]] > 0 else -1.0
    x = p0.mean(axis=0)
    s0 = scale(p0)
    if s0 <= EPS_SEP:
        raise DegenerateError("initial configuration has zero scale; the target would collapse to a point")
    alpha = sign * s0 * np.sqrt(n) / np.linalg.norm(q)
    p_star = x[None, :] + alpha * Q
    if not _sign_consistent(constraints, np.sign(alpha) * q):
        raise InfeasibleError("no configuration realises these bearing constraints")
    _check_target(constraints, p_star, x, s0)
    return TargetSolution(p_star=p_star, alpha=float(alpha), x_shift=x, q_basis=Q.copy(), feasible=True)


def _check_target(constraints: BearingConstraints, p_star: np.ndarray, x: np.ndarray, s0: float) -> None:
    if np.linalg.norm(p_star.mean(axis=0) - x) > 1e-9 * max(1.0, np.linalg.norm(x)):
        raise AssertionError("target centroid mismatch")
    if abs(scale(p_star) - s0) > 1e-9 * max(1.0, s0):
        raise AssertionError("target scale mismatch")
    g = bearing_set(Framework(constraints.graph, p_star)).g
    err = np.max(np.linalg.norm(g - constraints.g, axis=1))
    if err > 1e-8:
        raise InfeasibleError(f"target bearings deviate from constraints by {err:.3g}")
