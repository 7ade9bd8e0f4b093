"""Distance rigidity and its correspondence with bearing rigidity in the plane."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .graph import Graph
from .rigidity import RANK_TOL, Framework, _block_rows, bearing_set, matrix_rank

# counter-clockwise quarter turn
Q90 = np.array([[0.0, -1.0], [1.0, 0.0]])


@dataclass(frozen=True)
class DistanceRigidityReport:
    rank_RD: int
    required_rank: int
    infinitesimally_distance_rigid: bool

    def to_dict(self) -> dict:
        return {
            "rank_RD": self.rank_RD,
            "required_rank": self.required_rank,
            "infinitesimally_distance_rigid": self.infinitesimally_distance_rigid,
        }


def distance_function(graph: Graph, p) -> np.ndarray:
    """F_D(p): half squared edge lengths, one entry per edge."""
    p = np.asarray(p, dtype=float)
    e = p[graph.heads] - p[graph.tails]
    return 0.5 * np.sum(e * e, axis=1)


def distance_rigidity_matrix(f: Framework) -> np.ndarray:
    """R_D(p) = diag(e_k^T) H_bar, shape (m, dn)."""
    e = bearing_set(f).e
    return _block_rows(f.graph, e[:, None, :], f.n)


def required_distance_rank(n: int, d: int) -> int:
    return d * n - d * (d + 1) // 2 if n >= d else n * (n - 1) // 2


def distance_rigidity_report(f: Framework, tol: float = RANK_TOL) -> DistanceRigidityReport:
    rank = matrix_rank(distance_rigidity_matrix(f), tol)
    req = required_distance_rank(f.n, f.d)
    return DistanceRigidityReport(rank, req, rank == req)


def perp_motion(dp, inverse: bool = False) -> np.ndarray:
    """Rotate every planar block of ``dp`` by +pi/2 (or -pi/2 with ``inverse``)."""
    arr = np.asarray(dp, dtype=float)
    if arr.ndim == 2:
        if arr.shape[1] != 2:
            raise ValidationError(f"perpendicular motion is defined for d=2 only, got d={arr.shape[1]}")
        blocks = arr
    else:
        if arr.size % 2:
            raise ValidationError("perpendicular motion needs an even-length stacked vector (d=2)")
        blocks = arr.reshape(-1, 2)
    Q = Q90.T if inverse else Q90
    return (blocks @ Q.T).reshape(arr.shape)


def bearing_from_distance_matrix(f: Framework) -> np.ndarray:
    """Rebuild R(p) from R_D(p) as diag(g_k^perp / |e_k|^2) R_D (I_n (x) Q90^T)."""
    if f.d != 2:
        raise ValidationError("the bearing/distance matrix identity holds in the plane only")
    bs = bearing_set(f)
    gperp = bs.g @ Q90.T
    m = f.graph.m
    D = np.zeros((2 * m, m))
    for k in range(m):
        D[2 * k:2 * k + 2, k] = gperp[k] / bs.lengths[k] ** 2
    return D @ distance_rigidity_matrix(f) @ np.kron(np.eye(f.n), Q90.T)
