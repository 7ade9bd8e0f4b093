"""Bearing-only formation control in R^3 without a shared frame.

Every agent acts in its own body frame using local bearings g^b_ij = Q_i^T g_ij
and relative orientations Q_i^T Q_j, while the orientations synchronise.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ValidationError
from .rigidity import as_configuration, projections
from .target import BearingConstraints
from .control_global import _bearings


def skew(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.array([[0.0, -x[2], x[1]], [x[2], 0.0, -x[0]], [-x[1], x[0], 0.0]])


def unskew(M, tol: float = 1e-9) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.shape != (3, 3):
        raise ValidationError(f"expected a 3x3 matrix, got shape {M.shape}")
    if np.linalg.norm(M + M.T) > tol:
        raise ValidationError("matrix is not skew-symmetric")
    return np.array([M[2, 1], M[0, 2], M[1, 0]])


def so3_exp(x) -> np.ndarray:
    """Rodrigues formula exp(skew(x))."""
    x = np.asarray(x, dtype=float)
    th = np.linalg.norm(x)
    K = skew(x)
    if th < 1e-8:
        # second-order Taylor terms; remainder below machine precision here
        return np.eye(3) + K + 0.5 * K @ K
    return np.eye(3) + (np.sin(th) / th) * K + ((1.0 - np.cos(th)) / th**2) * (K @ K)


def so3_exp_batch(X: np.ndarray) -> np.ndarray:
    """Vectorised Rodrigues formula for rows of ``X`` (shape ``(n, 3)``)."""
    th = np.linalg.norm(X, axis=1)
    K = np.zeros((X.shape[0], 3, 3))
    K[:, 0, 1], K[:, 0, 2] = -X[:, 2], X[:, 1]
    K[:, 1, 0], K[:, 1, 2] = X[:, 2], -X[:, 0]
    K[:, 2, 0], K[:, 2, 1] = -X[:, 1], X[:, 0]
    small = th < 1e-8
    ths = np.where(small, 1.0, th)
    a = np.where(small, 1.0, np.sin(ths) / ths)
    b = np.where(small, 0.5, (1.0 - np.cos(ths)) / ths**2)
    return np.eye(3) + a[:, None, None] * K + b[:, None, None] * (K @ K)


def project_to_so3(M) -> np.ndarray:
    """Closest rotation (polar factor with det +1); works on stacks ``(..., 3, 3)``."""
    U, _, Vt = np.linalg.svd(np.asarray(M, dtype=float))
    D = np.ones(U.shape[:-1])
    D[..., -1] = np.sign(np.linalg.det(U @ Vt))
    return (U * D[..., None, :]) @ Vt


def rotation_angle(Q) -> float:
    c = (np.trace(np.asarray(Q, dtype=float)) - 1.0) / 2.0
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def rot_z(theta: float) -> np.ndarray:
    return so3_exp([0.0, 0.0, theta])


def check_rotation(Q, tol: float = 1e-9) -> np.ndarray:
    Q = np.asarray(Q, dtype=float)
    if Q.shape != (3, 3):
        raise ValidationError(f"rotation must be 3x3, got shape {Q.shape}")
    if np.linalg.norm(Q.T @ Q - np.eye(3)) > tol or abs(np.linalg.det(Q) - 1.0) > tol:
        raise ValidationError("matrix is not a rotation (Q^T Q != I or det != 1)")
    return Q


@dataclass(frozen=True, eq=False)
class LocalFormationState:
    p: np.ndarray         # (n, 3) positions in the (unknown to agents) global frame
    Q: np.ndarray         # (n, 3, 3) body-to-global rotations
    constraints: BearingConstraints

    def __post_init__(self):
        n = self.constraints.graph.n
        if self.constraints.d != 3:
            raise ValidationError("local-frame control is defined in R^3 only")
        p = as_configuration(self.p, n=n, d=3)
        Q = np.asarray(self.Q, dtype=float)
        if Q.shape != (n, 3, 3):
            raise ValidationError(f"expected {n} orientations of shape 3x3, got {Q.shape}")
        for Qi in Q:
            check_rotation(Qi)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "Q", Q)

    @property
    def graph(self):
        return self.constraints.graph


def _relative_terms(Q: np.ndarray, graph) -> np.ndarray:
    """Per-agent sum over neighbours of (Q_j^T Q_i - Q_i^T Q_j), shape (n, 3, 3)."""
    t, h = graph.tails, graph.heads
    M = np.swapaxes(Q[h], 1, 2) @ Q[t]          # Q_h^T Q_t
    S = M - np.swapaxes(M, 1, 2)                # term for agent t; agent h gets -S
    out = np.zeros_like(Q)
    np.add.at(out, t, S)
    np.add.at(out, h, -S)
    return out


def body_control(i: int, state: LocalFormationState) -> tuple[np.ndarray, np.ndarray]:
    """Body-frame inputs (v_i^b, w_i^b) of agent ``i`` (1-based) from local measurements only."""
    graph = state.graph
    Qi = state.Q[i - 1]
    v = np.zeros(3)
    W = np.zeros((3, 3))
    for j in sorted(graph.neighbors(i)):
        Qj = state.Q[j - 1]
        e = state.p[j - 1] - state.p[i - 1]
        gb = Qi.T @ (e / np.linalg.norm(e))     # measured local bearing
        Rij = Qi.T @ Qj                         # measured relative orientation
        Pb = np.eye(3) - np.outer(gb, gb)
        v -= Pb @ (np.eye(3) + Rij) @ state.constraints.bearing(i, j)
        W -= Rij.T - Rij
    return v, unskew(W)


def closed_loop(p: np.ndarray, Q: np.ndarray, constraints: BearingConstraints):
    """Global-frame derivatives (p_dot, w_body) for the whole team.

    ``w_body[i]`` is the body angular velocity so that Q_i' = Q_i skew(w_body[i]).
    """
    graph = constraints.graph
    g, _ = _bearings(constraints, p)
    Qs = Q[graph.tails] + Q[graph.heads]
    y = np.einsum("kab,kb->ka", Qs, constraints.g)       # (Q_i + Q_j) g*_k
    u = y - g * np.einsum("kd,kd->k", g, y)[:, None]      # P_{g_k} (Q_i + Q_j) g*_k
    p_dot = graph.incidence.T @ u
    W = -_relative_terms(Q, graph)
    w = np.stack([W[:, 2, 1], W[:, 0, 2], W[:, 1, 0]], axis=1)
    return p_dot, w


def closed_loop_derivative(state: LocalFormationState) -> tuple[np.ndarray, np.ndarray]:
    """(p_dot, Q_dot) stacks in the global frame."""
    p_dot, w = closed_loop(state.p, state.Q, state.constraints)
    Q_dot = np.stack([Qi @ skew(wi) for Qi, wi in zip(state.Q, w)])
    return p_dot, Q_dot


class SyncAssumption(str, Enum):
    SATISFIED = "satisfied"
    NOT_SATISFIED = "not_satisfied"
    INCONCLUSIVE = "inconclusive"


def mean_rotation(Q) -> np.ndarray:
    """Chordal mean: arithmetic mean projected back onto SO(3)."""
    return project_to_so3(np.mean(np.asarray(Q, dtype=float), axis=0))


def check_sync_assumption(Q, margin: float = 1e-9) -> SyncAssumption:
    """Test for a rotation Q0 with every Q0^T Q_i at angle below pi/2."""
    Q = np.asarray(Q, dtype=float)
    for a in range(len(Q)):
        for b in range(a + 1, len(Q)):
            if rotation_angle(Q[a].T @ Q[b]) >= np.pi - margin:
                return SyncAssumption.NOT_SATISFIED
    M = np.mean(Q, axis=0)
    if np.linalg.svd(M, compute_uv=False)[-1] < 1e-12:
        return SyncAssumption.INCONCLUSIVE
    Q0 = project_to_so3(M)
    if all(rotation_angle(Q0.T @ Qi) < np.pi / 2 - margin for Qi in Q):
        return SyncAssumption.SATISFIED
    return SyncAssumption.INCONCLUSIVE


def sync_error(Q) -> float:
    """max over pairs of the spectral norm |Q_i^T Q_j - I|."""
    Q = np.asarray(Q, dtype=float)
    R = np.einsum("iba,jbc->ijac", Q, Q) - np.eye(3)
    return float(np.max(np.linalg.norm(R, ord=2, axis=(-2, -1))))


def h_input(p, Q, constraints: BearingConstraints, Q_star) -> np.ndarray:
    """Per-agent h_i = sum_j P_{g_ij} (2Q* - Q_i - Q_j) g*_ij, shape (n, 3)."""
    graph = constraints.graph
    p = np.asarray(p, dtype=float)
    g, _ = _bearings(constraints, p)
    D = 2.0 * np.asarray(Q_star)[None] - Q[graph.tails] - Q[graph.heads]
    y = np.einsum("kab,kb->ka", D, constraints.g)
    u = y - g * np.einsum("kd,kd->k", g, y)[:, None]
    # orientation of (P y)_k flips with the edge, so the same incidence assembly applies
    return -(graph.incidence.T @ u)


def input_norm_h(state: LocalFormationState, Q_star) -> float:
    return float(np.linalg.norm(h_input(state.p, state.Q, state.constraints, check_rotation(Q_star))))


def local_bearing_error(p, Q, constraints: BearingConstraints) -> np.ndarray:
    """|g^b_k - g*_k| per edge, measured in the tail agent's body frame."""
    g, _ = _bearings(constraints, np.asarray(p, dtype=float))
    Qt = np.asarray(Q)[constraints.graph.tails]
    gb = np.einsum("kba,kb->ka", Qt, g)
    return np.linalg.norm(gb - constraints.g, axis=1)
