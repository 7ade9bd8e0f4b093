"""Bearing-only formation control with a shared global frame.

Each agent moves with v_i = -sum_j P(g_ij) g*_ij using only measured bearings.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import CollisionError, ValidationError
from .rigidity import EPS_SEP, projections, scale
from .target import BearingConstraints, constraint_matrix


class Equilibrium(str, Enum):
    DESIRED = "desired"
    REFLECTED = "reflected"
    NONE = "none"


def _bearings(constraints: BearingConstraints, p: np.ndarray):
    graph = constraints.graph
    e = p[graph.heads] - p[graph.tails]
    lengths = np.sqrt(np.einsum("kd,kd->k", e, e))
    k = int(np.argmin(lengths))
    if not lengths[k] > EPS_SEP:
        raise CollisionError(f"agents {graph.edges[k]} collided (distance {lengths[k]:.3g})", graph.edges[k])
    return e / lengths[:, None], lengths


def control_velocity(p, constraints: BearingConstraints) -> np.ndarray:
    """Velocity of every agent, shape ``(n, d)``.  Equals H_bar^T diag(P_{g_k}) g*."""
    p = np.asarray(p, dtype=float)
    g, _ = _bearings(constraints, p)
    gs = constraints.g
    u = gs - g * np.einsum("kd,kd->k", g, gs)[:, None]  # P_{g_k} g*_k
    return constraints.graph.incidence.T @ u


def jacobian(p, constraints: BearingConstraints) -> np.ndarray:
    """Jacobian of the closed-loop vector field with respect to the stacked positions.

    Off-diagonal block (i, j) for neighbours is G_ij P_{g_ij} / |e_ij| with
    G_ij = (g_ij^T g*_ij) I + g_ij g*_ij^T; diagonal blocks are minus the row sums.
    """
    p = np.asarray(p, dtype=float)
    graph = constraints.graph
    n, d = p.shape
    g, lengths = _bearings(constraints, p)
    gs = constraints.g
    I = np.eye(d)
    # G and P are invariant under reversing the edge, so one block serves both (i,j) and (j,i)
    G = np.einsum("kd,kd->k", g, gs)[:, None, None] * I + g[:, :, None] * gs[:, None, :]
    blocks = G @ projections(g) / lengths[:, None, None]
    A = np.zeros((n * d, n * d))
    for k, (t, h) in enumerate(zip(graph.tails, graph.heads)):
        st, sh = slice(t * d, (t + 1) * d), slice(h * d, (h + 1) * d)
        A[st, sh] += blocks[k]
        A[sh, st] += blocks[k]
        A[st, st] -= blocks[k]
        A[sh, sh] -= blocks[k]
    return A


def reflected_configuration(p_star) -> np.ndarray:
    """Point reflection of ``p_star`` through its centroid."""
    p_star = np.asarray(p_star, dtype=float)
    return 2.0 * p_star.mean(axis=0) - p_star


def classify_equilibrium(p, p_star, tol: float = 1e-6) -> Equilibrium:
    p = np.asarray(p, dtype=float)
    p_star = np.asarray(p_star, dtype=float)
    r_norm = np.linalg.norm(p_star - p_star.mean(axis=0))
    if np.linalg.norm(p - p_star) <= tol * r_norm:
        return Equilibrium.DESIRED
    if np.linalg.norm(p - reflected_configuration(p_star)) <= tol * r_norm:
        return Equilibrium.REFLECTED
    return Equilibrium.NONE


def min_pair_distance(p) -> float:
    p = np.asarray(p, dtype=float)
    diff = p[:, None, :] - p[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    iu = np.triu_indices(p.shape[0], 1)
    return float(dist[iu].min())


def collision_bound(p_star, gamma: float) -> float:
    """Largest initial error norm that keeps every pair farther apart than ``gamma``."""
    p_star = np.asarray(p_star, dtype=float)
    dmin = min_pair_distance(p_star)
    if not 0.0 <= gamma < dmin:
        raise ValidationError(f"gamma must satisfy 0 <= gamma < {dmin:.6g} (min target distance), got {gamma}")
    return (dmin - gamma) / np.sqrt(p_star.shape[0])


@dataclass(frozen=True)
class RigidityDegree:
    value: float
    eigenvalues: np.ndarray
    ibr: bool


def degree_of_rigidity(constraints: BearingConstraints, tol: float = 1e-10) -> RigidityDegree:
    """Eigenvalue d+2 (ascending) of R_tilde^T R_tilde.

    ``ibr`` is False when that eigenvalue is numerically zero.
    """
    Rt = constraint_matrix(constraints)
    lam = np.linalg.eigvalsh(Rt.T @ Rt)
    d = constraints.d
    value = float(lam[d + 1])
    return RigidityDegree(value=value, eigenvalues=lam, ibr=value > tol * max(1.0, lam[-1]))


def theta(delta, r_star) -> float:
    """Angle between delta and -r*; zero only at the reflected equilibrium."""
    delta = np.ravel(delta)
    r_star = np.ravel(r_star)
    nd = np.linalg.norm(delta)
    if nd == 0.0:
        return float(np.pi / 2)
    c = -float(delta @ r_star) / (nd * np.linalg.norm(r_star))
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def lyapunov_constants(p_star, constraints: BearingConstraints, theta0: float) -> tuple[float, float]:
    """Diagnostic (alpha, K) of the exponential-rate bound; not used for control."""
    p_star = np.asarray(p_star, dtype=float)
    n = p_star.shape[0]
    e = p_star[constraints.graph.heads] - p_star[constraints.graph.tails]
    s = scale(p_star)
    alpha = float(np.linalg.norm(e, axis=1).min() / (4 * (n - 1) * s * s))
    lam = degree_of_rigidity(constraints).value
    return alpha, 2 * alpha * lam * np.sin(theta0) ** 2
