"""Fixed-step RK4 simulation of both closed loops, with trajectory diagnostics."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .control_local import check_rotation, mean_rotation, project_to_so3, so3_exp_batch
from .errors import BearingFormError, CollisionError, NumericError, ValidationError
from .rigidity import EPS_SEP, RANK_TOL, as_configuration
from .target import BearingConstraints, compute_target

log = logging.getLogger(__name__)

MODES = ("global", "local")


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1e-3
    t_end: float = 10.0
    mode: str = "global"
    seed: int = 0
    gamma: float | None = None
    record_every: int = 1
    eps_sep: float = EPS_SEP
    rank_tol: float = RANK_TOL

    def __post_init__(self):
        if not self.dt > 0:
            raise ValidationError(f"dt must be positive, got {self.dt}")
        if not self.t_end >= self.dt:
            raise ValidationError(f"t_end must be >= dt, got t_end={self.t_end}, dt={self.dt}")
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.record_every < 1:
            raise ValidationError("record_every must be >= 1")
        if self.gamma is not None and self.gamma < 0:
            raise ValidationError("gamma must be >= 0")

    @property
    def steps(self) -> int:
        return int(round(self.t_end / self.dt))


@dataclass
class Event:
    kind: str
    time: float
    step: int
    pair: tuple[int, int] | None = None
    distance: float | None = None
    message: str = ""

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "time": self.time,
            "step": self.step,
            "pair": list(self.pair) if self.pair else None,
            "distance": self.distance,
            "message": self.message,
        }


@dataclass
class SimulationTrace:
    mode: str
    times: np.ndarray
    positions: np.ndarray                 # (S, n, d)
    rotations: np.ndarray | None          # (S, n, 3, 3) in local mode
    constraints: BearingConstraints
    config: SimConfig
    metrics: dict[str, np.ndarray] = field(default_factory=dict)
    events: list[Event] = field(default_factory=list)
    p_star: np.ndarray | None = None
    Q_star: np.ndarray | None = None

    @property
    def terminated(self) -> bool:
        return bool(self.events)

    def __len__(self) -> int:
        return len(self.times)


# ---------------------------------------------------------------------------
# integration


def _dexpinv(omega: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Truncated inverse differential of exp on so(3), enough for fourth order."""
    c = _cross(omega, w)
    return w - 0.5 * c + _cross(omega, c) / 12.0


def _cross(a, b):
    # np.cross carries a lot of per-call overhead for these small stacks
    out = np.empty(np.broadcast_shapes(a.shape, b.shape))
    out[..., 0] = a[..., 1] * b[..., 2] - a[..., 2] * b[..., 1]
    out[..., 1] = a[..., 2] * b[..., 0] - a[..., 0] * b[..., 2]
    out[..., 2] = a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]
    return out


class _Degenerate(Exception):
    pass


def _field_global(P, gs, tails, heads, Ht, eps):
    """Batched global-frame vector field; P has shape (B, n, d).  Also returns per-run min edge index/length."""
    e = P[:, heads] - P[:, tails]
    L = np.sqrt(np.einsum("bkd,bkd->bk", e, e))
    bad = L.min(axis=1) <= eps
    g = e / np.where(L > eps, L, 1.0)[..., None]
    u = gs[None] - g * np.einsum("bkd,kd->bk", g, gs)[..., None]
    return Ht @ u, bad


def _field_local(P, Q, gs, tails, heads, Ht, eps):
    """Batched local-frame field: (p_dot (B, n, 3), body rates (B, n, 3), bad-run mask)."""
    e = P[:, heads] - P[:, tails]
    L = np.sqrt(np.einsum("bkd,bkd->bk", e, e))
    bad = L.min(axis=1) <= eps
    g = e / np.where(L > eps, L, 1.0)[..., None]
    Qt, Qh = Q[:, tails], Q[:, heads]
    y = np.einsum("bkac,kc->bka", Qt + Qh, gs)
    u = y - g * np.einsum("bkd,bkd->bk", g, y)[..., None]
    M = np.swapaxes(Qh, -1, -2) @ Qt
    S = M - np.swapaxes(M, -1, -2)
    # agent t accumulates -S, agent h accumulates +S: exactly H^T S
    W = np.einsum("ik,bkac->biac", Ht, S)
    w = np.stack([W[..., 2, 1], W[..., 0, 2], W[..., 1, 0]], axis=-1)
    return Ht @ u, w, bad


def _exp(X):
    return so3_exp_batch(X.reshape(-1, 3)).reshape(X.shape + (3,))


def _step_global(P, gs, topo, dt, eps):
    k1, b1 = _field_global(P, gs, *topo, eps)
    k2, b2 = _field_global(P + 0.5 * dt * k1, gs, *topo, eps)
    k3, b3 = _field_global(P + 0.5 * dt * k2, gs, *topo, eps)
    k4, b4 = _field_global(P + dt * k3, gs, *topo, eps)
    return P + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4), b1 | b2 | b3 | b4


def _step_local(P, Q, gs, topo, dt, eps):
    # positions: classical RK4; rotations: RK4 on exponential coordinates,
    # Q(t) = Q0 exp(skew(Omega)) with Omega' = dexp^-1_Omega(w)
    v1, w1, b1 = _field_local(P, Q, gs, *topo, eps)
    o2 = 0.5 * dt * w1
    v2, w2, b2 = _field_local(P + 0.5 * dt * v1, Q @ _exp(o2), gs, *topo, eps)
    w2 = _dexpinv(o2, w2)
    o3 = 0.5 * dt * w2
    v3, w3, b3 = _field_local(P + 0.5 * dt * v2, Q @ _exp(o3), gs, *topo, eps)
    w3 = _dexpinv(o3, w3)
    o4 = dt * w3
    v4, w4, b4 = _field_local(P + dt * v3, Q @ _exp(o4), gs, *topo, eps)
    w4 = _dexpinv(o4, w4)
    P_next = P + (dt / 6.0) * (v1 + 2.0 * v2 + 2.0 * v3 + v4)
    omega = (dt / 6.0) * (w1 + 2.0 * w2 + 2.0 * w3 + w4)
    return P_next, project_to_so3(Q @ _exp(omega)), b1 | b2 | b3 | b4


def _pair_min(p: np.ndarray) -> tuple[float, tuple[int, int]]:
    diff = p[:, None, :] - p[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    np.fill_diagonal(dist, np.inf)
    a, b = np.unravel_index(np.argmin(dist), dist.shape)
    return float(dist[a, b]), (int(min(a, b)) + 1, int(max(a, b)) + 1)


def _shortest_edge(p, graph):
    e = p[graph.heads] - p[graph.tails]
    L = np.linalg.norm(e, axis=1)
    k = int(np.argmin(L))
    return graph.edges[k], float(L[k])


def integrate(p0, constraints: BearingConstraints, cfg: SimConfig, Q0=None) -> SimulationTrace:
    """Integrate the closed loop from ``p0`` (and ``Q0`` in local mode) up to ``cfg.t_end``.

    A collision truncates the trace and records an event; a non-finite state raises
    :class:`NumericError`.
    """
    return integrate_batch([p0], constraints, cfg, None if Q0 is None else [Q0])[0]


def integrate_batch(p0s, constraints: BearingConstraints, cfg: SimConfig, Q0s=None) -> list[SimulationTrace]:
    """Integrate independent runs that share constraints and config, stepping them together.

    Each run stops on its own collision; the others carry on.
    """
    n, d = constraints.graph.n, constraints.d
    graph = constraints.graph
    P = np.array([as_configuration(p, n=n, d=d) for p in p0s])
    B = P.shape[0]
    if B == 0:
        raise ValidationError("no initial configurations given")
    local = cfg.mode == "local"
    if local:
        if d != 3:
            raise ValidationError("local mode requires d = 3")
        if Q0s is None or len(Q0s) != B:
            raise ValidationError("local mode requires initial orientations for every run")
        Q = np.array([[check_rotation(Qi) for Qi in np.asarray(Q0, dtype=float)] for Q0 in Q0s])
        if Q.shape != (B, n, 3, 3):
            raise ValidationError(f"expected {n} orientations per run, got shape {Q.shape[1:]}")
    else:
        Q = None
    topo = (graph.tails, graph.heads, graph.incidence.T.astype(float))
    gs = constraints.g
    eps = cfg.eps_sep
    steps = cfg.steps

    active = np.ones(B, dtype=bool)
    events: list[list[Event]] = [[] for _ in range(B)]
    snaps: list[tuple[int, np.ndarray, np.ndarray | None, np.ndarray]] = []
    iu = np.triu_indices(n, 1)

    def record(k):
        snaps.append((k, P.copy(), Q.copy() if local else None, active.copy()))
        if cfg.gamma is None:
            return
        diff = P[:, iu[0]] - P[:, iu[1]]
        dist = np.sqrt(np.einsum("bpd,bpd->bp", diff, diff))
        for b in np.flatnonzero(active & (dist.min(axis=1) < cfg.gamma)):
            q = int(np.argmin(dist[b]))
            pair = (int(iu[0][q]) + 1, int(iu[1][q]) + 1)
            events[b].append(Event("collision", k * cfg.dt, k, pair, float(dist[b, q]),
                                   f"agents {pair} closer than gamma={cfg.gamma}"))
            active[b] = False

    record(0)
    k = 0
    while k < steps and active.any():
        if local:
            P_new, Q_new, bad = _step_local(P, Q, gs, topo, cfg.dt, eps)
        else:
            P_new, bad = _step_global(P, gs, topo, cfg.dt, eps)
        bad &= active
        if bad.any():
            if snaps[-1][0] != k:
                record_mask = bad.copy()
                snaps.append((k, P.copy(), Q.copy() if local else None, record_mask))
            for b in np.flatnonzero(bad):
                # a stage hit a coincidence: keep the last good state
                pair, dist = _shortest_edge(P[b], graph)
                events[b].append(Event("collision", k * cfg.dt, k, pair, dist,
                                       "neighbouring agents coincide during the step"))
                log.warning("run %d stopped at t=%.6g: agents %s coincide", b, k * cfg.dt, pair)
            active &= ~bad
        if not np.all(np.isfinite(P_new[active])) or (local and not np.all(np.isfinite(Q_new[active]))):
            raise NumericError(f"non-finite state at step {k + 1}", step=k + 1)
        P = np.where(active[:, None, None], P_new, P)
        if local:
            Q = np.where(active[:, None, None, None], Q_new, Q)
        k += 1
        if k % cfg.record_every == 0 or k == steps:
            record(k)

    ks = np.array([sn[0] for sn in snaps])
    mask = np.array([sn[3] for sn in snaps])             # (S, B)
    allP = np.array([sn[1] for sn in snaps])             # (S, B, n, d)
    allQ = np.array([sn[2] for sn in snaps]) if local else None
    traces = []
    for b in range(B):
        sel = mask[:, b]
        tr = SimulationTrace(
            mode=cfg.mode,
            times=ks[sel] * cfg.dt,
            positions=allP[sel, b],
            rotations=allQ[sel, b] if local else None,
            constraints=constraints,
            config=cfg,
            events=events[b],
        )
        attach_metrics(tr)
        traces.append(tr)
    return traces


# ---------------------------------------------------------------------------
# metrics


def _centroid_scale(P: np.ndarray):
    c = P.mean(axis=1)
    r = P - c[:, None, :]
    s = np.sqrt(np.mean(np.sum(r * r, axis=-1), axis=1))
    return c, s, r


def _pair_distances(P: np.ndarray) -> np.ndarray:
    diff = P[:, :, None, :] - P[:, None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def _sync_error_series(R: np.ndarray, chunk: int = 2048) -> np.ndarray:
    # |Q_i^T Q_j - I|_2 = |Q_j - Q_i|_F / sqrt(2) for rotations
    out = np.empty(R.shape[0])
    for a in range(0, R.shape[0], chunk):
        blk = R[a:a + chunk]
        D = blk[:, :, None] - blk[:, None, :]
        out[a:a + chunk] = np.sqrt(np.max(np.sum(D * D, axis=(-2, -1)), axis=(1, 2)) / 2.0)
    return out


def attach_metrics(trace: SimulationTrace) -> None:
    """Fill ``trace.metrics`` (one value per sample) and the reference target."""
    P = trace.positions
    cons = trace.constraints
    graph = cons.graph
    c, s, r = _centroid_scale(P)
    E = P[:, graph.heads] - P[:, graph.tails]
    L = np.linalg.norm(E, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        G = E / L[..., None]
    D = _pair_distances(P)
    iu = np.triu_indices(graph.n, 1)
    m = {
        "centroid_drift": np.linalg.norm(c - c[0], axis=1),
        "scale_drift": np.abs(s - s[0]),
        "min_pair_distance": D[:, iu[0], iu[1]].min(axis=1),
        "max_radius": np.linalg.norm(r, axis=-1).max(axis=1),
        "max_pair_distance": D[:, iu[0], iu[1]].max(axis=1),
    }
    ref = cons
    if trace.mode == "local":
        R = trace.rotations
        trace.Q_star = mean_rotation(R[-1])
        ref = cons.rotated(trace.Q_star)
        m["sync_error"] = _sync_error_series(R)
        Dq = 2.0 * trace.Q_star[None, None] - R[:, graph.tails] - R[:, graph.heads]
        y = np.einsum("skab,kb->ska", Dq, cons.g)
        u = y - G * np.sum(G * y, axis=-1, keepdims=True)
        h = -np.einsum("ki,skd->sid", graph.incidence, u)
        m["h_norm"] = np.sqrt(np.sum(h * h, axis=(1, 2)))
        gb = np.einsum("skba,skb->ska", R[:, graph.tails], G)
        m["local_bearing_error"] = np.linalg.norm(gb - cons.g[None], axis=-1).max(axis=1)
    m["bearing_error"] = np.sum((G - ref.g[None]) ** 2, axis=(1, 2))
    try:
        trace.p_star = compute_target(ref, P[0], tol=trace.config.rank_tol).p_star
    except BearingFormError as exc:
        log.info("no target formation for diagnostics: %s", exc)
        trace.p_star = None
    if trace.p_star is not None:
        delta = P - trace.p_star[None]
        r_star = trace.p_star - trace.p_star.mean(axis=0)
        dn = np.sqrt(np.sum(delta * delta, axis=(1, 2)))
        m["delta_norm"] = dn
        m["V"] = 0.5 * dn**2
        m["sphere_error"] = np.abs(
            np.sqrt(np.sum((delta + r_star[None]) ** 2, axis=(1, 2))) - np.linalg.norm(r_star)
        )
        dn_safe = np.where(dn > 0, dn, 1.0)
        cos = -np.einsum("snd,nd->s", delta, r_star) / (dn_safe * np.linalg.norm(r_star))
        # theta is pi/2 by convention when delta vanishes
        m["theta"] = np.where(dn > 0, np.arccos(np.clip(cos, -1.0, 1.0)), np.pi / 2)
    trace.metrics = m


DEFAULT_TOLERANCES = {
    "centroid_drift": 1e-6,
    "scale_drift": 1e-6,
    "sphere_error": 1e-6,
    "V_increase": 1e-9,
    "bound_slack": 1e-9,
    "final_bearing_error": 1e-8,
    "final_sync_error": 1e-6,
    "final_h_norm": 1e-6,
    "final_local_bearing_error": 1e-4,
}


def compute_metrics(trace: SimulationTrace, tolerances: dict | None = None) -> dict:
    """Summarise a trace: final/max values, V monotonicity, and pass/fail checks."""
    if len(trace) == 0:
        raise ValidationError("empty trace")
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(tolerances or {})
    m = trace.metrics
    n = trace.constraints.graph.n
    out: dict = {"mode": trace.mode, "samples": len(trace), "t_final": float(trace.times[-1])}
    for key, arr in m.items():
        out[f"final_{key}"] = float(arr[-1])
        out[f"max_{key}"] = float(np.max(arr))
    if "delta_norm" in m:
        out["delta_ratio"] = float(m["delta_norm"][-1] / m["delta_norm"][0]) if m["delta_norm"][0] > 0 else 0.0
        out["theta0"] = float(m["theta"][0])
    inv: dict[str, bool] = {
        "centroid_invariant": out["max_centroid_drift"] <= tol["centroid_drift"],
        "scale_invariant": out["max_scale_drift"] <= tol["scale_drift"],
    }
    s0 = float(np.sqrt(np.mean(np.sum((trace.positions[0] - trace.positions[0].mean(axis=0)) ** 2, axis=1))))
    slack = tol["bound_slack"] + tol["scale_drift"]
    rad = m["max_radius"]
    inv["radius_bounds"] = bool(np.all(rad >= s0 - slack) and np.all(rad <= s0 * np.sqrt(n - 1) + slack))
    inv["pair_distance_bound"] = bool(np.all(m["max_pair_distance"] <= 2 * (s0 * np.sqrt(n - 1) + slack)))
    conv: dict[str, bool] = {}
    if "V" in m:
        inv["on_sphere"] = out["max_sphere_error"] <= tol["sphere_error"]
        conv["bearings_converged"] = out["final_bearing_error"] <= tol["final_bearing_error"]
    if trace.mode == "global" and "V" in m:
        # V is a Lyapunov function only for the global-frame law
        inc = float(np.max(np.diff(m["V"]))) if len(m["V"]) > 1 else 0.0
        out["max_V_increase"] = inc
        inv["V_nonincreasing"] = inc <= tol["V_increase"]
    if trace.mode == "local":
        conv["synchronized"] = out["final_sync_error"] <= tol["final_sync_error"]
        conv["h_vanished"] = out["final_h_norm"] <= tol["final_h_norm"]
        conv["local_bearings_converged"] = out["final_local_bearing_error"] <= tol["final_local_bearing_error"]
    out["invariants"] = inv
    out["convergence"] = conv
    out["invariants_hold"] = all(inv.values())
    out["passed"] = all(inv.values()) and all(conv.values()) and not trace.events
    out["events"] = [e.to_dict() for e in trace.events]
    return out


def collision_events(trace: SimulationTrace, gamma: float) -> list[tuple[float, tuple[int, int], float]]:
    """Every sampled pair distance below ``gamma`` as ``(time, (i, j), distance)``."""
    if gamma < 0:
        raise ValidationError("gamma must be >= 0")
    D = _pair_distances(trace.positions)
    n = D.shape[1]
    found = []
    for s_idx, a, b in zip(*np.nonzero(D < gamma)):
        if a < b:
            found.append((float(trace.times[s_idx]), (int(a) + 1, int(b) + 1), float(D[s_idx, a, b])))
    return found
    # sampling limitation: distances between recorded samples are not checked


# ---------------------------------------------------------------------------
# initial conditions


def random_positions(rng: np.random.Generator, n: int, d: int, box: float = 1.0, min_sep: float = 1e-2) -> np.ndarray:
    """Uniform points in [-box, box]^d, redrawn until all pairs are ``min_sep`` apart."""
    for _ in range(1000):
        p = rng.uniform(-box, box, size=(n, d))
        if _pair_min(p)[0] > min_sep:
            return p
    raise ValidationError("could not draw well-separated random positions")


def random_rotations(rng: np.random.Generator, n: int, max_angle: float, center=None) -> np.ndarray:
    """Rotations center * exp(angle * axis) with uniform axis and angle in [0, max_angle]."""
    axes = rng.standard_normal((n, 3))
    axes /= np.linalg.norm(axes, axis=1, keepdims=True)
    angles = rng.uniform(0.0, max_angle, size=n)
    R = so3_exp_batch(axes * angles[:, None])
    C = np.eye(3) if center is None else np.asarray(center, dtype=float)
    return C[None] @ R


def perturbed_start(p_star, radius: float, rng: np.random.Generator) -> np.ndarray:
    """A configuration with the centroid and scale of ``p_star`` and |p - p_star| < radius."""
    p_star = np.asarray(p_star, dtype=float)
    n, d = p_star.shape
    cbar = p_star.mean(axis=0)
    r_star = (p_star - cbar).ravel()
    u = rng.standard_normal(n * d).reshape(n, d)
    u -= u.mean(axis=0)
    u = u.ravel()
    u -= (u @ r_star) / (r_star @ r_star) * r_star
    u *= radius / np.linalg.norm(u)
    x = r_star + u
    x *= np.linalg.norm(r_star) / np.linalg.norm(x)
    return cbar + x.reshape(n, d)


def start_off_reflection(p_star, rng, box: float = 1.0, exclusion: float = 1e-3, tries: int = 1000) -> np.ndarray:
    """Random start rescaled onto the target's sphere, at least ``exclusion*|r*|`` from the reflection."""
    p_star = np.asarray(p_star, dtype=float)
    n, d = p_star.shape
    cbar = p_star.mean(axis=0)
    r_star = p_star - cbar
    rn = np.linalg.norm(r_star)
    for _ in range(tries):
        x = random_positions(rng, n, d, box)
        x -= x.mean(axis=0)
        x *= rn / np.linalg.norm(x)
        if np.linalg.norm(x + r_star) > exclusion * rn:
            return cbar + x
    raise ValidationError("could not draw a start away from the reflected equilibrium")


def assert_no_collision(trace: SimulationTrace) -> None:
    if trace.events:
        ev = trace.events[0]
        raise CollisionError(ev.message, ev.pair, ev.time, ev.step)
