"""Acceptance criteria 1-11, each at its stated tolerance.

Every criterion prints one ``CRITERION <k> PASS|FAIL`` line; the lines are repeated in
the pytest terminal summary.  Run directly with ``python3 tests/test_acceptance.py``.
"""
from __future__ import annotations

import json
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

from bearingform import fixtures as fx
from bearingform.cli import main as cli_main
from bearingform.control_global import (
    collision_bound,
    control_velocity,
    jacobian,
    reflected_configuration,
)
from bearingform.control_local import SyncAssumption, check_sync_assumption, so3_exp
from bearingform.distance import (
    bearing_from_distance_matrix,
    distance_rigidity_matrix,
    distance_rigidity_report,
    perp_motion,
)
from bearingform.formats import metrics_path
from bearingform.rigidity import (
    bearing_rigidity_matrix,
    lift_dimension,
    rank_nullspace,
    rigidity_report,
)
from bearingform.sim import (
    SimConfig,
    collision_events,
    compute_metrics,
    integrate,
    integrate_batch,
    perturbed_start,
    random_positions,
    random_rotations,
)
from bearingform.target import compute_target

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures"
RESULTS: list[str] = []


def record(k: int, ok: bool, detail: str) -> bool:
    line = f"CRITERION {k:2d} {'PASS' if ok else 'FAIL'}: {detail}"
    RESULTS.append(line)
    print(line)
    return ok


# ---------------------------------------------------------------------------


def criterion_1():
    rows = []
    ok = True
    for name, want_rd, want_r in (("cube", 13, 20), ("hexagonal_pyramid", 12, 17)):
        f = fx.framework(name)
        rep = rigidity_report(f)
        drep = distance_rigidity_report(f)
        good = (drep.rank_RD == want_rd and rep.rank_R == want_r == 3 * f.n - 4
                and rep.infinitesimally_bearing_rigid)
        ok &= good
        rows.append(f"{name} rank(R_D)={drep.rank_RD} rank(R)={rep.rank_R} IBR={rep.infinitesimally_bearing_rigid}")
    return ok, "; ".join(rows)


def criterion_2():
    mismatches = 0
    ibr_count = 0
    for seed in range(100):
        rng = np.random.default_rng([2, seed])
        n = int(rng.integers(3, 9))
        f = fx.random_connected_framework(rng, n, 2, extra=rng.uniform(0.1, 0.9))
        rep, drep = rigidity_report(f), distance_rigidity_report(f)
        ibr_count += rep.infinitesimally_bearing_rigid
        if rep.rank_R != drep.rank_RD or rep.infinitesimally_bearing_rigid != drep.infinitesimally_distance_rigid:
            mismatches += 1
    return mismatches == 0, f"100 planar frameworks ({ibr_count} IBR), {mismatches} mismatches"


def criterion_3():
    bad = 0
    ibr_seen = 0
    for d, d_new in ((2, 3), (3, 4)):
        for seed in range(50):
            rng = np.random.default_rng([3, d, seed])
            n = int(rng.integers(2, 8))
            f = fx.random_connected_framework(rng, n, d, extra=rng.uniform(0.1, 0.9))
            rep = rigidity_report(f)
            lifted = rigidity_report(lift_dimension(f, d_new))
            ibr_seen += rep.infinitesimally_bearing_rigid
            if (lifted.rank_R != rep.rank_R + (d_new - d) * (n - 1)
                    or lifted.infinitesimally_bearing_rigid != rep.infinitesimally_bearing_rigid):
                bad += 1
    return bad == 0, f"2x50 lifts (R2->R3, R3->R4; {ibr_seen} IBR), {bad} rank/flag violations"


def criterion_4():
    dt, t_end = 1e-3, 20.0
    rows, ok = [], True
    cases = (("octagon", "global"), ("cube", "global"), ("square_3d", "local"), ("cube", "local"))
    for k, (name, mode) in enumerate(cases):
        c = fx.constraints(name)
        rng = np.random.default_rng([4, k])
        p0 = random_positions(rng, c.graph.n, c.d)
        Q0 = random_rotations(rng, c.graph.n, np.deg2rad(30), so3_exp(rng.normal(size=3))) if mode == "local" else None
        tr = integrate(p0, c, SimConfig(dt=dt, t_end=t_end, mode=mode), Q0=Q0)
        s = compute_metrics(tr)
        good = (not tr.events and tr.times[-1] == pytest.approx(t_end)
                and s["max_centroid_drift"] <= 1e-6 and s["max_scale_drift"] <= 1e-6)
        ok &= good
        rows.append(f"{name}/{mode} centroid {s['max_centroid_drift']:.1e} scale {s['max_scale_drift']:.1e}")
    return ok, "; ".join(rows)


C5_T_END = 25.0


def criterion_5():
    c = fx.constraints("square")
    rng = np.random.default_rng(5)
    starts = []
    while len(starts) < 50:
        p0 = random_positions(rng, 4, 2)
        ps = compute_target(c, p0).p_star
        r_norm = np.linalg.norm(ps - ps.mean(axis=0))
        if np.linalg.norm(p0 - reflected_configuration(ps)) > 1e-3 * r_norm:
            starts.append(p0)
    traces = integrate_batch(starts, c, SimConfig(dt=1e-3, t_end=C5_T_END, record_every=1))
    ratios = [tr.metrics["delta_norm"][-1] / tr.metrics["delta_norm"][0] for tr in traces]
    v_inc = [float(np.max(np.diff(tr.metrics["V"]))) for tr in traces]
    theta0 = [float(tr.metrics["theta"][0]) for tr in traces]
    ok = (all(not tr.events for tr in traces) and max(ratios) <= 1e-3 and max(v_inc) <= 1e-9)
    return ok, (f"50 runs, T={C5_T_END:g}: max |d(T)|/|d(0)| = {max(ratios):.2e}, "
                f"max V increase {max(v_inc):.1e}, min theta0 {min(theta0):.2f}")


def criterion_6():
    c = fx.constraints("square")
    ps = fx.square()[1]
    pr = reflected_configuration(ps)
    v0 = np.linalg.norm(control_velocity(ps, c))
    vr = np.linalg.norm(control_velocity(pr, c))
    A0, Ar = jacobian(ps, c), jacobian(pr, c)
    asym = np.max(np.abs(Ar - Ar.T))
    lam = np.linalg.eigvalsh(0.5 * (Ar + Ar.T))
    neg = np.max(np.abs(A0 + Ar))
    rng = np.random.default_rng(6)
    fd_err = 0.0
    h = 1e-6
    for _ in range(10):
        p = rng.uniform(-1, 1, size=(4, 2))
        J = np.zeros((8, 8))
        for a in range(8):
            dp = np.zeros(8)
            dp[a] = h
            J[:, a] = ((control_velocity(p + dp.reshape(4, 2), c)
                        - control_velocity(p - dp.reshape(4, 2), c)) / (2 * h)).ravel()
        fd_err = max(fd_err, float(np.max(np.abs(jacobian(p, c) - J))))
    ok = (v0 <= 1e-12 and vr <= 1e-12 and asym <= 1e-10 and lam.min() >= -1e-10 and lam.max() > 0
          and neg <= 1e-10 and fd_err <= 1e-5)
    return ok, (f"|v(0)|={v0:.1e} |v(-2r*)|={vr:.1e} asym={asym:.1e} eig=[{lam.min():.1e}, {lam.max():.2f}] "
                f"|A0+Ar|={neg:.1e} fd={fd_err:.1e}")


def criterion_7():
    c = fx.constraints("square")
    ps = fx.square()[1]
    gamma = 0.5
    bound = collision_bound(ps, gamma)
    rng = np.random.default_rng(7)
    starts = [perturbed_start(ps, 0.9 * bound * rng.uniform(0.05, 1.0), rng) for _ in range(100)]
    d0 = max(np.linalg.norm(p - ps) for p in starts)
    # centroid and scale match, so every start has the unit square as its target
    tgt = max(np.max(np.abs(compute_target(c, p).p_star - ps)) for p in starts)
    traces = integrate_batch(starts, c, SimConfig(dt=1e-3, t_end=10.0, gamma=gamma, record_every=1))
    events = sum(len(collision_events(tr, gamma)) + len(tr.events) for tr in traces)
    min_dist = min(float(tr.metrics["min_pair_distance"].min()) for tr in traces)
    ok = bound == pytest.approx(0.25) and d0 <= 0.9 * bound and tgt <= 1e-9 and events == 0
    return ok, f"bound {bound:.3f}, max |d(0)| {d0:.4f}, 100 runs, {events} events, min distance {min_dist:.3f}"


def criterion_8():
    rows, ok = [], True
    for name in ("square_3d", "cube"):
        c = fx.constraints(name)
        n = c.graph.n
        rng = np.random.default_rng([8, n])
        starts, orients = [], []
        for _ in range(20):
            starts.append(random_positions(rng, n, 3))
            orients.append(random_rotations(rng, n, np.deg2rad(30), so3_exp(rng.normal(size=3))))
        assumed = all(check_sync_assumption(Q) is SyncAssumption.SATISFIED for Q in orients)
        traces = integrate_batch(starts, c, SimConfig(dt=1e-2, t_end=40.0, mode="local", record_every=100), orients)
        sums = [compute_metrics(tr) for tr in traces]
        sync = max(s["final_sync_error"] for s in sums)
        hn = max(s["final_h_norm"] for s in sums)
        gb = max(s["final_local_bearing_error"] for s in sums)
        good = assumed and not any(tr.events for tr in traces) and sync <= 1e-6 and hn <= 1e-6 and gb <= 1e-4
        ok &= good
        rows.append(f"{name}: assumption {'ok' if assumed else 'VIOLATED'}, sync {sync:.1e}, |h| {hn:.1e}, gb {gb:.1e}")
    return ok, "; ".join(rows)


def criterion_9():
    worst_fwd = worst_back = 0.0
    for seed in range(50):
        rng = np.random.default_rng([9, seed])
        f = fx.random_connected_framework(rng, int(rng.integers(3, 9)), 2, extra=rng.uniform(0.1, 0.9))
        R, RD = bearing_rigidity_matrix(f), distance_rigidity_matrix(f)
        _, NB = rank_nullspace(R)
        _, ND = rank_nullspace(RD)
        dp = NB @ rng.standard_normal(NB.shape[1])
        dq = ND @ rng.standard_normal(ND.shape[1])
        worst_fwd = max(worst_fwd, np.linalg.norm(RD @ perp_motion(dp)) / np.linalg.norm(dp))
        worst_back = max(worst_back, np.linalg.norm(R @ perp_motion(dq, inverse=True)) / np.linalg.norm(dq))
    ok = worst_fwd <= 1e-8 and worst_back <= 1e-8
    return ok, f"50 frameworks: R_D perp(null R) {worst_fwd:.1e}, R perp^-1(null R_D) {worst_back:.1e} (relative)"


def criterion_10():
    worst = 0.0
    for seed in range(50):
        rng = np.random.default_rng([10, seed])
        f = fx.random_connected_framework(rng, int(rng.integers(2, 9)), 2, extra=rng.uniform(0.1, 0.9))
        worst = max(worst, float(np.max(np.abs(bearing_rigidity_matrix(f) - bearing_from_distance_matrix(f)))))
    return worst <= 1e-10, f"50 frameworks, max identity residual {worst:.1e}"


def _flatten(obj, prefix=""):
    if isinstance(obj, dict):
        for k, v in obj.items():
            yield from _flatten(v, f"{prefix}/{k}")
    elif isinstance(obj, list):
        for k, v in enumerate(obj):
            yield from _flatten(v, f"{prefix}/{k}")
    else:
        yield prefix, obj


def criterion_11():
    worst = 0.0
    same_keys = True
    with tempfile.TemporaryDirectory() as tmp:
        for spec, extra in (("square.json", []), ("cube_local.json", ["--mode", "local", "--dt", "0.01"])):
            outs = []
            for rep in range(2):
                out = Path(tmp) / f"{spec}.{rep}.csv"
                code = cli_main(["simulate", str(FIXTURES / spec), "--seed", "11", "--t-end", "3",
                                 "--out", str(out), *extra])
                if code != 0:
                    return False, f"simulate exited with {code}"
                outs.append(json.loads(metrics_path(out).read_text()))
            a, b = (dict(_flatten({k: v for k, v in o.items() if not k.endswith("_file")})) for o in outs)
            same_keys &= a.keys() == b.keys()
            for key in a:
                if isinstance(a[key], float):
                    worst = max(worst, abs(a[key] - b[key]))
                elif a[key] != b[key]:
                    same_keys = False
    return same_keys and worst <= 1e-12, f"two identical simulate calls per spec, max metric difference {worst:.1e}"


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8, criterion_9, criterion_10, criterion_11]


@pytest.mark.parametrize("k", range(1, 12))
def test_criterion(k, capsys):
    t0 = time.perf_counter()
    ok, detail = CRITERIA[k - 1]()
    elapsed = time.perf_counter() - t0
    with capsys.disabled():
        record(k, ok, f"{detail} [{elapsed:.1f}s]")
    assert ok, detail


if __name__ == "__main__":
    failures = 0
    for k, fn in enumerate(CRITERIA, start=1):
        t0 = time.perf_counter()
        ok, detail = fn()
        failures += not record(k, ok, f"{detail} [{time.perf_counter() - t0:.1f}s]")
    raise SystemExit(1 if failures else 0)
