"""Formation spec files (JSON) and simulation traces (CSV plus a metrics JSON)."""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .control_local import check_rotation
from .errors import ValidationError
from .graph import Graph, build_graph
from .sim import SimConfig, SimulationTrace, attach_metrics, compute_metrics
from .target import BearingConstraints

log = logging.getLogger(__name__)

UNIT_ERROR = 1e-6     # larger deviations from unit norm are rejected
UNIT_WARN = 1e-9      # smaller ones are accepted silently


@dataclass(frozen=True, eq=False)
class FormationSpec:
    d: int
    graph: Graph
    positions: np.ndarray | None = None        # (n, d)
    orientations: np.ndarray | None = None     # (n, 3, 3)
    constraints: BearingConstraints | None = None

    @property
    def n(self) -> int:
        return self.graph.n

    def require_positions(self) -> np.ndarray:
        if self.positions is None:
            raise ValidationError("this command needs agent positions", location="/agents/0/position")
        return self.positions

    def require_constraints(self) -> BearingConstraints:
        if self.constraints is None:
            raise ValidationError("this command needs bearing constraints", location="/bearings")
        return self.constraints

    def __eq__(self, other) -> bool:
        if not isinstance(other, FormationSpec):
            return NotImplemented

        def same(a, b):
            if a is None or b is None:
                return a is None and b is None
            return a.shape == b.shape and bool(np.array_equal(a, b))

        return (
            self.d == other.d
            and self.graph == other.graph
            and same(self.positions, other.positions)
            and same(self.orientations, other.orientations)
            and same(None if self.constraints is None else self.constraints.g,
                     None if other.constraints is None else other.constraints.g)
        )


def _number_list(value, length: int, where: str) -> list[float]:
    if not isinstance(value, list) or len(value) != length:
        raise ValidationError(f"expected a list of {length} numbers", location=where)
    out = []
    for k, x in enumerate(value):
        if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
            raise ValidationError("expected a finite number", location=f"{where}/{k}")
        out.append(float(x))
    return out


def _pair(value, n: int, where: str) -> tuple[int, int]:
    if not isinstance(value, list) or len(value) != 2 or not all(
        isinstance(v, int) and not isinstance(v, bool) for v in value
    ):
        raise ValidationError("expected a pair of agent ids [i, j]", location=where)
    i, j = value
    for k, v in enumerate(value):
        if not 1 <= v <= n:
            raise ValidationError(f"agent {v} does not exist (ids run 1..{n})", location=f"{where}/{k}")
    if i == j:
        raise ValidationError(f"self-loop at agent {i}", location=where)
    return i, j


def load_spec(data) -> FormationSpec:
    """Validate an already-decoded JSON document."""
    if not isinstance(data, dict):
        raise ValidationError("spec must be a JSON object", location="")
    unknown = set(data) - {"dimension", "agents", "edges", "bearings"}
    if unknown:
        key = sorted(unknown)[0]
        raise ValidationError(f"unknown field {key!r}", location=f"/{key}")
    d = data.get("dimension")
    if isinstance(d, bool) or not isinstance(d, int) or d < 2:
        raise ValidationError("dimension must be an integer >= 2", location="/dimension")

    agents = data.get("agents")
    if not isinstance(agents, list) or len(agents) < 2:
        raise ValidationError("need a list of at least two agents", location="/agents")
    n = len(agents)
    ids, pos, ori = [], [], []
    for k, a in enumerate(agents):
        where = f"/agents/{k}"
        if not isinstance(a, dict):
            raise ValidationError("agent must be an object", location=where)
        extra = set(a) - {"id", "position", "orientation"}
        if extra:
            raise ValidationError(f"unknown field {sorted(extra)[0]!r}", location=f"{where}/{sorted(extra)[0]}")
        aid = a.get("id")
        if isinstance(aid, bool) or not isinstance(aid, int):
            raise ValidationError("agent id must be an integer", location=f"{where}/id")
        ids.append(aid)
        pos.append(_number_list(a["position"], d, f"{where}/position") if "position" in a else None)
        if "orientation" in a:
            if d != 3:
                raise ValidationError("orientations are only meaningful for d = 3", location=f"{where}/orientation")
            Q = np.array(_number_list(a["orientation"], 9, f"{where}/orientation")).reshape(3, 3)
            try:
                check_rotation(Q)
            except ValidationError as exc:
                raise ValidationError(str(exc), location=f"{where}/orientation") from None
            ori.append(Q)
        else:
            ori.append(None)
    if ids != list(range(1, n + 1)):
        k = next(k for k, v in enumerate(ids) if v != k + 1)
        raise ValidationError("agent ids must be unique and run 1..n in order", location=f"/agents/{k}/id")
    for name, vals in (("position", pos), ("orientation", ori)):
        given = [v is not None for v in vals]
        if any(given) and not all(given):
            k = given.index(False)
            raise ValidationError(f"{name} given for some agents but not all", location=f"/agents/{k}/{name}")

    edges = data.get("edges")
    if not isinstance(edges, list) or not edges:
        raise ValidationError("need a non-empty list of edges", location="/edges")
    seen: dict[tuple[int, int], int] = {}
    for k, e in enumerate(edges):
        i, j = _pair(e, n, f"/edges/{k}")
        key = (min(i, j), max(i, j))
        if key in seen:
            raise ValidationError(f"duplicate edge {list(e)}", location=f"/edges/{k}")
        seen[key] = k
    graph = build_graph(n, seen)

    constraints = None
    bearings = data.get("bearings")
    if bearings is not None:
        if not isinstance(bearings, list):
            raise ValidationError("bearings must be a list", location="/bearings")
        rows: list[np.ndarray | None] = [None] * graph.m
        for k, b in enumerate(bearings):
            where = f"/bearings/{k}"
            if not isinstance(b, dict) or set(b) != {"edge", "g"}:
                raise ValidationError("bearing entries need exactly 'edge' and 'g'", location=where)
            i, j = _pair(b["edge"], n, f"{where}/edge")
            if (min(i, j), max(i, j)) not in seen:
                raise ValidationError(f"bearing references undeclared edge [{i}, {j}]", location=f"{where}/edge")
            g = np.array(_number_list(b["g"], d, f"{where}/g"))
            norm = float(np.linalg.norm(g))
            if abs(norm - 1.0) > UNIT_ERROR:
                raise ValidationError(f"bearing has norm {norm:.12g}, expected 1", location=f"{where}/g")
            if abs(norm - 1.0) > UNIT_WARN:
                log.warning("bearing at %s/g has norm %.12g; re-normalized", where, norm)
                g = g / norm
            idx, sign = graph.edge_index(i, j)
            if rows[idx] is not None:
                raise ValidationError(f"second bearing for edge [{i}, {j}]", location=f"{where}/edge")
            rows[idx] = sign * g
        missing = [k for k, r in enumerate(rows) if r is None]
        if missing:
            e = graph.edges[missing[0]]
            raise ValidationError(f"no bearing given for edge [{e[0]}, {e[1]}]", location="/bearings")
        constraints = BearingConstraints(graph, np.array(rows))

    return FormationSpec(
        d=d,
        graph=graph,
        positions=np.array(pos) if pos[0] is not None else None,
        orientations=np.array(ori) if ori[0] is not None else None,
        constraints=constraints,
    )


def parse_spec(path) -> FormationSpec:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read spec: {exc.strerror}", location="") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}", location="") from None
    return load_spec(data)


def dump_spec(spec: FormationSpec) -> dict:
    """Canonical JSON document: edges as stored (i < j), one bearing per edge in the same order."""
    agents = []
    for i in range(spec.n):
        a: dict = {"id": i + 1}
        if spec.positions is not None:
            a["position"] = [float(x) for x in spec.positions[i]]
        if spec.orientations is not None:
            a["orientation"] = [float(x) for x in spec.orientations[i].ravel()]
        agents.append(a)
    doc: dict = {"dimension": spec.d, "agents": agents, "edges": [list(e) for e in spec.graph.edges]}
    if spec.constraints is not None:
        doc["bearings"] = [
            {"edge": list(e), "g": [float(x) for x in g]} for e, g in zip(spec.graph.edges, spec.constraints.g)
        ]
    return doc


def write_spec(spec: FormationSpec, path) -> None:
    Path(path).write_text(json.dumps(dump_spec(spec), indent=2) + "\n")


def spec_from_arrays(graph: Graph, p=None, constraints: BearingConstraints | None = None, Q=None) -> FormationSpec:
    d = constraints.d if constraints is not None else np.asarray(p).shape[1]
    return FormationSpec(
        d=d,
        graph=graph,
        positions=None if p is None else np.asarray(p, dtype=float),
        orientations=None if Q is None else np.asarray(Q, dtype=float),
        constraints=constraints,
    )


# ---------------------------------------------------------------------------
# traces


def trace_header(n: int, d: int, with_rotations: bool) -> list[str]:
    cols = ["t"] + [f"p{i}_{c}" for i in range(1, n + 1) for c in range(1, d + 1)]
    if with_rotations:
        cols += [f"q{i}_{r}{c}" for i in range(1, n + 1) for r in range(1, 4) for c in range(1, 4)]
    return cols


def metrics_path(csv_path) -> Path:
    p = Path(csv_path)
    return p.with_name(p.stem + ".metrics.json")


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_trace(trace: SimulationTrace, path, summary: dict | None = None) -> Path:
    """CSV of the sampled states plus ``<stem>.metrics.json`` next to it; returns the metrics path."""
    if len(trace) == 0:
        raise ValidationError("cannot write an empty trace")
    S, n, d = trace.positions.shape
    rot = trace.rotations is not None
    rows = [trace.times[:, None], trace.positions.reshape(S, n * d)]
    if rot:
        rows.append(trace.rotations.reshape(S, n * 9))
    table = np.hstack(rows)
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(trace_header(n, d, rot))
        for row in table:
            w.writerow([repr(float(x)) for x in row])
    if summary is None:
        summary = compute_metrics(trace)
    mpath = metrics_path(path)
    mpath.write_text(json.dumps(_json_safe(summary), indent=2, sort_keys=True) + "\n")
    return mpath


def read_trace(path, spec: FormationSpec) -> SimulationTrace:
    """Load a CSV trace written by :func:`write_trace` and recompute its metrics against ``spec``."""
    cons = spec.require_constraints()
    n, d = spec.n, spec.d
    try:
        with Path(path).open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ValidationError(f"cannot read trace: {exc.strerror}") from None
    if len(rows) < 2:
        raise ValidationError("trace has no samples")
    header = rows[0]
    local = len(header) == len(trace_header(n, d, True)) and d == 3
    if header != trace_header(n, d, local):
        raise ValidationError(f"trace header does not match a {n}-agent, d={d} formation")
    try:
        table = np.array([[float(x) for x in r] for r in rows[1:]])
    except ValueError as exc:
        raise ValidationError(f"non-numeric trace entry: {exc}") from None
    if table.shape[1] != len(header):
        raise ValidationError("ragged trace rows")
    times = table[:, 0]
    if np.any(np.diff(times) <= 0):
        raise ValidationError("trace times must be strictly increasing")
    P = table[:, 1:1 + n * d].reshape(-1, n, d)
    R = table[:, 1 + n * d:].reshape(-1, n, 3, 3) if local else None
    dt = float(np.min(np.diff(times))) if len(times) > 1 else 1.0
    cfg = SimConfig(dt=dt, t_end=max(float(times[-1]), dt), mode="local" if local else "global")
    trace = SimulationTrace(mode=cfg.mode, times=times, positions=P, rotations=R, constraints=cons, config=cfg)
    attach_metrics(trace)
    return trace
