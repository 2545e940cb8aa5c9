"""Scenario files: JSON ingestion, validation, defaults and random instances.

A scenario document looks like::

    {"name": "...", "robot": [[x, y], ...], "obstacles": [[[x, y], ...], ...],
     "start": [...], "goal": [...], "dynamics": "single" | "double",
     "workspace": [xmin, ymin, xmax, ymax], "params": {...}}

Missing ``params`` entries take the values in `DEFAULT_PARAMS`.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .cbf import signed_distance
from .dynamics import DynKind, n_states
from .geometry import (GeometryError, VPolytope, configuration_obstacle, convex_hull,
                       polygon_distance_oracle, v_to_h)

DEFAULT_PARAMS = {
    "Np": 10,
    "dt_p": 0.2,
    "dt": 0.01,
    "alpha": 20.0,
    "beta": 0.08,
    "bigM": 20.0,
    "eps_obs": 0.01,
    "k": 3.0,
    "k1": 2.0,
    "k2": 10.0,
    "d_safe": 0.0,
    "u_max": 5.0,
    "t_final": 60.0,
    "state_bounds": None,
    "v_max": 2.5,
    "goal_tol": 0.1,
    "stall_window": 2.0,
    "node_limit": 1500,
}

_INT_PARAMS = {"Np", "node_limit"}


class ConfigError(ValueError):
    """Invalid scenario or run configuration."""


@dataclass
class Scenario:
    robot: VPolytope
    obstacles: list
    x_s: np.ndarray
    x_g: np.ndarray
    dynamics: DynKind
    workspace: tuple
    params: dict = field(default_factory=lambda: dict(DEFAULT_PARAMS))
    name: str = "scenario"

    @property
    def n_states(self) -> int:
        return n_states(self.dynamics)

    def state_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Planner state box: explicit ``state_bounds`` or workspace and ``v_max``."""
        sb = self.params.get("state_bounds")
        if sb is not None:
            return (np.asarray(sb["x_min"], dtype=float), np.asarray(sb["x_max"], dtype=float))
        xmin, ymin, xmax, ymax = self.workspace
        lo, hi = [xmin, ymin], [xmax, ymax]
        if self.dynamics is DynKind.DOUBLE:
            v = float(self.params["v_max"])
            lo, hi = lo + [-v, -v], hi + [v, v]
        return np.array(lo, dtype=float), np.array(hi, dtype=float)

    def u_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        umax = np.broadcast_to(np.asarray(self.params["u_max"], dtype=float), (2,)).copy()
        return -umax, umax

    def with_params(self, **overrides) -> "Scenario":
        out = copy.deepcopy(self)
        out.params.update(overrides)
        return out


def _fail(path: str, msg: str):
    raise ConfigError(f"{path}: {msg}")


def _vector(raw, path: str, size: int | None = None) -> np.ndarray:
    try:
        arr = np.asarray(raw, dtype=float)
    except (TypeError, ValueError):
        _fail(path, "expected a list of numbers")
    if arr.ndim != 1 or (size is not None and arr.shape[0] != size):
        _fail(path, f"expected {size if size is not None else 'a'} numbers")
    if not np.all(np.isfinite(arr)):
        _fail(path, "values must be finite")
    return arr


def _polygon(raw, path: str) -> VPolytope:
    try:
        pts = np.asarray(raw, dtype=float)
    except (TypeError, ValueError):
        _fail(path, "expected a list of [x, y] pairs")
    if pts.ndim != 2 or pts.shape[1] != 2:
        _fail(path, "expected a list of [x, y] pairs")
    try:
        return convex_hull(pts)
    except GeometryError as exc:
        _fail(path, str(exc))


def _state(raw, path: str, kind: DynKind) -> np.ndarray:
    arr = _vector(raw, path)
    n = n_states(kind)
    if arr.shape[0] == 2 and n == 4:
        arr = np.concatenate([arr, [0.0, 0.0]])
    if arr.shape[0] != n:
        _fail(path, f"expected 2 or {n} numbers")
    return arr


def big_m_margin(obstacles, workspace, M: float, eps: float) -> float:
    """Smallest slack of the big-M rows over the workspace box.

    A row ``-a^T p <= -b - eps + M`` must hold for every ``p`` in the box
    when relaxed; the return value is ``M - max(b + eps - a^T p)`` and must be
    nonnegative.
    """
    xmin, ymin, xmax, ymax = workspace
    corners = np.array([[xmin, ymin], [xmax, ymin], [xmax, ymax], [xmin, ymax]])
    worst = -np.inf
    for obs in obstacles:
        H = v_to_h(obs)
        need = H.b[:, None] + eps - H.A @ corners.T
        worst = max(worst, float(need.max()))
    return M - worst if np.isfinite(worst) else np.inf


def validate(sc: Scenario) -> Scenario:
    p = sc.params
    for key in ("dt", "dt_p", "t_final", "u_max", "goal_tol", "stall_window", "k", "k1", "k2"):
        if not np.all(np.asarray(p[key], dtype=float) > 0):
            _fail(f"params.{key}", "must be positive")
    if p["dt_p"] < p["dt"]:
        _fail("params.dt_p", "must be at least dt")
    if p["Np"] < 1:
        _fail("params.Np", "must be >= 1")
    if p["d_safe"] < 0 or p["eps_obs"] < 0:
        _fail("params", "d_safe and eps_obs must be nonnegative")
    xmin, ymin, xmax, ymax = sc.workspace
    if not (xmin < xmax and ymin < ymax):
        _fail("workspace", "expected [xmin, ymin, xmax, ymax] with min < max")
    lo, hi = sc.state_bounds()
    if lo.shape != (sc.n_states,) or hi.shape != (sc.n_states,) or np.any(lo >= hi):
        _fail("params.state_bounds", f"x_min < x_max with {sc.n_states} entries each")
    margin = big_m_margin(sc.obstacles, sc.workspace, p["bigM"], p["eps_obs"])
    if margin < 0:
        _fail("params.bigM", f"too small for this workspace (short by {-margin:.3g})")
    for j, obs in enumerate(sc.obstacles):
        co = configuration_obstacle(sc.robot, obs, j)
        if signed_distance(co, sc.x_s[:2]) - p["d_safe"] <= 0:
            _fail(f"obstacles[{j}]", "robot at start overlaps this obstacle")
    return sc


def from_dict(doc: dict, name: str | None = None) -> Scenario:
    if not isinstance(doc, dict):
        _fail("$", "expected a JSON object")
    for key in ("robot", "obstacles", "start", "goal"):
        if key not in doc:
            _fail(key, "missing")
    try:
        kind = DynKind.parse(doc.get("dynamics", "single"))
    except ValueError:
        _fail("dynamics", "expected 'single' or 'double'")
    robot = _polygon(doc["robot"], "robot")
    if not isinstance(doc["obstacles"], list):
        _fail("obstacles", "expected a list of polygons")
    obstacles = [_polygon(o, f"obstacles[{j}]") for j, o in enumerate(doc["obstacles"])]
    x_s = _state(doc["start"], "start", kind)
    x_g = _state(doc["goal"], "goal", kind)
    raw = doc.get("params", {}) or {}
    if not isinstance(raw, dict):
        _fail("params", "expected an object")
    params = dict(DEFAULT_PARAMS)
    for key, val in raw.items():
        if key not in DEFAULT_PARAMS:
            _fail(f"params.{key}", "unknown parameter")
        if key == "state_bounds":
            if val is not None:
                if not isinstance(val, dict) or set(val) != {"x_min", "x_max"}:
                    _fail("params.state_bounds", "expected {x_min: [...], x_max: [...]}")
                val = {k: _vector(v, f"params.state_bounds.{k}").tolist() for k, v in val.items()}
        elif key == "u_max" and isinstance(val, list):
            val = _vector(val, "params.u_max", 2).tolist()
        else:
            if isinstance(val, bool) or not isinstance(val, (int, float)):
                _fail(f"params.{key}", "expected a number")
            val = int(val) if key in _INT_PARAMS else float(val)
        params[key] = val
    if "workspace" in doc:
        ws = tuple(_vector(doc["workspace"], "workspace", 4).tolist())
    else:
        pts = np.vstack([robot.vertices + x_s[:2], x_g[:2][None]] + [o.vertices for o in obstacles])
        lo, hi = pts.min(axis=0) - 1.0, pts.max(axis=0) + 1.0
        ws = (float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1]))
    sc = Scenario(robot, obstacles, x_s, x_g, kind, ws, params, doc.get("name", name or "scenario"))
    return validate(sc)


def to_dict(sc: Scenario) -> dict:
    return {
        "name": sc.name,
        "dynamics": sc.dynamics.value,
        "robot": sc.robot.vertices.tolist(),
        "obstacles": [o.vertices.tolist() for o in sc.obstacles],
        "start": sc.x_s.tolist(),
        "goal": sc.x_g.tolist(),
        "workspace": list(sc.workspace),
        "params": copy.deepcopy(sc.params),
    }


def loads(text: str, name: str | None = None) -> Scenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return from_dict(doc, name)


def load(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    return loads(text, path.stem)


def dumps(sc: Scenario) -> str:
    return json.dumps(to_dict(sc), indent=2)


def bundled_names() -> list[str]:
    root = resources.files("milpcbf") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def bundled(name: str, dynamics=None) -> Scenario:
    """Load a scenario shipped with the package, optionally switching dynamics."""
    root = resources.files("milpcbf") / "scenarios"
    res = root / f"{name}.json"
    if not res.is_file():
        raise ConfigError(f"unknown bundled scenario {name!r}")
    doc = json.loads(res.read_text())
    if dynamics is not None:
        doc["dynamics"] = DynKind.parse(dynamics).value
        doc["start"] = doc["start"][:2]
        doc["goal"] = doc["goal"][:2]
    return from_dict(doc, name)


def resolve(source: str) -> Scenario:
    """Path to a JSON file or the name of a bundled scenario."""
    path = Path(source)
    if path.suffix == ".json" or path.exists():
        return load(path)
    return bundled(source)


def random_scenario(seed: int, dynamics="single", n_obstacles: int | None = None,
                    size: float = 8.0, t_final: float = 20.0) -> Scenario:
    """Random convex obstacles between a start on the left and a goal on the right."""
    rng = np.random.default_rng(seed)
    kind = DynKind.parse(dynamics)
    if n_obstacles is None:
        n_obstacles = int(rng.integers(1, 4))
    # robot: a small random convex body around the origin
    ang = np.sort(rng.uniform(0, 2 * np.pi, 5))
    rad = rng.uniform(0.15, 0.35, 5)
    robot = convex_hull(np.c_[rad * np.cos(ang), rad * np.sin(ang)])
    start = np.array([0.8, rng.uniform(1.5, size - 1.5)])
    goal = np.array([size - 0.8, rng.uniform(1.5, size - 1.5)])
    obstacles = []
    tries = 0
    while len(obstacles) < n_obstacles and tries < 500:
        tries += 1
        c = rng.uniform([2.0, 1.0], [size - 2.0, size - 1.0])
        k = int(rng.integers(3, 7))
        a = np.sort(rng.uniform(0, 2 * np.pi, k))
        r = rng.uniform(0.4, 1.1, k)
        try:
            obs = convex_hull(c + np.c_[r * np.cos(a), r * np.sin(a)])
        except GeometryError:
            continue
        ok = True
        for q in (start, goal):
            co = configuration_obstacle(robot, obs)
            if signed_distance(co, q) < 0.5:
                ok = False
        for other in obstacles:
            if polygon_distance_oracle(obs, other) < 1.2:
                ok = False
        if ok:
            obstacles.append(obs)
    doc = {
        "name": f"random_{seed}",
        "dynamics": kind.value,
        "robot": robot.vertices.tolist(),
        "obstacles": [o.vertices.tolist() for o in obstacles],
        "start": start.tolist(),
        "goal": goal.tolist(),
        "workspace": [0.0, 0.0, size, size],
        "params": {"t_final": t_final},
    }
    return from_dict(doc)
