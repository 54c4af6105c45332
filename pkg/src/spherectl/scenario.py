"""Scenario files: JSON in, fully validated :class:`Scenario` out.

Schema (version 1)::

    {
      "schema_version": 1,
      "name": "...",
      "dimension": 2,                       # n, the sphere is S^n in R^{n+1}
      "target": [0, 0, 1],
      "obstacles": [
        {"kernel": [..] | {"lat_deg": .., "lon_deg": ..},
         "profile": {"type": "fourier", "a0": .., "a": [..], "b": [..]}
                  | {"type": "cap", "radius": ..},
         "reference": [..]}                 # optional frame reference
      ],
      "planner": {"k1": 1, "kappa": 1, "epsilon": 0.13},
      "controller": {"kd": 1, "epsilon1": 0.087, "epsilon2": 0.13},
      "separation": "spherical" | "chordal" | "product",
      "delta": 0.2, "delta_u": 0.18,
      "sim": {"h": 0.001, "horizon": 60, "renorm": true},
      "seeds": {"points": [[..], ..],
                "velocity": "toward_closest" | "zero",
                "velocities": [[..], ..]},  # explicit, overrides "velocity"
      "attitude": {"inertia": [[..], [..], [..]], "omega0": [[..], ..]}
    }

Every invariant is checked and all failures are reported together.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .controller import ControllerParams
from .errors import InputError, ScenarioValidationError, SphereCtlError
from .geometry import random_points
from .obstacle import (
    ObstacleField,
    RadialProfile,
    StarObstacle,
    contains,
    nearest_obstacle,
    obstacle_distances,
    outward_normal,
)
from .planner import VARIANT_CODES, PlannerParams
from .sim import SimConfig, SimState

SCHEMA_VERSION = 1


@dataclass(frozen=True, eq=False)
class AttitudeConfig:
    inertia: np.ndarray
    omega0: tuple = ()


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    field: ObstacleField
    planner: PlannerParams
    controller: ControllerParams
    delta: float
    delta_u: float
    sim: SimConfig
    seed_points: np.ndarray
    seed_velocities: np.ndarray
    attitude: AttitudeConfig | None = None

    @property
    def dim(self) -> int:
        """Ambient dimension n + 1."""
        return self.field.dim

    @property
    def target(self) -> np.ndarray:
        return self.planner.target

    def seeds(self, count: int | None = None) -> list[SimState]:
        n = len(self.seed_points) if count is None else min(count, len(self.seed_points))
        return [SimState(self.seed_points[i], self.seed_velocities[i]) for i in range(n)]

    def with_separation(self, variant: str) -> "Scenario":
        return replace(self, controller=replace(self.controller, separation=variant))

    def free(self, x) -> bool:
        return not any(contains(o, x) for o in self.field)

    def random_seeds(self, count: int, seed: int = 0, max_speed: float = 2.0) -> list[SimState]:
        """States with x uniform on the free space and v uniform in the ball of radius ``max_speed``."""
        rng = np.random.default_rng(seed)
        out = []
        while len(out) < count:
            x = random_points(rng, 1, self.dim)[0]
            if not self.free(x):
                continue
            direction = rng.standard_normal(self.dim)
            direction /= np.linalg.norm(direction)
            speed = max_speed * rng.random() ** (1.0 / self.dim)
            out.append(SimState(x, speed * direction))
        return out


def toward_closest(field: ObstacleField, x) -> np.ndarray:
    """Unit tangent at x pointing along the geodesic to the nearest unsafe point."""
    idx, _, _ = nearest_obstacle(field, x)
    return -outward_normal(field[idx], x)


def _kernel(spec, dim, where, errors):
    if isinstance(spec, dict):
        if dim != 3:
            errors.append(f"{where}: lat/lon kernels need dimension 2")
            return None
        lat, lon = math.radians(spec["lat_deg"]), math.radians(spec["lon_deg"])
        return np.array([math.cos(lat) * math.cos(lon), math.cos(lat) * math.sin(lon), math.sin(lat)])
    arr = np.asarray(spec, dtype=float)
    if arr.shape != (dim,):
        errors.append(f"{where}: kernel has {arr.size} entries, expected {dim}")
        return None
    return arr


def _profile(spec, where, errors):
    kind = spec.get("type", "fourier")
    if kind == "cap":
        return RadialProfile.cap(float(spec["radius"]))
    if kind == "fourier":
        return RadialProfile(float(spec["a0"]), tuple(spec.get("a", ())), tuple(spec.get("b", ())))
    errors.append(f"{where}: unknown profile type {kind!r}")
    return None


def _need(block: dict, key: str, where: str, errors: list):
    if key not in block:
        errors.append(f"{where}: missing field {key!r}")
        return None
    return block[key]


def build_scenario(data: dict, source: str = "<dict>") -> Scenario:
    """Validate a parsed scenario document and build the Scenario."""
    errors: list[str] = []
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        errors.append(f"schema_version: expected {SCHEMA_VERSION}, got {version!r}")
    n = data.get("dimension")
    if not isinstance(n, int) or n < 1:
        errors.append(f"dimension: expected integer n >= 1, got {n!r}")
        raise ScenarioValidationError(errors)
    dim = n + 1

    target = np.asarray(data.get("target", []), dtype=float)
    if target.shape != (dim,) or np.linalg.norm(target) < 1e-8:
        errors.append(f"target: expected nonzero vector with {dim} entries")
        target = None

    obstacles = []
    for i, spec in enumerate(data.get("obstacles", [])):
        where = f"obstacles[{i}]"
        try:
            g = _kernel(_need(spec, "kernel", where, errors), dim, where, errors)
            prof = _profile(_need(spec, "profile", where, errors) or {}, where, errors)
            if g is not None and prof is not None:
                obstacles.append(StarObstacle(g, prof, spec.get("reference")))
        except (SphereCtlError, ValueError, KeyError, TypeError) as exc:
            errors.append(f"{where}: {exc}")

    pl = data.get("planner", {})
    ct = data.get("controller", {})
    k1, kappa, eps = pl.get("k1", 1.0), pl.get("kappa", 1.0), _need(pl, "epsilon", "planner", errors)
    kd, eps1, eps2 = ct.get("kd", 1.0), _need(ct, "epsilon1", "controller", errors), _need(ct, "epsilon2", "controller", errors)
    delta = _need(data, "delta", "scenario", errors)
    delta_u = _need(data, "delta_u", "scenario", errors)
    separation = data.get("separation", "spherical")
    if separation not in VARIANT_CODES:
        errors.append(f"separation: unknown variant {separation!r}")
        separation = "spherical"

    if k1 is not None and k1 <= 0:
        errors.append("planner.k1 must be positive")
    if kappa is not None and kappa <= 0:
        errors.append("planner.kappa must be positive")
    if kd is not None and kd <= 0:
        errors.append("controller.kd must be positive")
    if eps1 is not None and eps2 is not None and not 0 < eps1 < eps2:
        errors.append(f"beta schedule ordering 0 < epsilon1 < epsilon2 violated (epsilon1={eps1}, epsilon2={eps2})")
    if delta is not None and not 0 < delta <= math.pi / 2:
        errors.append(f"delta={delta} must lie in (0, pi/2]")
    if delta_u is not None and delta is not None and not 0 < delta_u <= delta:
        errors.append(f"delta_u={delta_u} must lie in (0, delta]")
    if delta_u is not None:
        if eps is not None and not 0 < eps < delta_u:
            errors.append(f"tube width ordering 0 < epsilon < delta_u violated (epsilon={eps}, delta_u={delta_u})")
        if eps2 is not None and eps2 >= delta_u:
            errors.append(f"epsilon2={eps2} must be below delta_u={delta_u}")

    field = None
    try:
        field = ObstacleField(obstacles, dim=dim)
    except (SphereCtlError, ValueError) as exc:
        errors.append(f"obstacles: {exc}")

    if field is not None and len(field) > 1 and delta is not None:
        sep = field.min_pairwise_separation()
        if sep < 2 * delta:
            errors.append(f"obstacles are only {sep:.4f} rad apart; pairwise separation must be >= 2*delta = {2 * delta:.4f}")

    if field is not None and target is not None and eps is not None:
        d = obstacle_distances(field, target)
        if len(d) and d.min() <= eps:
            errors.append(f"target clearance d_U(x_d) = {d.min():.4f} must exceed epsilon = {eps}")

    sim_spec = data.get("sim", {})
    try:
        sim = SimConfig(h=float(sim_spec.get("h", 1e-3)), horizon=float(sim_spec.get("horizon", 60.0)),
                        renorm=bool(sim_spec.get("renorm", True)))
    except InputError as exc:
        errors.append(f"sim: {exc}")
        sim = SimConfig()

    seeds = data.get("seeds", {})
    points = np.asarray(seeds.get("points", np.zeros((0, dim))), dtype=float).reshape(-1, dim) if seeds.get("points") else np.zeros((0, dim))
    if len(points):
        points = points / np.linalg.norm(points, axis=1, keepdims=True)
    vels = np.zeros_like(points)
    if field is not None:
        for i, p in enumerate(points):
            dists = obstacle_distances(field, p)
            if len(dists) and dists.min() <= 0:
                errors.append(f"seeds.points[{i}] is not in the free space")
    if "velocities" in seeds:
        vels = np.asarray(seeds["velocities"], dtype=float)
        if vels.shape != points.shape:
            errors.append(f"seeds.velocities has shape {vels.shape}, expected {points.shape}")
            vels = np.zeros_like(points)
    elif seeds.get("velocity", "toward_closest") == "toward_closest":
        if field is not None and len(field) and not any("seeds.points" in e for e in errors):
            vels = np.array([toward_closest(field, p) for p in points]).reshape(points.shape)
    elif seeds.get("velocity") != "zero":
        errors.append(f"seeds.velocity: unknown convention {seeds.get('velocity')!r}")

    attitude = None
    if "attitude" in data:
        att = data["attitude"]
        if dim != 4:
            errors.append("attitude block requires dimension 3 (unit quaternions)")
        inertia = np.asarray(att.get("inertia", np.eye(3)), dtype=float)
        if inertia.shape != (3, 3):
            errors.append("attitude.inertia must be 3x3")
        elif not np.allclose(inertia, inertia.T, atol=1e-12, rtol=0):
            errors.append("attitude.inertia must be symmetric")
        elif np.linalg.eigvalsh(inertia).min() <= 0:
            errors.append("attitude.inertia must be positive definite")
        omega0 = tuple(tuple(float(c) for c in w) for w in att.get("omega0", ()))
        attitude = AttitudeConfig(inertia, omega0)

    planner = controller = None
    if target is not None and eps is not None:
        try:
            planner = PlannerParams(target, float(k1), float(kappa), float(eps))
        except InputError as exc:
            errors.append(f"planner: {exc}")
    if eps1 is not None and eps2 is not None and not any(e.startswith("beta schedule") for e in errors):
        try:
            controller = ControllerParams(float(kd), float(eps1), float(eps2), separation)
        except InputError as exc:
            errors.append(f"controller: {exc}")

    if errors:
        raise ScenarioValidationError([f"{source}: {e}" for e in errors])
    return Scenario(
        name=str(data.get("name", Path(source).stem)),
        field=field,
        planner=planner,
        controller=controller,
        delta=float(delta),
        delta_u=float(delta_u),
        sim=sim,
        seed_points=points,
        seed_velocities=vels,
        attitude=attitude,
    )


def load_scenario(path) -> Scenario:
    """Read and validate a scenario JSON file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioValidationError([f"{path}: cannot read file ({exc.strerror})"]) from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioValidationError([f"{path}: JSON parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}"]) from None
    if not isinstance(data, dict):
        raise ScenarioValidationError([f"{path}: top level must be an object"])
    return build_scenario(data, str(path))


def shipped_scenario_path(name: str) -> Path:
    """Path of a scenario bundled with the package, e.g. ``s2_six_star``."""
    return Path(__file__).parent / "data" / f"{name}.json"


def load_shipped(name: str) -> Scenario:
    return load_scenario(shipped_scenario_path(name))
