"""Stochastic vessel breaking.

Each break removes mesh vertices inside a sphere of radius R around a
point P unless they are "pardoned": strictly closer to one of the rescue
points sampled in the spherical shell [r_min, r_max] around P. The
resulting bite is bounded by Voronoi walls between P and the rescue
points.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict

import numpy as np

from .errors import InvalidRanges
from .mesh import VesselMesh


@dataclass(frozen=True)
class FractureEvent:
    center: tuple[float, float, float]  # P
    radius: float  # R
    rescue_points: tuple[tuple[float, float, float], ...]
    r_min: float
    r_max: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("fracture radius must be positive")
        if not (0 < self.r_min <= self.r_max):
            raise ValueError("need 0 < r_min <= r_max")


@dataclass(frozen=True)
class FractureRanges:
    """Sampling ranges for a fracture plan.

    radius_frac is relative to the mesh bbox diagonal; rescue_shell gives
    (r_min, r_max) as multiples of the sampled R. Defaults are calibrated
    visually, not measured from any source.
    """

    n_events: tuple[int, int] = (1, 3)
    radius_frac: tuple[float, float] = (0.08, 0.22)
    rescue_count: tuple[int, int] = (2, 6)
    rescue_shell: tuple[float, float] = (0.5, 1.5)

    def validate(self):
        for name, (lo, hi) in (
            ("n_events", self.n_events),
            ("radius_frac", self.radius_frac),
            ("rescue_count", self.rescue_count),
            ("rescue_shell", self.rescue_shell),
        ):
            if lo < 0 or hi < lo:
                raise InvalidRanges(f"{name}: need 0 <= min <= max, got ({lo}, {hi})")
        if self.rescue_shell[0] <= 0:
            raise InvalidRanges("rescue_shell minimum must be positive")


@dataclass(frozen=True)
class FracturePlan:
    events: tuple[FractureEvent, ...]
    seed: int
    ranges: FractureRanges

    def to_json(self) -> str:
        return json.dumps(
            {
                "seed": self.seed,
                "ranges": asdict(self.ranges),
                "events": [asdict(e) for e in self.events],
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "FracturePlan":
        d = json.loads(text)
        rng_d = d["ranges"]
        ranges = FractureRanges(
            n_events=tuple(rng_d["n_events"]),
            radius_frac=tuple(rng_d["radius_frac"]),
            rescue_count=tuple(rng_d["rescue_count"]),
            rescue_shell=tuple(rng_d["rescue_shell"]),
        )
        events = tuple(
            FractureEvent(
                center=tuple(e["center"]),
                radius=e["radius"],
                rescue_points=tuple(tuple(q) for q in e["rescue_points"]),
                r_min=e["r_min"],
                r_max=e["r_max"],
            )
            for e in d["events"]
        )
        return cls(events=events, seed=d["seed"], ranges=ranges)


def _sample_shell(rng, center, r_min, r_max, n):
    """Uniform points in the spherical shell [r_min, r_max] around center."""
    if n == 0:
        return np.empty((0, 3))
    direction = rng.normal(size=(n, 3))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    u = rng.uniform(size=n)
    radius = np.cbrt(u * (r_max**3 - r_min**3) + r_min**3)
    return np.asarray(center) + direction * radius[:, None]


def sample_fracture_plan(
    bbox: np.ndarray, ranges: FractureRanges, seed: int
) -> FracturePlan:
    """Draw a reproducible set of fracture events near a bounding box.

    Break centres are uniform in the bbox inflated by 20% per axis so
    rim and base breaks stay reachable.
    """
    ranges.validate()
    bbox = np.asarray(bbox, dtype=float)
    rng = np.random.default_rng(seed)

    lo, hi = bbox[0], bbox[1]
    span = hi - lo
    lo_inf = lo - 0.2 * span
    hi_inf = hi + 0.2 * span
    diag = float(np.linalg.norm(span))

    n_events = int(rng.integers(ranges.n_events[0], ranges.n_events[1] + 1))
    events = []
    for _ in range(n_events):
        center = rng.uniform(lo_inf, hi_inf)
        radius = diag * rng.uniform(*ranges.radius_frac)
        n_rescue = int(rng.integers(ranges.rescue_count[0], ranges.rescue_count[1] + 1))
        r_min = ranges.rescue_shell[0] * radius
        r_max = ranges.rescue_shell[1] * radius
        rescues = _sample_shell(rng, center, r_min, r_max, n_rescue)
        events.append(
            FractureEvent(
                center=tuple(center),
                radius=radius,
                rescue_points=tuple(tuple(q) for q in rescues),
                r_min=r_min,
                r_max=r_max,
            )
        )
    return FracturePlan(events=tuple(events), seed=seed, ranges=ranges)


def apply_fracture(mesh: VesselMesh, event: FractureEvent) -> np.ndarray:
    """Mark vertices removed by one break; returns the updated mask.

    A vertex v goes iff |v - P| <= R and |v - P| < |v - q| for every
    rescue point q (ties pardon the vertex). Already-removed vertices
    stay removed.
    """
    p = np.asarray(event.center)
    d_p = np.linalg.norm(mesh.vertices - p, axis=1)
    condemned = d_p <= event.radius
    if event.rescue_points:
        rescues = np.asarray(event.rescue_points)
        # (n_verts, n_rescue) distances; strict inequality required
        d_q = np.linalg.norm(mesh.vertices[:, None, :] - rescues[None, :, :], axis=2)
        condemned &= d_p < d_q.min(axis=1)
    mesh.removed |= condemned
    return mesh.removed


def apply_plan(mesh: VesselMesh, plan: FracturePlan) -> np.ndarray:
    for event in plan.events:
        apply_fracture(mesh, event)
    return mesh.removed
