"""Bulk synthetic dataset generation.

Per image: pick a profile of the class, soften and jitter it, revolve,
sample and apply fractures, build a randomized scene and rasterize.
Every image gets its own seed derived from the master seed, so renders
are byte-identical regardless of worker count.
"""

from __future__ import annotations

import csv
import json
import os
import shutil
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from importlib import resources

import numpy as np

from .errors import DegenerateScene
from .fracture import FractureRanges, apply_plan, sample_fracture_plan
from .mesh import mesh_bbox, revolve
from .profile import ProfileCurve, jitter_profile, smooth_profile
from .render import (
    VESSEL_CLASSES,
    LightSpec,
    MaterialSpec,
    SceneSpec,
    ShotPlan,
    decorate_for_class,
    rasterize,
    save_png,
    shot_plan_catalog,
    view_label_for,
)

MANIFEST_COLUMNS = [
    "image_path",
    "class",
    "vessel_instance",
    "view_label",
    "damaged_flag",
    "master_seed",
    "image_seed",
    "bbox_x0",
    "bbox_y0",
    "bbox_x1",
    "bbox_y1",
]


@dataclass
class RandomConfig:
    """Randomization knobs for one dataset run (JSON-serializable)."""

    per_class: int = 10
    image_size: int = 512
    segments: int = 128
    smooth_window: int = 3
    profile_jitter_sigma: float = 0.002
    fracture: FractureRanges = field(default_factory=FractureRanges)
    damage_threshold: float = 0.15  # removed-vertex fraction labelled damaged
    light_kinds: tuple[str, ...] = ("directional", "spot", "point")
    intensity_range: tuple[float, float] = (0.12, 0.22)
    ambient_range: tuple[float, float] = (0.75, 0.85)
    base_color: tuple[float, float, float] = (0.72, 0.36, 0.24)
    color_jitter: float = 0.08
    specular_range: tuple[float, float] = (0.0, 0.08)
    background_color: tuple[float, float, float] = (0.68, 0.78, 0.88)
    background_jitter: float = 0.10  # +-10% per channel
    distance_range: tuple[float, float] = (1.5, 2.0)
    angle_jitter_std: float = 5.0
    max_frame_fill: float = 0.95  # auto-sieve: reject closer framings

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "RandomConfig":
        d = json.loads(text)
        if "fracture" in d:
            d["fracture"] = FractureRanges(
                **{k: tuple(v) for k, v in d["fracture"].items()}
            )
        for key, val in list(d.items()):
            if isinstance(val, list):
                d[key] = tuple(val)
        return cls(**d)


def bundled_profiles() -> dict[str, list[ProfileCurve]]:
    """Sample profile curves shipped with the package, one per class."""
    out: dict[str, list[ProfileCurve]] = {}
    root = resources.files("potsim").joinpath("data/profiles")
    for cls in VESSEL_CLASSES:
        path = root.joinpath(f"{cls}.csv")
        with resources.as_file(path) as p:
            out[cls] = [ProfileCurve.load_csv(p)]
    return out


def load_profiles(directory) -> dict[str, list[ProfileCurve]]:
    """Load <class>*.csv profile files from a directory."""
    out: dict[str, list[ProfileCurve]] = {}
    for name in sorted(os.listdir(directory)):
        if not name.endswith(".csv"):
            continue
        cls = name[:-4].split("_")[0]
        if cls in VESSEL_CLASSES:
            out.setdefault(cls, []).append(
                ProfileCurve.load_csv(os.path.join(directory, name))
            )
    return out


def image_seed_for(master_seed: int, class_index: int, image_index: int) -> int:
    ss = np.random.SeedSequence([int(master_seed), class_index, image_index])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def render_one(
    cls: str,
    profiles: list[ProfileCurve],
    config: RandomConfig,
    image_seed: int,
):
    """Build and rasterize one randomized image. Returns (img, meta dict)."""
    rng = np.random.default_rng(image_seed)

    curve = profiles[int(rng.integers(len(profiles)))]
    window = config.smooth_window
    if window > 1 and window <= len(curve.points):
        curve = smooth_profile(curve, window if window % 2 else window + 1)
    if config.profile_jitter_sigma > 0:
        curve = jitter_profile(
            curve, config.profile_jitter_sigma, int(rng.integers(2**63))
        )

    mesh = revolve(curve, segments=config.segments)
    bbox = mesh_bbox(mesh)
    # refuse fracture outcomes that destroy (nearly) the whole vessel
    for _ in range(5):
        plan = sample_fracture_plan(bbox, config.fracture, int(rng.integers(2**63)))
        trial = mesh.removed.copy()
        mesh.removed = np.zeros_like(mesh.removed)
        apply_plan(mesh, plan)
        if mesh.removed_fraction() < 0.45 and len(mesh.visible_triangles) > 0:
            break
        mesh.removed = trial
    else:
        mesh.removed = np.zeros_like(mesh.removed)

    damaged = mesh.removed_fraction() > config.damage_threshold

    catalog = shot_plan_catalog(
        int(rng.integers(2**63)), jitter_std=config.angle_jitter_std
    )
    shot = catalog[int(rng.integers(len(catalog)))]
    distance = float(rng.uniform(*config.distance_range))
    shot = ShotPlan.make(shot.azimuth, shot.declination, shot.flipped, distance)

    kind = str(rng.choice(config.light_kinds))
    if kind == "directional":
        # random direction, kept fairly steep so shadows hug the base
        az = rng.uniform(0, 2 * np.pi)
        el = rng.uniform(np.pi / 3.2, np.pi / 2.2)
        vector = (
            -float(np.cos(el) * np.cos(az)),
            -float(np.cos(el) * np.sin(az)),
            -float(np.sin(el)),
        )
    else:
        diag = float(np.linalg.norm(bbox[1] - bbox[0]))
        az = rng.uniform(0, 2 * np.pi)
        vector = (
            float(1.5 * diag * np.cos(az)),
            float(1.5 * diag * np.sin(az)),
            float(rng.uniform(3.0, 5.0) * diag),
        )
    light = LightSpec(
        kind=kind,
        vector=vector,
        intensity=float(rng.uniform(*config.intensity_range)),
        ambient=float(rng.uniform(*config.ambient_range)),
    )

    base = np.asarray(config.base_color) * (
        1.0 + rng.uniform(-config.color_jitter, config.color_jitter, size=3)
    )
    material = MaterialSpec(
        base_color=tuple(np.clip(base, 0.0, 1.0)),
        specular_strength=float(rng.uniform(*config.specular_range)),
        decoration=decorate_for_class(cls, rng),
    )
    bg = np.asarray(config.background_color) * (
        1.0 + rng.uniform(-config.background_jitter, config.background_jitter, size=3)
    )
    background = tuple(np.clip(bg, 0.0, 1.0))

    for attempt in range(4):
        scene = SceneSpec(
            mesh=mesh,
            shot=shot,
            light=light,
            material=material,
            background_color=background,
            width=config.image_size,
            height=config.image_size,
            seed=image_seed,
        )
        img, mask = rasterize(scene, return_mask=True)
        ys, xs = np.nonzero(mask)
        fill = max(
            (xs.max() - xs.min() + 1) / config.image_size,
            (ys.max() - ys.min() + 1) / config.image_size,
        )
        if fill <= config.max_frame_fill:
            break
        # auto-sieve stand-in: pull the camera back and reshoot
        shot = ShotPlan.make(
            shot.azimuth, shot.declination, shot.flipped, shot.distance * 1.3
        )

    meta = {
        "class": cls,
        "view_label": view_label_for(shot.declination, shot.flipped),
        "damaged_flag": int(damaged),
        "image_seed": image_seed,
        "bbox_x0": int(xs.min()),
        "bbox_y0": int(ys.min()),
        "bbox_x1": int(xs.max()),
        "bbox_y1": int(ys.max()),
    }
    return img, meta


def _job(args):
    cls, class_index, image_index, profiles, config, master_seed, out_dir = args
    seed = image_seed_for(master_seed, class_index, image_index)
    img, meta = render_one(cls, profiles, config, seed)
    rel = os.path.join(cls, f"{cls}_{image_index:05d}.png")
    path = os.path.join(out_dir, rel)
    save_png(img, path)
    row = {
        "image_path": rel,
        "class": cls,
        "vessel_instance": f"{cls}-{image_index:05d}",
        "view_label": meta["view_label"],
        "damaged_flag": meta["damaged_flag"],
        "master_seed": master_seed,
        "image_seed": meta["image_seed"],
        "bbox_x0": meta["bbox_x0"],
        "bbox_y0": meta["bbox_y0"],
        "bbox_x1": meta["bbox_x1"],
        "bbox_y1": meta["bbox_y1"],
    }
    return row


def generate_dataset(
    profiles: dict[str, list[ProfileCurve]],
    config: RandomConfig,
    seed: int,
    out_dir,
    jobs: int = 1,
) -> list[dict]:
    """Render the full dataset and write manifest.csv. Returns the rows."""
    out_dir = str(out_dir)
    classes = [c for c in VESSEL_CLASSES if c in profiles]
    if not classes:
        raise ValueError("no profiles supplied for any known class")
    missing = sorted(set(profiles) - set(VESSEL_CLASSES))
    if missing:
        raise ValueError(f"profiles for unknown classes: {missing}")

    os.makedirs(out_dir, exist_ok=True)
    for cls in classes:
        os.makedirs(os.path.join(out_dir, cls), exist_ok=True)

    tasks = [
        (cls, VESSEL_CLASSES.index(cls), k, profiles[cls], config, seed, out_dir)
        for cls in classes
        for k in range(config.per_class)
    ]
    try:
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                rows = list(pool.map(_job, tasks, chunksize=4))
        else:
            rows = [_job(t) for t in tasks]
    except Exception:
        shutil.rmtree(out_dir, ignore_errors=True)
        raise

    with open(os.path.join(out_dir, "manifest.csv"), "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=MANIFEST_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
    return rows
