"""Vessel catalog, class aggregation and train/validation/test splits."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientVessels, UnknownForm
from .render import VESSEL_CLASSES

N_SPLITS = 20
N_TRAIN = 4
N_VAL = 2

# Dragendorff forms folded into the Dr18 class (plus rouletted variants)
_DR18_FORMS = {"18", "18-31", "31"}
_BASE_FORMS = {c[2:] for c in VESSEL_CLASSES}

# training constants recorded for external trainers; training itself is
# out of scope for this package
EXPERIMENT_CONFIG = {
    "architectures": {
        "inception_v3": {"image_size": 299, "learning_rate": 5e-5},
        "mobilenet_v2": {"image_size": 224, "learning_rate": 5e-5},
        "resnet50_v2": {"image_size": 224, "learning_rate": 5e-5},
        "vgg19": {"image_size": 224, "learning_rate": 5e-6},
    },
    "head": ["global_average_pooling", "dropout", "dense_softmax"],
    "dropout": 0.3,
    "optimizer": "adam",
    "batch_size": 8,
    "early_stopping_patience_epochs": 10,
    "model_selection": "best_validation_categorical_crossentropy",
    "loss": "categorical_crossentropy",
    "n_splits": N_SPLITS,
    "train_vessels_per_class": N_TRAIN,
    "validation_vessels_per_class": N_VAL,
    "n_classes": len(VESSEL_CLASSES),
}


def aggregate_class(raw_form: str) -> str:
    """Map a raw Dragendorff form label to one of the 9 classes.

    Rouletted ("R") variants fold into their plain form; forms 18, 18-31
    and 31 all fold into Dr18. Idempotent on its own outputs.
    """
    form = str(raw_form).strip()
    if form.startswith("Dr"):
        form = form[2:]
    if form.endswith("R"):
        form = form[:-1]
    if form in _DR18_FORMS:
        return "Dr18"
    if form in _BASE_FORMS:
        return f"Dr{form}"
    raise UnknownForm(f"unrecognized form {raw_form!r}")


@dataclass
class VesselRecord:
    vessel_id: str
    raw_form: str
    damaged: bool
    photos: list[tuple[str, str]] = field(default_factory=list)  # (photo_id, view)

    @property
    def class_label(self) -> str:
        return aggregate_class(self.raw_form)


@dataclass
class Catalog:
    vessels: dict[str, VesselRecord]

    def by_class(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {c: [] for c in VESSEL_CLASSES}
        for vid in sorted(self.vessels):
            out.setdefault(self.vessels[vid].class_label, []).append(vid)
        return out

    @classmethod
    def load_csv(cls, path) -> "Catalog":
        """One row per photo: photo_id, vessel_id, raw_form, view_label, damaged."""
        vessels: dict[str, VesselRecord] = {}
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                vid = row["vessel_id"]
                damaged = str(row["damaged"]).strip().lower() in ("1", "true", "yes")
                rec = vessels.get(vid)
                if rec is None:
                    rec = VesselRecord(vid, row["raw_form"], damaged)
                    vessels[vid] = rec
                rec.photos.append((row["photo_id"], row["view_label"]))
        return cls(vessels)

    def save_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["photo_id", "vessel_id", "raw_form", "view_label", "damaged"])
            for vid in sorted(self.vessels):
                rec = self.vessels[vid]
                for photo_id, view in rec.photos:
                    w.writerow([photo_id, vid, rec.raw_form, view, int(rec.damaged)])


@dataclass
class SplitPlan:
    """20 independent draws of 4 train + 2 validation vessels per class."""

    splits: list[dict[str, dict[str, list[str]]]]  # [split][class] -> sets
    seed: int

    def to_json(self) -> str:
        return json.dumps({"seed": self.seed, "splits": self.splits}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "SplitPlan":
        d = json.loads(text)
        return cls(splits=d["splits"], seed=d["seed"])


def make_splits(catalog: Catalog, seed: int, n_splits: int = N_SPLITS) -> SplitPlan:
    """Draw the train/validation/test partitions.

    Per split and class: 4 train then 2 validation vessels without
    replacement, remainder to test. Draws across splits are independent.
    """
    groups = {c: v for c, v in catalog.by_class().items() if v}
    for cls_label, vids in groups.items():
        if len(vids) < N_TRAIN + N_VAL + 1:
            raise InsufficientVessels(
                f"class {cls_label} has {len(vids)} vessels; "
                f"needs at least {N_TRAIN + N_VAL + 1}"
            )
    rng = np.random.default_rng(seed)
    splits = []
    for _ in range(n_splits):
        split: dict[str, dict[str, list[str]]] = {}
        for cls_label in sorted(groups):
            vids = np.array(groups[cls_label])
            order = rng.permutation(len(vids))
            shuffled = [str(v) for v in vids[order]]
            split[cls_label] = {
                "train": sorted(shuffled[:N_TRAIN]),
                "validation": sorted(shuffled[N_TRAIN : N_TRAIN + N_VAL]),
                "test": sorted(shuffled[N_TRAIN + N_VAL :]),
            }
        splits.append(split)
    return SplitPlan(splits=splits, seed=seed)


def mol_prior(catalog: Catalog) -> dict[str, float]:
    """Collection prior: vessels of class i over total vessels."""
    counts = {c: len(v) for c, v in catalog.by_class().items()}
    total = sum(counts.values())
    if total == 0:
        raise ValueError("empty catalog")
    return {c: n / total for c, n in counts.items() if n > 0}


def fig2_catalog() -> Catalog:
    """Synthetic catalog matching the published per-class vessel counts.

    Used for protocol-level checks (splits, priors); photo lists are
    placeholders with one photo each.
    """
    counts = {
        "Dr18": 51,
        "Dr24-25": 8,
        "Dr27": 28,
        "Dr29": 18,
        "Dr33": 13,
        "Dr35": 12,
        "Dr36": 15,
        "Dr37": 9,
        "Dr38": 8,
    }
    vessels = {}
    for cls_label, n in counts.items():
        form = cls_label[2:]
        for k in range(n):
            vid = f"{cls_label}-v{k:03d}"
            vessels[vid] = VesselRecord(
                vid, form, damaged=False, photos=[(f"{vid}-p0", "standard")]
            )
    return Catalog(vessels)
