"""Prior-weighted evaluation of external classifier predictions.

Accuracy weights each test photo by 1/(photos of its vessel) x
1/(test vessels of its class) x class prior, so no vessel or photo is
privileged. Cross-split statistics, normalized confusion matrices,
major-confusion flags, subgroup breakdowns and the VC sample-size bound
live here too.
"""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .dataset import Catalog
from .errors import EmptyClassInTest, NoSolution, TooFewSplits
from .render import VESSEL_CLASSES

BOOTSTRAP_RESAMPLES = 10_000


@dataclass(frozen=True)
class PredictionRow:
    split_id: int
    photo_id: str
    vessel_id: str
    true_class: str
    predicted_class: str


def load_predictions(path) -> list[PredictionRow]:
    rows = []
    seen = set()
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            key = (r["split_id"], r["photo_id"])
            if key in seen:
                raise ValueError(f"duplicate (split_id, photo_id) {key}")
            seen.add(key)
            rows.append(
                PredictionRow(
                    split_id=int(r["split_id"]),
                    photo_id=r["photo_id"],
                    vessel_id=r["vessel_id"],
                    true_class=r["true_class"],
                    predicted_class=r["predicted_class"],
                )
            )
    return rows


def save_predictions(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["split_id", "photo_id", "vessel_id", "true_class", "predicted_class"])
        for r in rows:
            w.writerow([r.split_id, r.photo_id, r.vessel_id, r.true_class, r.predicted_class])


def by_split(rows) -> dict[int, list[PredictionRow]]:
    out: dict[int, list[PredictionRow]] = defaultdict(list)
    for r in rows:
        out[r.split_id].append(r)
    return dict(out)


def uniform_prior(classes) -> dict[str, float]:
    classes = list(classes)
    return {c: 1.0 / len(classes) for c in classes}


def weights(test_rows, prior: dict[str, float]) -> np.ndarray:
    """Per-row sampling weight for one split's test rows.

    weight = 1/n_photos(vessel) * 1/n_pots(class) * prior(class). Weights
    sum to 1 when the prior does. Raises EmptyClassInTest when the prior
    gives mass to a class with no test vessels.
    """
    n_photos: dict[tuple[str, str], int] = defaultdict(int)
    class_vessels: dict[str, set] = defaultdict(set)
    for r in test_rows:
        n_photos[(r.true_class, r.vessel_id)] += 1
        class_vessels[r.true_class].add(r.vessel_id)
    for cls, p in prior.items():
        if p > 0 and not class_vessels.get(cls):
            raise EmptyClassInTest(f"class {cls} has no test vessels")
    return np.array(
        [
            prior.get(r.true_class, 0.0)
            / n_photos[(r.true_class, r.vessel_id)]
            / len(class_vessels[r.true_class])
            for r in test_rows
        ]
    )


def acc_single(test_rows, w: np.ndarray) -> float:
    """Weighted accuracy of one split: sum of weights over correct rows."""
    if len(test_rows) != len(w):
        raise ValueError("rows and weights are misaligned")
    hits = np.fromiter(
        (r.true_class == r.predicted_class for r in test_rows), bool, len(w)
    )
    return float(w[hits].sum())


def aggregate(
    split_accs, bootstrap_seed: int = 0, n_resamples: int = BOOTSTRAP_RESAMPLES
) -> dict:
    """Cross-split mean, two-sigma bootstrap error of the mean,
    Bessel-corrected variance, min and max."""
    accs = np.asarray(list(split_accs), dtype=float)
    if len(accs) < 2:
        raise TooFewSplits("need at least 2 split accuracies")
    mean = float(accs.mean())
    variance = float(accs.var(ddof=1))
    rng = np.random.default_rng(bootstrap_seed)
    idx = rng.integers(0, len(accs), size=(n_resamples, len(accs)))
    boot_means = accs[idx].mean(axis=1)
    return {
        "mean": mean,
        "two_sigma_bootstrap": float(2.0 * boot_means.std()),
        "variance": variance,
        "sigma": math.sqrt(variance),
        "min": float(accs.min()),
        "max": float(accs.max()),
        "n_splits": len(accs),
    }


def confusion(rows, classes=VESSEL_CLASSES) -> np.ndarray:
    """Normalized confusion matrix averaged over splits.

    m[i, j] = (1/n_splits) sum over splits and rows of
    (1/n_photos) (1/n_pots) delta(true, i) delta(pred, j). Rows of
    classes with test data in every split sum to 1.
    """
    splits = by_split(rows)
    n_splits = len(splits)
    index = {c: k for k, c in enumerate(classes)}
    m = np.zeros((len(classes), len(classes)))
    for test_rows in splits.values():
        n_photos: dict[tuple[str, str], int] = defaultdict(int)
        class_vessels: dict[str, set] = defaultdict(set)
        for r in test_rows:
            n_photos[(r.true_class, r.vessel_id)] += 1
            class_vessels[r.true_class].add(r.vessel_id)
        for r in test_rows:
            wgt = 1.0 / n_photos[(r.true_class, r.vessel_id)] / len(
                class_vessels[r.true_class]
            )
            m[index[r.true_class], index[r.predicted_class]] += wgt
    return m / n_splits


def major_confusions(matrix: np.ndarray) -> list[tuple[int, int]]:
    """Off-diagonal cells exceeding double the uniform-error expectation.

    Flag (i, j), i != j, iff m[i, j] > 2 (1 - m[i, i]) / (n_classes - 1).
    """
    n = matrix.shape[0]
    flags = []
    for i in range(n):
        threshold = 2.0 * (1.0 - matrix[i, i]) / (n - 1)
        for j in range(n):
            if i != j and matrix[i, j] > threshold:
                flags.append((i, j))
    return flags


def _photo_labels(catalog: Catalog) -> dict[str, str]:
    return {
        photo_id: view
        for rec in catalog.vessels.values()
        for photo_id, view in rec.photos
    }


def _subgroup_of(row: PredictionRow, catalog: Catalog, grouping: str, views) -> str:
    if grouping == "damaged":
        rec = catalog.vessels.get(row.vessel_id)
        if rec is None:
            raise KeyError(f"vessel {row.vessel_id} not in catalog")
        return "damaged" if rec.damaged else "non_damaged"
    if grouping == "view_label":
        if row.photo_id not in views:
            raise KeyError(f"photo {row.photo_id} not in catalog")
        return views[row.photo_id]
    if grouping == "class":
        return row.true_class
    raise ValueError(f"unknown grouping {grouping!r}")


def subgroup_report(rows, catalog: Catalog, grouping: str) -> dict:
    """Per-group, per-class accuracy with within-subgroup reweighting.

    For each (group, split, class) the photo/vessel counts are recomputed
    on the restricted rows, giving a per-class accuracy; the report
    carries the cross-split mean and the average number of subgroup test
    vessels per split (n_bar). Classes with no subgroup rows in any split
    are listed as absent.
    """
    views = _photo_labels(catalog)
    groups: dict[str, list[PredictionRow]] = defaultdict(list)
    for r in rows:
        groups[_subgroup_of(r, catalog, grouping, views)].append(r)

    n_splits = len(by_split(rows))
    report: dict = {}
    for group, grows in sorted(groups.items()):
        per_class_accs: dict[str, list[float]] = defaultdict(list)
        per_class_counts: dict[str, int] = defaultdict(int)
        for test_rows in by_split(grows).values():
            n_photos: dict[tuple[str, str], int] = defaultdict(int)
            class_vessels: dict[str, set] = defaultdict(set)
            for r in test_rows:
                n_photos[(r.true_class, r.vessel_id)] += 1
                class_vessels[r.true_class].add(r.vessel_id)
            acc: dict[str, float] = defaultdict(float)
            for r in test_rows:
                if r.true_class == r.predicted_class:
                    acc[r.true_class] += (
                        1.0
                        / n_photos[(r.true_class, r.vessel_id)]
                        / len(class_vessels[r.true_class])
                    )
            for cls, vessels in class_vessels.items():
                per_class_accs[cls].append(acc[cls])
                per_class_counts[cls] += len(vessels)
        table = {}
        for cls in VESSEL_CLASSES:
            if cls in per_class_accs:
                table[cls] = {
                    "accuracy": float(np.mean(per_class_accs[cls])),
                    "n_bar": per_class_counts[cls] / n_splits,
                    "splits_present": len(per_class_accs[cls]),
                }
            else:
                table[cls] = {"absent": True}
        report[group] = table
    return report


def vc_bound(n: int, h: float, delta: float) -> float:
    """Risk-gap bound 2 sqrt(2 (h ln(2eN/h) + ln(2/delta)) / N)."""
    return 2.0 * math.sqrt(
        2.0 * (h * math.log(2.0 * math.e * n / h) + math.log(2.0 / delta)) / n
    )


def min_train_size(h: float, delta: float, gap: float) -> tuple[int, float]:
    """Smallest N (in the decreasing regime) with vc_bound(N) <= gap.

    Exponential bracketing followed by binary search; raises NoSolution
    if the bracket would exceed 2**63.
    """
    if h < 1 or not (0.0 < delta < 1.0) or gap <= 0:
        raise ValueError("need h >= 1, 0 < delta < 1, gap > 0")
    hi = max(int(h), 2)
    while vc_bound(hi, h, delta) > gap:
        hi *= 2
        if hi > 2**63:
            raise NoSolution("bracket exceeded 2**63")
    lo = hi // 2
    # the bound is decreasing on [lo, hi] here; find the first N <= gap
    while lo + 1 < hi:
        mid = (lo + hi) // 2
        if vc_bound(mid, h, delta) <= gap:
            hi = mid
        else:
            lo = mid
    return hi, vc_bound(hi, h, delta)


def evaluate(
    rows,
    catalog: Catalog | None = None,
    priors=("uniform",),
    classes=None,
    bootstrap_seed: int = 0,
) -> dict:
    """Full evaluation report over a prediction set.

    priors: iterable of "uniform" and/or "mol" ("mol" needs a catalog).
    Returns a JSON-serializable dict with per-prior accuracy statistics,
    the confusion matrix, major-confusion flags and, when a catalog is
    given, damaged/view/class subgroup tables.
    """
    from .dataset import mol_prior

    if classes is None:
        present = {r.true_class for r in rows}
        classes = [c for c in VESSEL_CLASSES if c in present]
    splits = by_split(rows)

    report: dict = {"classes": list(classes), "n_splits": len(splits), "priors": {}}
    for prior_name in priors:
        if prior_name == "uniform":
            prior = uniform_prior(classes)
        elif prior_name == "mol":
            if catalog is None:
                raise ValueError("MoL prior requires a catalog")
            prior = mol_prior(catalog)
        else:
            raise ValueError(f"unknown prior {prior_name!r}")
        accs = {}
        for sid in sorted(splits):
            w = weights(splits[sid], prior)
            accs[sid] = acc_single(splits[sid], w)
        report["priors"][prior_name] = {
            "per_split": accs,
            "summary": aggregate(accs.values(), bootstrap_seed=bootstrap_seed),
        }

    m = confusion(rows, classes=classes)
    flags = major_confusions(m)
    report["confusion_matrix"] = m.tolist()
    report["major_confusions"] = [
        {"true": classes[i], "predicted": classes[j]} for i, j in flags
    ]
    if catalog is not None:
        report["subgroups"] = {
            grouping: subgroup_report(rows, catalog, grouping)
            for grouping in ("damaged", "view_label", "class")
        }
    return report


def format_summary_table(report: dict) -> str:
    """Human-readable accuracy table (mean, two-sigma, sigma, min, max)."""
    lines = [
        f"{'prior':<10} {'acc':>8} {'2s_boot':>8} {'sigma':>8} {'min':>6} {'max':>6}"
    ]
    for prior_name, block in report["priors"].items():
        s = block["summary"]
        lines.append(
            f"{prior_name:<10} {s['mean']:>8.4f} {s['two_sigma_bootstrap']:>8.4f} "
            f"{s['sigma']:>8.4f} {s['min']:>6.2f} {s['max']:>6.2f}"
        )
    return "\n".join(lines)


def format_confusion(report: dict) -> str:
    classes = report["classes"]
    m = np.asarray(report["confusion_matrix"])
    flagged = {(f["true"], f["predicted"]) for f in report["major_confusions"]}
    width = max(len(c) for c in classes) + 1
    head = " " * width + "".join(f"{c:>{width}}" for c in classes)
    lines = [head]
    for i, ci in enumerate(classes):
        cells = []
        for j, cj in enumerate(classes):
            mark = "*" if (ci, cj) in flagged else " "
            cells.append(f"{m[i, j]:>{width - 1}.2f}{mark}")
        lines.append(f"{ci:<{width}}" + "".join(cells))
    lines.append("(* = major confusion)")
    return "\n".join(lines)
