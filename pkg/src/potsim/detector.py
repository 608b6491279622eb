"""Vessel localization in photographs.

The image is reduced to 30x30, each pixel becomes a feature row
(saturation, value, pos_x, pos_y) normalized to [0, 1], the rows are
clustered with DBSCAN (eps=0.1, min_pts=5), small clusters are dropped,
the most central surviving cluster is taken as the pot and a square crop
1.5x its extent is cut from the original image.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import ImageTooSmall, NoPotFound

GRID = 30
DBSCAN_EPS = 0.1
DBSCAN_MIN_PTS = 5
MIN_CLUSTER_PIXELS = 25
CROP_SCALE = 1.5
NOISE = -1


@dataclass(frozen=True)
class CropBox:
    center_x: int  # original-image pixels
    center_y: int
    side: int
    x0: int
    y0: int
    x1: int  # exclusive
    y1: int


def downscale_30(image: np.ndarray) -> np.ndarray:
    """Area-average resample to 30x30 RGB (uint8).

    Each output pixel is the mean of its (possibly fractional) source
    rectangle, so the map is exact for constant images.
    """
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError("expected an (H, W, 3) RGB array")
    h, w = img.shape[:2]
    if h < GRID or w < GRID:
        raise ImageTooSmall(f"image {w}x{h} smaller than {GRID}x{GRID}")
    wr = _overlap_weights(h)
    wc = _overlap_weights(w)
    out = np.einsum("ri,ijc,sj->rsc", wr, img.astype(float), wc, optimize=True)
    return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)


def _overlap_weights(n: int) -> np.ndarray:
    """(GRID, n) matrix of fractional row/column coverage, rows sum to 1."""
    weights = np.zeros((GRID, n))
    step = n / GRID
    for k in range(GRID):
        lo, hi = k * step, (k + 1) * step
        i0, i1 = int(np.floor(lo)), int(np.ceil(hi))
        for i in range(i0, min(i1, n)):
            weights[k, i] = min(hi, i + 1) - max(lo, i)
    return weights / step


def features(image30: np.ndarray) -> np.ndarray:
    """(900, 4) rows of (saturation, value, pos_x, pos_y), min-max scaled.

    Hexcone HSV: S = (max-min)/max (0 when max=0), V = max/255. Positions
    are pixel centres (j+0.5)/30, (i+0.5)/30 before normalization. Each
    column is min-max normalized over the 900 rows; a constant column
    maps to 0.
    """
    img = np.asarray(image30, dtype=float)
    if img.shape != (GRID, GRID, 3):
        raise ValueError("expected a 30x30 RGB image")
    cmax = img.max(axis=2)
    cmin = img.min(axis=2)
    with np.errstate(divide="ignore", invalid="ignore"):
        sat = np.where(cmax > 0, (cmax - cmin) / np.where(cmax > 0, cmax, 1), 0.0)
    val = cmax / 255.0
    jj, ii = np.meshgrid(np.arange(GRID), np.arange(GRID))
    pos_x = (jj + 0.5) / GRID
    pos_y = (ii + 0.5) / GRID
    feats = np.column_stack(
        [sat.ravel(), val.ravel(), pos_x.ravel(), pos_y.ravel()]
    )
    lo = feats.min(axis=0)
    hi = feats.max(axis=0)
    span = hi - lo
    safe = np.where(span > 0, span, 1.0)
    feats = (feats - lo) / safe
    feats[:, span == 0] = 0.0
    return feats


def dbscan(
    feats: np.ndarray, eps: float = DBSCAN_EPS, min_pts: int = DBSCAN_MIN_PTS
) -> np.ndarray:
    """Classic DBSCAN, Euclidean metric, deterministic row-major scan.

    Returns per-row cluster ids (dense from 0) with -1 marking noise.
    Border points join the first core cluster that reaches them.
    """
    x = np.asarray(feats, dtype=float)
    n = len(x)
    d2 = np.sum((x[:, None, :] - x[None, :, :]) ** 2, axis=2)
    adj = d2 <= eps * eps
    neighbour_count = adj.sum(axis=1)  # includes the point itself
    core = neighbour_count >= min_pts

    labels = np.full(n, NOISE, dtype=int)
    visited = np.zeros(n, dtype=bool)
    cluster = 0
    for i in range(n):
        if visited[i] or not core[i]:
            continue
        # breadth-first expansion in index order
        labels[i] = cluster
        visited[i] = True
        queue = [i]
        while queue:
            p = queue.pop(0)
            if not core[p]:
                continue
            for q in np.nonzero(adj[p])[0]:
                if labels[q] == NOISE:
                    labels[q] = cluster
                if not visited[q]:
                    visited[q] = True
                    queue.append(q)
        cluster += 1
    return labels


def select_pot_cluster(labels: np.ndarray, feats: np.ndarray) -> int:
    """Most central cluster among those with >= 25 pixels.

    Centrality is the mean of (pos_x - 0.5)^2 + (pos_y - 0.5)^2 over the
    cluster's rows; ties break toward the lowest cluster id.
    """
    best = None
    best_score = None
    for cid in range(labels.max() + 1):
        members = labels == cid
        if members.sum() < MIN_CLUSTER_PIXELS:
            continue
        pos = feats[members, 2:4]
        score = float(np.mean((pos[:, 0] - 0.5) ** 2 + (pos[:, 1] - 0.5) ** 2))
        if best_score is None or score < best_score:
            best, best_score = cid, score
    if best is None:
        raise NoPotFound("no cluster survives the 25-pixel size filter")
    return best


def crop_from_cluster(
    image: np.ndarray, labels: np.ndarray, pot_id: int
) -> tuple[np.ndarray, CropBox]:
    """Square crop around the selected cluster, side 1.5x its extent.

    Cluster extents and centre are measured on the 30-grid (pixel-centre
    coordinates) and scaled back to the original resolution. A window
    exceeding the image bounds is shifted inside; if the image itself is
    smaller than the window, it is truncated at the image size.
    """
    img = np.asarray(image)
    h, w = img.shape[:2]
    members = np.nonzero(labels == pot_id)[0]
    rows = members // GRID
    cols = members % GRID
    scale_x = w / GRID
    scale_y = h / GRID
    lx = (cols.max() - cols.min() + 1) * scale_x
    ly = (rows.max() - rows.min() + 1) * scale_y
    cx = (cols.mean() + 0.5) * scale_x
    cy = (rows.mean() + 0.5) * scale_y
    side = int(CROP_SCALE * max(lx, ly))
    half = side // 2
    side = 2 * half + 1

    x0, y0 = int(round(cx)) - half, int(round(cy)) - half
    x0 = min(max(x0, 0), max(w - side, 0))
    y0 = min(max(y0, 0), max(h - side, 0))
    x1 = min(x0 + side, w)
    y1 = min(y0 + side, h)
    box = CropBox(
        center_x=int(round(cx)),
        center_y=int(round(cy)),
        side=side,
        x0=x0,
        y0=y0,
        x1=x1,
        y1=y1,
    )
    return img[y0:y1, x0:x1].copy(), box


def detect_and_crop(image: np.ndarray):
    """Full pipeline: downscale, features, cluster, select, crop.

    Returns (crop, CropBox, info dict).
    """
    small = downscale_30(image)
    feats = features(small)
    labels = dbscan(feats)
    pot = select_pot_cluster(labels, feats)
    crop, box = crop_from_cluster(image, labels, pot)
    info = {
        "selected_cluster": int(pot),
        "cluster_size": int((labels == pot).sum()),
        "cluster_count": int(labels.max() + 1),
        "noise_pixels": int((labels == NOISE).sum()),
    }
    return crop, box, info


def detect_batch(in_dir, out_dir) -> list[dict]:
    """Crop every PNG/JPEG under in_dir, mirroring the directory layout.

    Each crop gets a JSON sidecar with its CropBox and cluster stats.
    """
    from PIL import Image

    results = []
    for root, _, files in os.walk(in_dir):
        rel_root = os.path.relpath(root, in_dir)
        for name in sorted(files):
            if not name.lower().endswith((".png", ".jpg", ".jpeg")):
                continue
            rel = os.path.normpath(os.path.join(rel_root, name))
            src = os.path.join(in_dir, rel)
            dst = os.path.join(out_dir, rel)
            os.makedirs(os.path.dirname(dst), exist_ok=True)
            img = np.asarray(Image.open(src).convert("RGB"))
            record = {"image": rel}
            try:
                crop, box, info = detect_and_crop(img)
            except (NoPotFound, ImageTooSmall) as exc:
                record["error"] = f"{type(exc).__name__}: {exc}"
            else:
                Image.fromarray(crop, mode="RGB").save(dst, format="PNG")
                record["crop_box"] = {
                    "center_x": box.center_x,
                    "center_y": box.center_y,
                    "side": box.side,
                    "x0": box.x0,
                    "y0": box.y0,
                    "x1": box.x1,
                    "y1": box.y1,
                }
                record.update(info)
                with open(dst + ".json", "w") as fh:
                    json.dump(record, fh, indent=2)
            results.append(record)
    return results
