"""Profile extraction from digitised black-and-white vessel drawings.

A drawing is a binary bitmap (1 = black ink, 0 = white background). The
border of the inked region is detected from horizontal/vertical pixel
differences, chained into an ordered polyline, and converted to an axial
section in (radius, height) coordinates that the mesh module can revolve.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import AmbiguousTopology, AxisCrossing, InvalidWindow


@dataclass(frozen=True)
class Bitmap:
    """Binary image; pixels[i, j] with row i downward, column j rightward."""

    pixels: np.ndarray  # 2-D uint8 array of 0/1

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.uint8)
        if px.ndim != 2 or px.shape[0] < 2 or px.shape[1] < 2:
            raise ValueError("bitmap must be 2-D with width, height >= 2")
        if not np.isin(px, (0, 1)).all():
            raise ValueError("bitmap pixels must be 0 or 1")
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass
class ProfileCurve:
    """Ordered polyline of (radius, height) points in physical units.

    ``closed`` marks curves whose last point connects back to the first
    (a drawing of a full wall section); it controls end handling in
    smoothing and strip closure when revolving.
    """

    points: np.ndarray  # (n, 2) float array, columns (radius, height)
    scale: float = 1.0
    closed: bool = False

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 1:
            raise ValueError("curve needs an (n, 2) point array")
        if (pts[:, 0] < 0).any():
            raise ValueError("negative radius in profile curve")
        self.points = pts

    @property
    def radii(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def heights(self) -> np.ndarray:
        return self.points[:, 1]

    def save_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["radius", "height"])
            for r, h in self.points:
                w.writerow([repr(float(r)), repr(float(h))])

    @classmethod
    def load_csv(cls, path, scale: float = 1.0, closed: bool = False) -> "ProfileCurve":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or [c.strip() for c in rows[0]] != ["radius", "height"]:
            raise ValueError(f"{path}: expected header 'radius,height'")
        pts = np.array([[float(r), float(h)] for r, h in rows[1:]], dtype=float)
        return cls(pts, scale=scale, closed=closed)


def load_bitmap(path) -> Bitmap:
    """Read a 1-bit PNG or ASCII PBM; luminance < 128 maps to ink (1)."""
    path = str(path)
    if path.lower().endswith(".pbm"):
        return _load_pbm(path)
    from PIL import Image

    img = Image.open(path).convert("L")
    arr = np.asarray(img)
    return Bitmap((arr < 128).astype(np.uint8))


def _load_pbm(path) -> Bitmap:
    with open(path) as fh:
        tokens = []
        for line in fh:
            line = line.split("#", 1)[0]
            tokens.extend(line.split())
    if not tokens or tokens[0] != "P1":
        raise ValueError(f"{path}: not an ASCII PBM (P1) file")
    width, height = int(tokens[1]), int(tokens[2])
    bits = np.array([int(t) for t in tokens[3:]], dtype=np.uint8)
    if bits.size != width * height:
        raise ValueError(f"{path}: pixel count mismatch")
    # PBM: 1 = black = ink, same convention as ours
    return Bitmap(bits.reshape(height, width))


def detect_border(bitmap: Bitmap) -> set[tuple[int, int]]:
    """Pixels where the value differs from the up- or left-neighbour.

    (i, j) is in the border iff |x[i][j]-x[i-1][j]| + |x[i][j]-x[i][j-1]| > 0.
    Out-of-bounds neighbours (row 0 / column 0) are treated as equal and
    contribute nothing.
    """
    x = bitmap.pixels.astype(np.int16)
    dv = np.zeros_like(x)
    dh = np.zeros_like(x)
    dv[1:, :] = np.abs(x[1:, :] - x[:-1, :])
    dh[:, 1:] = np.abs(x[:, 1:] - x[:, :-1])
    ii, jj = np.nonzero(dv + dh)
    return {(int(i), int(j)) for i, j in zip(ii, jj)}


def order_border(border: set[tuple[int, int]]) -> list[tuple[int, int]]:
    """Chain the border set into an ordered pixel list.

    Greedy nearest-neighbour walk under 8-connectivity starting from the
    topmost-then-leftmost pixel. Raises AmbiguousTopology if the set has
    more than one 8-connected component, or if at some step three or more
    candidates sit at the same minimal distance (a junction).
    """
    if not border:
        raise ValueError("empty border set")
    members = sorted(border)
    _check_single_component(border, members)

    remaining = set(border)
    start = members[0]
    chain = [start]
    remaining.remove(start)
    cur = start
    reversed_once = False
    while remaining:
        neighbours = [
            p for p in _eight_neighbours(cur) if p in remaining
        ]
        if neighbours:
            d2 = [(p[0] - cur[0]) ** 2 + (p[1] - cur[1]) ** 2 for p in neighbours]
            dmin = min(d2)
            ties = sorted(p for p, d in zip(neighbours, d2) if d == dmin)
            if len(ties) >= 3:
                raise AmbiguousTopology(
                    f"junction at {cur}: {len(ties)} equally near continuations {ties}",
                    coords=cur,
                )
            # tie-break toward the continuation with fewer onward options
            # (dead-end first), so one-pixel spurs are not stranded
            nxt = min(
                ties,
                key=lambda p: (
                    sum(q in remaining for q in _eight_neighbours(p)),
                    p,
                ),
            )
        elif not reversed_once:
            # the start sat mid-path and the walk hit one end of an open
            # chain; flip the chain and keep extending from the other end
            reversed_once = True
            chain.reverse()
            cur = chain[-1]
            continue
        else:
            # stranded past a junction; jump to the globally nearest
            # remaining pixel so the output stays a permutation
            nxt = min(
                remaining,
                key=lambda p: ((p[0] - cur[0]) ** 2 + (p[1] - cur[1]) ** 2, p),
            )
        chain.append(nxt)
        remaining.remove(nxt)
        cur = nxt
    return chain


def _eight_neighbours(p):
    i, j = p
    return [
        (i + di, j + dj)
        for di in (-1, 0, 1)
        for dj in (-1, 0, 1)
        if (di, dj) != (0, 0)
    ]


def _check_single_component(border, members):
    seen = {members[0]}
    stack = [members[0]]
    while stack:
        cur = stack.pop()
        for p in _eight_neighbours(cur):
            if p in border and p not in seen:
                seen.add(p)
                stack.append(p)
    if len(seen) != len(border):
        missing = sorted(border - seen)[0]
        raise AmbiguousTopology(
            f"border has more than one connected component (e.g. pixel {missing})",
            coords=missing,
        )


def is_closed_chain(chain: list[tuple[int, int]]) -> bool:
    """True when the last pixel is 8-adjacent to the first (a ring)."""
    if len(chain) < 3:
        return False
    (i0, j0), (i1, j1) = chain[0], chain[-1]
    return max(abs(i0 - i1), abs(j0 - j1)) <= 1


def to_axial_section(
    ordered_pixels: list[tuple[int, int]],
    scale: float,
    axis_column: int,
    height_px: int,
    closed: bool | None = None,
) -> ProfileCurve:
    """Convert ordered border pixels to (radius, height) in physical units.

    radius = (j - axis_column) * scale, height = (height_px - i) * scale.
    All pixels must lie on the non-negative side of the axis column.
    """
    pts = np.empty((len(ordered_pixels), 2), dtype=float)
    for k, (i, j) in enumerate(ordered_pixels):
        r = (j - axis_column) * scale
        if r < 0:
            raise AxisCrossing(
                f"pixel (i={i}, j={j}) lies left of axis column {axis_column}"
            )
        pts[k] = (r, (height_px - i) * scale)
    if closed is None:
        closed = is_closed_chain(ordered_pixels)
    return ProfileCurve(pts, scale=scale, closed=closed)


def smooth_profile(curve: ProfileCurve, window: int) -> ProfileCurve:
    """Centred moving average over the ordered points.

    Open curves shrink the window near the ends; closed curves wrap
    around. window must be odd; window=1 is the identity.
    """
    if window < 1 or window % 2 == 0:
        raise InvalidWindow(f"window must be odd and positive, got {window}")
    n = len(curve.points)
    if window > n:
        raise InvalidWindow(f"window {window} exceeds point count {n}")
    if window == 1:
        return ProfileCurve(curve.points.copy(), scale=curve.scale, closed=curve.closed)
    half = window // 2
    out = np.empty_like(curve.points)
    if curve.closed:
        idx = np.arange(-half, half + 1)
        for k in range(n):
            out[k] = curve.points[(k + idx) % n].mean(axis=0)
    else:
        for k in range(n):
            lo = max(0, k - half)
            hi = min(n, k + half + 1)
            out[k] = curve.points[lo:hi].mean(axis=0)
    out[:, 0] = np.maximum(out[:, 0], 0.0)
    return ProfileCurve(out, scale=curve.scale, closed=curve.closed)


def jitter_profile(curve: ProfileCurve, sigma: float, seed: int) -> ProfileCurve:
    """Add seeded zero-mean Gaussian offsets to every point; radius >= 0."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if sigma == 0:
        return ProfileCurve(curve.points.copy(), scale=curve.scale, closed=curve.closed)
    rng = np.random.default_rng(seed)
    noisy = curve.points + rng.normal(0.0, sigma, size=curve.points.shape)
    noisy[:, 0] = np.maximum(noisy[:, 0], 0.0)
    return ProfileCurve(noisy, scale=curve.scale, closed=curve.closed)


def extract_profile(
    bitmap: Bitmap,
    scale: float,
    axis_column: int | None = None,
    smooth_window: int = 1,
) -> ProfileCurve:
    """Full extraction: border -> ordering -> axial section -> smoothing.

    When axis_column is omitted, the column just left of the leftmost
    border pixel is used so every radius is non-negative.
    """
    border = detect_border(bitmap)
    if not border:
        raise ValueError("bitmap contains no ink transitions")
    chain = order_border(border)
    if axis_column is None:
        axis_column = min(j for _, j in chain)
    curve = to_axial_section(chain, scale, axis_column, bitmap.height)
    if smooth_window > 1:
        curve = smooth_profile(curve, smooth_window)
    return curve
