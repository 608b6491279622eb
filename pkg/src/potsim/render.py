"""Domain-randomized rendering of vessel meshes.

A small self-contained z-buffer rasterizer: perspective camera aimed at
the mesh centroid, flat Lambertian + Blinn-Phong shading with per-vertex
albedo (decorations), optional hard ground shadow, uniform background.
Every render is a pure function of its SceneSpec.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateScene, UnknownClass
from .mesh import VesselMesh

VESSEL_CLASSES = (
    "Dr18",
    "Dr24-25",
    "Dr27",
    "Dr29",
    "Dr33",
    "Dr35",
    "Dr36",
    "Dr37",
    "Dr38",
)

# declination below this (degrees, unflipped) is labelled a zenith view
ZENITH_MAX_DECLINATION = 22.5


def view_label_for(declination: float, flipped: bool) -> str:
    if flipped:
        return "flipped"
    if abs(declination) < ZENITH_MAX_DECLINATION:
        return "zenith"
    return "standard"


@dataclass(frozen=True)
class ShotPlan:
    azimuth: float  # degrees
    declination: float  # degrees from the vertical
    flipped: bool
    distance: float  # camera distance as a multiple of the mesh bbox diagonal
    view_label: str

    @classmethod
    def make(cls, azimuth, declination, flipped=False, distance=2.2):
        return cls(
            azimuth=float(azimuth),
            declination=float(declination),
            flipped=bool(flipped),
            distance=float(distance),
            view_label=view_label_for(declination, flipped),
        )


@dataclass(frozen=True)
class LightSpec:
    kind: str  # directional | spot | point
    vector: tuple[float, float, float]  # direction (directional) or position
    intensity: float
    ambient: float

    def __post_init__(self):
        if self.kind not in ("directional", "spot", "point"):
            raise ValueError(f"unknown light kind {self.kind!r}")
        if self.intensity < 0:
            raise ValueError("intensity must be >= 0")
        if not (0.0 <= self.ambient <= 1.0):
            raise ValueError("ambient must be in [0, 1]")


@dataclass(frozen=True)
class Decoration:
    kind: str = "none"  # none | rim_stripes | leaves | procedural_noise
    leaf_count: int = 0
    noise_seed: int = 0


@dataclass(frozen=True)
class MaterialSpec:
    base_color: tuple[float, float, float]
    specular_strength: float = 0.0
    decoration: Decoration = field(default_factory=Decoration)


@dataclass
class SceneSpec:
    mesh: VesselMesh
    shot: ShotPlan
    light: LightSpec
    material: MaterialSpec
    background_color: tuple[float, float, float]
    width: int = 512
    height: int = 512
    seed: int = 0


def shot_plan_catalog(
    seed: int, jitter_std: float = 5.0, distance: float = 2.2
) -> list[ShotPlan]:
    """The photo-session catalog of 24 shots.

    Upright: azimuths {0, 45, 90} x declinations {0, 45, 90} plus one shot
    at declination 100 (phone resting on the table), the whole block
    repeated after a 90 degree rotation of the vessel. Flipped (resting on
    the rim): 4 shots at azimuth 45. Gaussian angle jitter (std jitter_std
    degrees) randomizes each plan; pass jitter_std=0 for the nominal grid.
    """
    rng = np.random.default_rng(seed)
    nominal: list[tuple[float, float, bool]] = []
    for offset in (0.0, 90.0):
        for az in (0.0, 45.0, 90.0):
            for dec in (0.0, 45.0, 90.0):
                nominal.append((az + offset, dec, False))
        nominal.append((45.0 + offset, 100.0, False))
    for dec in (0.0, 45.0, 90.0, 100.0):
        nominal.append((45.0, dec, True))

    plans = []
    for az, dec, flipped in nominal:
        if jitter_std > 0:
            az = az + rng.normal(0.0, jitter_std)
            dec = dec + rng.normal(0.0, jitter_std)
        dec = float(np.clip(dec, 0.0, 179.0))
        plans.append(ShotPlan.make(az % 360.0, dec, flipped, distance))
    return plans


def decorate_for_class(class_label: str, rng: np.random.Generator) -> Decoration:
    """Class-conditional decoration, applied to half of the images."""
    if class_label not in VESSEL_CLASSES:
        raise UnknownClass(f"unknown vessel class {class_label!r}")
    decorated = bool(rng.uniform() < 0.5)
    noise_seed = int(rng.integers(0, 2**31))
    if not decorated:
        return Decoration("none")
    if class_label == "Dr24-25":
        return Decoration("rim_stripes")
    if class_label in ("Dr35", "Dr36"):
        leaf_count = int(rng.choice((4, 6)))
        return Decoration("leaves", leaf_count=leaf_count)
    if class_label in ("Dr29", "Dr37"):
        return Decoration("procedural_noise", noise_seed=noise_seed)
    return Decoration("none")


# ---------------------------------------------------------------------------
# rasterizer internals


def _value_noise(u, v, seed, grid=8):
    """Periodic-in-u bilinear value noise in [0, 1]; u, v arrays in [0, 1]."""
    rng = np.random.default_rng(seed)
    lattice = rng.uniform(size=(grid + 1, grid + 1))
    lattice[:, -1] = lattice[:, 0]  # periodic seam in u (angular coordinate)
    fu = np.clip(u, 0.0, 1.0) * grid
    fv = np.clip(v, 0.0, 1.0) * grid
    iu = np.minimum(fu.astype(int), grid - 1)
    iv = np.minimum(fv.astype(int), grid - 1)
    du = fu - iu
    dv = fv - iv
    n00 = lattice[iv, iu]
    n01 = lattice[iv, iu + 1]
    n10 = lattice[iv + 1, iu]
    n11 = lattice[iv + 1, iu + 1]
    return (
        n00 * (1 - du) * (1 - dv)
        + n01 * du * (1 - dv)
        + n10 * (1 - du) * dv
        + n11 * du * dv
    )


def _vertex_albedo(verts: np.ndarray, material: MaterialSpec) -> np.ndarray:
    """Per-vertex RGB albedo with the decoration baked in."""
    n = len(verts)
    albedo = np.tile(np.asarray(material.base_color, dtype=float), (n, 1))
    deco = material.decoration
    if deco.kind == "none":
        return albedo

    z = verts[:, 2]
    z_min, z_max = z.min(), z.max()
    span = max(z_max - z_min, 1e-12)
    t = (z - z_min) / span  # relative height, 1 at the rim
    theta = np.arctan2(verts[:, 1], verts[:, 0])  # -pi..pi

    if deco.kind == "rim_stripes":
        band = ((t > 0.86) & (t < 0.90)) | ((t > 0.94) & (t < 0.98))
        albedo[band] *= 0.62
    elif deco.kind == "leaves":
        count = max(deco.leaf_count, 1)
        phase = (theta % (2 * np.pi / count)) * count / (2 * np.pi)  # 0..1 per petal
        # petal: darken near each petal centre, narrowing away from the rim
        width = 0.28 * np.clip((t - 0.7) / 0.3, 0.0, 1.0)
        petal = (t > 0.7) & (np.abs(phase - 0.5) < width)
        albedo[petal] *= 0.62
    elif deco.kind == "procedural_noise":
        u = (theta + np.pi) / (2 * np.pi)
        n1 = _value_noise(u, t, deco.noise_seed, grid=6)
        n2 = _value_noise(u, t, deco.noise_seed + 1, grid=13)
        factor = 0.65 + 0.35 * (0.5 * n1 + 0.5 * n2)
        albedo *= factor[:, None]
    else:
        raise ValueError(f"unknown decoration {deco.kind!r}")
    return np.clip(albedo, 0.0, 1.0)


def _camera_basis(eye, target):
    forward = target - eye
    forward /= np.linalg.norm(forward)
    up_hint = np.array([0.0, 0.0, 1.0])
    if abs(np.dot(forward, up_hint)) > 0.999:
        up_hint = np.array([1.0, 0.0, 0.0])
    right = np.cross(forward, up_hint)
    right /= np.linalg.norm(right)
    up = np.cross(right, forward)
    return right, up, forward


def _project(verts, eye, right, up, forward, width, height, fov_deg=40.0):
    """World -> screen. Returns (sx, sy, depth) with depth along view axis."""
    rel = verts - eye
    cx = rel @ right
    cy = rel @ up
    cz = rel @ forward  # positive in front of the camera
    f = 1.0 / math.tan(math.radians(fov_deg) / 2.0)
    safe_z = np.where(cz > 1e-9, cz, 1e-9)
    ndc_x = f * cx / safe_z
    ndc_y = f * cy / safe_z
    sx = (ndc_x * 0.5 + 0.5) * width
    sy = (0.5 - ndc_y * 0.5) * height
    return np.column_stack([sx, sy]), cz


def _raster_triangles(screen, depth, colors, width, height, zbuf, frame, mask=None):
    """Rasterize triangles into frame/zbuf.

    screen: (m, 3, 2) pixel coords; depth: (m, 3); colors: (m, 3, 3)
    per-vertex RGB (barycentric-interpolated). mask, when given, is a
    boolean image set True wherever a triangle wins the depth test.
    """
    # per-triangle scalars precomputed in bulk; the loop stays cheap
    xs0 = np.maximum(np.floor(screen[:, :, 0].min(axis=1)).astype(int), 0)
    xs1 = np.minimum(np.ceil(screen[:, :, 0].max(axis=1)).astype(int) + 1, width)
    ys0 = np.maximum(np.floor(screen[:, :, 1].min(axis=1)).astype(int), 0)
    ys1 = np.minimum(np.ceil(screen[:, :, 1].max(axis=1)).astype(int) + 1, height)
    areas = (screen[:, 1, 0] - screen[:, 0, 0]) * (screen[:, 2, 1] - screen[:, 0, 1]) - (
        screen[:, 1, 1] - screen[:, 0, 1]
    ) * (screen[:, 2, 0] - screen[:, 0, 0])
    drawable = (
        (depth > 1e-9).all(axis=1)
        & (np.abs(areas) >= 1e-12)
        & (xs0 < xs1)
        & (ys0 < ys1)
    )
    sxy = screen.tolist()
    for t in np.nonzero(drawable)[0]:
        x0, x1, y0, y1 = xs0[t], xs1[t], ys0[t], ys1[t]
        (ax, ay), (bx, by), (cx, cy) = sxy[t]
        area = areas[t]
        px = np.arange(x0, x1)[None, :] + 0.5
        py = np.arange(y0, y1)[:, None] + 0.5
        w0 = ((bx - px) * (cy - py) - (by - py) * (cx - px)) / area
        w1 = ((cx - px) * (ay - py) - (cy - py) * (ax - px)) / area
        w2 = 1.0 - w0 - w1
        tri_z = depth[t]
        z = w0 * tri_z[0] + w1 * tri_z[1] + w2 * tri_z[2]
        sub_z = zbuf[y0:y1, x0:x1]
        win = (w0 >= 0) & (w1 >= 0) & (w2 >= 0) & (z < sub_z)
        yi, xi = np.nonzero(win)
        if len(yi) == 0:
            continue
        tri_c = colors[t]
        rgb = (
            w0[yi, xi, None] * tri_c[0]
            + w1[yi, xi, None] * tri_c[1]
            + w2[yi, xi, None] * tri_c[2]
        )
        sub_z[yi, xi] = z[yi, xi]
        frame[y0 + yi, x0 + xi] = rgb
        if mask is not None:
            mask[y0 + yi, x0 + xi] = True


def _flip_transform(verts):
    """Turn the vessel upside down (180 degrees about the x axis)."""
    out = verts.copy()
    out[:, 1] *= -1
    out[:, 2] *= -1
    return out


def _shadow_projection(verts, light: LightSpec):
    """Project vertices along the light onto the ground plane z=0.

    Returns None when the light cannot cast a downward shadow.
    """
    if light.kind == "directional":
        d = np.asarray(light.vector, dtype=float)
        if d[2] >= -1e-9:
            return None
        t = verts[:, 2] / d[2]
        return verts - t[:, None] * d
    if light.kind == "spot":
        lp = np.asarray(light.vector, dtype=float)
        dz = lp[2] - verts[:, 2]
        if lp[2] <= 0 or (dz <= 1e-9).any():
            return None
        t = lp[2] / dz
        return lp + t[:, None] * (verts - lp)
    return None  # point lights cast no hard shadow here


def rasterize(scene: SceneSpec, return_mask: bool = False):
    """Render a SceneSpec to an 8-bit RGB array (height, width, 3).

    With return_mask=True also returns the boolean pot-coverage mask
    (shadow pixels excluded).
    """
    mesh = scene.mesh
    tris = mesh.visible_triangles
    if len(tris) == 0:
        raise DegenerateScene("no visible geometry after removal mask")

    verts = mesh.vertices
    if scene.shot.flipped:
        verts = _flip_transform(verts)
    # rest the body on the ground plane z=0
    used = np.unique(tris)
    verts = verts - np.array([0.0, 0.0, verts[used, 2].min()])

    albedo = _vertex_albedo(verts, scene.material)

    centroid = verts[used].mean(axis=0)
    span = verts[used].max(axis=0) - verts[used].min(axis=0)
    diag = float(np.linalg.norm(span))
    if diag <= 0:
        raise DegenerateScene("degenerate (zero-size) geometry")

    dec = math.radians(scene.shot.declination)
    az = math.radians(scene.shot.azimuth)
    eye = centroid + scene.shot.distance * diag * np.array(
        [math.sin(dec) * math.cos(az), math.sin(dec) * math.sin(az), math.cos(dec)]
    )
    right, up, forward = _camera_basis(eye, centroid)

    light = scene.light
    if light.kind == "directional":
        ldir = -np.asarray(light.vector, dtype=float)
        ldir /= np.linalg.norm(ldir)

    # flat shading terms per triangle
    v0 = verts[tris[:, 0]]
    v1 = verts[tris[:, 1]]
    v2 = verts[tris[:, 2]]
    normals = np.cross(v1 - v0, v2 - v0)
    norms = np.linalg.norm(normals, axis=1, keepdims=True)
    normals = normals / np.maximum(norms, 1e-12)
    centers = (v0 + v1 + v2) / 3.0
    to_eye = eye - centers
    to_eye /= np.linalg.norm(to_eye, axis=1, keepdims=True)
    # two-sided: orient normals toward the viewer (open shells show both faces)
    facing = np.sign(np.einsum("ij,ij->i", normals, to_eye))
    facing[facing == 0] = 1.0
    normals *= facing[:, None]

    if light.kind == "directional":
        lvec = np.broadcast_to(ldir, centers.shape)
    else:
        lvec = np.asarray(light.vector, dtype=float) - centers
        lvec = lvec / np.maximum(np.linalg.norm(lvec, axis=1, keepdims=True), 1e-12)
    # two-sided diffuse: open shells show their inside, light it the same
    ndotl = np.abs(np.einsum("ij,ij->i", normals, lvec))
    halfv = lvec + to_eye
    halfv /= np.maximum(np.linalg.norm(halfv, axis=1, keepdims=True), 1e-12)
    ndoth = np.clip(np.einsum("ij,ij->i", normals, halfv), 0.0, None)
    diffuse = light.intensity * ndotl
    specular = (
        light.intensity * scene.material.specular_strength * ndoth**32
    )

    shade = light.ambient + diffuse  # (m,)
    tri_colors = albedo[tris] * shade[:, None, None] + specular[:, None, None]
    tri_colors = np.clip(tri_colors, 0.0, 1.0)

    screen_all, depth_all = _project(
        verts, eye, right, up, forward, scene.width, scene.height
    )
    screen = screen_all[tris]  # (m, 3, 2)
    depth = depth_all[tris]  # (m, 3)

    bg = np.asarray(scene.background_color, dtype=float)
    frame = np.tile(bg, (scene.height, scene.width, 1))
    zbuf = np.full((scene.height, scene.width), np.inf)
    pot_mask = np.zeros((scene.height, scene.width), dtype=bool)

    # hard shadow first; the pot then overdraws it via the depth test
    shadow_world = _shadow_projection(verts, light)
    if shadow_world is not None:
        s_screen_all, s_depth_all = _project(
            shadow_world, eye, right, up, forward, scene.width, scene.height
        )
        s_colors = np.tile(bg * 0.9, (len(tris), 3, 1))
        _raster_triangles(
            s_screen_all[tris],
            s_depth_all[tris],
            s_colors,
            scene.width,
            scene.height,
            zbuf,
            frame,
        )

    _raster_triangles(
        screen, depth, tri_colors, scene.width, scene.height, zbuf, frame, pot_mask
    )

    if not pot_mask.any():
        raise DegenerateScene("vessel projects to zero pixels")

    img = np.clip(np.floor(frame * 255.0 + 0.5), 0, 255).astype(np.uint8)
    if return_mask:
        return img, pot_mask
    return img


def save_png(img: np.ndarray, path) -> None:
    from PIL import Image

    Image.fromarray(img, mode="RGB").save(path, format="PNG")
