"""Surface-of-revolution meshing of vessel profile curves."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateCurve, EmptyMesh
from .profile import ProfileCurve


@dataclass
class VesselMesh:
    """Triangle mesh of a revolved profile.

    ring_of maps each vertex to its (profile point index, segment index)
    provenance; pole vertices (radius 0) carry segment index -1. removed
    is the per-vertex deletion mask written by the fracture pass;
    triangles touching a removed vertex are dropped at export/render time.
    """

    vertices: np.ndarray  # (n, 3) float
    triangles: np.ndarray  # (m, 3) int
    segments: int
    ring_of: np.ndarray  # (n, 2) int, (profile index, segment or -1)
    removed: np.ndarray = field(default=None)  # (n,) bool

    def __post_init__(self):
        if self.removed is None:
            self.removed = np.zeros(len(self.vertices), dtype=bool)

    @property
    def visible_triangles(self) -> np.ndarray:
        if len(self.triangles) == 0:
            return self.triangles
        keep = ~self.removed[self.triangles].any(axis=1)
        return self.triangles[keep]

    def removed_fraction(self) -> float:
        return float(self.removed.mean()) if len(self.removed) else 0.0


def revolve(curve: ProfileCurve, segments: int = 128) -> VesselMesh:
    """Revolve a profile about the vertical axis.

    Vertex (p, s) = (r_p cos(2*pi*s/segments), r_p sin(2*pi*s/segments), h_p);
    zero-radius profile points collapse to a single on-axis vertex. Quads
    between consecutive profile points are split into two triangles, wound
    counter-clockwise seen from outside; a ring next to a pole becomes a
    triangle fan.
    """
    if segments < 3:
        raise ValueError("segments must be >= 3")
    radii = curve.radii
    heights = curve.heights
    if np.all(radii == 0):
        raise DegenerateCurve("all profile radii are zero")

    theta = 2.0 * np.pi * np.arange(segments) / segments
    cos_t, sin_t = np.cos(theta), np.sin(theta)

    verts = []
    ring_of = []
    first_vertex = []  # index of first vertex of each profile point's ring
    for p, (r, h) in enumerate(zip(radii, heights)):
        first_vertex.append(len(verts))
        if r == 0:
            verts.append((0.0, 0.0, h))
            ring_of.append((p, -1))
        else:
            for s in range(segments):
                verts.append((r * cos_t[s], r * sin_t[s], h))
                ring_of.append((p, s))

    tris = []
    n_pts = len(radii)
    pairs = list(zip(range(n_pts - 1), range(1, n_pts)))
    if curve.closed and n_pts >= 3:
        pairs.append((n_pts - 1, 0))
    for a, b in pairs:
        ra, rb = radii[a], radii[b]
        fa, fb = first_vertex[a], first_vertex[b]
        if ra == 0 and rb == 0:
            continue
        if ra == 0:
            # fan from lower pole up to ring b
            for s in range(segments):
                s1 = (s + 1) % segments
                tris.append((fa, fb + s1, fb + s))
        elif rb == 0:
            # fan from ring a up to pole b
            for s in range(segments):
                s1 = (s + 1) % segments
                tris.append((fa + s, fa + s1, fb))
        else:
            for s in range(segments):
                s1 = (s + 1) % segments
                v00, v01 = fa + s, fa + s1
                v10, v11 = fb + s, fb + s1
                tris.append((v00, v01, v11))
                tris.append((v00, v11, v10))

    return VesselMesh(
        vertices=np.asarray(verts, dtype=float),
        triangles=np.asarray(tris, dtype=np.int64).reshape(-1, 3),
        segments=segments,
        ring_of=np.asarray(ring_of, dtype=np.int64),
    )


def mesh_bbox(mesh: VesselMesh) -> np.ndarray:
    """Axis-aligned box over non-removed vertices; rows (min, max)."""
    alive = mesh.vertices[~mesh.removed]
    if alive.size == 0:
        raise EmptyMesh("all vertices removed")
    return np.stack([alive.min(axis=0), alive.max(axis=0)])


def export_obj(mesh: VesselMesh, path) -> None:
    """ASCII OBJ dump skipping removed vertices and their triangles."""
    alive = ~mesh.removed
    remap = np.cumsum(alive)  # 1-based OBJ indices for surviving vertices
    with open(path, "w") as fh:
        fh.write("# potsim vessel mesh\n")
        for v, keep in zip(mesh.vertices, alive):
            if keep:
                fh.write(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}\n")
        for tri in mesh.visible_triangles:
            a, b, c = (remap[t] for t in tri)
            fh.write(f"f {a} {b} {c}\n")
