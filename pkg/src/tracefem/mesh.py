"""Structured background triangulation and active-element selection.

The background mesh partitions a square bbox into n_cells x n_cells
squares, each split into two triangles along its NE diagonal.  The
active mesh keeps the triangles intersecting the curve (exact
point-triangle distance predicate for circles, sign sampling for
generic level sets) and numbers the vertices they touch as the degrees
of freedom of the continuous P1 space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyIntersection, InvalidConfig


@dataclass
class BackgroundMesh:
    bbox: tuple
    n_cells: int
    vertices: np.ndarray      # (n_vert, 2)
    triangles: np.ndarray     # (n_tri, 3) vertex indices, CCW
    h_global: float


@dataclass
class ActiveMesh:
    background: BackgroundMesh
    active: np.ndarray        # indices into background.triangles
    dof_of_vertex: dict       # global vertex index -> dof index
    dofs: np.ndarray          # dof index -> global vertex index
    elements: np.ndarray      # (n_active, 3) dof indices
    coords: np.ndarray        # (n_dof, 2) dof coordinates
    h_T: np.ndarray           # per-active-element diameter (longest edge)

    @property
    def n_dofs(self):
        return len(self.dofs)

    @property
    def h(self):
        return float(self.h_T.max())

    def element_coords(self, e):
        return self.coords[self.elements[e]]


def build_background(bbox, n_cells):
    """Build the uniform criss-cross mesh of the square bbox = (lo, hi).

    Each of the n_cells^2 grid squares is split into two triangles along
    its NE diagonal, giving 2 n_cells^2 congruent right triangles.
    """
    lo, hi = float(bbox[0]), float(bbox[1])
    if not hi > lo:
        raise InvalidConfig("bbox must satisfy hi > lo")
    n = int(n_cells)
    if n < 1:
        raise InvalidConfig("n_cells must be positive")
    h = (hi - lo) / n

    xs = lo + h * np.arange(n + 1)
    xx, yy = np.meshgrid(xs, xs, indexing="ij")
    vertices = np.column_stack([xx.ravel(), yy.ravel()])

    def vid(i, j):
        return i * (n + 1) + j

    tris = []
    for i in range(n):
        for j in range(n):
            v00 = vid(i, j)
            v10 = vid(i + 1, j)
            v01 = vid(i, j + 1)
            v11 = vid(i + 1, j + 1)
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))
    triangles = np.array(tris, dtype=np.int64)
    return BackgroundMesh(bbox=(lo, hi), n_cells=n, vertices=vertices,
                          triangles=triangles, h_global=h)


def _point_segment_distance(p, a, b):
    d = b - a
    t = np.clip(np.dot(p - a, d) / np.dot(d, d), 0.0, 1.0)
    return float(np.hypot(*(a + t * d - p)))


def _point_in_triangle(p, tri, tol=0.0):
    a, b, c = tri
    det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])
    l1 = ((b[0] - p[0]) * (c[1] - p[1]) - (c[0] - p[0]) * (b[1] - p[1])) / det
    l2 = ((c[0] - p[0]) * (a[1] - p[1]) - (a[0] - p[0]) * (c[1] - p[1])) / det
    l3 = 1.0 - l1 - l2
    return min(l1, l2, l3) >= -tol


def _circle_cuts_triangle(tri, center, radius):
    """Exact predicate min_{x in T} |x-c| <= R <= max_{x in T} |x-c|."""
    dmax = max(float(np.hypot(*(v - center))) for v in tri)
    if _point_in_triangle(center, tri):
        dmin = 0.0
    else:
        dmin = min(_point_segment_distance(center, tri[k], tri[(k + 1) % 3])
                   for k in range(3))
    return dmin <= radius <= dmax


def _levelset_cuts_triangle(tri, surface, n_sample=6):
    """Heuristic sign-change detection along edges and vertices."""
    signs = []
    for k in range(3):
        a, b = tri[k], tri[(k + 1) % 3]
        for t in np.linspace(0.0, 1.0, n_sample + 2):
            signs.append(surface.phi(a + t * (b - a)))
    signs = np.asarray(signs)
    return signs.min() <= 0.0 <= signs.max()


def select_active(background, surface):
    """Select the triangles intersecting Gamma and number their dofs."""
    verts = background.vertices
    active = []
    for e, tri in enumerate(background.triangles):
        pts = verts[tri]
        if surface.kind == "circle":
            hit = _circle_cuts_triangle(pts, surface.center, surface.radius)
        else:
            hit = _levelset_cuts_triangle(pts, surface)
        if hit:
            active.append(e)
    if not active:
        raise EmptyIntersection("no background element intersects the surface")
    active = np.asarray(active, dtype=np.int64)

    dof_of_vertex = {}
    for e in active:
        for v in background.triangles[e]:
            if v not in dof_of_vertex:
                dof_of_vertex[int(v)] = len(dof_of_vertex)
    dofs = np.empty(len(dof_of_vertex), dtype=np.int64)
    for v, d in dof_of_vertex.items():
        dofs[d] = v
    coords = verts[dofs]

    elements = np.array([[dof_of_vertex[int(v)] for v in background.triangles[e]]
                         for e in active], dtype=np.int64)
    h_t = np.empty(len(active))
    for i, e in enumerate(active):
        p = verts[background.triangles[e]]
        edges = [np.hypot(*(p[k] - p[(k + 1) % 3])) for k in range(3)]
        h_t[i] = max(edges)

    return ActiveMesh(background=background, active=active,
                      dof_of_vertex=dof_of_vertex, dofs=dofs,
                      elements=elements, coords=coords, h_T=h_t)


def write_vtk(active_mesh, path):
    """Write the active mesh with per-cell h_T as legacy-VTK ASCII."""
    coords = active_mesh.coords
    elems = active_mesh.elements
    lines = [
        "# vtk DataFile Version 3.0",
        "active mesh",
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        "POINTS %d double" % len(coords),
    ]
    for x, y in coords:
        lines.append("%.17g %.17g 0" % (x, y))
    lines.append("CELLS %d %d" % (len(elems), 4 * len(elems)))
    for a, b, c in elems:
        lines.append("3 %d %d %d" % (a, b, c))
    lines.append("CELL_TYPES %d" % len(elems))
    lines.extend(["5"] * len(elems))
    lines.append("CELL_DATA %d" % len(elems))
    lines.append("SCALARS h_T double 1")
    lines.append("LOOKUP_TABLE default")
    for h in active_mesh.h_T:
        lines.append("%.17g" % h)
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
