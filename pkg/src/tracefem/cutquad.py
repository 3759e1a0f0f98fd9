"""Quadrature on circle arcs cut by triangles and on the triangles.

Each active triangle intersects the circle in a union of arcs.  The arc
endpoints come from per-edge quadratics (solved with the stabilized
b-sign discriminant trick); the intersection angles are sorted and the
angular intervals classified by a midpoint-in-triangle test.  Surface
quadrature is Gauss-Legendre in the angle per arc, volume quadrature a
symmetric 6-point rule exact to total degree 4.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import SingularElement, TangencyWarning

TWO_PI = 2.0 * np.pi

# Symmetric degree-4 triangle rule (6 points, positive weights that sum
# to 1 on the reference triangle).
_VOL_W = np.array([0.223381589678011] * 3 + [0.109951743655322] * 3)
_VOL_BARY = np.array([
    [0.108103018168070, 0.445948490915965, 0.445948490915965],
    [0.445948490915965, 0.108103018168070, 0.445948490915965],
    [0.445948490915965, 0.445948490915965, 0.108103018168070],
    [0.816847572980459, 0.091576213509771, 0.091576213509771],
    [0.091576213509771, 0.816847572980459, 0.091576213509771],
    [0.091576213509771, 0.091576213509771, 0.816847572980459],
])

_MIN_ARC = 1e-12          # arcs narrower than this are measure-zero noise
_GRAZE = 1e-14            # discriminant band treated as tangential contact


def _barycentric(tri, p):
    a, b, c = tri
    det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])
    l1 = ((b[0] - p[0]) * (c[1] - p[1]) - (c[0] - p[0]) * (b[1] - p[1])) / det
    l2 = ((c[0] - p[0]) * (a[1] - p[1]) - (a[0] - p[0]) * (c[1] - p[1])) / det
    return np.array([l1, l2, 1.0 - l1 - l2])


def _edge_circle_angles(p0, p1, center, radius):
    """Angles (about the center) where segment p0-p1 meets the circle."""
    d = p1 - p0
    e = p0 - center
    a = float(d @ d)
    b = 2.0 * float(d @ e)
    c = float(e @ e) - radius * radius
    disc = b * b - 4.0 * a * c
    if 0.0 <= disc < _GRAZE * max(1.0, b * b):
        warnings.warn("grazing circle-edge contact dropped", TangencyWarning)
        return []
    if disc <= 0.0:
        return []
    sq = np.sqrt(disc)
    # Stabilized roots: q = -(b + sign(b) sqrt(disc)) / 2 avoids cancellation.
    q = -0.5 * (b + np.copysign(sq, b)) if b != 0.0 else 0.5 * sq
    roots = [q / a]
    if q != 0.0:
        roots.append(c / q)
    angles = []
    for t in roots:
        if -1e-12 <= t <= 1.0 + 1e-12:
            x = p0 + min(max(t, 0.0), 1.0) * d
            angles.append(float(np.arctan2(x[1] - center[1], x[0] - center[0])))
    return angles


def intersect_element(tri, center, radius):
    """Arcs of the circle inside the closed triangle.

    Returns a list of (theta0, theta1) with theta1 > theta0; an arc
    crossing the branch cut is reported with theta1 > pi.
    """
    tri = np.asarray(tri, dtype=float)
    center = np.asarray(center, dtype=float)
    angles = []
    for k in range(3):
        angles.extend(_edge_circle_angles(tri[k], tri[(k + 1) % 3], center, radius))
    if not angles:
        probe = center + np.array([radius, 0.0])
        if _barycentric(tri, probe).min() >= 0.0:
            return [(0.0, TWO_PI)]
        return []
    angles = np.sort(np.mod(np.asarray(angles), TWO_PI))
    # Merge duplicate angles (shared vertices report from two edges).
    keep = [angles[0]]
    for th in angles[1:]:
        if th - keep[-1] > _MIN_ARC:
            keep.append(th)
    if len(keep) > 1 and (keep[0] + TWO_PI) - keep[-1] <= _MIN_ARC:
        keep.pop()
    angles = np.asarray(keep)

    arcs = []
    for i, th0 in enumerate(angles):
        th1 = angles[i + 1] if i + 1 < len(angles) else angles[0] + TWO_PI
        if th1 - th0 < _MIN_ARC:
            continue
        mid = 0.5 * (th0 + th1)
        p = center + radius * np.array([np.cos(mid), np.sin(mid)])
        if _barycentric(tri, p).min() >= -1e-12:
            arcs.append((float(th0), float(th1)))
    return arcs


def surface_rule(center, radius, arc, q):
    """Gauss-Legendre nodes on the arc; weights carry the factor R."""
    th0, th1 = arc
    gx, gw = np.polynomial.legendre.leggauss(q)
    theta = 0.5 * (th1 - th0) * gx + 0.5 * (th0 + th1)
    w = 0.5 * (th1 - th0) * gw * radius
    pts = np.column_stack([center[0] + radius * np.cos(theta),
                           center[1] + radius * np.sin(theta)])
    normals = np.column_stack([np.cos(theta), np.sin(theta)])
    tangents = np.column_stack([-np.sin(theta), np.cos(theta)])
    return pts, w, normals, tangents, theta


def volume_rule(tri):
    """Symmetric 6-point rule, exact for total degree <= 4 polynomials."""
    tri = np.asarray(tri, dtype=float)
    area = 0.5 * abs((tri[1, 0] - tri[0, 0]) * (tri[2, 1] - tri[0, 1])
                     - (tri[2, 0] - tri[0, 0]) * (tri[1, 1] - tri[0, 1]))
    pts = _VOL_BARY @ tri
    return pts, _VOL_W * area


@dataclass
class CutTopology:
    """Per-active-element arcs and quadrature data."""

    surface: object
    mesh: object
    q_surf: int
    arcs: list = field(default_factory=list)        # per element: list of (th0, th1)
    s_pts: list = field(default_factory=list)       # per element: (m, 2) points on Gamma
    s_w: list = field(default_factory=list)         # per element: (m,) weights
    s_normal: list = field(default_factory=list)    # per element: (m, 2)
    s_theta: list = field(default_factory=list)     # per element: (m,)
    s_bary: list = field(default_factory=list)      # per element: (m, 3) P1 values
    v_pts: list = field(default_factory=list)       # per element: (6, 2)
    v_w: list = field(default_factory=list)         # per element: (6,)
    v_normal: list = field(default_factory=list)    # per element: (6, 2)
    total_length: float = 0.0

    def all_theta(self):
        return np.concatenate([t for t in self.s_theta if len(t)]) \
            if self.s_theta else np.empty(0)

    def all_weights(self):
        return np.concatenate([w for w in self.s_w if len(w)]) \
            if self.s_w else np.empty(0)


def oscillation_order(k_max, h, q_surf=10):
    """Gauss order needed to integrate modes up to k_max on O(h) arcs."""
    return max(int(q_surf), int(np.ceil(k_max * h)) + 4)


def build_topology(surface, active_mesh, q_surf=10):
    """Cut every active triangle and tabulate its quadrature rules."""
    if surface.kind != "circle":
        raise NotImplementedError("cut quadrature requires the circle kind")
    center, radius = surface.center, surface.radius
    topo = CutTopology(surface=surface, mesh=active_mesh, q_surf=int(q_surf))
    total = 0.0
    for e in range(len(active_mesh.elements)):
        tri = active_mesh.element_coords(e)
        area = 0.5 * abs((tri[1, 0] - tri[0, 0]) * (tri[2, 1] - tri[0, 1])
                         - (tri[2, 0] - tri[0, 0]) * (tri[1, 1] - tri[0, 1]))
        if area < 1e-14 * active_mesh.h_T[e] ** 2:
            raise SingularElement("active triangle %d has vanishing area" % e)
        arcs = intersect_element(tri, center, radius)
        pts_l, w_l, n_l, th_l = [], [], [], []
        for arc in arcs:
            pts, w, normals, _, theta = surface_rule(center, radius, arc, q_surf)
            pts_l.append(pts)
            w_l.append(w)
            n_l.append(normals)
            th_l.append(theta)
        if arcs:
            pts = np.vstack(pts_l)
            w = np.concatenate(w_l)
            normals = np.vstack(n_l)
            theta = np.concatenate(th_l)
        else:
            pts = np.empty((0, 2))
            w = np.empty(0)
            normals = np.empty((0, 2))
            theta = np.empty(0)
        bary = np.array([_barycentric(tri, p) for p in pts]) \
            if len(pts) else np.empty((0, 3))
        vp, vw = volume_rule(tri)
        d = vp - center
        r = np.hypot(d[:, 0], d[:, 1])
        vn = d / r[:, None]
        topo.arcs.append(arcs)
        topo.s_pts.append(pts)
        topo.s_w.append(w)
        topo.s_normal.append(normals)
        topo.s_theta.append(theta)
        topo.s_bary.append(bary)
        topo.v_pts.append(vp)
        topo.v_w.append(vw)
        topo.v_normal.append(vn)
        total += float(w.sum())
    topo.total_length = total
    return topo


def arc_cover_defect(topology):
    """Total gap/overlap of the arc intervals as a cover of [0, 2pi)."""
    ends = []
    for arcs in topology.arcs:
        for th0, th1 in arcs:
            ends.append((np.mod(th0, TWO_PI), th1 - th0))
    if not ends:
        return TWO_PI
    ends.sort()
    defect = 0.0
    pos = ends[0][0]
    for th0, width in ends:
        defect += abs(th0 - pos)
        pos = th0 + width
    defect += abs(pos - (ends[0][0] + TWO_PI))
    return defect
