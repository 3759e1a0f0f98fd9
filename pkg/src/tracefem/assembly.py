"""Assembly of the surface and stabilization Gram matrices.

Builds, over the active P1 space:

* ``M``   surface mass (u, v) on Gamma,
* ``A``   surface stiffness with tangential gradients (I - n n^T) grad,
* ``S_T`` per-element normal-derivative Grams int_T (n.grad u)(n.grad v),
* ``S_j`` scaled sums over elements h_T^(1-2j) S_T for j in {-1, 0, 1},
* derived combinations M_* = M + S0, K_* = M + A + S1 and the
  stabilized-inner-product stiffness K_aux = M + A + S1 + S0,
* ``D``   the weighted local Gram sum h_T^2 (M_T + h_T S_T),

plus load vectors and the truncated Fourier probe (orthonormal circle
harmonics, their H1/H-1 diagonal Grams and the coupling matrix G).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.io
import scipy.sparse as sp

from .cutquad import oscillation_order
from .errors import AliasRisk


@dataclass
class FemSystem:
    mesh: object
    topology: object
    M: sp.csr_matrix
    A: sp.csr_matrix
    S: dict                       # j -> csr matrix, j in {-1, 0, 1}
    D: sp.csr_matrix
    S_T: list                     # per-element (3, 3) normal Grams
    M_T: list                     # per-element (3, 3) surface mass blocks

    @property
    def M_star(self):
        return self.M + self.S[0]

    @property
    def K_star(self):
        return self.M + self.A + self.S[1]

    @property
    def K_aux(self):
        return self.K_star + self.S[0]

    @property
    def n_dofs(self):
        return self.mesh.n_dofs


def _p1_gradients(tri):
    """Constant gradients of the three barycentric basis functions."""
    a, b, c = tri
    det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])
    g = np.array([
        [b[1] - c[1], c[0] - b[0]],
        [c[1] - a[1], a[0] - c[0]],
        [a[1] - b[1], b[0] - a[0]],
    ]) / det
    return g


def assemble(active_mesh, topology):
    """Assemble every Gram matrix of the stabilized method."""
    n = active_mesh.n_dofs
    elems = active_mesh.elements
    ne = len(elems)
    h_t = active_mesh.h_T

    s_t_blocks = []
    m_t_blocks = []
    rows = np.repeat(elems, 3, axis=1).ravel()
    cols = np.tile(elems, (1, 3)).ravel()

    m_vals = np.zeros((ne, 9))
    a_vals = np.zeros((ne, 9))
    s_vals = {j: np.zeros((ne, 9)) for j in (-1, 0, 1)}
    d_vals = np.zeros((ne, 9))

    for e in range(ne):
        tri = active_mesh.element_coords(e)
        grad = _p1_gradients(tri)          # (3, 2)

        # Surface terms: P1 values and tangential gradients at arc nodes.
        bary = topology.s_bary[e]          # (m, 3)
        w = topology.s_w[e]
        nrm = topology.s_normal[e]
        m_loc = (bary * w[:, None]).T @ bary if len(w) else np.zeros((3, 3))
        if len(w):
            gn = nrm @ grad.T              # (m, 3) normal components
            gt = grad[None, :, :] - gn[:, :, None] * nrm[:, None, :]
            a_loc = np.einsum("q,qid,qjd->ij", w, gt, gt)
        else:
            a_loc = np.zeros((3, 3))

        # Normal-derivative Gram over the full triangle.
        vn = topology.v_normal[e]
        vw = topology.v_w[e]
        dn = vn @ grad.T                   # (6, 3)
        s_loc = (dn * vw[:, None]).T @ dn

        m_t_blocks.append(m_loc)
        s_t_blocks.append(s_loc)
        m_vals[e] = m_loc.ravel()
        a_vals[e] = a_loc.ravel()
        for j in (-1, 0, 1):
            s_vals[j][e] = (h_t[e] ** (1 - 2 * j)) * s_loc.ravel()
        d_vals[e] = (h_t[e] ** 2 * (m_loc + h_t[e] * s_loc)).ravel()

    def to_csr(vals):
        m = sp.coo_matrix((vals.ravel(), (rows, cols)), shape=(n, n)).tocsr()
        m.sum_duplicates()
        m.sort_indices()
        return m

    return FemSystem(
        mesh=active_mesh,
        topology=topology,
        M=to_csr(m_vals),
        A=to_csr(a_vals),
        S={j: to_csr(s_vals[j]) for j in (-1, 0, 1)},
        D=to_csr(d_vals),
        S_T=s_t_blocks,
        M_T=m_t_blocks,
    )


def assemble_load(topology, f, t=None):
    """Load vector b_i = sum_q w_q f(x_q[, t]) phi_i(x_q)."""
    mesh = topology.mesh
    b = np.zeros(mesh.n_dofs)
    for e, dofs in enumerate(mesh.elements):
        pts = topology.s_pts[e]
        if not len(pts):
            continue
        w = topology.s_w[e]
        vals = f(pts) if t is None else f(pts, t)
        b[dofs] += (topology.s_bary[e] * (w * np.asarray(vals))[:, None]).sum(axis=0)
    return b


@dataclass
class FourierProbe:
    """Truncated orthonormal Fourier basis on the circle.

    Mode order: constant, then (cos k, sin k) for k = 1..k_max; sizes
    2 k_max + 1.  H1_gram and Hm1_gram are the diagonals 1 + k^2/R^2 and
    its reciprocal.  G couples the FE basis to the harmonics.
    """

    k_max: int
    radius: float
    wavenumbers: np.ndarray       # per mode
    H1_gram: np.ndarray           # diagonal entries
    Hm1_gram: np.ndarray
    G: np.ndarray                 # (n_dofs, 2 k_max + 1)
    orthonormality_defect: float = 0.0

    @property
    def n_modes(self):
        return 2 * self.k_max + 1

    def eval_basis(self, theta):
        """Basis values at angles theta: array (len(theta), n_modes)."""
        theta = np.asarray(theta, dtype=float)
        r = self.radius
        out = np.empty((len(theta), self.n_modes))
        out[:, 0] = 1.0 / np.sqrt(2.0 * np.pi * r)
        scale = 1.0 / np.sqrt(np.pi * r)
        for k in range(1, self.k_max + 1):
            out[:, 2 * k - 1] = scale * np.cos(k * theta)
            out[:, 2 * k] = scale * np.sin(k * theta)
        return out


def assemble_fourier(topology, k_max=128):
    """Build the Fourier probe and its FE coupling matrix G."""
    mesh = topology.mesh
    radius = topology.surface.radius
    h = mesh.h
    needed = oscillation_order(k_max, h)
    if topology.q_surf < needed:
        raise AliasRisk(
            "q_surf=%d too low for k_max=%d at h=%.3g (need %d)"
            % (topology.q_surf, k_max, h, needed))

    k = np.zeros(2 * k_max + 1)
    k[1::2] = np.arange(1, k_max + 1)
    k[2::2] = np.arange(1, k_max + 1)
    probe = FourierProbe(
        k_max=int(k_max),
        radius=radius,
        wavenumbers=k,
        H1_gram=1.0 + k ** 2 / radius ** 2,
        Hm1_gram=1.0 / (1.0 + k ** 2 / radius ** 2),
        G=np.zeros((mesh.n_dofs, 2 * k_max + 1)),
    )

    gram = np.zeros((probe.n_modes, probe.n_modes))
    for e, dofs in enumerate(mesh.elements):
        theta = topology.s_theta[e]
        if not len(theta):
            continue
        w = topology.s_w[e]
        basis = probe.eval_basis(theta)
        probe.G[dofs] += (topology.s_bary[e] * w[:, None]).T @ basis
        gram += (basis * w[:, None]).T @ basis
    probe.orthonormality_defect = float(
        np.abs(gram - np.eye(probe.n_modes)).max())
    return probe


def probe_coefficients(topology, probe, g, t=None):
    """Fourier coefficients (g, e_m) of a function of the angle theta."""
    c = np.zeros(probe.n_modes)
    for e in range(len(topology.s_theta)):
        theta = topology.s_theta[e]
        if not len(theta):
            continue
        w = topology.s_w[e]
        vals = g(theta) if t is None else g(theta, t)
        c += (probe.eval_basis(theta) * (w * np.asarray(vals))[:, None]).sum(axis=0)
    return c


def export_matrices(system, out_dir, prefix=""):
    """Write the assembled matrices in Matrix Market coordinate form."""
    mats = {
        "M": system.M, "A": system.A,
        "S_m1": system.S[-1], "S_0": system.S[0], "S_1": system.S[1],
        "M_star": system.M_star, "K_star": system.K_star,
        "K_aux": system.K_aux, "D": system.D,
    }
    import os
    for name, m in mats.items():
        path = os.path.join(out_dir, "%s%s.mtx" % (prefix, name))
        scipy.io.mmwrite(path, sp.coo_matrix(m), symmetry="symmetric")
