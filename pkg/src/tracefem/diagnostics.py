"""Mesh-dependent constants as dense generalized eigenproblems.

Measures the operator norms of the stabilized projection, the inverse
parameter C_inv,h, the dual-norm gap Lambda_h, the inf-sup bounds built
from them, and the condition numbers of the one-step system matrices.
Everything runs densely (the active systems stay far below 4000 dofs)
with LAPACK's symmetric solvers, reduced via Cholesky of the SPD
right-hand Gram, and extremal pairs are verified by residual.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import EigFailure, SingularMatrix

_DENSE_LIMIT = 4000


def _dense(mat):
    m = mat.toarray()
    if m.shape[0] > _DENSE_LIMIT:
        raise EigFailure("system too large for dense diagnostics (%d dofs)"
                         % m.shape[0])
    return 0.5 * (m + m.T)


def _check_pair(lam, x, lhs, rhs, tol=1e-8):
    rl = lhs @ x
    rr = rhs @ x
    res = np.linalg.norm(rl - lam * rr)
    if res > tol * (np.linalg.norm(rl) + abs(lam) * np.linalg.norm(rr)):
        raise EigFailure("extremal eigenpair residual %.3e above tolerance" % res)


def _gen_eig_max(lhs, rhs):
    """Largest eigenvalue of the pencil (lhs, rhs), rhs SPD; residual-checked."""
    try:
        w, v = sla.eigh(lhs, rhs)
    except sla.LinAlgError as exc:
        raise EigFailure(str(exc))
    lam = float(w[-1])
    _check_pair(lam, v[:, -1], lhs, rhs)
    return lam


def op_norms_ph(operators, probe):
    """Operator norms of the projection over the truncated H1 sphere.

    Columns of B = M_*^-1 G are the projections of the harmonics; the
    norms are sqrt of the largest eigenvalue of (B' Q B, H1_gram) with
    Q the H1-Gamma Gram (M + A) resp. the stabilized Gram K_*.
    """
    system = operators.system
    bmat = operators.mstar.lu.solve(probe.G)
    w = 1.0 / np.sqrt(probe.H1_gram)
    out = []
    for q in (system.M + system.A, system.K_star):
        c = bmat.T @ (q.toarray() @ bmat)
        c = 0.5 * (c + c.T)
        scaled = w[:, None] * c * w[None, :]
        lam = float(sla.eigvalsh(scaled)[-1])
        out.append(float(np.sqrt(max(lam, 0.0))))
    return out[0], out[1]


def _dual_gram(operators):
    """N = M_* K_*^-1 M_*, the Gram of the discrete dual norm."""
    mstar = _dense(operators.system.M_star)
    n = mstar @ operators.kstar.lu.solve(mstar)
    return 0.5 * (n + n.T)


def c_inv_h(operators):
    """sqrt of the largest eigenvalue of (D, N) with the h-weighted
    local Gram D and the dual-norm Gram N."""
    d = _dense(operators.system.D)
    n = _dual_gram(operators)
    lam = _gen_eig_max(d, n)
    return float(np.sqrt(max(lam, 0.0)))


def lambda_h(operators, probe):
    """Dual-norm gap Lambda_h = inf ||v||_{V^-1} / ||v||_{H^-1_*}.

    Computed from the largest eigenvalue of (H + S_-1, N) where H is
    the truncated H^-1-Gamma Gram G Hm1 G' of the trace functionals;
    returns (Lambda_h, 1/Lambda_h).
    """
    n = _dual_gram(operators)
    g = probe.G
    h = g @ (probe.Hm1_gram[:, None] * g.T)
    h = h + operators.system.S[-1].toarray()
    lam = _gen_eig_max(0.5 * (h + h.T), n)
    inv = float(np.sqrt(max(lam, 0.0)))
    return 1.0 / inv, inv


def infsup_bounds(norm_ph_h1star, norm_ph_h1gamma, c_inv, t_final,
                  mean_zero=False):
    """Lower/upper bounds on the space-time inf-sup constant.

    Lower: c_b^- / (||P_h||_H1* + C_inv,h) with c_b^- = 1/(sqrt8 (1+2T)),
    or 1/sqrt8 for mean-zero data.  Upper: sqrt2 / ||P_h||_H1Gamma.
    """
    cbm = 1.0 / np.sqrt(8.0)
    if not mean_zero:
        cbm /= (1.0 + 2.0 * t_final)
    lower = cbm / (norm_ph_h1star + c_inv)
    upper = np.sqrt(2.0) / norm_ph_h1gamma
    return float(lower), float(upper)


def _plain_s(system):
    """Unscaled sum of the per-element normal-derivative Grams."""
    import scipy.sparse as sp
    elems = system.mesh.elements
    n = system.n_dofs
    rows = np.repeat(elems, 3, axis=1).ravel()
    cols = np.tile(elems, (1, 3)).ravel()
    vals = np.array([b.ravel() for b in system.S_T]).ravel()
    return sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()


def condition_number(system, dt, stabilized_time=True, literal=False):
    """kappa of the one-implicit-step matrix.

    Default: built from the bilinear forms, B_* = (1/dt)(M + S0) + A + S1
    (stabilized time derivative) or B = (1/dt) M + A + S1.  With
    ``literal`` the displayed h/dt-scaled forms are used instead:
    B_* = (1/dt)(M + h S) + (A + (1/dt) S), B = (1/dt) M + (A + (1/dt) S)
    with S the unscaled normal Gram and h the mesh size.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if literal:
        s = _plain_s(system)
        h = system.mesh.h
        if stabilized_time:
            mat = (system.M + h * s) / dt + system.A + s / dt
        else:
            mat = system.M / dt + system.A + s / dt
    else:
        if stabilized_time:
            mat = system.M_star / dt + system.A + system.S[1]
        else:
            mat = system.M / dt + system.A + system.S[1]
    w = sla.eigvalsh(_dense(mat))
    if w[0] <= 0.0:
        raise SingularMatrix("one-step matrix has lambda_min = %.3e" % w[0])
    return float(w[-1] / w[0])


def kappa_pstar(system):
    """Condition number of the stabilized mass matrix M + S0."""
    w = sla.eigvalsh(_dense(system.M_star))
    if w[0] <= 0.0:
        raise SingularMatrix("M + S0 not positive definite")
    return float(w[-1] / w[0])


def max_regularity_ratio(operators, history, dt, u0=None, f=None):
    """Discrete maximal-parabolic-regularity ratio of a heat run.

    (||Lap_h u_h||_{L2t H^-1_*} + ||d_t u_h||_{L2t H^-1_*}) /
    (||f||_{L2t H^-1_Gamma} + ||u0||_{L2_Gamma}); the time integrals use
    the trapezoid rule on the step grid and backward differences for
    d_t u_h.  Returns 0 for identically zero data.
    """
    nsteps = len(history) - 1
    lap_sq = np.array([operators.hm1_star(operators.laplacian(x)) ** 2
                       for x in history])
    trap = np.ones(len(history))
    trap[0] = trap[-1] = 0.5
    lap_int = float(np.sqrt(dt * trap @ lap_sq))
    dtu_sq = [operators.hm1_star((history[n + 1] - history[n]) / dt) ** 2
              for n in range(nsteps)]
    dtu_int = float(np.sqrt(dt * np.sum(dtu_sq)))

    den = 0.0
    if u0 is not None:
        den += operators.l2_gamma_of_function(u0)
    if f is not None:
        f_sq = np.array([operators.hm1_gamma_of_function(f, n * dt) ** 2
                         for n in range(len(history))])
        den += float(np.sqrt(dt * trap @ f_sq))
    if den == 0.0:
        return 0.0
    return (lap_int + dtu_int) / den


@dataclass
class ConstantsReport:
    """All measured constants for one mesh; one CSV row."""

    mesh_id: str
    h: float
    n_dofs: int
    k_max: int
    norm_Ph_H1gamma: float
    norm_Ph_H1star: float
    C_inv_h: float
    Lambda_h: float
    inv_Lambda_h: float
    c_star_lower: float
    c_star_upper: float
    kappa_Pstar: float
    C_MPR_ratio: float = float("nan")
    dt_list: list = field(default_factory=list)
    kappa_B: list = field(default_factory=list)
    kappa_Bstar: list = field(default_factory=list)

    FIELDS = ("mesh_id", "h", "n_dofs", "k_max", "norm_Ph_H1gamma",
              "norm_Ph_H1star", "C_inv_h", "Lambda_h", "inv_Lambda_h",
              "c_star_lower", "c_star_upper", "kappa_Pstar", "C_MPR_ratio")

    def row(self):
        return [getattr(self, f) for f in self.FIELDS]


def constants_report(operators, probe, t_final=1.0, mesh_id=""):
    """Measure every eigenvalue-based constant on one mesh."""
    system = operators.system
    g_norm, s_norm = op_norms_ph(operators, probe)
    c_inv = c_inv_h(operators)
    lam, inv_lam = lambda_h(operators, probe)
    lower, upper = infsup_bounds(s_norm, g_norm, c_inv, t_final)
    return ConstantsReport(
        mesh_id=mesh_id,
        h=system.mesh.h,
        n_dofs=system.n_dofs,
        k_max=probe.k_max,
        norm_Ph_H1gamma=g_norm,
        norm_Ph_H1star=s_norm,
        C_inv_h=c_inv,
        Lambda_h=lam,
        inv_Lambda_h=inv_lam,
        c_star_lower=lower,
        c_star_upper=upper,
        kappa_Pstar=kappa_pstar(system),
    )
