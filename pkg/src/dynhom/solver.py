"""Eigenfield solve and overall dynamic constitutive tensors.

Let ``y = W Sigma`` (engineering-weighted eigenstress). The consistency
conditions averaged over every subregion read::

    [Gamma~  Psi^ ] [y]     [D0 W F1 <sigma>]
    [Theta^  Phi~ ] [U] = - [rho0 F2 <u>    ]

The operator is hermitian (Psi^ = Theta^H). One pivoted LU of it yields the
influence matrices Delta, Lambda, Xi, Omega and from them::

    <eps> = D W <sigma> + S1 <u>        <p> = S2 W <sigma> + rho <u>

All effective tensors are stored as unscaled Voigt images of the tensors
(``D[(ij),(kl)] = D_ijkl``), so the weight ``W`` appears wherever a symmetric
index pair is contracted. In this form ``D`` and ``rho`` are hermitian and
``S2^H = S1``.
"""
from dataclasses import dataclass, field
import logging

import numpy as np
import scipy.linalg
from scipy.linalg import get_lapack_funcs

from .assembly import assemble
from .errors import SingularEffectiveCompliance, SingularSystem
from .kernels import eval_gamma, eval_phi, eval_psi, eval_theta
from .unitcell import SpectralGrid
from .voigt import relative_hermitian_residual, weight_diag

logger = logging.getLogger(__name__)

#: Reciprocal condition number below which the eigenfield operator is rejected.
PIVOT_THRESHOLD = 1e-13
#: Default tolerance on the structural residuals of the effective tensors.
TOL_EFF = 1e-9


@dataclass(frozen=True)
class InfluenceMatrices:
    """Eigenfields per unit average stress / velocity.

    ``{Sigma} = delta <sigma> + lam <u>`` and ``{U} = xi <sigma> + omega_m <u>``
    with shapes (6R, 6), (6R, 3), (3R, 6), (3R, 3). Eigenstresses are
    unscaled Voigt vectors.
    """

    delta: np.ndarray
    lam: np.ndarray
    xi: np.ndarray
    omega_m: np.ndarray
    rcond: float
    system: object = field(repr=False)


def _active_rows(mask, size):
    return np.concatenate([np.arange(size * a, size * a + size)
                           for a in np.flatnonzero(mask)] or [np.zeros(0, dtype=int)])


def _rcond(lu, anorm):
    gecon, = get_lapack_funcs(("gecon",), (lu,))
    rcond, info = gecon(lu, anorm, norm="1")
    return float(rcond)


def solve_influence(sys):
    """Solve the assembled system for the influence matrices.

    Raises
    ------
    SingularSystem
        When the reciprocal condition number of the (diagonally scaled)
        operator is below ``PIVOT_THRESHOLD``. Typically (q, omega) sits at a
        resonance of the heterogeneous cell with vanishing averages, or the
        reference medium is a poor choice.
    """
    ref = sys.reference
    r = sys.n_regions
    w = weight_diag()
    s_idx = _active_rows(sys.stress_active, 6)
    v_idx = _active_rows(sys.velocity_active, 3)
    ns, nv = len(s_idx), len(v_idx)

    k = np.block([
        [sys.gamma_tilde[np.ix_(s_idx, s_idx)], sys.psi_hat[np.ix_(s_idx, v_idx)]],
        [sys.theta_hat[np.ix_(v_idx, s_idx)], sys.phi_tilde[np.ix_(v_idx, v_idx)]],
    ])
    rhs = np.zeros((ns + nv, 9), dtype=complex)
    d0w = ref.material.compliance * w[None, :]
    rhs[:ns, :6] = -(sys.f1 @ d0w)[s_idx]
    rhs[ns:, 6:] = -ref.rho * sys.f2[v_idx]

    # symmetric diagonal scaling keeps the operator hermitian and O(1)
    scale = np.concatenate([np.full(ns, np.sqrt(ref.mu)), np.full(nv, 1.0 / np.sqrt(ref.rho))])
    rcond = 1.0
    if ns + nv:
        ks = scale[:, None] * k * scale[None, :]
        if not np.all(np.isfinite(ks)):
            raise SingularSystem("eigenfield operator has non-finite entries",
                                 operator="[Gamma~ Psi^; Theta^ Phi~]", rcond=0.0)
        anorm = float(np.max(np.sum(np.abs(ks), axis=0)))
        lu, piv = scipy.linalg.lu_factor(ks, check_finite=False)
        rcond = _rcond(lu, anorm)
        if not rcond >= PIVOT_THRESHOLD:
            raise SingularSystem(
                f"eigenfield operator [Gamma~ Psi^; Theta^ Phi~] is singular "
                f"(reciprocal condition {rcond:.3g}, size {ns + nv}) at q={sys.q}, "
                f"omega={sys.omega}", operator="[Gamma~ Psi^; Theta^ Phi~]", rcond=rcond)
        x = scale[:, None] * scipy.linalg.lu_solve((lu, piv), scale[:, None] * rhs,
                                                   check_finite=False)
    else:
        x = rhs

    sigma = np.zeros((6 * r, 9), dtype=complex)
    vel = np.zeros((3 * r, 9), dtype=complex)
    w_bar = np.tile(w, r)
    sigma[s_idx] = x[:ns] / w_bar[s_idx][:, None]
    vel[v_idx] = x[ns:]
    return InfluenceMatrices(delta=sigma[:, :6], lam=sigma[:, 6:], xi=vel[:, :6],
                             omega_m=vel[:, 6:], rcond=rcond, system=sys)


@dataclass(frozen=True)
class EffectiveProperties:
    """Overall dynamic constitutive tensors at one (q, omega).

    Primary form: ``<eps> = D W <sigma> + S1 <u>``, ``<p> = S2 W <sigma> + rho <u>``.
    Willis form: ``<sigma> = C W <eps> + S <u>``, ``<p> = Sb W <eps> + rho1 <u>``
    with ``C = D^{-1}``, ``S = -C:S1``, ``Sb = S2:C``, ``rho1 = rho - S2:C:S1``.
    The Willis fields are ``None`` when D is singular (see ``willis_error``).
    """

    d_bar: np.ndarray
    s1_bar: np.ndarray
    s2_bar: np.ndarray
    rho_bar: np.ndarray
    c_bar: np.ndarray = None
    s_willis: np.ndarray = None
    s_bar_willis: np.ndarray = None
    rho1_bar: np.ndarray = None
    willis_error: str = None
    q: tuple = None
    omega: float = None
    n_max: tuple = None
    rcond: float = None

    @property
    def has_willis(self):
        return self.c_bar is not None

    def strain_momentum(self, mean_stress, mean_velocity):
        """Average strain (Voigt, tensor components) and momentum."""
        w = weight_diag()
        s = np.asarray(mean_stress, dtype=complex)
        u = np.asarray(mean_velocity, dtype=complex)
        eps = self.d_bar @ (w * s) + self.s1_bar @ u
        p = self.s2_bar @ (w * s) + self.rho_bar @ u
        return eps, p

    def stress_momentum(self, mean_strain, mean_velocity):
        """Willis form: average stress and momentum from strain and velocity."""
        if not self.has_willis:
            raise SingularEffectiveCompliance(self.willis_error or "Willis form unavailable")
        w = weight_diag()
        e = np.asarray(mean_strain, dtype=complex)
        u = np.asarray(mean_velocity, dtype=complex)
        sig = self.c_bar @ (w * e) + self.s_willis @ u
        p = self.s_bar_willis @ (w * e) + self.rho1_bar @ u
        return sig, p

    def coupling_scale(self):
        """Natural magnitude sqrt(|D| |rho|) of the coupling tensors [s/m]."""
        return float(np.sqrt(np.max(np.abs(self.d_bar)) * np.max(np.abs(self.rho_bar))))

    def residuals(self):
        """Relative structural residuals: hermiticity of D and rho, S2^H - S1."""
        s_scale = max(float(np.max(np.abs(self.s1_bar))), float(np.max(np.abs(self.s2_bar))),
                      1e-12 * self.coupling_scale())
        adj = float(np.max(np.abs(self.s2_bar.conj().T - self.s1_bar))) / s_scale \
            if s_scale > 0.0 else 0.0
        return {
            "hermitian_d": relative_hermitian_residual(self.d_bar),
            "hermitian_rho": relative_hermitian_residual(self.rho_bar),
            "adjoint_s": adj,
        }


def _willis_form(d_bar, s1, s2, rho):
    w = weight_diag()
    cond = float(np.linalg.cond(d_bar))
    if not np.isfinite(cond) or cond > 1.0 / np.finfo(float).eps:
        raise SingularEffectiveCompliance(
            f"effective compliance is singular (condition number {cond:.3g})")
    d_inv_s1 = np.linalg.solve(d_bar, s1)
    d_inv = np.linalg.solve(d_bar, np.eye(6))
    c_bar = d_inv / w[:, None] / w[None, :]
    s_willis = -d_inv_s1 / w[:, None]
    s_bar = (s2 @ d_inv) / w[None, :]
    rho1 = rho - s2 @ d_inv_s1
    return c_bar, s_willis, s_bar, rho1


def effective_properties(inf, sys=None):
    """Average the influence matrices into the overall tensors."""
    sys = inf.system if sys is None else sys
    ref = sys.reference
    w = weight_diag()
    d0 = ref.material.compliance
    avg_delta = sys.f1.T @ inf.delta
    avg_lam = sys.f1.T @ inf.lam
    avg_xi = sys.f2.T @ inf.xi
    avg_omega = sys.f2.T @ inf.omega_m

    d0w = d0 * w[None, :]
    d_map = d0w @ (np.eye(6) - avg_delta)
    d_bar = d_map / w[None, :]
    s1 = -d0w @ avg_lam
    s2 = -ref.rho * avg_xi / w[None, :]
    rho = ref.rho * (np.eye(3) - avg_omega)

    kwargs = dict(d_bar=d_bar, s1_bar=s1, s2_bar=s2, rho_bar=rho, q=sys.q,
                  omega=sys.omega, n_max=sys.n_max, rcond=inf.rcond)
    try:
        c_bar, s_w, s_bar_w, rho1 = _willis_form(d_bar, s1, s2, rho)
        kwargs.update(c_bar=c_bar, s_willis=s_w, s_bar_willis=s_bar_w, rho1_bar=rho1)
    except SingularEffectiveCompliance as exc:
        logger.warning("Willis form unavailable: %s", exc)
        kwargs.update(willis_error=str(exc))
    return EffectiveProperties(**kwargs)


def solve_effective(cell, grid, workers=1):
    """Assemble, solve and average in one call."""
    sys = assemble(cell, grid, workers=workers)
    return effective_properties(solve_influence(sys), sys)


def willis_self_adjointness_check(cell, q, omega, n_max, workers=1):
    """Relative residual of ``Sb_ijk(q, w) = S_jki(-q, w)``.

    Returns ``max|Sb(q) - S(-q)^T| / max(|Sb(q)|, |S(-q)|)``, with the scale
    floored at ``1e-12`` of the natural magnitude sqrt(|C| |rho1|) so that
    vanishing couplings give a zero rather than an undefined residual.
    """
    q = np.asarray(q, dtype=float)
    plus = solve_effective(cell, SpectralGrid(n_max=n_max, q=q, omega=omega), workers)
    if not np.any(q):
        minus = plus
    else:
        minus = solve_effective(cell, SpectralGrid(n_max=n_max, q=-q, omega=omega), workers)
    for eff in (plus, minus):
        if not eff.has_willis:
            raise SingularEffectiveCompliance(eff.willis_error)
    diff = plus.s_bar_willis - minus.s_willis.T
    natural = np.sqrt(np.max(np.abs(plus.c_bar)) * np.max(np.abs(plus.rho1_bar)))
    scale = max(float(np.max(np.abs(plus.s_bar_willis))), float(np.max(np.abs(minus.s_willis))),
                1e-12 * natural)
    return float(np.max(np.abs(diff))) / scale


def energy(eff, mean_stress, mean_velocity):
    """``E = (sigma_ij eps*_ij + u_i p*_i) / 2`` for one probe."""
    w = weight_diag()
    s = np.asarray(mean_stress, dtype=complex)
    u = np.asarray(mean_velocity, dtype=complex)
    eps, p = eff.strain_momentum(s, u)
    return 0.5 * (np.sum(s * w * eps.conj()) + np.sum(u * p.conj()))


def energy_reality_check(eff, probes):
    """Largest ``|Im E| / |E|`` over ``(mean_stress, mean_velocity)`` probes."""
    worst = 0.0
    for s, u in probes:
        e = energy(eff, s, u)
        if e != 0:
            worst = max(worst, abs(e.imag) / abs(e))
    return worst


@dataclass(frozen=True)
class EigenfieldSolution:
    """Per-subregion eigenstress (R, 6) [Pa] and eigenvelocity (R, 3) [m/s]."""

    sigma_eig: np.ndarray
    u_eig: np.ndarray
    mean_stress: np.ndarray
    mean_velocity: np.ndarray
    fractions: np.ndarray

    def averages(self):
        """Volume-weighted sums ``sum_a f^a Sigma^a`` and ``sum_a f^a U^a``."""
        return self.fractions @ self.sigma_eig, self.fractions @ self.u_eig


def eigenfields(inf, mean_stress, mean_velocity):
    s = np.asarray(mean_stress, dtype=complex).reshape(6)
    u = np.asarray(mean_velocity, dtype=complex).reshape(3)
    sig = inf.delta @ s + inf.lam @ u
    vel = inf.xi @ s + inf.omega_m @ u
    r = inf.system.n_regions
    return EigenfieldSolution(sigma_eig=sig.reshape(r, 6), u_eig=vel.reshape(r, 3),
                              mean_stress=s, mean_velocity=u,
                              fractions=inf.system.fractions)


@dataclass(frozen=True)
class FieldSnapshot:
    """Periodic parts of stress (P, 6) and velocity (P, 3) at ``points``."""

    points: np.ndarray
    stress: np.ndarray
    velocity: np.ndarray


def reconstruct_fields(cell, grid, eig, points, chunk=4096):
    """Evaluate the truncated Fourier series of stress and velocity at ``points``.

    Subregion integrals of the eigenfields are replaced by their g-weighted
    finite sums, consistent with the assembled system.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    a = np.array(cell.half_periods)
    if np.any(np.abs(points) > a * (1 + 1e-12)):
        raise ValueError("all points must lie inside the cell")
    ref = cell.reference
    w = weight_diag()
    n = grid.integer_points()
    xi = cell.reciprocal_vector(n)
    zeta = xi + np.array(grid.q)
    stress = np.tile(eig.mean_stress, (len(points), 1)).astype(complex)
    vel = np.tile(eig.mean_velocity, (len(points), 1)).astype(complex)
    if cell.n_regions == 0:
        return FieldSnapshot(points=points, stress=stress, velocity=vel)
    # f^b g^b(-xi) = conj(f^b g^b(xi))
    wgt = (cell.g_matrix(xi) * eig.fractions[None, :]).conj()
    sig_hat = wgt @ eig.sigma_eig
    u_hat = wgt @ eig.u_eig
    gam = eval_gamma(zeta, grid.omega, ref)
    psi = eval_psi(zeta, grid.omega, ref)
    phi = eval_phi(zeta, grid.omega, ref)
    theta = eval_theta(zeta, grid.omega, ref)
    ws = sig_hat * w[None, :]
    s_coef = np.einsum("nij,nj->ni", gam, ws) + np.einsum("nip,np->ni", psi, u_hat)
    u_coef = np.einsum("nij,nj->ni", phi, u_hat) + np.einsum("nij,nj->ni", theta, ws)
    for start in range(0, len(points), chunk):
        block = points[start:start + chunk]
        phase = np.exp(1j * (block @ xi.T))
        stress[start:start + chunk] += phase @ s_coef
        vel[start:start + chunk] += phase @ u_coef
    return FieldSnapshot(points=points, stress=stress, velocity=vel)


def constraint_jacobian():
    """Real Jacobian of the structural constraints on the stacked tensors.

    Parameters are the real and imaginary parts of D (6x6), S1 (6x3),
    S2 (3x6) and rho (3x3), 162 reals in total; residuals are
    ``D - D^H``, ``rho - rho^H`` and ``S2^H - S1``.
    """
    sizes = {"d": (6, 6), "s1": (6, 3), "s2": (3, 6), "rho": (3, 3)}
    offsets = {}
    pos = 0
    for key, shp in sizes.items():
        offsets[key] = pos
        pos += 2 * shp[0] * shp[1]
    n_par = pos

    def unpack(x):
        out = {}
        for key, shp in sizes.items():
            m = shp[0] * shp[1]
            o = offsets[key]
            out[key] = (x[o:o + m] + 1j * x[o + m:o + 2 * m]).reshape(shp)
        return out

    def residual(x):
        t = unpack(x)
        parts = [t["d"] - t["d"].conj().T, t["rho"] - t["rho"].conj().T,
                 t["s2"].conj().T - t["s1"]]
        flat = np.concatenate([p.ravel() for p in parts])
        return np.concatenate([flat.real, flat.imag])

    # the constraints are linear: columns are images of unit vectors
    eye = np.eye(n_par)
    return np.stack([residual(eye[i]) for i in range(n_par)], axis=1), unpack


def independent_constants():
    """Count the free parameters left by hermiticity and adjointness.

    Returns ``(real_dof, constants)``: the nullity of the constraint Jacobian
    and the number of independent tensor entries, a hermitian diagonal entry
    counting once (it is real) and every off-diagonal pair or free complex
    coupling entry counting once.
    """
    jac, _ = constraint_jacobian()
    real_dof = jac.shape[1] - int(np.linalg.matrix_rank(jac))
    real_diagonals = 6 + 3
    return real_dof, (real_dof + real_diagonals) // 2
