"""Closed-form spectral kernels of an isotropic reference medium.

For ``zeta = xi + q`` the Fourier components of the periodic fields obey::

    u(xi)     = Phi . U(xi) + Theta : Sigma(xi)
    sigma(xi) = Psi . U(xi) + Gamma : Sigma(xi)

with ``U`` the eigenvelocity and ``Sigma`` the eigenstress. Every function
here accepts either one 3-vector ``zeta`` or an ``(N, 3)`` batch and returns
arrays with the matching leading dimension. Outputs use the unscaled Voigt
ordering of :mod:`dynhom.voigt`: Phi (3, 3), Theta (3, 6), Psi (6, 3),
Gamma (6, 6). All entries are real for real ``zeta``.
"""
from dataclasses import dataclass

import numpy as np

from .errors import ResonantReference, ZeroFrequency
from .voigt import tensor3_last_to_voigt, tensor3_to_voigt, tensor4_to_voigt

#: Relative distance to a reference-medium resonance below which evaluation fails.
RESONANCE_GUARD = 1e-8

_EYE = np.eye(3)
_I4S = 0.5 * (np.einsum("ik,jl->ijkl", _EYE, _EYE) + np.einsum("il,jk->ijkl", _EYE, _EYE))


def check_frequency(omega):
    omega = float(omega)
    if omega == 0.0 or not np.isfinite(omega):
        raise ZeroFrequency(f"omega must be finite and non-zero, got {omega}")
    return omega


def resonance_mask(zeta, omega, ref, eps=RESONANCE_GUARD):
    """Boolean mask of rows of ``zeta`` that violate the resonance guard."""
    zeta = np.atleast_2d(np.asarray(zeta, dtype=float))
    z2 = np.einsum("ni,ni->n", zeta, zeta)
    w2 = omega * omega
    bad = np.zeros(z2.shape, dtype=bool)
    for c2 in (ref.c1 ** 2, ref.c2 ** 2):
        dist = np.abs(w2 - c2 * z2)
        bad |= dist < eps * np.maximum(w2, c2 * z2)
    return bad


def _prepare(zeta, omega, ref):
    omega = check_frequency(omega)
    zeta = np.asarray(zeta, dtype=float)
    single = zeta.ndim == 1
    zeta = np.atleast_2d(zeta)
    bad = resonance_mask(zeta, omega, ref)
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        raise ResonantReference(
            f"reference medium is resonant at zeta={zeta[k].tolist()}, omega={omega}: "
            "choose a different reference medium or detune (q, omega)",
            zeta=zeta[k])
    z2 = np.einsum("ni,ni->n", zeta, zeta)
    w2 = omega * omega
    d_shear = w2 - ref.c2 ** 2 * z2
    d_long = w2 - ref.c1 ** 2 * z2
    return single, zeta, omega, z2, d_shear, d_long


def _out(single, arr):
    return arr[0] if single else arr


def g_tensors(zeta):
    """The four rank-4 building blocks ``g1..g4`` for each row of ``zeta``.

    g1_ijkl = (z_i d_jk z_l + z_i d_jl z_k + z_j d_ik z_l + z_j d_il z_k) / 2,
    g2_ijkl = d_ij z_k z_l, g3_ijkl = z_i z_j d_kl, g4_ijkl = z_i z_j z_k z_l.
    """
    zeta = np.asarray(zeta, dtype=float)
    zd = np.einsum("...i,jk->...ijk", zeta, _EYE)  # z_i d_jk
    g1 = 0.5 * (np.einsum("...ijk,...l->...ijkl", zd, zeta)
                + np.einsum("...ijl,...k->...ijkl", zd, zeta)
                + np.einsum("...jik,...l->...ijkl", zd, zeta)
                + np.einsum("...jil,...k->...ijkl", zd, zeta))
    zz = np.einsum("...i,...j->...ij", zeta, zeta)
    g2 = np.einsum("ij,...kl->...ijkl", _EYE, zz)
    g3 = np.einsum("...ij,kl->...ijkl", zz, _EYE)
    g4 = np.einsum("...ij,...kl->...ijkl", zz, zz)
    return g1, g2, g3, g4


def velocity_operator(zeta, omega, ref):
    """``H_ij = -(lam + mu) z_i z_j + (omega^2 rho - mu |z|^2) d_ij``."""
    zeta = np.asarray(zeta, dtype=float)
    z2 = np.einsum("...i,...i->...", zeta, zeta)
    zz = np.einsum("...i,...j->...ij", zeta, zeta)
    return (-(ref.lam + ref.mu) * zz
            + (omega ** 2 * ref.rho - ref.mu * z2)[..., None, None] * _EYE)


def stress_operator(zeta, omega, ref):
    """``F_ijkl = -lam g2 - mu g1 + omega^2 rho d_ik d_jl`` (full rank-4)."""
    g1, g2, _, _ = g_tensors(zeta)
    return (-ref.lam * g2 - ref.mu * g1
            + omega ** 2 * ref.rho * np.einsum("ik,jl->ijkl", _EYE, _EYE))


def reference_compliance_tensor(ref):
    """Full rank-4 compliance of the isotropic reference medium."""
    lam, mu = ref.lam, ref.mu
    return (-lam / (2.0 * mu * (3.0 * lam + 2.0 * mu)) * np.einsum("ij,kl->ijkl", _EYE, _EYE)
            + _I4S / (2.0 * mu))


def reference_stiffness_tensor(ref):
    return ref.lam * np.einsum("ij,kl->ijkl", _EYE, _EYE) + 2.0 * ref.mu * _I4S


def phi_tensor(zeta, omega, ref):
    single, z, omega, z2, ds, dl = _prepare(zeta, omega, ref)
    c1s, c2s = ref.c1 ** 2, ref.c2 ** 2
    zz = np.einsum("ni,nj->nij", z, z)
    phi = omega ** 2 * (((c1s - c2s) / (ds * dl))[:, None, None] * zz
                        + (1.0 / ds)[:, None, None] * _EYE)
    return _out(single, phi)


def theta_tensor(zeta, omega, ref, symmetrize=True):
    """Rank-3 ``Theta_ijp``; symmetrized over (j, p) unless told otherwise."""
    single, z, omega, _, _, _ = _prepare(zeta, omega, ref)
    phi = np.atleast_3d(phi_tensor(z, omega, ref)).reshape(-1, 3, 3)
    raw = -np.einsum("nij,np->nijp", phi, z) / (omega * ref.rho)
    if symmetrize:
        raw = 0.5 * (raw + np.swapaxes(raw, -1, -2))
    return _out(single, raw)


def gamma_tensor(zeta, omega, ref):
    single, z, omega, _, ds, dl = _prepare(zeta, omega, ref)
    c1s, c2s = ref.c1 ** 2, ref.c2 ** 2
    g1, g2, _, g4 = g_tensors(z)
    gam = ((c2s / ds)[:, None, None, None, None] * g1
           + ((c1s - 2.0 * c2s) / dl)[:, None, None, None, None] * g2
           + (2.0 * c2s * (c1s - c2s) / (ds * dl))[:, None, None, None, None] * g4
           + _I4S)
    return _out(single, gam)


def psi_tensor(zeta, omega, ref):
    single, z, omega, _, ds, dl = _prepare(zeta, omega, ref)
    c1s, c2s = ref.c1 ** 2, ref.c2 ** 2
    zzz = np.einsum("ni,nj,np->nijp", z, z, z)
    dz = np.einsum("ij,np->nijp", _EYE, z)
    zd = np.einsum("ni,jp->nijp", z, _EYE)
    psi = -omega * ref.rho * (
        (2.0 * c2s * (c1s - c2s) / (ds * dl))[:, None, None, None] * zzz
        + ((c1s - 2.0 * c2s) / dl)[:, None, None, None] * dz
        + (c2s / ds)[:, None, None, None] * (zd + np.swapaxes(zd, 1, 2)))
    return _out(single, psi)


def psi_hat_tensor(zeta, omega, ref):
    """``D0 : Psi`` from its closed form (no explicit contraction)."""
    single, z, omega, _, ds, dl = _prepare(zeta, omega, ref)
    c1s, c2s = ref.c1 ** 2, ref.c2 ** 2
    zzz = np.einsum("ni,nj,np->nijp", z, z, z)
    zd = np.einsum("ni,jp->nijp", z, _EYE)
    out = -0.5 * omega * (
        (2.0 * (c1s - c2s) / (ds * dl))[:, None, None, None] * zzz
        + (1.0 / ds)[:, None, None, None] * (zd + np.swapaxes(zd, 1, 2)))
    return _out(single, out)


def gamma_hat_tensor(zeta, omega, ref):
    """``D0 : Gamma`` from its closed form; has major and minor symmetry."""
    single, z, omega, _, ds, dl = _prepare(zeta, omega, ref)
    c1s, c2s = ref.c1 ** 2, ref.c2 ** 2
    g1, _, _, g4 = g_tensors(z)
    dd = np.einsum("ij,kl->ijkl", _EYE, _EYE)
    out = (
        (0.5 / ds)[:, None, None, None, None] * g1
        - (c1s - 2.0 * c2s) / (2.0 * c2s * (3.0 * c1s - 4.0 * c2s)) * dd
        + ((c1s - c2s) / (ds * dl))[:, None, None, None, None] * g4
        + _I4S / (2.0 * c2s)
    ) / ref.rho
    return _out(single, out)


def eval_phi(zeta, omega, ref):
    """Phi as a 3x3 matrix (batched)."""
    return phi_tensor(zeta, omega, ref)


def eval_theta(zeta, omega, ref):
    """Symmetrized Theta as a 3x6 Voigt matrix ``[p, (jk)]``."""
    return tensor3_last_to_voigt(theta_tensor(zeta, omega, ref))


def eval_gamma(zeta, omega, ref):
    """Gamma as an unscaled 6x6 Voigt matrix."""
    return tensor4_to_voigt(gamma_tensor(zeta, omega, ref))


def eval_psi(zeta, omega, ref):
    """Psi as a 6x3 Voigt matrix ``[(ij), p]``."""
    return tensor3_to_voigt(psi_tensor(zeta, omega, ref))


@dataclass(frozen=True)
class SpectralKernels:
    """Kernels and their hatted transforms at one or many ``zeta``.

    ``phi_hat = rho0 Phi``, ``theta_hat = rho0 Theta``, ``psi_hat = D0 : Psi``
    and ``gamma_hat = D0 : Gamma``. Shapes follow the module convention.
    """

    phi: np.ndarray
    theta: np.ndarray
    psi: np.ndarray
    gamma: np.ndarray
    phi_hat: np.ndarray
    theta_hat: np.ndarray
    psi_hat: np.ndarray
    gamma_hat: np.ndarray


def eval_hatted(zeta, omega, ref):
    """Evaluate all kernels plus hatted forms at ``zeta``."""
    phi = eval_phi(zeta, omega, ref)
    theta = eval_theta(zeta, omega, ref)
    return SpectralKernels(
        phi=phi,
        theta=theta,
        psi=eval_psi(zeta, omega, ref),
        gamma=eval_gamma(zeta, omega, ref),
        phi_hat=ref.rho * phi,
        theta_hat=ref.rho * theta,
        psi_hat=tensor3_to_voigt(psi_hat_tensor(zeta, omega, ref)),
        gamma_hat=tensor4_to_voigt(gamma_hat_tensor(zeta, omega, ref)),
    )


def eval_assembly_kernels(zeta, omega, ref):
    """Hatted kernels only, as needed by the block assembly.

    Returns ``(gamma_hat, phi_hat, psi_hat, theta_hat)`` with shapes
    ``(N, 6, 6), (N, 3, 3), (N, 6, 3), (N, 3, 6)``. ``theta_hat`` is built
    from Phi, independently of the closed form used for ``psi_hat``.
    """
    zeta = np.atleast_2d(np.asarray(zeta, dtype=float))
    gamma_hat = tensor4_to_voigt(gamma_hat_tensor(zeta, omega, ref))
    phi_hat = ref.rho * phi_tensor(zeta, omega, ref)
    psi_hat = tensor3_to_voigt(psi_hat_tensor(zeta, omega, ref))
    theta_hat = ref.rho * tensor3_last_to_voigt(theta_tensor(zeta, omega, ref))
    return gamma_hat, phi_hat, psi_hat, theta_hat
