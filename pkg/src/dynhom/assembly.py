"""Assembly of the coupled eigenstress / eigenvelocity block system.

For subregions ``a, b`` and each hatted kernel ``K`` the block is::

    K^{ab} = sum_{xi != 0} f^a g^a(xi) f^b g^b(-xi) K(xi + q)

Since ``g^b(-xi) = conj(g^b(xi))`` and every kernel is real, each lattice
term is ``w w^H (x) K`` with ``w_a = f^a g^a(xi)``, so the Gamma-hat and
Phi-hat block matrices are hermitian term by term and the Psi-hat / Theta-hat
pair are exact adjoints.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import logging
import warnings

import numpy as np

from .errors import DegenerateContrast, IllConditioningWarning, ResonantReference
from .kernels import check_frequency, eval_assembly_kernels, resonance_mask
from .unitcell import SpectralGrid, volume_fractions

logger = logging.getLogger(__name__)

#: Lattice points processed per accumulation chunk. Fixed so that results do
#: not depend on the number of workers.
CHUNK_SIZE = 2048

COND_WARN = 1e12
COND_FAIL = 1e14


@dataclass(frozen=True)
class AssembledSystem:
    """Block matrices of the hatted eigenfield system at one (q, omega).

    ``gamma_bar``/``phi_bar`` hold the lattice sums only; ``gamma_tilde`` and
    ``phi_tilde`` add the diagonal contrast terms. Rows and columns of a
    subregion whose stiffness (density) equals the reference are flagged
    inactive in ``stress_active`` (``velocity_active``) and carry no
    augmentation; the solver removes them.
    """

    gamma_bar: np.ndarray
    phi_bar: np.ndarray
    gamma_tilde: np.ndarray
    phi_tilde: np.ndarray
    psi_hat: np.ndarray
    theta_hat: np.ndarray
    f1: np.ndarray
    f2: np.ndarray
    fractions: np.ndarray
    stress_active: np.ndarray
    velocity_active: np.ndarray
    augmentation_cond: tuple
    reference: object
    q: tuple
    omega: float
    n_max: tuple

    @property
    def n_regions(self):
        return len(self.fractions)

    def block(self, name, a, b):
        """Return the (a, b) sub-block of one of the block matrices."""
        m = getattr(self, name)
        rs = m.shape[0] // max(self.n_regions, 1)
        cs = m.shape[1] // max(self.n_regions, 1)
        return m[rs * a:rs * (a + 1), cs * b:cs * (b + 1)]


def _stack(fractions, size):
    r = len(fractions)
    f = np.zeros((size * r, size))
    for a, fa in enumerate(fractions):
        f[size * a:size * (a + 1)] = fa * np.eye(size)
    return f


def _block_outer(weights, kernel):
    """``sum_n w_n w_n^H (x) K_n`` laid out as a (R*p, R*s) block matrix."""
    n, r = weights.shape
    p, s = kernel.shape[1:]
    outer = (weights[:, :, None] * weights.conj()[:, None, :]).reshape(n, r * r)
    acc = outer.T @ kernel.reshape(n, p * s)
    return acc.reshape(r, r, p, s).transpose(0, 2, 1, 3).reshape(r * p, r * s)


def _chunk_sum(cell, grid, ref, fractions, n_chunk):
    xi = cell.reciprocal_vector(n_chunk)
    zeta = xi + np.array(grid.q)
    w = cell.g_matrix(xi) * fractions[None, :]
    gamma_hat, phi_hat, psi_hat, theta_hat = eval_assembly_kernels(zeta, grid.omega, ref)
    return (_block_outer(w, gamma_hat), _block_outer(w, phi_hat),
            _block_outer(w, psi_hat), _block_outer(w, theta_hat))


def _augmentations(cell, fractions):
    ref = cell.reference
    d0 = ref.material.compliance
    r = cell.n_regions
    stress_active = np.ones(r, dtype=bool)
    velocity_active = np.ones(r, dtype=bool)
    gamma_aug = np.zeros((r, 6, 6))
    phi_aug = np.zeros(r)
    conds = []
    for a, box in enumerate(cell.subregions):
        name = box.label or f"#{a}"
        mat = box.material
        if mat.same_stiffness(ref.material):
            stress_active[a] = False
            conds.append(float("nan"))
        else:
            diff = mat.compliance - d0
            cond = float(np.linalg.cond(diff))
            conds.append(cond)
            if not np.isfinite(cond) or cond > COND_FAIL:
                raise DegenerateContrast(
                    f"compliance contrast of subregion {name} is singular "
                    f"(condition number {cond:.3g}); bulk or shear modulus matches "
                    "the reference while the other does not")
            if cond > COND_WARN:
                warnings.warn(f"compliance contrast of subregion {name} is ill-conditioned "
                              f"(condition number {cond:.3g})", IllConditioningWarning)
            gamma_aug[a] = fractions[a] * d0 @ np.linalg.solve(diff, d0)
        if mat.same_density(ref.material):
            velocity_active[a] = False
        else:
            phi_aug[a] = fractions[a] * ref.rho * ref.rho / (mat.rho - ref.rho)
    return stress_active, velocity_active, gamma_aug, phi_aug, tuple(conds)


def assemble(cell, grid, workers=1):
    """Assemble the block system for ``cell`` at the point described by ``grid``.

    Parameters
    ----------
    cell : UnitCell
    grid : SpectralGrid
    workers : int
        Threads used for the lattice sum. Chunks are merged in a fixed order,
        so the result does not depend on this value.

    Raises
    ------
    ResonantReference
        If some ``zeta = xi + q`` of the lattice hits a reference resonance.
    DegenerateContrast
        If a listed subregion has a singular compliance contrast.
    """
    omega = check_frequency(grid.omega)
    ref = cell.reference
    fractions = volume_fractions(cell)
    r = cell.n_regions
    n_points = grid.integer_points()

    zeta = cell.reciprocal_vector(n_points) + np.array(grid.q)
    bad = resonance_mask(zeta, omega, ref)
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        n_bad = tuple(int(v) for v in n_points[k])
        raise ResonantReference(
            f"reference medium resonant at lattice point n={n_bad} "
            f"(zeta={zeta[k].tolist()}, omega={omega})", n=n_bad, zeta=zeta[k])

    stress_active, velocity_active, gamma_aug, phi_aug, conds = _augmentations(cell, fractions)

    gamma = np.zeros((6 * r, 6 * r), dtype=complex)
    phi = np.zeros((3 * r, 3 * r), dtype=complex)
    psi = np.zeros((6 * r, 3 * r), dtype=complex)
    theta = np.zeros((3 * r, 6 * r), dtype=complex)
    if r:
        chunks = [n_points[i:i + CHUNK_SIZE] for i in range(0, len(n_points), CHUNK_SIZE)]
        if workers > 1 and len(chunks) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                parts = list(pool.map(
                    lambda c: _chunk_sum(cell, grid, ref, fractions, c), chunks))
        else:
            parts = [_chunk_sum(cell, grid, ref, fractions, c) for c in chunks]
        for pg, pp, ps, pt in parts:
            gamma += pg
            phi += pp
            psi += ps
            theta += pt

    gamma_tilde = gamma.copy()
    phi_tilde = phi.copy()
    for a in range(r):
        gamma_tilde[6 * a:6 * a + 6, 6 * a:6 * a + 6] += gamma_aug[a]
        phi_tilde[3 * a:3 * a + 3, 3 * a:3 * a + 3] += phi_aug[a] * np.eye(3)

    logger.debug("assembled %d regions over %d lattice terms", r, len(n_points))
    return AssembledSystem(
        gamma_bar=gamma, phi_bar=phi, gamma_tilde=gamma_tilde, phi_tilde=phi_tilde,
        psi_hat=psi, theta_hat=theta, f1=_stack(fractions, 6), f2=_stack(fractions, 3),
        fractions=fractions, stress_active=stress_active, velocity_active=velocity_active,
        augmentation_cond=conds, reference=ref, q=grid.q, omega=omega, n_max=grid.n_max)


@dataclass(frozen=True)
class ConvergenceTable:
    """Effective properties at increasing truncations.

    ``distances[k]`` compares ``n_list[k]`` with ``n_list[k + 1]``; it is the
    largest of the max-norm changes of D, S1, S2 and rho, each made
    dimensionless with the reference medium (|D0|, sqrt(|D0| rho0), rho0).
    """

    n_list: tuple
    properties: tuple
    distances: tuple


def property_distance(a, b, ref):
    """Dimensionless max-norm distance between two EffectiveProperties."""
    d_scale = float(np.max(np.abs(ref.material.compliance)))
    s_scale = np.sqrt(d_scale * ref.rho)
    return max(
        float(np.max(np.abs(a.d_bar - b.d_bar))) / d_scale,
        float(np.max(np.abs(a.s1_bar - b.s1_bar))) / s_scale,
        float(np.max(np.abs(a.s2_bar - b.s2_bar))) / s_scale,
        float(np.max(np.abs(a.rho_bar - b.rho_bar))) / ref.rho,
    )


def truncation_sweep(cell, q, omega, n_list, workers=1):
    """Effective properties for each truncation in ``n_list`` and their drift."""
    from .solver import solve_effective

    n_list = tuple(n_list)
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("n_list must be strictly increasing")
    props = tuple(
        solve_effective(cell, SpectralGrid(n_max=n, q=q, omega=omega), workers=workers)
        for n in n_list)
    dist = tuple(property_distance(a, b, cell.reference) for a, b in zip(props, props[1:]))
    return ConvergenceTable(n_list=n_list, properties=props, distances=dist)
