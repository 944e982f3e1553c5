"""Periodic unit cell: box subregions, isotropic materials, g-factors.

The cell occupies ``[-a_1, a_1] x [-a_2, a_2] x [-a_3, a_3]`` with volume
``8 a_1 a_2 a_3``; its reciprocal lattice is ``xi_c = n_c pi / a_c``.
"""
from dataclasses import dataclass, field
import itertools

import numpy as np

from .errors import InvalidCellError
from .voigt import isotropic_compliance, isotropic_stiffness

# Relative tolerance used to decide whether two material constants coincide.
MATERIAL_RTOL = 1e-12


@dataclass(frozen=True)
class IsotropicMaterial:
    """Isotropic linear-elastic constituent.

    Attributes
    ----------
    rho : float
        Mass density [kg/m^3].
    lam, mu : float
        Lame constants [Pa].
    """

    rho: float
    lam: float
    mu: float

    def __post_init__(self):
        for name in ("rho", "lam", "mu"):
            value = getattr(self, name)
            if not np.isfinite(value):
                raise InvalidCellError(f"material {name} must be finite, got {value}")
        if self.rho <= 0.0:
            raise InvalidCellError(f"density must be positive, got {self.rho}")
        if self.mu <= 0.0:
            raise InvalidCellError(f"shear modulus must be positive, got {self.mu}")
        if 3.0 * self.lam + 2.0 * self.mu <= 0.0:
            raise InvalidCellError("3*lambda + 2*mu must be positive")

    @classmethod
    def from_young(cls, rho, young, poisson):
        """Build from Young's modulus [Pa] and Poisson's ratio."""
        lam = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson))
        mu = young / (2.0 * (1.0 + poisson))
        return cls(rho=float(rho), lam=float(lam), mu=float(mu))

    @property
    def stiffness(self):
        return isotropic_stiffness(self.lam, self.mu)

    @property
    def compliance(self):
        return isotropic_compliance(self.lam, self.mu)

    @property
    def c_long(self):
        """Longitudinal wave speed [m/s]."""
        return float(np.sqrt((self.lam + 2.0 * self.mu) / self.rho))

    @property
    def c_shear(self):
        """Shear wave speed [m/s]."""
        return float(np.sqrt(self.mu / self.rho))

    def same_density(self, other):
        return np.isclose(self.rho, other.rho, rtol=MATERIAL_RTOL, atol=0.0)

    def same_stiffness(self, other):
        scale = max(abs(self.lam), self.mu, abs(other.lam), other.mu)
        return (abs(self.lam - other.lam) <= MATERIAL_RTOL * scale
                and abs(self.mu - other.mu) <= MATERIAL_RTOL * scale)


@dataclass(frozen=True)
class ReferenceMedium:
    """Homogeneous isotropic comparison medium."""

    material: IsotropicMaterial

    def __post_init__(self):
        if not self.c1 > self.c2 > 0.0:
            raise InvalidCellError("reference medium needs c1 > c2 > 0")

    @property
    def rho(self):
        return self.material.rho

    @property
    def lam(self):
        return self.material.lam

    @property
    def mu(self):
        return self.material.mu

    @property
    def c1(self):
        return self.material.c_long

    @property
    def c2(self):
        return self.material.c_shear


@dataclass(frozen=True)
class BoxSubregion:
    """Axis-aligned box ``lo <= x <= hi`` filled with one material."""

    lo: tuple
    hi: tuple
    material: IsotropicMaterial
    label: str = ""

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if len(lo) != 3 or len(hi) != 3:
            raise InvalidCellError(f"box '{self.label}' needs 3 lower and 3 upper bounds")
        if not all(l < h for l, h in zip(lo, hi)):
            raise InvalidCellError(f"box '{self.label}' needs lo < hi componentwise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def center(self):
        return 0.5 * (np.array(self.lo) + np.array(self.hi))

    @property
    def half_width(self):
        return 0.5 * (np.array(self.hi) - np.array(self.lo))

    @property
    def volume(self):
        return float(np.prod(np.array(self.hi) - np.array(self.lo)))


def g_factor(region, xi):
    """Subregion average of ``exp(i xi . x)``.

    ``xi`` may be a single 3-vector or an ``(N, 3)`` array; the result is a
    complex scalar or an ``(N,)`` array. For a box with midpoint ``m`` and
    half-widths ``h`` this is ``prod_c exp(i xi_c m_c) sinc(xi_c h_c)``.
    """
    xi = np.asarray(xi, dtype=float)
    m = region.center
    h = region.half_width
    phase = np.exp(1j * (xi @ m))
    # np.sinc(x) = sin(pi x) / (pi x)
    return phase * np.prod(np.sinc(xi * h / np.pi), axis=-1)


def g_conjugation_check(region, xi, tol=1e-14):
    """True when ``g(-xi) == conj(g(xi))`` to ``tol`` for every row of ``xi``."""
    xi = np.asarray(xi, dtype=float)
    plus = g_factor(region, xi)
    minus = g_factor(region, -xi)
    return bool(np.all(np.abs(minus - np.conj(plus)) <= tol))


def _interiors_overlap(a, b):
    return all(max(a.lo[c], b.lo[c]) < min(a.hi[c], b.hi[c]) for c in range(3))


@dataclass(frozen=True)
class UnitCell:
    """Periodic cell with the subregions that carry eigenfields.

    Only subregions whose material differs from the reference medium belong
    in ``subregions``; ``matrix_material`` fills the complement and is never
    discretized (it should normally coincide with the reference).
    """

    half_periods: tuple
    reference: ReferenceMedium
    matrix_material: IsotropicMaterial
    subregions: tuple = field(default_factory=tuple)

    def __post_init__(self):
        a = tuple(float(v) for v in self.half_periods)
        if len(a) != 3 or not all(v > 0.0 and np.isfinite(v) for v in a):
            raise InvalidCellError("half_periods must be three positive numbers")
        object.__setattr__(self, "half_periods", a)
        subs = tuple(self.subregions)
        object.__setattr__(self, "subregions", subs)
        tol = 1e-12 * max(a)
        for k, box in enumerate(subs):
            name = box.label or f"#{k}"
            if any(box.lo[c] < -a[c] - tol or box.hi[c] > a[c] + tol for c in range(3)):
                raise InvalidCellError(f"subregion {name} extends outside the cell")
            if box.material.same_density(self.reference.material) and \
                    box.material.same_stiffness(self.reference.material):
                raise InvalidCellError(
                    f"subregion {name} has the reference material; it carries no "
                    "eigenfield and must not be listed")
        for (i, bi), (j, bj) in itertools.combinations(enumerate(subs), 2):
            if _interiors_overlap(bi, bj):
                ni = bi.label or f"#{i}"
                nj = bj.label or f"#{j}"
                raise InvalidCellError(f"subregions {ni} and {nj} overlap")

    @property
    def volume(self):
        a1, a2, a3 = self.half_periods
        return 8.0 * a1 * a2 * a3

    @property
    def n_regions(self):
        return len(self.subregions)

    def volume_fractions(self):
        return volume_fractions(self)

    def g_matrix(self, xi):
        """``(N, n_regions)`` array of g-factors at the rows of ``xi``."""
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        if not self.subregions:
            return np.zeros((xi.shape[0], 0), dtype=complex)
        return np.stack([g_factor(r, xi) for r in self.subregions], axis=1)

    def reciprocal_vector(self, n):
        """Wavevector ``xi_c = n_c pi / a_c`` for integer rows of ``n``."""
        return np.asarray(n, dtype=float) * (np.pi / np.array(self.half_periods))


def volume_fractions(cell):
    """Volume fractions ``f = |box| / |cell|`` in subregion order."""
    omega = cell.volume
    return np.array([box.volume / omega for box in cell.subregions], dtype=float)


def subdivide_box(lo, hi, divisions, material, label="inc"):
    """Split a box into ``d1 x d2 x d3`` equal sub-boxes (x fastest)."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    divisions = tuple(int(d) for d in divisions)
    if len(divisions) != 3 or min(divisions) < 1:
        raise InvalidCellError("divisions must be three positive integers")
    edges = [np.linspace(lo[c], hi[c], divisions[c] + 1) for c in range(3)]
    boxes = []
    for k, j, i in itertools.product(range(divisions[2]), range(divisions[1]),
                                     range(divisions[0])):
        boxes.append(BoxSubregion(
            lo=(edges[0][i], edges[1][j], edges[2][k]),
            hi=(edges[0][i + 1], edges[1][j + 1], edges[2][k + 1]),
            material=material,
            label=f"{label}[{i},{j},{k}]",
        ))
    return boxes


@dataclass(frozen=True)
class SpectralGrid:
    """Truncated reciprocal lattice plus the Bloch point (q, omega).

    The sum runs over ``|n_c| <= n_max_c`` with the origin excluded.
    """

    n_max: tuple
    q: tuple
    omega: float

    def __post_init__(self):
        n = self.n_max
        if np.isscalar(n):
            n = (n, n, n)
        n = tuple(int(v) for v in n)
        if len(n) != 3 or min(n) < 0 or max(n) < 1:
            raise ValueError("n_max must be non-negative with at least one axis >= 1")
        q = tuple(float(v) for v in self.q)
        if len(q) != 3:
            raise ValueError("q must have three components")
        object.__setattr__(self, "n_max", n)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "omega", float(self.omega))

    @property
    def n_terms(self):
        n1, n2, n3 = self.n_max
        return (2 * n1 + 1) * (2 * n2 + 1) * (2 * n3 + 1) - 1

    def integer_points(self):
        """``(n_terms, 3)`` integer lattice points, origin removed, fixed order."""
        ranges = [np.arange(-m, m + 1) for m in self.n_max]
        n = np.stack(np.meshgrid(*ranges, indexing="ij"), axis=-1).reshape(-1, 3)
        keep = np.any(n != 0, axis=1)
        return n[keep]
