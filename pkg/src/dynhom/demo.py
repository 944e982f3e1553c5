"""Ready-made cells: the cubic-inclusion composite used in examples and tests."""
import numpy as np

from .unitcell import IsotropicMaterial, ReferenceMedium, UnitCell, subdivide_box

# epoxy-like matrix, aluminium-like inclusion
MATRIX = IsotropicMaterial.from_young(rho=1180.0, young=3.5e9, poisson=0.35)
INCLUSION = IsotropicMaterial.from_young(rho=2700.0, young=70e9, poisson=0.33)
HALF_PERIOD = 5e-3


def cubic_inclusion_cell(divisions=3, half_period=HALF_PERIOD, matrix=MATRIX,
                         inclusion=INCLUSION):
    """Cube of side ``half_period`` centred in a cubic cell of side ``2 * half_period``.

    The matrix is the reference medium, so only the inclusion is discretized,
    into ``divisions**3`` equal sub-cubes (fill fraction 1/8).
    """
    a = float(half_period)
    boxes = subdivide_box((-a / 2,) * 3, (a / 2,) * 3, (divisions,) * 3, inclusion)
    return UnitCell(half_periods=(a, a, a), reference=ReferenceMedium(matrix),
                    matrix_material=matrix, subregions=tuple(boxes))


def demo_point(half_period=HALF_PERIOD):
    """A (q, omega) pair well below the first reference resonance, q along x."""
    a = float(half_period)
    q = (0.25 * np.pi / a, 0.0, 0.0)
    return q, 1.0e5
