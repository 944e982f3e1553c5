"""Frequency-dependent overall properties of 3-D periodic elastic composites."""
from .assembly import AssembledSystem, assemble, truncation_sweep
from .errors import (ConfigError, DegenerateContrast, DynhomError, InvalidCellError,
                     ResonantReference, SingularEffectiveCompliance, SingularSystem,
                     ZeroFrequency)
from .kernels import SpectralKernels, eval_hatted
from .solver import (EffectiveProperties, EigenfieldSolution, FieldSnapshot,
                     InfluenceMatrices, effective_properties, eigenfields,
                     energy_reality_check, reconstruct_fields, solve_effective,
                     solve_influence, willis_self_adjointness_check)
from .unitcell import (BoxSubregion, IsotropicMaterial, ReferenceMedium, SpectralGrid,
                       UnitCell, g_factor, subdivide_box, volume_fractions)

__version__ = "0.1.0"
