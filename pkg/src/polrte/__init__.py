"""Structure-preserving polarized radiative transfer toolkit."""

from .grid import GridConfig, GridError, PhaseSpaceGrid, build_grid
from .coherence import (
    CoherenceField,
    HermiticityError,
    matrix_to_stokes,
    stokes_to_matrix,
    trace_field,
    trace_product,
)
from .brackets import (
    Entropy,
    FreeEnergy,
    FunctionalHandle,
    Hamiltonian,
    LinearTest,
    Product,
    canonical_bracket,
    eval_functional,
    functional_derivative,
    inner,
    matrix_bracket,
    metric_bracket,
    poisson_bracket,
)
from .scattering import (
    AngleSpec,
    DiagTestSpec,
    IsotropicSpec,
    KernelAdmissibilityError,
    RotationSpec,
    ScatteringKernel,
    apply_scattering,
    build_kernel,
    scalar_kernel,
)
from .dynamics import (
    ConstantMedium,
    DiagnosticsRecord,
    SimulationState,
    TrigMedium,
    cfl_dt,
    rhs,
    run,
    scalar_rhs,
    step_midpoint,
    step_rk4,
)
from .frames import (
    ConicalVelocity,
    HomogeneousVelocity,
    LinearVelocity,
    PolarizationBasis,
    RayFrame,
    RingWaveguideVelocity,
    darboux_frame,
    fixed_frame,
    frenet_frame,
    optical_rotation_n,
    rotate_stokes,
    trace_ray,
)
from .verify import axiom_suite, jacobi_residual_matrix, thermo_report
from .config import ConfigError, RunConfig, default_config, parse_config

__version__ = "0.1.0"
