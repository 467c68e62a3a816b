"""Co-evolutionary Kuramoto networks, their mean-field limit, and the
metrics, discretizations and solvers needed to verify convergence at desk
scale."""

from .backend import BACKEND, get_kernels
from .measure_kit import (
    CIRCLE,
    INTERVAL,
    Grid,
    HybridMeasure,
    bl_distance,
    bl_distance_bruteforce,
    circle_distance,
    project_to_grid,
    total_mass,
    tv_distance,
    wrap_phase,
)
from .digraph import (
    DigraphMeasure,
    Partition,
    VertexSpace,
    ac_lower_bound,
    block_mass_matrix,
    dual,
    sup_bl_distance,
    sup_tv_distance,
    symmetry_defect,
)
from .model import (
    FourierFunction,
    ModelSpec,
    OmegaSpec,
    StabilityConstants,
    gamma_bound,
    positivity_horizon,
    stability_constants,
)
from .discretize import (
    DiscretizationPlan,
    FiberedMeasure,
    MonokineticProfile,
    discretize_eta,
    discretize_nu,
    discretize_omega,
    dgm_from_fiber_fn,
    dgm_from_weights,
    quantile_midpoints,
    uniform_partition,
    weights_from_dgm,
)
from .finite_dynamics import (
    CoupledState,
    LatticeState,
    LatticeTrajectory,
    Trajectory,
    empirical_path,
    integrate_coupled,
    integrate_lattice,
)
from .meanfield import (
    DensityField,
    DgmPath,
    FixedPointResult,
    HybridTrajectory,
    MeasurePath,
    characteristic_flow,
    path_residual,
    pushforward,
    reconstruct_eta,
    solve_vlasov_fixed_point,
    solve_vlasov_pde,
)
from .presets import PRESETS, get_preset, initial_phases, reference_time

__version__ = "0.1.0"
