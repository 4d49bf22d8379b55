"""Measurement-damped quantum dynamics on periodic grids.

Spinor fields evolve under a Schrodinger generator with a Hermitian,
bounded-below weight term that damps amplitude away from a measurement
record.  The package provides the damped and unitary PDE propagators,
interleaved unitary/damping product formulas with convergence drivers, a
time-sliced path-integral oracle, weight constructors with sampled
certifications, and batch scenario runners with a CLI.
"""

__version__ = "0.1.0"

from .grid import (  # noqa: F401
    Grid,
    NormReport,
    SpinorField,
    boundary_mass,
    gaussian_packet,
    inner_product,
    l2_norm,
    load_field,
    make_grid,
    norm_report,
    save_field,
    sobolev_norm,
    zeros_field,
)
from .potentials import (  # noqa: F401
    GaugeFunction,
    PathPolyline,
    Potential,
    action_along,
    fields_from_potential,
    gauge_transform,
    lagrangian,
    make_potential,
    numeric_gauge,
    straight_path,
)
from .weights import (  # noqa: F401
    WeightSpec,
    ball_confinement_weight,
    bump_region_weight,
    corridor_weight,
    damping_factor,
    mollifier,
    multislit_weight,
    scale_weight,
    sum_weights,
    verify_assumption,
    verify_multislit_bounds,
    zero_weight,
)
from .propagator import (  # noqa: F401
    DenseOracle,
    PropagatorConfig,
    SpinTerm,
    evolve_damped,
    evolve_unitary,
    expectation_position,
    survival_mass,
)
from .product_formula import (  # noqa: F401
    ConvergenceRecord,
    OmegaSchedule,
    Subdivision,
    convergence_study,
    interleaved_evolution,
    kappa_sensitivity,
    make_subdivision,
)
from .path_kernel import (  # noqa: F401
    OrderedFactor,
    SliceKernelConfig,
    insert_observables,
    one_step_kernel_apply,
    ordered_weight_factor,
    sliced_kernel_apply,
)
