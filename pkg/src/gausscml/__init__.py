"""Coupled Gauss map lattice: simulation of its absorbing-state transition and scaling analysis."""

__version__ = "0.1.0"

from .mapcore import (  # noqa: E402
    FixedPointResult, MapParams, eval_derivative, eval_map, find_all_fixed_points,
    largest_fixed_point, single_map_bifurcation,
)
from .lattice import EnsembleSpec, LatticeState, init_random, step, step_pair  # noqa: E402
from .series import ObservableSeries  # noqa: E402
from .observables import (  # noqa: E402
    PersistenceTracker, SpinField, coarse_grain, export_space_time, export_spatial_profile,
    flip_rate, run_observables, update_persistence,
)
from .damage import (  # noqa: E402
    ReplicaSet, damage_coarse, damage_fine, make_replicas, perturb, run_damage,
)
from .lyapunov import jacobian_vector_product, largest_lyapunov  # noqa: E402
from .scaling import (  # noqa: E402
    CollapseResult, CorrectedFit, CorrectedPowerLawRegressor, PowerLawFit, PowerLawRegressor,
    ScalingCollapse, finite_size_collapse, fit_corrected_power_law, fit_power_law,
    off_critical_collapse, optimize_collapse,
)
from .ensemble import merge_series  # noqa: E402
