"""Bounds on unauthorized delay-based localization under pilot manipulation.

Quantifies how artificial-noise and artificial-multipath pilot
manipulation degrade an eavesdropper's delay/position estimation:
pseudo-true parameters, misspecified Cramer-Rao bounds, total lower
bounds, the legitimate-anchor bounds, and a Monte-Carlo mismatched-ML
oracle that validates them.
"""

from .delay_mismatch import (
    DelayMismatchReport,
    GeneralizedFimScalar,
    crb_delay,
    crb_delay_pilot,
    delay_report,
    mcrb_delay_closed,
    mcrb_delay_numeric,
    pseudo_true_delay,
    xi,
)
from .errors import (
    BadPerturbationNorm,
    CoincidentPoint,
    DegenerateCurvature,
    DelayExceedsCp,
    NoDescentProgress,
    NumericalError,
    PilotveilError,
    SchemaError,
    SingularA,
    SingularGeometry,
    ValidationError,
    ZeroDistance,
)
from .experiments import (
    FITTED_GAIN_CALIBRATION,
    SweepRow,
    SweepSpec,
    default_scenario,
    emit_csv,
    load_scenario,
    run_bounds,
    run_sweep,
    scenario_from_dict,
)
from .mc_oracle import McReport, estimate_position, mle_delay, run_delay_trials, run_position_trials
from .numerics import DescentSpec, LineSearchSpec, check_grad, grid_min_seed, maximize_scalar, minimize_descent
from .position_mismatch import (
    DelayCovariances,
    GeneralizedFimMatrix,
    MODE_PAPER_LITERAL,
    MODE_TRUE_COVARIANCE,
    PositionBoundReport,
    crb_position,
    delay_hessian_diag,
    delay_jacobian,
    generalized_fims,
    lb_position,
    mcrb_position,
    pseudo_true_position,
    true_delays,
)
from .signal_model import (
    CLEAN,
    SPEED_OF_LIGHT,
    AmScheme,
    Anchor,
    AnScheme,
    CleanScheme,
    OfdmConfig,
    Pilot,
    Scenario,
    build_pilot,
    build_pilot_am,
    build_pilot_an,
    build_pilot_clean,
    pathloss_gain,
    phase_vector,
    synthesize_rx,
)

__version__ = "0.1.0"
