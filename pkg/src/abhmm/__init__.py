"""Alpha-beta HMM filtering for discrete hidden states.

Submodules:

* :mod:`abhmm.model`     observation models, identifiability d, LLR bound C
* :mod:`abhmm.filters`   alpha-beta HMM, Bayes, HMM, linearized and ASL updates
* :mod:`abhmm.dynamics`  reference dynamical system, fixed point, closed-form bounds
* :mod:`abhmm.sim`       environments, trajectories, Monte Carlo metrics
* :mod:`abhmm.cli`       ``abhmm`` command-line entry point
"""

__version__ = "0.1.0"

from .dynamics import (  # noqa: E402
    BoundsReport,
    FixedPointResult,
    adaptation_times,
    bounds_report,
    corollary1_gamma,
    lemma5_lambda1,
    map_F,
    reference_step,
    reference_trajectory,
    solve_fixed_point,
    theorem1_lambda,
    theorem2_bounds,
    theorem3_error_bound,
)
from .filters import (  # noqa: E402
    Belief,
    FilterConfig,
    abhmm_step,
    asl_step,
    bayes_step,
    belief_to_log_ratios,
    equal_exit_matrix,
    full_hmm_step,
    linearized_abhmm_step,
    log_ratios_to_belief,
)
from .model import (  # noqa: E402
    GaussianGridModel,
    InfoProfile,
    TabularModel,
    TruncatedGaussianModel,
    compute_identifiability,
    compute_llr_bound,
    info_profile,
)
from .sim import (  # noqa: E402
    EnvironmentSpec,
    MetricsSeries,
    MonteCarloConfig,
    correct_learning_indicator,
    generate_trajectory,
    measure_adaptation_time,
    monte_carlo,
    monte_carlo_compare,
    run_filter,
)
