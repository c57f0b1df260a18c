"""Near-optimal stochastic control on the discrete-type skeleton of Brownian motion.

The noise is discretized by its values instead of by time: stopping times mark
+/-eps moves of the Brownian path, giving iid sign increments and iid waiting
times.  Controlled states evolve step by step on that skeleton, and a backward
dynamic-programming recursion over a finite action grid produces the value
process and a near-optimal adapted control.  The hedging subpackage
reproduces the quadratic-hedging benchmark experiment end to end.
"""

from .controls import (ActionCube, ActionGrid, StepControl, concat,
                       constant_control, grid_points, restrict, splice, tail)
from .dp import (DPConfig, Engine, FixedActionPolicy, PolicyEvaluation,
                 RandomAdaptedPolicy, ValuePolicy, brute_force_value,
                 evaluate_policy, simulate_with_policy, solve_exact_tree,
                 solve_regression_mc)
from .exceptions import (ConfigError, InvalidCompositionError,
                         InvalidParameterError, ModelBreakdownError,
                         ResourceLimitError, UnsupportedModeError)
from .hedging import (AnalyticHedgePolicy, CStarEstimate, HedgingSpec,
                      MCHedgePolicy, Table1Report, analytic_vstar_control,
                      bs_call_price, build_analytic_control, build_mc_control,
                      estimate_cstar, lattice_call_price, run_table1)
from .models import (ControlledModel, EulerSkeletonModel, GBMWealthModel,
                     PayoffKind, PayoffSpec, euler_skeleton_step,
                     evolve_gbm_step, path_feature, quadratic_hedging_payoff)
from .skeleton import (CHI_1, CHI_2_REF, ChiEstimate, ExitTimeSampler,
                       SkeletonParams, SkeletonPath, TimingMode, chi,
                       epsilon_schedule, sample_exit_time, sample_exit_times,
                       sample_skeleton_path, sample_sign_wait_batch,
                       steps_horizon, time_alignment_error, unit_exit_cdf,
                       unit_exit_survival)

__version__ = "0.1.0"
