"""p,q-variation path integration and local-time numerics."""

from .pathcore import (MollifierSpec, Partition1D, Partition2D, SampledField,
                       SampledPath, make_test_function, mollify_1d, mollify_2d)
from .variation import (ConvexGauge, VariationReport, detect_large_jumps,
                        dyadic_variation_bound, p_variation_exact,
                        phi_variation_exact, pq_variation_grid,
                        uniform_axis_variation)
from .young import (IntegralResult, YoungHypothesisError, integrate_f_dL,
                    integration_by_parts_check, young_integral_1d)
from .young2d import (JumpSets, SeriesCondition, check_series_condition,
                      dominated_convergence_test, dyadic_refinement_trace,
                      summation_by_parts_2d, young_integral_2d,
                      young_integral_2d_backward)
from .stochastic import (LocalTimeField, PathBundle, SemimartingaleSpec,
                         decompose_local_time, local_time_occupation,
                         local_time_tanaka, occupation_identity_check,
                         pvar_exponent_probe, quantile_level_grid, simulate)
from .itocheck import (ItoReport, median_residual_study, mollified_route_check,
                       verify_ito_time_dependent, verify_ito_time_independent)

__version__ = "0.1.0"
