"""atlaslab: simulation and estimation for rank-based market models."""

__version__ = "0.1.0"

from .core import (DAYS_PER_YEAR, DEFAULT_DT, FirstOrderParams,
                   MarketHistory, OccupationMatrix, SecondOrderParams,
                   ValidityReport, WeightHistory, compute_weights,
                   validate_first_order, validate_second_order)
from .errors import (AtlasLabError, ConfigError, DegeneracyError,
                     InputError)
from .first_order import (FirstOrderEstimates, build_first_order_model,
                          estimate_first_order, estimate_local_times,
                          estimate_occupation_matrix, estimate_rank_growth,
                          estimate_rank_variances, net_rank_drift,
                          smooth_by_rank)
from .flows import (FlowTable, GrowthSlopes, RankMap, averaged_rank_map,
                    expected_rank, flow_table, forward_flow, growth_slope,
                    reverse_history)
from .ranking import (CapitalDistributionCurve, capital_distribution_curve,
                      rank_permutation, rank_permutations, ranked_series)
from .second_order import (ConsistencyReport, LinearRankFit,
                           RecursiveGrowthCurve, SecondOrderEstimates,
                           SpectralReport, build_second_order_model,
                           estimate_gamma_series,
                           estimate_second_order_matrix,
                           estimate_second_order_recursive,
                           fit_linear_rank_maps, gamma_from_theta,
                           perron_check, recursive_rank_growth,
                           solve_rank_growth_matrix, verify_consistency)
from .simulate import (SimulationConfig, simulate_first_order,
                       simulate_second_order)

__all__ = [
    "AtlasLabError", "CapitalDistributionCurve", "ConfigError",
    "ConsistencyReport", "DAYS_PER_YEAR", "DEFAULT_DT", "DegeneracyError",
    "FirstOrderEstimates", "FirstOrderParams", "FlowTable", "GrowthSlopes",
    "InputError", "LinearRankFit", "MarketHistory", "OccupationMatrix",
    "RankMap", "RecursiveGrowthCurve", "SecondOrderEstimates",
    "SecondOrderParams", "SimulationConfig", "SpectralReport",
    "ValidityReport", "WeightHistory", "averaged_rank_map",
    "build_first_order_model", "build_second_order_model",
    "capital_distribution_curve", "compute_weights", "estimate_first_order",
    "estimate_gamma_series", "estimate_local_times",
    "estimate_occupation_matrix", "estimate_rank_growth",
    "estimate_rank_variances", "estimate_second_order_matrix",
    "estimate_second_order_recursive", "expected_rank",
    "fit_linear_rank_maps", "flow_table", "forward_flow", "gamma_from_theta",
    "growth_slope", "net_rank_drift", "perron_check", "rank_permutation",
    "rank_permutations", "ranked_series", "recursive_rank_growth",
    "reverse_history", "simulate_first_order", "simulate_second_order",
    "smooth_by_rank", "solve_rank_growth_matrix", "validate_first_order",
    "validate_second_order", "verify_consistency",
]
