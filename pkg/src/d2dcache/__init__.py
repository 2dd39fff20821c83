"""Mobility-aware cache placement for device-to-device networks.

Computes, optimizes, and empirically validates cache placements that
maximize the data offloading ratio under a Poisson inter-contact mobility
model: an exact divide-and-conquer objective evaluator, an optimal dynamic
program, a 1/2-approximate submodular greedy, baseline strategies, and
Monte Carlo / trace-replay validation tooling.
"""

from .baselines import popular_place, random_place
from .dp import ResourceLimitError, dp_optimal, exhaustive_search
from .greedy import greedy_place, marginal_gain
from .mobility import (
    ContactTrace,
    McEstimate,
    RwpParams,
    estimate_rates,
    monte_carlo_ratio,
    replay_ratio,
    rwp_generate,
    rwp_simulate,
)
from .model import (
    ConstraintViolationError,
    FileLibrary,
    LinkParams,
    Placement,
    Scenario,
    Violation,
    derive_budget,
    generate_scenario,
    load_placement,
    load_scenario,
    sample_gamma_rates,
    save_placement,
    save_scenario,
    validate_placement,
    zipf_popularity,
)
from .objective import SegmentPmf, SumCdfTable, file_utility, offloading_ratio, segment_pmf, sum_cdf

__version__ = "0.1.0"

__all__ = [
    "ConstraintViolationError",
    "ContactTrace",
    "FileLibrary",
    "LinkParams",
    "McEstimate",
    "Placement",
    "ResourceLimitError",
    "RwpParams",
    "Scenario",
    "SegmentPmf",
    "SumCdfTable",
    "Violation",
    "derive_budget",
    "dp_optimal",
    "estimate_rates",
    "exhaustive_search",
    "file_utility",
    "generate_scenario",
    "greedy_place",
    "load_placement",
    "load_scenario",
    "marginal_gain",
    "monte_carlo_ratio",
    "offloading_ratio",
    "popular_place",
    "random_place",
    "replay_ratio",
    "rwp_generate",
    "rwp_simulate",
    "sample_gamma_rates",
    "save_placement",
    "save_scenario",
    "segment_pmf",
    "sum_cdf",
    "validate_placement",
    "zipf_popularity",
]
