"""Random walk loop soups on finite graphs and checks of their Markov properties."""

from ._core import (
    BudgetExceeded,
    ConfigError,
    Domain,
    GraphError,
    enumerate_loops,
    green_function,
    run_config,
    sample_soup,
)

__all__ = [
    "BudgetExceeded",
    "ConfigError",
    "Domain",
    "GraphError",
    "enumerate_loops",
    "green_function",
    "run_config",
    "sample_soup",
]
