from .estimate import (
    ESTIMATE_COLUMNS,
    ProfileEstimate,
    component_cap,
    estimate_household_month,
    estimates_to_frame,
    mean_absolute_error,
    read_estimates,
)
from .quality import wb_ratio
from .reporting import compare_input_spaces, ecdf_data, scatter_data
from .weights import COMPONENT_GRID, BicMatrix, WeightMatrix, estimate_g, weight_transform

__all__ = [
    "COMPONENT_GRID",
    "ESTIMATE_COLUMNS",
    "BicMatrix",
    "ProfileEstimate",
    "WeightMatrix",
    "compare_input_spaces",
    "component_cap",
    "ecdf_data",
    "estimate_g",
    "estimate_household_month",
    "estimates_to_frame",
    "mean_absolute_error",
    "read_estimates",
    "scatter_data",
    "wb_ratio",
    "weight_transform",
]
