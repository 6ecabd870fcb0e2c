from .panel import PanelTruth, gen_panel
from .planted import block_loadings, planted_clusters, planted_factors
from .sessions import (
    TRUTH_COLUMNS,
    HouseholdSpec,
    ProfileSpec,
    default_household_specs,
    gen_sessions,
    template_profile,
    write_ground_truth,
)

__all__ = [
    "TRUTH_COLUMNS",
    "HouseholdSpec",
    "PanelTruth",
    "ProfileSpec",
    "block_loadings",
    "default_household_specs",
    "gen_panel",
    "gen_sessions",
    "planted_clusters",
    "planted_factors",
    "template_profile",
    "write_ground_truth",
]
