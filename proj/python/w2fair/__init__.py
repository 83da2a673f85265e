"""Group-conditional Wasserstein-2 training and audit toolkit."""

from ._w2fair import (
    DiscreteCdf,
    GroupCdfPair,
    OutputGrid,
    __version__,
    audit_json,
    build_grid,
    cdf_value_at,
    correction,
    empirical_cdf,
    group_cdfs,
    inverse_cdf,
    pseudo_grad,
    run_cli,
    w2_distance,
)

__all__ = [
    "DiscreteCdf",
    "GroupCdfPair",
    "OutputGrid",
    "__version__",
    "audit_json",
    "build_grid",
    "cdf_value_at",
    "correction",
    "empirical_cdf",
    "group_cdfs",
    "inverse_cdf",
    "pseudo_grad",
    "run_cli",
    "w2_distance",
]
