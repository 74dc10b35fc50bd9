"""Fair randomized matchings with group and individual guarantees."""

from ._fairmatch import (
    FairmatchError,
    InfeasibleError,
    Instance,
    Solution,
    audit,
    enumerate_group_fair,
    generate_bounds,
    generate_if,
    ingest,
    sample,
    solve,
    synthetic,
)

__all__ = [
    "FairmatchError",
    "InfeasibleError",
    "Instance",
    "Solution",
    "audit",
    "enumerate_group_fair",
    "generate_bounds",
    "generate_if",
    "ingest",
    "sample",
    "solve",
    "synthetic",
]
