"""Python bindings for the paretohqd curation toolkit."""

from ._core import (
    AdapterError,
    ArityError,
    ConfigError,
    DataError,
    PreconditionError,
    build_pareto_hq,
    collapse_rate,
    compromise_point,
    compute_bounds,
    curate,
    detect_collapse,
    distance_to_direction,
    dominates,
    generate_world,
    hypervolume,
    layer_fronts,
    match_stage2_pool,
    normalize,
    replay,
    representative_preferences,
    select_ls_topk,
    select_stage1,
    select_stage2,
    stage1_pareto_threshold,
    stage2_pareto_threshold,
)

__all__ = [name for name in dir() if not name.startswith("_")]
