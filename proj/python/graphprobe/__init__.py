"""Python bindings for the graphprobe C++ library."""

from ._core import (
    GLOBAL_PROPERTIES,
    ContractError,
    Dataset,
    Graph,
    MissingInputError,
    ParameterError,
    aggregate_mean,
    aggregate_norm_sort,
    betweenness_centrality,
    config_hash,
    count_maximal_cliques,
    count_squares,
    count_triangles,
    generate_grid_house,
    global_properties,
    is_isomorphic,
    load_dataset,
    model_names,
    pearson,
    probe,
    r2_score,
    read_probes,
    run_all,
    run_generate,
    run_probe,
    run_props,
    run_train,
    wl_hash,
)

__all__ = [name for name in dir() if not name.startswith("_")]
