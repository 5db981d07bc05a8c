"""Python front end for the fxlab C++ core."""

from ._fxlab import (
    ConfigError,
    DegenerateError,
    Error,
    ExperimentConfig,
    GaussianMixture,
    InfeasibleError,
    NoiseSchedule,
    NumericError,
    ShapeError,
    a_esr,
    average_similarity,
    caption_attack,
    cfg_eps,
    extract,
    finextract_eps,
    geometric_interpolate,
    load_config,
    maximal_cliques,
    model_guidance_eps,
    parse_config,
    read_samples,
    run_pipeline,
    sample_finextract_analytic,
    write_samples,
)

__all__ = [name for name in dir() if not name.startswith("_")]
