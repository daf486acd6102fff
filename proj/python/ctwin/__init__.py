"""Causal digital twin: coupling estimation and what-if simulation for multichannel series."""

from ._ctwin import (
    CausalGraph,
    CtwinError,
    DataError,
    DivergenceError,
    ValidationError,
    __version__,
    band_power_ratio,
    companion_spectral_radius,
    counterfactual_remove,
    direction_test,
    flatten,
    generate_series,
    layout_names,
    load_graph,
    ols_svar_fit,
    parse_graph,
    run_config,
    simulate_step,
    spectral_similarity,
    spectrogram,
    train_online,
    unflatten,
    validate_graph,
    variance_ratios,
    whatif_run,
)

__all__ = [name for name in dir() if not name.startswith("_")]
