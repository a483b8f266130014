"""Maximum weighted loss discrepancy: estimators, variance bounds and training."""

from ._mwld import (
    DataError,
    Dataset,
    InvalidArgument,
    LinearModel,
    TrainingDiverged,
    brute_force_mwld,
    coarse_deviation,
    coarse_loss_variance,
    conditional_coarse_loss_variance,
    conditional_loss_variance,
    convergence_error_bound,
    discrepancy_size_profile,
    empirical_mwld,
    fit,
    k_sweep,
    large_group_mwld,
    load_csv,
    loss_variance,
    maurer_deviation,
    run_cli,
    sandwich_envelope,
    shift_check,
    synth_two_group,
    variance_upper_bound_general_L,
)

__all__ = [name for name in dir() if not name.startswith("_")]
