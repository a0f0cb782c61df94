"""Weighted aggregation of hypotheses trained on Markov-chain data, with
ergodicity certificates, sample-complexity bounds, noise robustness, and
an experiment harness."""

from .bounds import (
    BoundInputs,
    BoundResult,
    bound_table,
    capacity_generalization_ne,
    generalization_ne,
    n_from_ne,
    robust_generalization,
    uniform_convergence_ne,
    weight_domination_log_threshold,
    weight_domination_ne,
    weight_domination_threshold,
)
from .bwa import (
    Prediction,
    WeightState,
    initial_state,
    normalized_weights,
    posterior_masses,
    predict,
    predict_grid,
    predict_mcmc,
    read_weights,
    train,
    train_from_counts,
    update,
    write_weights,
)
from .chain import (
    ErgodicityCertificate,
    FiniteChainSpec,
    StatePoint,
    StationaryDistribution,
    Trajectory,
    certificate_max_violation,
    effective_sample_size,
    fit_certificate,
    sample_path,
    sample_visit_counts,
    sample_visit_sign_counts,
    stationary_distribution,
    tv_distance,
)
from .harness import (
    ExperimentConfig,
    RunReport,
    TrialRecord,
    bound_inputs_for,
    run_consistency,
    run_robustness,
    run_weight_domination,
    wilson_interval,
)
from .hypotheses import (
    ClampedAffineSpace,
    FiniteTableSpace,
    Hypothesis,
    SpaceCapacity,
    best_expected_loss,
    covering_number_bound,
    empirical_losses,
    expected_losses,
    good_volume,
    load_space,
    log_covering_bound,
    loss_constants,
    loss_l1,
    loss_table,
    save_space,
)
from .noise import NoiseSpec, inject_noise, mean_loss_shift, noisy_loss_table
from .tasks import (
    RandomClassifier,
    augment_with_target,
    classifier_biases,
    erm_train,
    expected_error,
    montecarlo_error,
)

__version__ = "0.1.0"

__all__ = [
    "BoundInputs",
    "BoundResult",
    "ClampedAffineSpace",
    "ErgodicityCertificate",
    "ExperimentConfig",
    "FiniteChainSpec",
    "FiniteTableSpace",
    "Hypothesis",
    "NoiseSpec",
    "Prediction",
    "RandomClassifier",
    "RunReport",
    "SpaceCapacity",
    "StatePoint",
    "StationaryDistribution",
    "Trajectory",
    "TrialRecord",
    "WeightState",
    "augment_with_target",
    "best_expected_loss",
    "bound_inputs_for",
    "bound_table",
    "capacity_generalization_ne",
    "certificate_max_violation",
    "classifier_biases",
    "covering_number_bound",
    "effective_sample_size",
    "empirical_losses",
    "erm_train",
    "expected_error",
    "expected_losses",
    "fit_certificate",
    "generalization_ne",
    "good_volume",
    "initial_state",
    "inject_noise",
    "load_space",
    "log_covering_bound",
    "loss_constants",
    "loss_l1",
    "loss_table",
    "mean_loss_shift",
    "montecarlo_error",
    "n_from_ne",
    "noisy_loss_table",
    "normalized_weights",
    "posterior_masses",
    "predict",
    "predict_grid",
    "predict_mcmc",
    "read_weights",
    "robust_generalization",
    "run_consistency",
    "run_robustness",
    "run_weight_domination",
    "sample_path",
    "sample_visit_counts",
    "sample_visit_sign_counts",
    "save_space",
    "stationary_distribution",
    "train",
    "train_from_counts",
    "tv_distance",
    "uniform_convergence_ne",
    "update",
    "weight_domination_log_threshold",
    "weight_domination_ne",
    "weight_domination_threshold",
    "wilson_interval",
    "write_weights",
]
