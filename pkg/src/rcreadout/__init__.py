"""Dispersive two-qubit readout simulation and Kerr-reservoir classification.

Pipeline: simulate homodyne measurement records of a driven cavity coupled
to two qubits, feed the records through a random network of classical Kerr
oscillators, and train a softmax readout to identify the joint qubit state,
benchmarked against boxcar and matched-filter baselines.
"""

from .evaluation import (
    EvaluationReport,
    SweepResult,
    accuracy_curve_filter,
    accuracy_curve_rc,
    hyperparameter_sweep,
    measured_subspace_export,
    q_scaling_study,
    train_rc_head,
)
from .filters import (
    BinClassifier,
    FilterKernel,
    apply_filter,
    boxcar_filter,
    boxcar_kernel,
    build_matched_kernel,
    build_matched_kernel_analytic,
    classify_filtered,
    fit_bins,
    fit_bins_analytic,
)
from .kerr import (
    KerrNetwork,
    RcHyperParams,
    integrate,
    linear_response_analytic,
    measure,
    quadratures,
    sample_network,
)
from .qsim import (
    MeasurementDataset,
    QuantumSystemSpec,
    SimParams,
    analytic_cavity_amplitude,
    analytic_steady_state_amplitude,
    default_spec,
    derive_dispersive_params,
    generate_dataset,
    simulate_homodyne_trajectory,
    unconditional_evolve,
)
from .seeds import derive_seed
from .training import ReadoutHead, TrainConfig, train, train_restarts

__version__ = "0.1.0"

__all__ = [
    "EvaluationReport",
    "SweepResult",
    "accuracy_curve_filter",
    "accuracy_curve_rc",
    "hyperparameter_sweep",
    "measured_subspace_export",
    "q_scaling_study",
    "train_rc_head",
    "BinClassifier",
    "FilterKernel",
    "apply_filter",
    "boxcar_filter",
    "boxcar_kernel",
    "build_matched_kernel",
    "build_matched_kernel_analytic",
    "classify_filtered",
    "fit_bins",
    "fit_bins_analytic",
    "KerrNetwork",
    "RcHyperParams",
    "integrate",
    "linear_response_analytic",
    "measure",
    "quadratures",
    "sample_network",
    "MeasurementDataset",
    "QuantumSystemSpec",
    "SimParams",
    "analytic_cavity_amplitude",
    "analytic_steady_state_amplitude",
    "default_spec",
    "derive_dispersive_params",
    "generate_dataset",
    "simulate_homodyne_trajectory",
    "unconditional_evolve",
    "derive_seed",
    "ReadoutHead",
    "TrainConfig",
    "train",
    "train_restarts",
]
