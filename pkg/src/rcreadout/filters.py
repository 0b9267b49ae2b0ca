"""Linear-filter baselines: boxcar, empirical matched, analytic matched,
plus the expected-bin classifier used for conventional readout."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import MissingClassError, UnsupportedModelError
from .qsim import (
    MODEL_DISPERSIVE,
    MeasurementDataset,
    N_CLASSES,
    QuantumSystemSpec,
    analytic_cavity_amplitude,
)

KIND_BOXCAR = "boxcar"
KIND_MATCHED_EMPIRICAL = "matched-empirical"
KIND_MATCHED_ANALYTIC = "matched-analytic"


@dataclass(frozen=True)
class FilterKernel:
    """Kernel samples h(t_n) on the dataset's recording grid."""

    h: np.ndarray
    kind: str
    dt_record: float


@dataclass(frozen=True)
class BinClassifier:
    """Expected filtered outputs per class; classification is nearest bin."""

    expected: np.ndarray  # (C, N)
    dt_record: float


def boxcar_filter(u: np.ndarray, dt_record: float) -> np.ndarray:
    """Cumulative integral y(t_n) = sum_{m<=n} u(t_m) dt."""
    return np.cumsum(u, axis=-1) * dt_record


def boxcar_kernel(n_samples: int, dt_record: float) -> FilterKernel:
    return FilterKernel(h=np.ones(n_samples), kind=KIND_BOXCAR, dt_record=dt_record)


def class_mean_currents(dataset: MeasurementDataset) -> np.ndarray:
    """Per-class mean of J(t_n), shape (C, N)."""
    currents = dataset.currents()
    labels = dataset.labels()
    means = np.empty((N_CLASSES, currents.shape[1]))
    for z in range(N_CLASSES):
        mask = labels == z
        if not mask.any():
            raise MissingClassError(f"dataset has no trajectories of class {z}", label=z)
        means[z] = currents[mask].mean(axis=0)
    return means


def build_matched_kernel(dataset: MeasurementDataset) -> FilterKernel:
    """h(t_n) = mean over classes of |class-mean current|, pointwise in time."""
    means = class_mean_currents(dataset)
    return FilterKernel(
        h=np.abs(means).mean(axis=0),
        kind=KIND_MATCHED_EMPIRICAL,
        dt_record=dataset.dt_record,
    )


def analytic_mean_currents(
    spec: QuantumSystemSpec, times: np.ndarray
) -> np.ndarray:
    """Noise-free mean currents sqrt(kappa) * 2 Re alpha_z(t), shape (C, N)."""
    if spec.model != MODEL_DISPERSIVE:
        raise UnsupportedModelError("analytic mean currents require the dispersive model")
    out = np.empty((N_CLASSES, len(times)))
    for z in range(N_CLASSES):
        out[z] = np.sqrt(spec.kappa) * 2.0 * analytic_cavity_amplitude(spec, z, times).real
    return out


def build_matched_kernel_analytic(
    spec: QuantumSystemSpec, n_samples: int, dt_record: float
) -> FilterKernel:
    """Matched kernel from the closed-form pointer-state amplitudes."""
    times = np.arange(1, n_samples + 1) * dt_record
    means = analytic_mean_currents(spec, times)
    return FilterKernel(
        h=np.abs(means).mean(axis=0),
        kind=KIND_MATCHED_ANALYTIC,
        dt_record=dt_record,
    )


def apply_filter(kernel: FilterKernel, u: np.ndarray) -> np.ndarray:
    """Running correlation y(t_n) = sum_{m<=n} h(t_m) u(t_m) dt."""
    u = np.asarray(u, dtype=float)
    if u.shape[-1] != len(kernel.h):
        raise ValueError(
            f"signal length {u.shape[-1]} != kernel length {len(kernel.h)}"
        )
    return np.cumsum(kernel.h * u, axis=-1) * kernel.dt_record


def fit_bins(kernel: FilterKernel, reference: MeasurementDataset) -> BinClassifier:
    """Expected bins from the class means of an empirical reference set."""
    means = class_mean_currents(reference)
    return BinClassifier(
        expected=apply_filter(kernel, means), dt_record=kernel.dt_record
    )


def fit_bins_analytic(kernel: FilterKernel, spec: QuantumSystemSpec) -> BinClassifier:
    """Expected bins from the analytic mean currents."""
    times = np.arange(1, len(kernel.h) + 1) * kernel.dt_record
    means = analytic_mean_currents(spec, times)
    return BinClassifier(
        expected=apply_filter(kernel, means), dt_record=kernel.dt_record
    )


def classify_filtered(bins: BinClassifier, y: np.ndarray) -> np.ndarray:
    """Nearest expected bin per time; ties break toward the smaller label.

    `y` is (N,) or (Q, N); returns int labels of the same shape.
    """
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != bins.expected.shape[1]:
        raise ValueError("filtered signal length does not match the bins")
    dist = np.abs(y[..., None, :] - bins.expected)  # (..., C, N)
    return np.argmin(dist, axis=-2)
