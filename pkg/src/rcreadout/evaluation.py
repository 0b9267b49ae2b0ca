"""Accuracy curves, classification fidelity, baseline comparisons,
training-set-size scaling, hyperparameter sweeps, and measured-subspace
exports."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import filters as flt
from . import kerr, qsim
from .exceptions import DivergenceError
from .kerr import KerrNetwork, RcHyperParams
from .qsim import MeasurementDataset, N_CLASSES, QuantumSystemSpec, SimParams
from .seeds import DOMAIN_NETWORK, DOMAIN_TRAIN_DATA, derive_seed
from .training import ReadoutHead, TrainConfig, train_restarts


@dataclass
class EvaluationReport:
    """Accuracy vs readout time plus its peak (the classification fidelity)."""

    times: np.ndarray
    accuracy_curve: np.ndarray
    fidelity: float
    t_opt_index: int
    t_opt: float
    confusion: np.ndarray  # (C, C) counts at t_opt; rows = true class
    n_test: int


def _report(pred: np.ndarray, labels: np.ndarray, times: np.ndarray) -> EvaluationReport:
    correct = pred == labels[:, None]
    curve = correct.mean(axis=0)
    idx = int(np.argmax(curve))  # first maximizer: earliest optimal readout
    confusion = np.zeros((N_CLASSES, N_CLASSES), dtype=int)
    for z_true, z_pred in zip(labels, pred[:, idx]):
        confusion[z_true, z_pred] += 1
    return EvaluationReport(
        times=times,
        accuracy_curve=curve,
        fidelity=float(curve[idx]),
        t_opt_index=idx,
        t_opt=float(times[idx]),
        confusion=confusion,
        n_test=len(labels),
    )


def record_times(dataset: MeasurementDataset) -> np.ndarray:
    n = dataset.trajectories[0].j_record.shape[0]
    return np.arange(1, n + 1) * dataset.dt_record


def rc_responses(
    net: KerrNetwork, dataset: MeasurementDataset, substeps: int = 4
) -> np.ndarray:
    """Reservoir quadrature responses to every record, shape (Q, N, 2K)."""
    beta = kerr.integrate(net, dataset.currents(), dataset.dt_record, substeps)
    return kerr.quadratures(beta)


def rc_predictions(net: KerrNetwork, head: ReadoutHead, x: np.ndarray) -> np.ndarray:
    """argmax-of-logits class per (trajectory, time); ties -> smaller label."""
    if head.w_out.shape[1] != net.k_nodes:
        raise ValueError("head does not match the network's node count")
    xphi = kerr.measure(x, head.phi)
    logits = xphi @ head.w_out.T
    return np.argmax(logits, axis=-1)


def accuracy_curve_rc(
    net: KerrNetwork,
    head: ReadoutHead,
    test: MeasurementDataset,
    substeps: int = 4,
    x: np.ndarray | None = None,
) -> EvaluationReport:
    """Classification accuracy of a trained reservoir on a test set.

    Pass precomputed responses `x` to skip re-integration.
    """
    if x is None:
        x = rc_responses(net, test, substeps)
    pred = rc_predictions(net, head, x)
    return _report(pred, test.labels(), record_times(test))


def accuracy_curve_filter(
    kernel: flt.FilterKernel, bins: flt.BinClassifier, test: MeasurementDataset
) -> EvaluationReport:
    """Classification accuracy of a filter + expected-bin classifier."""
    y = flt.apply_filter(kernel, test.currents())
    pred = flt.classify_filtered(bins, y)
    return _report(pred, test.labels(), record_times(test))


# ---------------------------------------------------------------------------
# studies


def train_rc_head(
    net: KerrNetwork,
    train_set: MeasurementDataset,
    cfg: TrainConfig | None = None,
    master_seed: int = 0,
    restarts: int = 3,
    restart_offset: int = 0,
    substeps: int = 4,
) -> ReadoutHead:
    """Integrate the reservoir over a labeled training set and fit the head."""
    x = rc_responses(net, train_set, substeps)
    return train_restarts(
        x,
        train_set.labels(),
        cfg,
        master_seed=master_seed,
        restarts=restarts,
        restart_offset=restart_offset,
    )


def q_scaling_study(
    spec: QuantumSystemSpec,
    hp: RcHyperParams,
    rc_seeds: list[int],
    q_list: list[int],
    test: MeasurementDataset,
    master_seed: int,
    cfg: TrainConfig | None = None,
    sim: SimParams | None = None,
    restarts: int = 1,
    train_sets: dict[int, MeasurementDataset] | None = None,
    workers: int | None = None,
) -> dict:
    """Fidelity vs training-set size for reservoirs and the empirical MF.

    Each Q gets a fresh, class-balanced training set (or a caller-supplied
    one via `train_sets`); all methods are evaluated on the fixed `test`.
    Returns {"rc": {Q: [F per seed]}, "rc_mean": {Q: mean}, "mf": {Q: F}}.
    """
    train_sets = dict(train_sets or {})
    out = {"rc": {}, "rc_mean": {}, "mf": {}}
    for qi, q in enumerate(q_list):
        if q % N_CLASSES:
            raise ValueError("Q values must be divisible by the class count")
        if q not in train_sets:
            sub_master = derive_seed(master_seed, DOMAIN_TRAIN_DATA, 10**6 + qi)
            train_sets[q] = qsim.generate_dataset(
                spec, q // N_CLASSES, sub_master, sim, workers=workers
            )
        tset = train_sets[q]

        kernel = flt.build_matched_kernel(tset)
        bins = flt.fit_bins(kernel, tset)
        out["mf"][q] = accuracy_curve_filter(kernel, bins, test).fidelity

        fids = []
        for si, net_seed in enumerate(rc_seeds):
            net = kerr.sample_network(hp, net_seed)
            head = train_rc_head(
                net,
                tset,
                cfg,
                master_seed=master_seed,
                restarts=restarts,
                restart_offset=(qi * len(rc_seeds) + si) * max(restarts, 1),
            )
            rep = accuracy_curve_rc(net, head, test)
            fids.append(rep.fidelity)
        out["rc"][q] = fids
        out["rc_mean"][q] = float(np.mean(fids))
    return out


@dataclass
class SweepResult:
    """Per-(cell, seed) fidelities over a hyperparameter grid."""

    cells: list[RcHyperParams]
    fidelities: np.ndarray  # (n_cells, n_seeds); NaN marks divergence
    n_diverged: int

    def cell_means(self) -> np.ndarray:
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)  # all-NaN cells
            return np.nanmean(self.fidelities, axis=1)


def hyperparameter_sweep(
    cells: list[RcHyperParams],
    n_seeds: int,
    train_set: MeasurementDataset,
    test: MeasurementDataset,
    cfg: TrainConfig | None = None,
    master_seed: int = 0,
    lambda_fixed: bool = False,
    restarts: int = 1,
) -> SweepResult:
    """Train `n_seeds` random networks per grid cell on a fixed training set.

    With `lambda_fixed` every node nonlinearity is pinned to -lambda_bar
    (exposes the nonlinearity-input-coupling tradeoff without sampling
    noise).  Divergent networks score NaN and are excluded from means.
    """
    if not cells:
        raise ValueError("sweep grid must be non-empty")
    fid = np.full((len(cells), n_seeds), np.nan)
    n_diverged = 0
    for ci, hp in enumerate(cells):
        for si in range(n_seeds):
            net_seed = derive_seed(master_seed, DOMAIN_NETWORK, ci * n_seeds + si)
            net = kerr.sample_network(hp, net_seed)
            if lambda_fixed:
                net = net.with_lambda(-hp.lambda_bar)
            try:
                head = train_rc_head(
                    net,
                    train_set,
                    cfg,
                    master_seed=master_seed,
                    restarts=restarts,
                    restart_offset=(ci * n_seeds + si) * max(restarts, 1),
                )
                rep = accuracy_curve_rc(net, head, test)
            except DivergenceError:
                n_diverged += 1
                continue
            fid[ci, si] = rep.fidelity
    return SweepResult(cells=cells, fidelities=fid, n_diverged=n_diverged)


def measured_subspace_export(
    net: KerrNetwork,
    head: ReadoutHead,
    test: MeasurementDataset,
    t_index: int = -1,
) -> dict:
    """Final measured-subspace coordinates and separating hyperplanes.

    The class-(j,k) boundary is {x : (row_j - row_k) . x = 0}; points on a
    boundary classify to the smaller label, consistent with argmax.
    """
    x = rc_responses(net, test)
    pred = rc_predictions(net, head, x)
    xphi = kerr.measure(x, head.phi)
    hyperplanes = [
        {"classes": (j, k), "normal": head.w_out[j] - head.w_out[k]}
        for j in range(N_CLASSES)
        for k in range(j + 1, N_CLASSES)
    ]
    return {
        "xphi": xphi[:, t_index, :],
        "true": test.labels(),
        "predicted": pred[:, t_index],
        "hyperplanes": hyperplanes,
    }
