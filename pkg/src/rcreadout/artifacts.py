"""Bit-exact on-disk formats: dataset directories (JSON manifest plus raw
little-endian float64 payloads), JSON artifacts for networks, heads, kernels
and reports, and CSV exports for external plotting.

All writes go through a write-temp-then-rename step so partially written
files never appear under their final name.
"""

from __future__ import annotations

import dataclasses
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from . import filters as flt
from .evaluation import EvaluationReport, SweepResult
from .exceptions import ConfigError
from .kerr import KerrNetwork, RcHyperParams
from .qsim import HomodyneTrajectory, MeasurementDataset, QuantumSystemSpec
from .training import ReadoutHead

SCHEMA_VERSION = 1

MANIFEST_NAME = "manifest.json"
TRAJECTORIES_NAME = "trajectories.f64"
CONDITIONAL_NAME = "conditional.f64"


def _atomic_write_bytes(path: Path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dump_json(obj: dict) -> bytes:
    # sorted keys + fixed separators: identical content -> identical bytes
    return (json.dumps(obj, sort_keys=True, indent=1, allow_nan=True) + "\n").encode(
        "utf-8"
    )


def _as_floats(a) -> list:
    return [float(v) for v in np.asarray(a).ravel()]


def _nested_floats(a) -> list:
    return [[float(v) for v in row] for row in np.asarray(a)]


# ---------------------------------------------------------------------------
# dataset directories


def write_dataset(
    dataset: MeasurementDataset,
    outdir: str | Path,
    force: bool = False,
    config_hash: str | None = None,
) -> Path:
    """Write manifest.json + trajectories.f64 (+ conditional.f64).

    Trajectory q occupies bytes [q*N*8, (q+1)*N*8) of the binary payloads,
    samples in time order, little-endian float64.  Refuses to touch an
    existing non-empty directory unless `force`.
    """
    outdir = Path(outdir)
    if outdir.exists() and any(outdir.iterdir()) and not force:
        raise FileExistsError(f"{outdir} is not empty (pass force to overwrite)")
    outdir.mkdir(parents=True, exist_ok=True)

    trajs = dataset.trajectories
    currents = np.ascontiguousarray(dataset.currents(), dtype="<f8")
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "config_hash": config_hash,
        "spec": dataclasses.asdict(dataset.spec),
        "dt_int": float(dataset.dt_int),
        "dt_record": float(dataset.dt_record),
        "tau_m": float(dataset.tau_m),
        "master_seed": int(dataset.master_seed),
        "seed_domain": int(dataset.seed_domain),
        "n_trajectories": len(trajs),
        "n_samples": int(currents.shape[1]),
        "labels": [int(t.label) for t in trajs],
        "seeds": [int(t.seed) for t in trajs],
        "truncation_leak": [float(t.truncation_leak) for t in trajs],
        "has_conditional": trajs[0].x_conditional is not None,
    }
    _atomic_write_bytes(outdir / MANIFEST_NAME, _dump_json(manifest))
    _atomic_write_bytes(outdir / TRAJECTORIES_NAME, currents.tobytes())
    if manifest["has_conditional"]:
        cond = np.ascontiguousarray(dataset.conditional(), dtype="<f8")
        _atomic_write_bytes(outdir / CONDITIONAL_NAME, cond.tobytes())
    return outdir


def read_dataset(path: str | Path) -> MeasurementDataset:
    path = Path(path)
    manifest_path = path / MANIFEST_NAME
    if not manifest_path.exists():
        raise FileNotFoundError(str(manifest_path))
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    if manifest.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"unsupported dataset schema in {manifest_path}")

    spec_dict = dict(manifest["spec"])
    spec_dict["delta_q"] = tuple(spec_dict["delta_q"])
    spec_dict["g"] = tuple(spec_dict["g"])
    spec = QuantumSystemSpec(**spec_dict)

    q = int(manifest["n_trajectories"])
    n = int(manifest["n_samples"])
    raw = np.fromfile(path / TRAJECTORIES_NAME, dtype="<f8")
    if raw.size != q * n:
        raise ValueError(
            f"trajectories.f64 holds {raw.size} samples, manifest says {q * n}"
        )
    currents = raw.reshape(q, n)
    cond = None
    if manifest["has_conditional"]:
        cond = np.fromfile(path / CONDITIONAL_NAME, dtype="<f8")
        if cond.size != q * n:
            raise ValueError("conditional.f64 does not match the manifest")
        cond = cond.reshape(q, n)

    trajs = [
        HomodyneTrajectory(
            label=int(manifest["labels"][i]),
            dt_record=float(manifest["dt_record"]),
            j_record=currents[i],
            seed=int(manifest["seeds"][i]),
            truncation_leak=float(manifest["truncation_leak"][i]),
            x_conditional=None if cond is None else cond[i],
        )
        for i in range(q)
    ]
    return MeasurementDataset(
        spec=spec,
        trajectories=trajs,
        master_seed=int(manifest["master_seed"]),
        tau_m=float(manifest["tau_m"]),
        dt_int=float(manifest["dt_int"]),
        dt_record=float(manifest["dt_record"]),
        seed_domain=int(manifest["seed_domain"]),
    )


# ---------------------------------------------------------------------------
# JSON artifacts

KIND_NETWORK = "kerr-network"
KIND_HEAD = "readout-head"
KIND_KERNEL = "filter-kernel"
KIND_BINS = "bin-classifier"
KIND_REPORT = "evaluation-report"


def _save(path: Path, kind: str, payload: dict, config_hash: str | None) -> None:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "kind": kind,
        "config_hash": config_hash,
        "payload": payload,
    }
    _atomic_write_bytes(Path(path), _dump_json(doc))


def _load(path: str | Path, kind: str) -> dict:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    doc = json.loads(path.read_text(encoding="utf-8"))
    if doc.get("schema_version") != SCHEMA_VERSION or doc.get("kind") != kind:
        raise ConfigError(f"{path} is not a schema-{SCHEMA_VERSION} {kind} artifact")
    return doc["payload"]


def save_network(path, net: KerrNetwork, config_hash: str | None = None) -> None:
    payload = {
        "hyperparams": dataclasses.asdict(net.hp),
        "seed": int(net.seed),
        "w_in": _nested_floats(net.w_in),
        "w_res": _nested_floats(net.w_res),
        "lam": _as_floats(net.lam),
    }
    _save(path, KIND_NETWORK, payload, config_hash)


def load_network(path) -> KerrNetwork:
    p = _load(path, KIND_NETWORK)
    return KerrNetwork(
        hp=RcHyperParams(**p["hyperparams"]),
        w_in=np.array(p["w_in"], dtype=float),
        w_res=np.array(p["w_res"], dtype=float),
        lam=np.array(p["lam"], dtype=float),
        seed=int(p["seed"]),
    )


def save_head(path, head: ReadoutHead, config_hash: str | None = None) -> None:
    payload = {
        "w_out": _nested_floats(head.w_out),
        "phi": _as_floats(head.phi),
        "train_meta": head.train_meta,
    }
    _save(path, KIND_HEAD, payload, config_hash)


def load_head(path) -> ReadoutHead:
    p = _load(path, KIND_HEAD)
    return ReadoutHead(
        w_out=np.array(p["w_out"], dtype=float),
        phi=np.array(p["phi"], dtype=float),
        train_meta=dict(p["train_meta"]),
    )


def save_kernel(path, kernel: flt.FilterKernel, config_hash: str | None = None) -> None:
    payload = {
        "kind": kernel.kind,
        "dt_record": float(kernel.dt_record),
        "h": _as_floats(kernel.h),
    }
    _save(path, KIND_KERNEL, payload, config_hash)


def load_kernel(path) -> flt.FilterKernel:
    p = _load(path, KIND_KERNEL)
    return flt.FilterKernel(
        h=np.array(p["h"], dtype=float),
        kind=p["kind"],
        dt_record=float(p["dt_record"]),
    )


def save_bins(path, bins: flt.BinClassifier, config_hash: str | None = None) -> None:
    payload = {
        "dt_record": float(bins.dt_record),
        "expected": _nested_floats(bins.expected),
    }
    _save(path, KIND_BINS, payload, config_hash)


def load_bins(path) -> flt.BinClassifier:
    p = _load(path, KIND_BINS)
    return flt.BinClassifier(
        expected=np.array(p["expected"], dtype=float),
        dt_record=float(p["dt_record"]),
    )


def save_report(path, report: EvaluationReport, config_hash: str | None = None) -> None:
    payload = {
        "times": _as_floats(report.times),
        "accuracy_curve": _as_floats(report.accuracy_curve),
        "fidelity": float(report.fidelity),
        "t_opt_index": int(report.t_opt_index),
        "t_opt": float(report.t_opt),
        "confusion": [[int(v) for v in row] for row in report.confusion],
        "n_test": int(report.n_test),
    }
    _save(path, KIND_REPORT, payload, config_hash)


def load_report(path) -> EvaluationReport:
    p = _load(path, KIND_REPORT)
    return EvaluationReport(
        times=np.array(p["times"], dtype=float),
        accuracy_curve=np.array(p["accuracy_curve"], dtype=float),
        fidelity=float(p["fidelity"]),
        t_opt_index=int(p["t_opt_index"]),
        t_opt=float(p["t_opt"]),
        confusion=np.array(p["confusion"], dtype=int),
        n_test=int(p["n_test"]),
    )


# ---------------------------------------------------------------------------
# CSV exports


def _write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(repr(float(v)) if isinstance(v, float) else str(v) for v in row))
    _atomic_write_bytes(Path(path), ("\n".join(lines) + "\n").encode("utf-8"))


def write_curve_csv(path, report: EvaluationReport) -> None:
    rows = zip(
        (float(t) for t in report.times),
        (float(a) for a in report.accuracy_curve),
    )
    _write_csv(Path(path), ["time", "accuracy"], rows)


def write_sweep_csv(path, result: SweepResult) -> None:
    rows = []
    for ci, hp in enumerate(result.cells):
        for si in range(result.fidelities.shape[1]):
            rows.append(
                (
                    ci,
                    float(hp.gamma),
                    float(hp.alpha),
                    float(hp.lambda_bar),
                    float(hp.mu),
                    si,
                    float(result.fidelities[ci, si]),
                )
            )
    _write_csv(
        Path(path),
        ["cell", "gamma", "alpha", "lambda_bar", "mu", "seed_index", "fidelity"],
        rows,
    )


def write_measured_subspace_csv(path, export: dict) -> None:
    xphi = export["xphi"]
    k = xphi.shape[1]
    header = [f"x{j}" for j in range(k)] + ["true", "predicted"]
    rows = [
        tuple(float(v) for v in xphi[q]) + (int(export["true"][q]), int(export["predicted"][q]))
        for q in range(xphi.shape[0])
    ]
    _write_csv(Path(path), header, rows)
    # hyperplane normals ride along in a sibling JSON artifact
    side = Path(path).with_suffix(".hyperplanes.json")
    payload = {
        "schema_version": SCHEMA_VERSION,
        "hyperplanes": [
            {"classes": list(h["classes"]), "normal": _as_floats(h["normal"])}
            for h in export["hyperplanes"]
        ],
    }
    _atomic_write_bytes(side, _dump_json(payload))
