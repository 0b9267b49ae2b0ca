"""Command-line pipeline: generate datasets, fit baselines, train reservoir
heads, evaluate, sweep hyperparameters, and export measured-subspace data.

Failures print a machine-readable JSON object on stderr and exit with a
code identifying the failure class.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import artifacts, config as cfgmod, evaluation, filters as flt, kerr, qsim
from .exceptions import (
    ConfigError,
    DivergenceError,
    IntegrationInstabilityError,
    TrainingError,
)
from .seeds import DOMAIN_NETWORK, DOMAIN_TEST_DATA, DOMAIN_TRAIN_DATA, derive_seed

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_MISSING_FILE = 3
EXIT_DIMENSION = 4
EXIT_INSTABILITY = 5
EXIT_OUTPUT_EXISTS = 6

_ERROR_NAMES = {
    EXIT_ERROR: "error",
    EXIT_CONFIG: "config-error",
    EXIT_MISSING_FILE: "missing-file",
    EXIT_DIMENSION: "dimension-mismatch",
    EXIT_INSTABILITY: "numerical-instability",
    EXIT_OUTPUT_EXISTS: "output-exists",
}


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _emit_error(code: int, message: str) -> None:
    doc = {"error": _ERROR_NAMES.get(code, "error"), "code": code, "message": message}
    print(json.dumps(doc), file=sys.stderr)


def _load_run(args) -> tuple[dict, str]:
    if not args.config:
        raise CliError(EXIT_CONFIG, "--config is required")
    cfg = cfgmod.load_config(args.config)
    if args.seed is not None:
        cfg["master_seed"] = args.seed
    return cfg, cfgmod.config_hash(cfg)


def _outdir(args) -> Path:
    if not args.out:
        raise CliError(EXIT_CONFIG, "--out is required")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _artifact_path(out: Path, name: str, force: bool) -> Path:
    path = out / name
    if path.exists() and not force:
        raise CliError(EXIT_OUTPUT_EXISTS, f"{path} exists (use --force)")
    return path


def _read_dataset(path: str | None, what: str) -> qsim.MeasurementDataset:
    if not path:
        raise CliError(EXIT_CONFIG, f"--{what} is required")
    return artifacts.read_dataset(path)


def _network_for(cfg: dict) -> kerr.KerrNetwork:
    hp = cfgmod.rc_hyperparams(cfg)
    idx = int(cfg["reservoir"]["network_index"])
    return kerr.sample_network(hp, derive_seed(cfg["master_seed"], DOMAIN_NETWORK, idx))


# ---------------------------------------------------------------------------
# subcommands


def cmd_generate(args) -> int:
    cfg, chash = _load_run(args)
    out = _outdir(args)
    spec = cfgmod.system_spec(cfg)
    sim = cfgmod.sim_params(cfg)
    role = cfg["dataset"]["role"]
    if role not in ("train", "test"):
        raise ConfigError("dataset.role must be 'train' or 'test'")
    domain = DOMAIN_TRAIN_DATA if role == "train" else DOMAIN_TEST_DATA
    dataset = qsim.generate_dataset(
        spec,
        int(cfg["dataset"]["m_per_class"]),
        cfg["master_seed"],
        sim,
        seed_domain=domain,
        workers=args.threads,
    )
    artifacts.write_dataset(dataset, out, force=args.force, config_hash=chash)
    print(json.dumps({"written": str(out), "n_trajectories": len(dataset)}))
    return EXIT_OK


def cmd_baseline(args) -> int:
    cfg, chash = _load_run(args)
    out = _outdir(args)
    kind = args.kind or cfg["baseline"]["kind"]
    train_set = _read_dataset(args.dataset, "dataset")
    test_set = artifacts.read_dataset(args.test) if args.test else train_set
    n = train_set.currents().shape[1]

    if kind == "boxcar":
        kernel = flt.boxcar_kernel(n, train_set.dt_record)
        bins = flt.fit_bins(kernel, train_set)
    elif kind == "matched":
        kernel = flt.build_matched_kernel(train_set)
        bins = flt.fit_bins(kernel, train_set)
    elif kind == "matched-analytic":
        kernel = flt.build_matched_kernel_analytic(train_set.spec, n, train_set.dt_record)
        bins = flt.fit_bins_analytic(kernel, train_set.spec)
    else:
        raise ConfigError(f"unknown baseline kind '{kind}'")

    report = evaluation.accuracy_curve_filter(kernel, bins, test_set)
    artifacts.save_kernel(_artifact_path(out, "kernel.json", args.force), kernel, chash)
    artifacts.save_bins(_artifact_path(out, "bins.json", args.force), bins, chash)
    artifacts.save_report(_artifact_path(out, "report.json", args.force), report, chash)
    artifacts.write_curve_csv(_artifact_path(out, "curves.csv", args.force), report)
    print(json.dumps({"kind": kind, "fidelity": report.fidelity, "t_opt": report.t_opt}))
    return EXIT_OK


def cmd_train(args) -> int:
    cfg, chash = _load_run(args)
    out = _outdir(args)
    train_set = _read_dataset(args.dataset, "dataset")
    net = _network_for(cfg)
    head = evaluation.train_rc_head(
        net,
        train_set,
        cfgmod.train_config(cfg),
        master_seed=cfg["master_seed"],
        restarts=int(cfg["train"]["restarts"]),
        substeps=int(cfg["reservoir"]["substeps"]),
    )
    artifacts.save_network(_artifact_path(out, "network.json", args.force), net, chash)
    artifacts.save_head(_artifact_path(out, "head.json", args.force), head, chash)
    print(json.dumps({"final_loss": head.train_meta["loss_trace"][-1]}))
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg, chash = _load_run(args)
    out = _outdir(args)
    net = artifacts.load_network(args.network)
    head = artifacts.load_head(args.head)
    test_set = _read_dataset(args.dataset, "dataset")
    report = evaluation.accuracy_curve_rc(
        net, head, test_set, substeps=int(cfg["reservoir"]["substeps"])
    )
    artifacts.save_report(_artifact_path(out, "report.json", args.force), report, chash)
    artifacts.write_curve_csv(_artifact_path(out, "curves.csv", args.force), report)
    print(json.dumps({"fidelity": report.fidelity, "t_opt": report.t_opt}))
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg, chash = _load_run(args)
    out = _outdir(args)
    train_set = _read_dataset(args.dataset, "dataset")
    test_set = artifacts.read_dataset(args.test) if args.test else train_set
    base = cfgmod.rc_hyperparams(cfg)
    sw = cfg["sweep"]
    cells = [
        kerr.RcHyperParams(
            k_nodes=base.k_nodes,
            gamma=base.gamma,
            alpha=base.alpha,
            lambda_bar=float(lb),
            mu=float(mu),
        )
        for lb in sw["lambda_bar"]
        for mu in sw["mu"]
    ]
    result = evaluation.hyperparameter_sweep(
        cells,
        int(sw["n_seeds"]),
        train_set,
        test_set,
        cfgmod.train_config(cfg),
        master_seed=cfg["master_seed"],
        lambda_fixed=bool(sw["lambda_fixed"]),
        restarts=int(sw["restarts"]),
    )
    artifacts.write_sweep_csv(_artifact_path(out, "sweep.csv", args.force), result)
    best = int(np.nanargmax(result.cell_means()))
    print(
        json.dumps(
            {
                "n_cells": len(cells),
                "n_diverged": result.n_diverged,
                "best_cell": best,
                "best_mean_fidelity": float(result.cell_means()[best]),
            }
        )
    )
    return EXIT_OK


def cmd_export_ms(args) -> int:
    cfg, _ = _load_run(args)
    out = _outdir(args)
    net = artifacts.load_network(args.network)
    head = artifacts.load_head(args.head)
    test_set = _read_dataset(args.dataset, "dataset")
    export = evaluation.measured_subspace_export(net, head, test_set)
    artifacts.write_measured_subspace_csv(_artifact_path(out, "ms.csv", args.force), export)
    print(json.dumps({"written": str(out / "ms.csv"), "n_points": len(export["true"])}))
    return EXIT_OK


# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rcreadout",
        description="Dispersive-readout simulation and reservoir classification pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, dataset=False, test=False, model=False, kind=False):
        p.add_argument("--config", required=False, help="JSON run configuration")
        p.add_argument("--out", required=False, help="output directory")
        p.add_argument("--force", action="store_true", help="overwrite existing outputs")
        p.add_argument("--threads", type=int, default=None, help="parallelism cap")
        p.add_argument("--seed", type=int, default=None, help="override master seed")
        if dataset:
            p.add_argument("--dataset", help="dataset directory")
        if test:
            p.add_argument("--test", help="test dataset directory")
        if model:
            p.add_argument("--network", help="network.json path")
            p.add_argument("--head", help="head.json path")
        if kind:
            p.add_argument(
                "--kind", choices=["boxcar", "matched", "matched-analytic"], default=None
            )

    common(sub.add_parser("generate", help="simulate a labeled dataset"))
    common(sub.add_parser("baseline", help="fit and score a linear filter"), dataset=True, test=True, kind=True)
    common(sub.add_parser("train", help="train a reservoir readout"), dataset=True)
    common(sub.add_parser("eval", help="score a trained readout"), dataset=True, model=True)
    common(sub.add_parser("sweep", help="hyperparameter grid study"), dataset=True, test=True)
    common(sub.add_parser("export-ms", help="export measured-subspace data"), dataset=True, model=True)
    return parser


_HANDLERS = {
    "generate": cmd_generate,
    "baseline": cmd_baseline,
    "train": cmd_train,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "export-ms": cmd_export_ms,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except CliError as exc:
        _emit_error(exc.code, str(exc))
        return exc.code
    except ConfigError as exc:
        _emit_error(EXIT_CONFIG, str(exc))
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        _emit_error(EXIT_MISSING_FILE, str(exc))
        return EXIT_MISSING_FILE
    except FileExistsError as exc:
        _emit_error(EXIT_OUTPUT_EXISTS, str(exc))
        return EXIT_OUTPUT_EXISTS
    except (IntegrationInstabilityError, DivergenceError, TrainingError) as exc:
        _emit_error(EXIT_INSTABILITY, str(exc))
        return EXIT_INSTABILITY
    except ValueError as exc:
        _emit_error(EXIT_DIMENSION, str(exc))
        return EXIT_DIMENSION


if __name__ == "__main__":
    sys.exit(main())
