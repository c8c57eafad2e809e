"""Command-line entry point: train runs, variance scans, fixture inspection."""

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .experiments import (
    CASE_TABLE,
    CaseSpec,
    VarianceScanSpec,
    case_spec,
    multi_spec,
    run_case,
    run_multi,
    scan_decay_ratios,
    variance_scan,
)
from .graphdata import load_fixture

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3

HISTORY_COLUMNS = ("epoch", "train_loss", "train_r2", "test_loss", "test_r2")

_TRAIN_KEYS = {
    "framework", "case", "fixture", "seed", "epochs", "lr", "lr_decay_gamma",
    "train_fraction", "sigma", "depths", "hidden", "expected_params",
}
_SCAN_KEYS = {"qubit_counts", "samples_per_point", "depths", "modes", "seed"}


class ConfigError(ValueError):
    pass


def _load_config(path: str, allowed: set) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"config {path} has unknown keys: {sorted(unknown)}")
    if "fixture" in raw:
        # Fixture paths are relative to the config file, so configs can be
        # invoked from any working directory.
        raw["fixture"] = str((p.parent / raw["fixture"]).resolve())
    return raw


def _train_spec(cfg: dict, seed_override) -> CaseSpec:
    for key in ("framework", "fixture"):
        if key not in cfg:
            raise ConfigError(f"train config missing required key {key!r}")
    framework = cfg.pop("framework")
    fixture = cfg.pop("fixture")
    seed = cfg.pop("seed", None)
    if seed_override is not None:
        seed = seed_override
    if seed is None:
        raise ConfigError("no seed: set one in the config or pass --seed")
    case = cfg.pop("case", 1)
    for key in ("depths", "hidden"):
        if key in cfg:
            cfg[key] = tuple(cfg[key])
    if framework == "qgnn-multi":
        return multi_spec(fixture, seed, case=case, **cfg)
    if (case, framework) in CASE_TABLE:
        return case_spec(case, framework, fixture, seed, **cfg)
    return CaseSpec(case=case, framework=framework, fixture=fixture, seed=seed, **cfg)


def _write_history_csv(path: Path, history) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(HISTORY_COLUMNS)
        for row in history:
            writer.writerow([row[c] for c in HISTORY_COLUMNS])


def _summary_payload(report) -> dict:
    payload = {
        "framework": report.framework,
        "case": report.case,
        "seed": report.seed,
        "params": report.param_count,
        "reported_params": report.reported_params,
        "epochs": report.epochs,
        "lr": report.lr,
        "n_train": report.n_train,
        "n_test": report.n_test,
        "best_epoch": report.best.get("epoch"),
        "train_loss": report.best.get("train_loss"),
        "train_r2": report.best.get("train_r2"),
        "test_loss": report.best.get("test_loss"),
        "test_r2": report.best.get("test_r2"),
        "best_train_loss": report.best_train_loss,
        "wall_time_s": report.wall_time_s,
    }
    return payload


def cmd_train(args) -> int:
    cfg = _load_config(args.config, _TRAIN_KEYS)
    spec = _train_spec(cfg, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def progress(row):
        if row["epoch"] % 25 == 0 or row["epoch"] == spec.epochs - 1:
            print(
                f"epoch {row['epoch']:4d}  train_loss {row['train_loss']:.5f}  "
                f"train_r2 {row['train_r2']:.4f}  test_r2 {row['test_r2']:.4f}",
                flush=True,
            )

    runner = run_multi if spec.framework == "qgnn-multi" else run_case
    report = runner(spec, threads=args.threads, callback=progress)
    _write_history_csv(out / "history.csv", report.history)
    (out / "summary.json").write_text(
        json.dumps(_summary_payload(report), indent=1) + "\n"
    )
    print(f"wrote {out / 'history.csv'} and {out / 'summary.json'}")
    print(
        f"best epoch {report.best.get('epoch')}: "
        f"train_r2 {report.best.get('train_r2'):.4f} "
        f"test_r2 {report.best.get('test_r2'):.4f} "
        f"({report.wall_time_s:.1f}s)"
    )
    return EXIT_OK


def cmd_bp_scan(args) -> int:
    cfg = _load_config(args.config, _SCAN_KEYS)
    if args.seed is not None:
        cfg["seed"] = args.seed
    for key in ("qubit_counts", "depths", "modes"):
        if key in cfg:
            cfg[key] = tuple(cfg[key])
    spec = VarianceScanSpec(**cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def progress(row):
        print(
            f"n={row['n_qubits']:2d} mode={row['mode']:<12s} "
            f"avg variance {row['avg']:.3e}",
            flush=True,
        )

    report = variance_scan(spec, threads=args.threads, callback=progress)
    with (out / "variance.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("n_qubits", "mode", "param_index", "variance"))
        for row in report.rows:
            for idx, var in enumerate(row["per_param"]):
                writer.writerow((row["n_qubits"], row["mode"], idx, var))
    with (out / "variance_avg.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("n_qubits", "mode", "avg_variance"))
        for row in report.rows:
            writer.writerow((row["n_qubits"], row["mode"], row["avg"]))
    for ratio in scan_decay_ratios(report):
        print(
            f"uncorrelated decay {ratio['n_from']}->{ratio['n_to']} qubits: "
            f"x{ratio['ratio']:.2f}"
        )
    print(f"wrote {out / 'variance.csv'} and {out / 'variance_avg.csv'}")
    return EXIT_OK


def cmd_inspect(args) -> int:
    molecules = load_fixture(args.fixture)
    sizes = np.array([m.n_atoms for m in molecules])
    targets = np.array([m.target for m in molecules])
    print(f"{len(molecules)} molecules, atoms {sizes.min()}-{sizes.max()}")
    hist = {}
    for s in sizes:
        hist[int(s)] = hist.get(int(s), 0) + 1
    print("atom counts:", " ".join(f"{k}:{v}" for k, v in sorted(hist.items())))
    feats = np.vstack([m.atom_features for m in molecules])
    for col in range(feats.shape[1]):
        lo, hi = feats[:, col].min(), feats[:, col].max()
        print(f"feature {col}: [{lo:.3f}, {hi:.3f}]")
    print(f"targets: [{targets.min():.4f}, {targets.max():.4f}]")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qgsage",
        description="Quantum-aggregator graph regression: training and scans.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="train one configuration from a JSON config")
    train.add_argument("--config", required=True, help="JSON run configuration")
    train.add_argument("--seed", type=int, default=None, help="override config seed")
    train.add_argument("--out", default=".", help="output directory")
    train.add_argument("--threads", type=int, default=1)
    train.set_defaults(func=cmd_train)

    scan = sub.add_parser("bp-scan", help="gradient-variance scan over register widths")
    scan.add_argument("--config", required=True)
    scan.add_argument("--seed", type=int, default=None)
    scan.add_argument("--out", default=".")
    scan.add_argument("--threads", type=int, default=1)
    scan.set_defaults(func=cmd_bp_scan)

    inspect = sub.add_parser("inspect", help="summarize a molecule fixture")
    inspect.add_argument("fixture", help="fixture JSON path")
    inspect.set_defaults(func=cmd_inspect)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (RuntimeError, FloatingPointError, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
