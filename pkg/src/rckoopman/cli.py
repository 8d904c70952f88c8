"""Command-line entry point: ``rckoopman {generate,identify,diagnose,select-rho,benchmark}``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from dataclasses import fields, replace
from pathlib import Path

import numpy as np

from . import serialization as sio
from .diagnostics import conditioning
from .errors import (
    ConstructionError,
    DomainError,
    InputDataError,
    NumericError,
    RCKoopmanError,
    SelectionError,
    ShapeError,
)
from .koopman import evaluate_onestep, spectrum
from .lifting import Dictionary
from .pipeline import (
    ExperimentConfig,
    fit_model,
    make_datasets,
    run_benchmark,
    select_rho,
    write_benchmark,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
MANIFEST = "dataset.json"


class ConfigError(Exception):
    pass


def _add_experiment_options(p: argparse.ArgumentParser) -> None:
    # Defaults are None so that only flags given explicitly override the config file.
    p.add_argument("--config", type=Path, help="JSON file with ExperimentConfig fields")
    p.add_argument("--system", choices=["duffing", "diffdrive"])
    p.add_argument("--method", choices=["rc", "edmd", "hankel"])
    p.add_argument("--lift-dim", type=int)
    p.add_argument("--ridge", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--train-len", type=int, help="steps per training trajectory")
    p.add_argument("--test-len", type=int, help="steps per test trajectory")
    p.add_argument("--n-train", type=int, help="number of training trajectories")
    p.add_argument("--n-test", type=int, help="number of test trajectories")
    p.add_argument("--washout", type=int)
    p.add_argument("--rho", help="reservoir spectral radius, or 'auto' for correlation-based selection")
    p.add_argument("--epsilon", type=float, help="memory-horizon precision (default 0.01)")
    p.add_argument("--max-lag", type=int)
    p.add_argument("--threshold", type=float, help="autocorrelation threshold (default e^-1)")
    p.add_argument("--demean-acf", action="store_true", default=None)
    p.add_argument("--input-scaling", type=float)
    p.add_argument("--density", type=float)
    p.add_argument("--rbf-width-factor", type=float)
    p.add_argument("--output-dir")


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    payload: dict = {}
    if args.config is not None:
        try:
            payload.update(sio.read_json(args.config))
        except ValueError as exc:
            raise ConfigError(f"{args.config}: invalid JSON ({exc})") from exc
    for f in fields(ExperimentConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            payload[f.name] = value
    try:
        return ExperimentConfig.from_dict(payload)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _load_dataset(data_dir: Path):
    manifest = sio.read_json(data_dir / MANIFEST)
    system, seed = manifest["system"], manifest["seed"]
    train = [sio.read_trajectory_csv(data_dir / f, system, seed) for f in manifest["train"]]
    test = [sio.read_trajectory_csv(data_dir / f, system, seed) for f in manifest["test"]]
    return manifest, train, test


def cmd_generate(args) -> int:
    config = build_config(args)
    out = Path(config.output_dir)
    train, test = make_datasets(config)
    names = {"train": [], "test": []}
    for split, trajs in (("train", train), ("test", test)):
        for i, traj in enumerate(trajs):
            name = f"{split}_{i:02d}.csv"
            sio.write_trajectory_csv(out / name, traj)
            names[split].append(name)
            print(out / name)
    sio.write_json(out / MANIFEST, {
        "system": config.system,
        "dt": train[0].dt,
        "seed": config.seed,
        "trajectory_seeds": {"train": train[0].seed, "test": test[0].seed},
        "config": {k: v for k, v in config.to_dict().items() if k != "output_dir"},
        "train": names["train"],
        "test": names["test"],
    })
    print(out / MANIFEST)
    return EXIT_OK


def cmd_identify(args) -> int:
    config = build_config(args)
    data_dir = Path(args.data_dir or config.output_dir)
    manifest, train, _ = _load_dataset(data_dir)
    config = replace(config, system=manifest["system"])
    model, choice, snaps = fit_model(config, train)
    path = Path(args.model_out) if args.model_out else Path(config.output_dir) / f"model_{config.method}.json"
    sio.save_model(path, model)
    print(f"method        {config.method}")
    print(f"system        {config.system}")
    print(f"lift_dim      {model.lift_dim}")
    if choice.dictionary.kind == "hankel":
        print(f"delays        {choice.dictionary.delays}")
    if choice.rho is not None:
        print(f"rho           {choice.rho:.6f}")
    if choice.selection is not None:
        print(f"tau_c         {choice.selection.tau_c}")
    print(f"train_nrmse   {evaluate_onestep(model, snaps).nrmse:.6e}")
    print(f"model         {path}")
    return EXIT_OK


def diagnose(model, train, test) -> dict:
    dictionary = Dictionary.from_dict(model.dictionary)
    if dictionary.output_dim != test[0].output_dim:
        raise ShapeError(f"model expects {dictionary.output_dim} outputs, data has {test[0].output_dim}")
    train_snaps = dictionary.lift_many(train)
    test_snaps = dictionary.lift_many(test)
    spec = spectrum(model)
    return {
        "conditioning": conditioning(train_snaps).to_dict(),
        "eigenvalues": [[float(z.real), float(z.imag)] for z in spec.eigenvalues],
        "unstable_count": spec.unstable_count,
        "test_nrmse": evaluate_onestep(model, test_snaps).nrmse,
        "dictionary_kind": dictionary.kind,
        "lift_dim": model.lift_dim,
    }


def cmd_diagnose(args) -> int:
    model = sio.load_model(args.model)
    _, train, test = _load_dataset(Path(args.data_dir))
    report = diagnose(model, train, test)
    c = report["conditioning"]
    print(f"C_psi          {c['C_psi']:.6g}")
    print(f"alpha          {c['alpha_status']}")
    print(f"kappa          {c['kappa']:.6g}")
    print(f"bound          {c['bound']:.6g}")
    print(f"unstable_count {report['unstable_count']}")
    print(f"test_nrmse     {report['test_nrmse']:.6e}")
    out = Path(args.report) if args.report else Path(args.model).with_name("report.json")
    sio.write_json(out, report)
    print(f"report         {out}")
    return EXIT_OK


def cmd_select_rho(args) -> int:
    config = build_config(args)
    if args.data_dir:
        manifest, train, _ = _load_dataset(Path(args.data_dir))
        config = replace(config, system=manifest["system"], train_len=train[0].n_steps)
    else:
        train, _ = make_datasets(config)
    sel = select_rho(config, train)
    print(f"rho    {sel.rho:.6f}")
    print(f"tau_c  {sel.tau_c}")
    if args.acf_out:
        sio.write_csv(args.acf_out, ["lag", "acf"], [[k, v] for k, v in enumerate(sel.acf)])
        print(f"acf    {args.acf_out}")
    return EXIT_OK


def cmd_benchmark(args) -> int:
    config = build_config(args)
    if args.n_seeds < 1:
        raise ConfigError("--n-seeds must be >= 1")
    start = time.perf_counter()
    result = run_benchmark(config, n_seeds=args.n_seeds)
    paths = write_benchmark(result, config.output_dir)
    print((Path(config.output_dir) / "summary.txt").read_text(), end="")
    for p in paths:
        print(p)
    print(f"elapsed {time.perf_counter() - start:.2f}s", file=sys.stderr)
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rckoopman", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="simulate train/test trajectories to CSV")
    _add_experiment_options(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("identify", help="fit a lifted linear model from generated data")
    _add_experiment_options(p)
    p.add_argument("--data-dir", help="directory holding dataset.json (default: --output-dir)")
    p.add_argument("--model-out", help="model JSON path (default: <output-dir>/model_<method>.json)")
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("diagnose", help="conditioning, spectrum and test error of a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data-dir", required=True)
    p.add_argument("--report", help="report JSON path (default: report.json next to the model)")
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("select-rho", help="correlation-based spectral radius selection")
    _add_experiment_options(p)
    p.add_argument("--data-dir", help="use generated data instead of simulating")
    p.add_argument("--acf-out", help="write the autocorrelation curve to this CSV")
    p.set_defaults(func=cmd_select_rho)

    p = sub.add_parser("benchmark", help="all methods on both systems; writes table and figure CSVs")
    _add_experiment_options(p)
    p.add_argument("--n-seeds", type=int, default=10, help="consecutive seeds starting at --seed")
    p.set_defaults(func=cmd_benchmark)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DomainError, SelectionError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ShapeError, KeyError) as exc:
        print(f"config error: incompatible inputs: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, ConstructionError, InputDataError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except RCKoopmanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
