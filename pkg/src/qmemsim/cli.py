"""Command-line interface.

Subcommands: ``reproduce fig3|fig4|fig5|table1`` runs a packaged
scenario, ``simulate`` runs the configured channel/time grid, ``fit``
fits a user-supplied decay dataset, ``calibrate`` computes static
coherence factors from target fidelities.

Exit codes: 0 success, 2 configuration or input-schema error,
3 numerical or fit failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys

import numpy as np

from .config import ScenarioConfig, load_config
from .errors import ConfigError, FitError
from .fitting import DecayDataset, fit_exponential, fit_sigma_gamma
from .detection import effective_detection_efficiency
from .memory import retrieval_efficiency
from .scenarios import (
    RunArtifact,
    calibrate_table,
    emit,
    run_fig3,
    run_fig4,
    run_fig5,
    run_simulate,
    run_table1,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_FIT = 3
EXIT_IO = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qmemsim",
        description="Deterministic quantum-memory simulator and estimation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_scenario_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", metavar="PATH", help="JSON scenario config")
        p.add_argument("--seed", type=int, metavar="U64", help="override the RNG seed")
        p.add_argument(
            "--pulses", type=int, metavar="M", help="override pulses per setting"
        )
        p.add_argument("--out", metavar="DIR", help="override the output directory")
        p.add_argument(
            "--expected-counts",
            action="store_true",
            help="infinite-statistics mode: use exact expected counts",
        )
        p.add_argument(
            "--format",
            choices=("csv", "json"),
            help="emit only this format (default: both)",
        )

    rep = sub.add_parser("reproduce", help="run a packaged scenario")
    rep.add_argument("target", choices=("fig3", "fig4", "fig5", "table1"))
    add_scenario_flags(rep)

    sim = sub.add_parser("simulate", help="run the configured channel/time grid")
    add_scenario_flags(sim)

    fit = sub.add_parser("fit", help="fit a decay dataset file")
    fit.add_argument("dataset", metavar="PATH", help="CSV (t_ms,value[,sigma]) or JSON")
    fit.add_argument(
        "--model",
        choices=("exponential", "sigma-gamma"),
        default="exponential",
        help="decay model to fit",
    )
    fit.add_argument("--config", metavar="PATH", help="scenario config for fixed parameters")
    fit.add_argument("--channel", default="S2", help="channel for sigma-gamma fixed parameters")
    fit.add_argument("--out", metavar="DIR", help="also write the report as fit.json here")

    cal = sub.add_parser("calibrate", help="compute static coherence factors")
    cal.add_argument(
        "--targets",
        metavar="PATH",
        help="JSON mapping channel id to target fidelity (default: built-in benchmarks)",
    )
    cal.add_argument("--config", metavar="PATH", help="JSON scenario config")
    cal.add_argument("--out", metavar="DIR", help="also write calibration.json here")
    return parser


def _scenario_from_args(args: argparse.Namespace) -> ScenarioConfig:
    cfg = load_config(args.config) if args.config else ScenarioConfig()
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "pulses", None) is not None:
        overrides["pulses_per_setting"] = args.pulses
    if getattr(args, "out", None) is not None:
        overrides["output_dir"] = args.out
    if overrides:
        try:
            cfg = dataclasses.replace(cfg, **overrides)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    return cfg


def _load_dataset(path: str) -> DecayDataset:
    try:
        if path.endswith(".json"):
            with open(path, "r", encoding="utf-8") as fh:
                data = json.load(fh)
            if not isinstance(data, dict) or "times" not in data or "values" not in data:
                raise ConfigError(f"{path}: expected an object with times and values")
            sigmas = data.get("sigmas")
            return DecayDataset(
                times=np.asarray(data["times"], dtype=float),
                values=np.asarray(data["values"], dtype=float),
                sigmas=None if sigmas is None else np.asarray(sigmas, dtype=float),
            )
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise ConfigError(f"{path}: empty dataset file")
            ncol = len(header)
            if ncol not in (2, 3):
                raise ConfigError(f"{path}: expected 2 or 3 columns, got {ncol}")
            rows = [[float(cell) for cell in row] for row in reader if row]
    except OSError as exc:
        raise IOError(f"cannot read dataset {path}: {exc}") from None
    except (ValueError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    arr = np.asarray(rows, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != ncol:
        raise ConfigError(f"{path}: ragged rows in dataset")
    try:
        return DecayDataset(
            times=arr[:, 0],
            values=arr[:, 1],
            sigmas=arr[:, 2] if ncol == 3 else None,
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _write_json(payload: dict, out_dir: str, filename: str) -> str:
    try:
        os.makedirs(out_dir, exist_ok=True)
        path = os.path.join(out_dir, filename)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True, indent=2, allow_nan=False)
            fh.write("\n")
    except OSError as exc:
        raise IOError(f"cannot write {filename} under {out_dir}: {exc}") from None
    return path


def _emit_and_report(artifact: RunArtifact, cfg: ScenarioConfig, args) -> int:
    formats = ("csv", "json") if args.format is None else (args.format,)
    for path in emit(artifact, cfg.output_dir, formats):
        print(path)
    fit_info = artifact.meta.get("fit")
    if isinstance(fit_info, dict) and "error" in fit_info:
        print(f"fit failed: {fit_info['error']}", file=sys.stderr)
        return EXIT_FIT
    return EXIT_OK


def _run(args: argparse.Namespace) -> int:
    if args.command == "reproduce":
        cfg = _scenario_from_args(args)
        runner = {
            "fig3": lambda: run_fig3(cfg),
            "fig4": lambda: run_fig4(cfg, args.expected_counts),
            "fig5": lambda: run_fig5(cfg, args.expected_counts),
            "table1": lambda: run_table1(cfg, args.expected_counts),
        }[args.target]
        return _emit_and_report(runner(), cfg, args)

    if args.command == "simulate":
        cfg = _scenario_from_args(args)
        return _emit_and_report(run_simulate(cfg, args.expected_counts), cfg, args)

    if args.command == "fit":
        dataset = _load_dataset(args.dataset)
        if args.model == "exponential":
            report = fit_exponential(dataset)
        else:
            cfg = load_config(args.config) if args.config else ScenarioConfig()
            try:
                channel = cfg.channel(args.channel)
            except KeyError as exc:
                raise ConfigError(str(exc)) from None
            report = fit_sigma_gamma(
                dataset,
                r0=retrieval_efficiency(channel.theta, 0.0, cfg.memory),
                tau=cfg.memory.tau,
                gamma0=cfg.memory.channel_static_gamma(channel),
                n_bar=cfg.detection.n_bar,
                eta=effective_detection_efficiency(cfg.detection),
                background=cfg.detection.background_n,
            )
        payload = {
            "model": args.model,
            "params": report.params,
            "uncertainties": report.uncertainties,
            "residual_norm": report.residual_norm,
            "iterations": report.iterations,
            "converged": report.converged,
            "at_bound": report.at_bound,
        }
        print(json.dumps(payload, sort_keys=True, indent=2))
        if args.out:
            _write_json(payload, args.out, "fit.json")
        return EXIT_OK

    if args.command == "calibrate":
        cfg = load_config(args.config) if args.config else ScenarioConfig()
        targets = None
        if args.targets:
            try:
                with open(args.targets, "r", encoding="utf-8") as fh:
                    raw = json.load(fh)
            except OSError as exc:
                raise IOError(f"cannot read targets {args.targets}: {exc}") from None
            except json.JSONDecodeError as exc:
                raise ConfigError(f"invalid JSON in {args.targets}: {exc}") from None
            if not isinstance(raw, dict) or not raw:
                raise ConfigError(f"{args.targets}: expected a non-empty channel->fidelity object")
            targets = {}
            for key, value in raw.items():
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    raise ConfigError(f"{args.targets}: {key}: expected a number")
                if not 0.0 < value <= 1.0:
                    raise ConfigError(f"{args.targets}: {key}: fidelity must be in (0, 1]")
                targets[key] = float(value)
        fragment = calibrate_table(cfg, targets)
        print(json.dumps(fragment, sort_keys=True, indent=2))
        if args.out:
            _write_json(fragment, args.out, "calibration.json")
        return EXIT_OK

    raise ConfigError(f"unknown command {args.command!r}")


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FitError as exc:
        print(f"fit error: {exc}", file=sys.stderr)
        return EXIT_FIT
    except (IOError, OSError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
