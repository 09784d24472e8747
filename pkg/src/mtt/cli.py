"""Command-line front end: `mtt <simulate|track|eval|sweep>`.

Every run writes its results (CSV metrics, JSON particle log) plus a
manifest that pins the config snapshot, seed, and output paths, so any
run can be reproduced from its manifest alone.  Identical config and
seed give byte-identical metrics CSV output.
"""

from __future__ import annotations

import argparse
import datetime
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig, dump_config, load_config, parse_config_text
from .sim import StepRecord, TrackingLog, evaluate_metrics, generate_truth, run_experiment

log = logging.getLogger("mtt")

_LOG_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}


def _setup_logging() -> None:
    level = os.environ.get("MTT_LOG", "warn").lower()
    if level not in _LOG_LEVELS:
        level = "warn"
    # rebuild the handler so it always points at the current stderr
    for handler in list(log.handlers):
        log.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("mtt: %(levelname)s: %(message)s"))
    log.addHandler(handler)
    log.setLevel(_LOG_LEVELS[level])


def _fmt9(value: float) -> str:
    """Floating-point CSV cell with 9 significant digits."""
    return "%.9g" % value


def write_csv(tracking_log: TrackingLog, path: Path, n_targets: int | None = None) -> None:
    """Per-step metrics CSV: step, truth positions, cardinality, errors.

    Header row always present; floats carry 9 significant digits; lines
    end with LF.
    """
    if n_targets is None:
        n_targets = len(tracking_log.records[0].true_states) if tracking_log.records else 0
    with_ospa = bool(tracking_log.records) and tracking_log.records[0].ospa is not None
    header = ["step"]
    for i in range(1, n_targets + 1):
        header += [f"true_x_{i}", f"true_y_{i}"]
    header += ["cardinality_est", "rmse", "card_err"]
    if with_ospa:
        header.append("ospa")
    lines = [",".join(header)]
    for rec in tracking_log.records:
        row = [str(rec.step)]
        for i in range(n_targets):
            row += [_fmt9(rec.true_states[i][0]), _fmt9(rec.true_states[i][2])]
        row += [_fmt9(rec.cardinality), _fmt9(rec.rmse), _fmt9(rec.card_err)]
        if with_ospa:
            row.append(_fmt9(rec.ospa))
        lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_truth_csv(truth: np.ndarray, path: Path) -> None:
    n_steps, n_targets = truth.shape[0], truth.shape[1]
    header = ["step"]
    for i in range(1, n_targets + 1):
        header += [f"true_x_{i}", f"true_y_{i}"]
    lines = [",".join(header)]
    for k in range(n_steps):
        row = [str(k)]
        for i in range(n_targets):
            row += [_fmt9(truth[k, i, 0]), _fmt9(truth[k, i, 2])]
        lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_particles_json(
    tracking_log: TrackingLog,
    config: ExperimentConfig,
    filter_choice: str,
    sensor_choice: str,
    seed: int,
    path: Path,
) -> None:
    """Full per-step particle log (means, covariances, weights) as JSON."""
    steps = []
    for rec in tracking_log.records:
        steps.append(
            {
                "step": rec.step,
                "truth": np.asarray(rec.true_states).tolist(),
                "measurement": rec.measurement,
                "particles": [
                    {
                        "weight": w,
                        "mean": np.asarray(m).tolist(),
                        "cov": np.asarray(c).tolist(),
                    }
                    for m, c, w in zip(rec.means, rec.covs, rec.weights)
                ],
                "cardinality": rec.cardinality,
                "rmse": rec.rmse,
                "card_err": rec.card_err,
                "ospa": rec.ospa,
            }
        )
    payload = {
        "schema": "mtt-particle-log-v1",
        "config": dump_config(config),
        "filter": filter_choice,
        "sensor": sensor_choice,
        "seed": seed,
        "steps": steps,
    }
    path.write_text(
        json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n",
        encoding="utf-8",
    )


def read_particles_json(path: Path) -> tuple[np.ndarray, TrackingLog, ExperimentConfig]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("schema") != "mtt-particle-log-v1":
        raise ConfigError(f"{path} is not an mtt particle log")
    config = parse_config_text(payload["config"])
    records = []
    truth_steps = []
    for entry in payload["steps"]:
        truth = np.asarray(entry["truth"], dtype=float)
        truth_steps.append(truth)
        records.append(
            StepRecord(
                step=entry["step"],
                true_states=truth,
                measurement=entry["measurement"],
                means=[np.asarray(p["mean"], dtype=float) for p in entry["particles"]],
                covs=[np.asarray(p["cov"], dtype=float) for p in entry["particles"]],
                weights=[float(p["weight"]) for p in entry["particles"]],
                cardinality=float(entry["cardinality"]),
            )
        )
    truth_arr = np.asarray(truth_steps, dtype=float)
    return truth_arr, TrackingLog(records), config


def write_manifest(
    out_dir: Path,
    command: str,
    config: ExperimentConfig,
    seed: int,
    outputs: list[Path],
    extra: dict | None = None,
) -> Path:
    manifest = {
        "tool": "mtt",
        "version": __version__,
        "command": command,
        "seed": seed,
        "config": dump_config(config),
        "created_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "outputs": [str(p) for p in outputs],
    }
    if extra:
        manifest.update(extra)
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    return path


def _resolve_seed(args, config: ExperimentConfig) -> int:
    return args.seed if args.seed is not None else config.scenario.seed


def _cmd_simulate(args) -> int:
    config = load_config(args.config)
    seed = _resolve_seed(args, config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    truth = generate_truth(config.scenario, rng)
    truth_path = out_dir / "truth.csv"
    write_truth_csv(truth, truth_path)
    write_manifest(out_dir, "simulate", config, seed, [truth_path])
    log.info("wrote %s", truth_path)
    return 0


def _run_tracked(config: ExperimentConfig, filter_choice: str, sensor_choice: str,
                 seed: int, out_dir: Path) -> TrackingLog:
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    tracking_log = run_experiment(
        config.scenario, filter_choice, sensor_choice, rng, config.setup
    )
    metrics_path = out_dir / "metrics.csv"
    particles_path = out_dir / "particles.json"
    write_csv(tracking_log, metrics_path, config.scenario.n_targets)
    write_particles_json(
        tracking_log, config, filter_choice, sensor_choice, seed, particles_path
    )
    write_manifest(
        out_dir,
        "track",
        config,
        seed,
        [metrics_path, particles_path],
        extra={"filter": filter_choice, "sensor": sensor_choice},
    )
    return tracking_log


def _cmd_track(args) -> int:
    config = load_config(args.config)
    seed = _resolve_seed(args, config)
    _run_tracked(config, args.filter, args.sensor, seed, Path(args.out))
    log.info("tracked %d steps into %s", config.scenario.n_steps, args.out)
    return 0


def _cmd_eval(args) -> int:
    truth, tracking_log, config = read_particles_json(Path(args.log))
    out_dir = Path(args.out) if args.out else Path(args.log).parent
    out_dir.mkdir(parents=True, exist_ok=True)
    evaluate_metrics(
        truth,
        tracking_log,
        extraction_threshold=config.setup.extraction_threshold,
        distance_cap=config.setup.distance_cap,
        with_ospa=config.setup.with_ospa,
    )
    metrics_path = out_dir / "eval_metrics.csv"
    write_csv(tracking_log, metrics_path, config.scenario.n_targets)
    write_manifest(out_dir, "eval", config, config.scenario.seed, [metrics_path])
    log.info("wrote %s", metrics_path)
    return 0


def _parse_seeds(expr: str) -> list[int]:
    expr = expr.strip()
    if ".." in expr:
        lo, hi = expr.split("..", 1)
        try:
            return list(range(int(lo), int(hi) + 1))
        except ValueError as exc:
            raise ConfigError(f"bad seed range {expr!r}") from exc
    try:
        return [int(s) for s in expr.split(",") if s.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad seed list {expr!r}") from exc


def _cmd_sweep(args) -> int:
    config = load_config(args.config)
    seeds = _parse_seeds(args.seeds)
    if not seeds:
        raise ConfigError("sweep needs at least one seed")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    outputs = []
    for seed in seeds:
        run_dir = out_dir / f"seed_{seed}"
        tracking_log = _run_tracked(config, args.filter, args.sensor, seed, run_dir)
        rmse = float(np.mean([r.rmse for r in tracking_log.records]))
        card = float(np.mean([r.card_err for r in tracking_log.records]))
        rows.append((seed, rmse, card))
        outputs.append(run_dir / "metrics.csv")
        log.info("seed %d: mean rmse %.4g, mean card err %.4g", seed, rmse, card)
    agg_path = out_dir / "aggregate.csv"
    lines = ["seed,mean_rmse,mean_card_err"]
    for seed, rmse, card in rows:
        lines.append(f"{seed},{_fmt9(rmse)},{_fmt9(card)}")
    agg_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    write_manifest(out_dir, "sweep", config, seeds[0], outputs + [agg_path],
                   extra={"seeds": seeds, "filter": args.filter, "sensor": args.sensor})
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mtt", description="Multi-target tracking experiments"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="flat key = value config file")
        p.add_argument("--seed", type=int, default=None, help="override scenario.seed")
        p.add_argument("--out", default="mtt_out", help="output directory")

    p_sim = sub.add_parser("simulate", help="generate ground truth only")
    common(p_sim)
    p_sim.set_defaults(func=_cmd_simulate)

    p_track = sub.add_parser("track", help="run a full tracking experiment")
    common(p_track)
    p_track.add_argument("--filter", choices=["gpf", "pf", "kf"], default="gpf")
    p_track.add_argument("--sensor", choices=["mean", "grid"], default="grid")
    p_track.set_defaults(func=_cmd_track)

    p_eval = sub.add_parser("eval", help="recompute metrics from a particle log")
    p_eval.add_argument("--log", required=True, help="particles.json from a track run")
    p_eval.add_argument("--out", default=None, help="output directory (default: log dir)")
    p_eval.set_defaults(func=_cmd_eval)

    p_sweep = sub.add_parser("sweep", help="run a seed sweep")
    common(p_sweep)
    p_sweep.add_argument("--seeds", required=True, help="e.g. 1..20 or 3,5,9")
    p_sweep.add_argument("--filter", choices=["gpf", "pf", "kf"], default="gpf")
    p_sweep.add_argument("--sensor", choices=["mean", "grid"], default="grid")
    p_sweep.set_defaults(func=_cmd_sweep)
    return parser


def run_command(argv: list[str] | None = None) -> int:
    """Entry point returning an exit code: 0 ok, 1 config error, 2 runtime."""
    _setup_logging()
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("%s", exc)
        print(f"mtt: config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        log.debug("runtime failure", exc_info=True)
        print(f"mtt: error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_command())
