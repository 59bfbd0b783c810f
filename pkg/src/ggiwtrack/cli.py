"""Command-line harness: simulate, track, bench, sweep, plot.

Exit codes: 0 success, 2 configuration error, 3 tracker runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from ggiwtrack import simulate
from ggiwtrack.errors import CapacityError, DomainError
from ggiwtrack.experiment import (
    ExperimentConfig,
    run_experiment,
    write_summary_table,
)
from ggiwtrack.plotting import plot_overlay
from ggiwtrack.simulate import ScenarioConfig, crossing_scenario
from ggiwtrack.tracker import TrackerConfig
from ggiwtrack.updates import SCHEMES

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_TRACKER = 3

# Default event cap for CLI runs; the library default (10**6) is impractical
# for the dense crossing scenario because fine DBSCAN thresholds shatter the
# gated set into singletons.
CLI_EVENT_CAP = 4096

TABLE3_COMBOS = ((25.0, 10.0), (25.0, 20.0), (5.0, 10.0), (5.0, 20.0))
TABLE3_SCHEMES = ("cluster_pruned", "marginal")


def _add_scenario_args(parser):
    parser.add_argument("--scenario", type=Path, default=None,
                        help="scenario JSON file (overrides the preset)")
    parser.add_argument("--preset", default="crossing", choices=["crossing"],
                        help="built-in scenario preset")
    parser.add_argument("--lambda-c", type=float, default=None)
    parser.add_argument("--lambda-t", type=float, default=None)
    parser.add_argument("--steps", type=int, default=None)


def _add_tracker_args(parser):
    parser.add_argument("--tracker", type=Path, default=None,
                        help="tracker JSON file (overrides the flags below)")
    parser.add_argument("--scheme", default="cluster_pruned", choices=list(SCHEMES))
    parser.add_argument("--n-vb", type=int, default=10)
    parser.add_argument("--event-cap", type=int, default=CLI_EVENT_CAP)


def _build_scenario(args, seed) -> ScenarioConfig:
    if args.scenario is not None:
        scenario = ScenarioConfig.from_json(args.scenario.read_text())
    else:
        scenario = crossing_scenario()
    updates = {}
    if args.lambda_c is not None:
        updates["lambda_c"] = args.lambda_c
    if args.lambda_t is not None:
        updates["lambda_t"] = args.lambda_t
    if args.steps is not None:
        updates["duration_steps"] = args.steps
    if seed is not None:
        updates["seed"] = seed
    if updates:
        raw = json.loads(scenario.to_json())
        raw.update(updates)
        scenario = ScenarioConfig.from_json(json.dumps(raw))
    return scenario


def _build_tracker(args) -> TrackerConfig:
    if args.tracker is not None:
        return TrackerConfig.from_json(args.tracker.read_text())
    return TrackerConfig(scheme=args.scheme, n_vb=args.n_vb, event_cap=args.event_cap)


def _cmd_simulate(args) -> int:
    scenario = _build_scenario(args, args.seed)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    (out / "scenario.json").write_text(scenario.to_json() + "\n")
    truth = simulate.generate_truth(scenario)
    with open(out / "truth.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "target", "x", "y", "vx", "vy", "Xxx", "Xxy", "Xyy"])
        for tgt, track in enumerate(truth):
            for step in range(scenario.duration_steps):
                c, v, e = track.centers[step], track.velocities[step], track.extents[step]
                writer.writerow([step, tgt, c[0], c[1], v[0], v[1],
                                 e[0, 0], e[0, 1], e[1, 1]])
    for run in range(args.runs):
        frames = simulate.generate_run(scenario, run=run, truth=truth)
        with open(out / f"frames_run{run}.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "x", "y", "label"])
            writer.writerows(simulate.frames_to_rows(frames))
    print(f"wrote scenario, truth and {args.runs} frame file(s) to {out}")
    return EXIT_OK


def _run_and_report(config: ExperimentConfig) -> int:
    artifact = run_experiment(config)
    n_failed = len(artifact.failures)
    print(f"completed {artifact.summary['completed_runs']}/{config.mc_runs} runs "
          f"({n_failed} failed) in {artifact.wall_time:.1f} s -> {artifact.output_dir}")
    for entry in artifact.summary["targets"]:
        print(f"  target {entry['target']}: time-mean GWD {entry['gwd_time_mean']:.3f} m, "
              f"time-mean RMSE_pos {entry['rmse_pos_time_mean']:.3f} m")
    if artifact.record is None:
        print("error: every run failed", file=sys.stderr)
        return EXIT_TRACKER
    return EXIT_OK


def _cmd_track(args) -> int:
    scenario = _build_scenario(args, args.seed)
    config = ExperimentConfig(scenario=scenario, tracker=_build_tracker(args),
                              mc_runs=1, output_dir=args.output, workers=1)
    return _run_and_report(config)


def _cmd_bench(args) -> int:
    scenario = _build_scenario(args, args.seed)
    config = ExperimentConfig(scenario=scenario, tracker=_build_tracker(args),
                              mc_runs=args.mc_runs, output_dir=args.output,
                              workers=args.workers)
    return _run_and_report(config)


def _cmd_sweep(args) -> int:
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    if args.sweep_preset == "table3":
        combos = TABLE3_COMBOS
        schemes = TABLE3_SCHEMES
    else:
        combos = tuple((lc, lt) for lc in args.lambda_c_grid for lt in args.lambda_t_grid)
        schemes = tuple(args.schemes)
    artifacts = []
    code = EXIT_OK
    for scheme in schemes:
        for lambda_c, lambda_t in combos:
            scenario = _build_scenario(args, args.seed)
            raw = json.loads(scenario.to_json())
            raw.update({"lambda_c": lambda_c, "lambda_t": lambda_t})
            scenario = ScenarioConfig.from_json(json.dumps(raw))
            tracker = _build_tracker(args)
            tracker = TrackerConfig(**{**json.loads(tracker.to_json()), "scheme": scheme})
            sub = out / f"{scheme}_lc{lambda_c:g}_lt{lambda_t:g}"
            config = ExperimentConfig(scenario=scenario, tracker=tracker,
                                      mc_runs=args.mc_runs, output_dir=str(sub),
                                      workers=args.workers)
            print(f"sweep: scheme={scheme} lambda_c={lambda_c:g} lambda_t={lambda_t:g}")
            artifact = run_experiment(config)
            artifacts.append(artifact)
            for entry in artifact.summary["targets"]:
                print(f"  target {entry['target']}: time-mean GWD "
                      f"{entry['gwd_time_mean']:.3f} m")
            if artifact.record is None:
                print("error: every run failed", file=sys.stderr)
                code = EXIT_TRACKER
    write_summary_table(out / "sweep_summary.csv", artifacts)
    print(f"wrote {out / 'sweep_summary.csv'}")
    return code


def _cmd_plot(args) -> int:
    paths = plot_overlay(args.artifact, stride=args.stride)
    for path in paths:
        print(f"wrote {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ggiwtrack",
                                     description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="write ground truth and measurement frames")
    _add_scenario_args(p_sim)
    p_sim.add_argument("--seed", type=int, default=None)
    p_sim.add_argument("--runs", type=int, default=1)
    p_sim.add_argument("--output", required=True)
    p_sim.set_defaults(func=_cmd_simulate)

    p_track = sub.add_parser("track", help="track a single simulated run")
    _add_scenario_args(p_track)
    _add_tracker_args(p_track)
    p_track.add_argument("--seed", type=int, default=None)
    p_track.add_argument("--output", required=True)
    p_track.set_defaults(func=_cmd_track)

    p_bench = sub.add_parser("bench", help="Monte-Carlo benchmark of one configuration")
    _add_scenario_args(p_bench)
    _add_tracker_args(p_bench)
    p_bench.add_argument("--seed", type=int, required=True,
                         help="scenario seed (required for reproducibility)")
    p_bench.add_argument("--mc-runs", type=int, default=25)
    p_bench.add_argument("--workers", type=int, default=1)
    p_bench.add_argument("--output", required=True)
    p_bench.set_defaults(func=_cmd_bench)

    p_sweep = sub.add_parser("sweep", help="benchmark a grid of rate combinations")
    _add_scenario_args(p_sweep)
    _add_tracker_args(p_sweep)
    p_sweep.add_argument("--sweep-preset", default="table3", choices=["table3", "custom"])
    p_sweep.add_argument("--lambda-c-grid", type=float, nargs="+", default=[25.0])
    p_sweep.add_argument("--lambda-t-grid", type=float, nargs="+", default=[20.0])
    p_sweep.add_argument("--schemes", nargs="+", default=list(TABLE3_SCHEMES),
                         choices=list(SCHEMES))
    p_sweep.add_argument("--seed", type=int, default=0)
    p_sweep.add_argument("--mc-runs", type=int, default=10)
    p_sweep.add_argument("--workers", type=int, default=1)
    p_sweep.add_argument("--output", required=True)
    p_sweep.set_defaults(func=_cmd_sweep)

    p_plot = sub.add_parser("plot", help="render SVG overlays for an artifact")
    p_plot.add_argument("--artifact", required=True)
    p_plot.add_argument("--stride", type=int, default=3)
    p_plot.set_defaults(func=_cmd_plot)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DomainError, CapacityError, FileNotFoundError,
            json.JSONDecodeError, TypeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
