"""Monte-Carlo experiment orchestration and file outputs.

Runs are independent (seeded by (scenario seed, run index)) and may be
distributed over a process pool; the reduce is ordered by run index, so
results do not depend on the worker count.  Everything written to disk is
byte-deterministic except ``timing.json``, which records wall-clock times.
"""

from __future__ import annotations

import csv
import json
import multiprocessing
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ggiwtrack import metrics as metrics_mod
from ggiwtrack import simulate
from ggiwtrack.errors import CapacityError, DomainError
from ggiwtrack.metrics import MetricsRecord, rmse_curves, score_run, time_aggregates
from ggiwtrack.simulate import ScenarioConfig
from ggiwtrack.tracker import TrackerConfig, track_run


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: ScenarioConfig
    tracker: TrackerConfig
    mc_runs: int = 1
    output_dir: str = "out"
    workers: int = 1

    def __post_init__(self):
        if self.mc_runs < 1:
            raise DomainError("mc_runs must be at least 1")
        if self.workers < 1:
            raise DomainError("workers must be at least 1")
        if not isinstance(self.scenario, ScenarioConfig):
            object.__setattr__(self, "scenario", ScenarioConfig(**self.scenario))
        if not isinstance(self.tracker, TrackerConfig):
            object.__setattr__(self, "tracker", TrackerConfig(**self.tracker))
        # surface invalid tunables as configuration errors, not run failures
        self.tracker.motion_model()
        self.tracker.vb_config()

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        raw = json.loads(text)
        raw["scenario"] = ScenarioConfig.from_json(json.dumps(raw["scenario"]))
        raw["tracker"] = TrackerConfig(**raw["tracker"])
        return cls(**raw)


@dataclass
class RunArtifact:
    """In-memory results plus the paths of everything written."""

    config: ExperimentConfig
    record: MetricsRecord | None
    estimate_rows: list
    failures: dict
    summary: dict
    output_dir: Path
    wall_time: float


def _ellipse_params(extent: np.ndarray) -> tuple[float, float, float]:
    """(semi-major, semi-minor, angle) of the 1-sigma extent ellipse."""
    w, q = np.linalg.eigh(extent)
    w = np.clip(w, 0.0, None)
    major = float(np.sqrt(w[1]))
    minor = float(np.sqrt(w[0]))
    angle = float(np.arctan2(q[1, 1], q[0, 1]))
    return major, minor, angle


_P_COLS = [(i, j) for i in range(4) for j in range(i, 4)]

ESTIMATE_HEADER = (
    ["run", "step", "target", "mx", "my", "mvx", "mvy"]
    + [f"p{i}{j}" for i, j in _P_COLS]
    + ["v", "vxx", "vxy", "vyy", "alpha", "beta", "ell_major", "ell_minor", "ell_angle"]
)


def _estimate_rows(run: int, estimates) -> list:
    rows = []
    for step, states in enumerate(estimates):
        for tgt, st in enumerate(states):
            major, minor, angle = _ellipse_params(st.extent_mean())
            rows.append(
                [run, step, tgt] + [float(x) for x in st.m]
                + [float(st.P[i, j]) for i, j in _P_COLS]
                + [float(st.v), float(st.V[0, 0]), float(st.V[0, 1]), float(st.V[1, 1]),
                   float(st.alpha), float(st.beta), major, minor, angle])
    return rows


def run_single(config: ExperimentConfig, run: int):
    """One MC run; returns (run, MetricsRecord, estimate rows, error message)."""
    try:
        estimates, truth, _ = track_run(config.scenario, config.tracker, run)
    except (DomainError, CapacityError) as exc:
        return run, None, [], f"{type(exc).__name__}: {exc}"
    h = config.tracker.motion_model().H
    record = score_run(truth, estimates, h)
    return run, record, _estimate_rows(run, estimates), None


def _run_star(args):
    return run_single(*args)


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _metric_rows(record: MetricsRecord, run_indices):
    rows = []
    for r_pos, run in enumerate(run_indices):
        runs_g = record.gwd[r_pos]
        runs_p = record.pos_err_sq[r_pos]
        runs_e = record.ext_err[r_pos]
        for step in range(runs_g.shape[0]):
            for tgt in range(runs_g.shape[1]):
                rows.append([run, step, tgt, float(runs_g[step, tgt]),
                             float(np.sqrt(runs_p[step, tgt])), float(runs_e[step, tgt])])
    return rows


def summarize(config: ExperimentConfig, record: MetricsRecord | None,
              failures: dict) -> dict:
    summary = {
        "scheme": config.tracker.scheme,
        "lambda_c": config.scenario.lambda_c,
        "lambda_t": config.scenario.lambda_t,
        "mc_runs": config.mc_runs,
        "seed": config.scenario.seed,
        "completed_runs": 0 if record is None else int(record.gwd.shape[0]),
        "failed_runs": failures,
        "targets": [],
    }
    if record is not None:
        rmse_pos, rmse_ext = rmse_curves(record)
        mean_gwd_curve = record.gwd.mean(axis=0)
        for tgt in range(record.gwd.shape[2]):
            gwd_mean, gwd_var = time_aggregates(mean_gwd_curve[:, tgt])
            pos_mean, pos_var = time_aggregates(rmse_pos[:, tgt])
            ext_mean, ext_var = time_aggregates(rmse_ext[:, tgt])
            summary["targets"].append({
                "target": tgt,
                "gwd_time_mean": gwd_mean,
                "gwd_time_var": gwd_var,
                "rmse_pos_time_mean": pos_mean,
                "rmse_pos_time_var": pos_var,
                "rmse_ext_time_mean": ext_mean,
                "rmse_ext_time_var": ext_var,
            })
    return summary


def run_experiment(config: ExperimentConfig, write: bool = True) -> RunArtifact:
    t0 = time.perf_counter()
    jobs = [(config, run) for run in range(config.mc_runs)]
    if config.workers == 1:
        results = [run_single(config, run) for run in range(config.mc_runs)]
    else:
        # spawn: forking after BLAS/OpenMP threads have started can deadlock
        ctx = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(max_workers=config.workers, mp_context=ctx) as pool:
            results = list(pool.map(_run_star, jobs))
    results.sort(key=lambda item: item[0])

    records, estimate_rows, failures, run_indices = [], [], {}, []
    for run, record, rows, error in results:
        if error is not None:
            failures[str(run)] = error
            continue
        records.append(record)
        estimate_rows.extend(rows)
        run_indices.append(run)
    stacked = MetricsRecord.stack(records) if records else None
    summary = summarize(config, stacked, failures)
    wall = time.perf_counter() - t0

    artifact = RunArtifact(config=config, record=stacked, estimate_rows=estimate_rows,
                           failures=failures, summary=summary,
                           output_dir=Path(config.output_dir), wall_time=wall)
    if write:
        write_artifact(artifact, run_indices)
    return artifact


def write_artifact(artifact: RunArtifact, run_indices=None):
    out = artifact.output_dir
    out.mkdir(parents=True, exist_ok=True)
    config = artifact.config
    (out / "experiment.json").write_text(config.to_json() + "\n")

    truth = simulate.generate_truth(config.scenario)
    truth_rows = []
    for tgt, track in enumerate(truth):
        for step in range(config.scenario.duration_steps):
            c, v, e = track.centers[step], track.velocities[step], track.extents[step]
            truth_rows.append([step, tgt, float(c[0]), float(c[1]), float(v[0]),
                               float(v[1]), float(e[0, 0]), float(e[0, 1]), float(e[1, 1])])
    _write_csv(out / "truth.csv",
               ["step", "target", "x", "y", "vx", "vy", "Xxx", "Xxy", "Xyy"], truth_rows)

    _write_csv(out / "estimates.csv", ESTIMATE_HEADER, artifact.estimate_rows)

    if artifact.record is not None:
        if run_indices is None:
            run_indices = list(range(artifact.record.gwd.shape[0]))
        _write_csv(out / "metrics.csv",
                   ["run", "step", "target", "gwd", "pos_err", "ext_err"],
                   _metric_rows(artifact.record, run_indices))
        rmse_pos, rmse_ext = metrics_mod.rmse_curves(artifact.record)
        rmse_rows = []
        for step in range(rmse_pos.shape[0]):
            for tgt in range(rmse_pos.shape[1]):
                rmse_rows.append([step, tgt, float(rmse_pos[step, tgt]),
                                  float(rmse_ext[step, tgt])])
        _write_csv(out / "rmse.csv", ["step", "target", "rmse_pos", "rmse_ext"], rmse_rows)

    (out / "summary.json").write_text(
        json.dumps(artifact.summary, indent=2, sort_keys=True) + "\n")
    (out / "timing.json").write_text(
        json.dumps({"wall_time_s": artifact.wall_time}, indent=2) + "\n")


def summary_table_rows(artifacts: list[RunArtifact]) -> list:
    """Rows for the aggregate table (one row per artifact and target)."""
    rows = []
    for artifact in artifacts:
        for entry in artifact.summary["targets"]:
            rows.append([
                artifact.summary["scheme"], artifact.summary["lambda_c"],
                artifact.summary["lambda_t"], entry["target"],
                entry["gwd_time_mean"], entry["gwd_time_var"],
                entry["rmse_pos_time_mean"], entry["rmse_pos_time_var"],
                entry["rmse_ext_time_mean"], entry["rmse_ext_time_var"],
            ])
    return rows


SUMMARY_TABLE_HEADER = ["scheme", "lambda_c", "lambda_t", "target",
                        "gwd_tmean", "gwd_tcov", "rmse_pos_tmean", "rmse_pos_tcov",
                        "rmse_ext_tmean", "rmse_ext_tcov"]


def write_summary_table(path, artifacts: list[RunArtifact]):
    _write_csv(Path(path), SUMMARY_TABLE_HEADER, summary_table_rows(artifacts))
