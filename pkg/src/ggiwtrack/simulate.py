"""Ground-truth generation and Poisson point-process measurement simulation.

Reproducibility contract: every frame is drawn from a counter-based Philox
substream keyed by (seed, run, step), so Monte-Carlo runs can be distributed
over any number of workers without changing the result.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from ggiwtrack.association import MeasurementFrame
from ggiwtrack.core import extent_from_shape
from ggiwtrack.errors import DomainError

SPREAD_MODELS = ("gaussian", "uniform")


@dataclass(frozen=True)
class TargetSpec:
    """Constant-velocity elliptical target description."""

    initial_position: tuple[float, float]
    velocity: tuple[float, float]
    axis_lengths: tuple[float, float]     # full axis lengths, m
    orientation: float                    # rad


@dataclass(frozen=True)
class ScenarioConfig:
    duration_steps: int = 60
    dt: float = 1.0
    targets: tuple[TargetSpec, ...] = ()
    lambda_t: float = 20.0                # per-target measurement Poisson mean
    lambda_c: float = 25.0                # clutter Poisson mean over the region
    region: tuple[float, float, float, float] = (-50.0, 650.0, -320.0, 320.0)
    detection_prob: float = 1.0
    seed: int = 0
    spread_model: str = "gaussian"        # target measurement spatial law
    spread_scale: float = 0.25            # scaling of the extent in the spread
    noise_diag: tuple[float, float] = (0.01, 0.01)   # sensor noise covariance diagonal

    def __post_init__(self):
        if self.duration_steps < 1:
            raise DomainError("duration_steps must be at least 1")
        if self.lambda_t < 0 or self.lambda_c < 0:
            raise DomainError("rates must be non-negative")
        x0, x1, y0, y1 = self.region
        if x1 <= x0 or y1 <= y0:
            raise DomainError("region must be a non-degenerate box")
        if not 0.0 <= self.detection_prob <= 1.0:
            raise DomainError("detection probability must lie in [0, 1]")
        if self.spread_model not in SPREAD_MODELS:
            raise DomainError(f"spread_model must be one of {SPREAD_MODELS}")
        object.__setattr__(self, "targets",
                           tuple(t if isinstance(t, TargetSpec) else TargetSpec(**t)
                                 for t in self.targets))

    @property
    def volume(self) -> float:
        x0, x1, y0, y1 = self.region
        return (x1 - x0) * (y1 - y0)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ScenarioConfig":
        raw = json.loads(text)
        raw["targets"] = tuple(TargetSpec(
            initial_position=tuple(t["initial_position"]),
            velocity=tuple(t["velocity"]),
            axis_lengths=tuple(t["axis_lengths"]),
            orientation=t["orientation"]) for t in raw.get("targets", ()))
        for key in ("region", "noise_diag"):
            if key in raw:
                raw[key] = tuple(raw[key])
        return cls(**raw)


def crossing_scenario(lambda_c: float = 25.0, lambda_t: float = 20.0,
                      seed: int = 0, duration_steps: int = 60) -> ScenarioConfig:
    """Two ellipses approaching, crossing mid-scene, then separating."""
    return ScenarioConfig(
        duration_steps=duration_steps,
        dt=1.0,
        targets=(
            TargetSpec(initial_position=(0.0, -300.0), velocity=(11.0, 7.7),
                       axis_lengths=(60.0, 30.0), orientation=-np.pi / 3),
            TargetSpec(initial_position=(0.0, 300.0), velocity=(11.0, -7.7),
                       axis_lengths=(40.0, 20.0), orientation=-np.pi / 4),
        ),
        lambda_t=lambda_t,
        lambda_c=lambda_c,
        region=(-50.0, 650.0, -320.0, 320.0),
        seed=seed,
    )


@dataclass(frozen=True)
class GroundTruthTrack:
    """Per-step center, velocity and (constant) extent of one target."""

    centers: np.ndarray      # (steps, 2)
    velocities: np.ndarray   # (steps, 2)
    extents: np.ndarray      # (steps, 2, 2)

    def state(self, step: int) -> np.ndarray:
        """Kinematic 4-vector (px, py, vx, vy) at one step."""
        return np.concatenate([self.centers[step], self.velocities[step]])


def generate_truth(config: ScenarioConfig) -> list[GroundTruthTrack]:
    steps = np.arange(config.duration_steps)[:, None] * config.dt
    tracks = []
    for spec in config.targets:
        pos0 = np.asarray(spec.initial_position, dtype=float)
        vel = np.asarray(spec.velocity, dtype=float)
        centers = pos0 + steps * vel
        velocities = np.tile(vel, (config.duration_steps, 1))
        extent = extent_from_shape(spec.axis_lengths, spec.orientation)
        extents = np.tile(extent, (config.duration_steps, 1, 1))
        tracks.append(GroundTruthTrack(centers=centers, velocities=velocities,
                                       extents=extents))
    return tracks


def frame_rng(seed: int, run: int, step: int) -> np.random.Generator:
    """Counter-based substream for one (run, step) pair."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, run, step])))


def _sample_on_target(rng, center, extent, config, count):
    if config.spread_model == "gaussian":
        cov = config.spread_scale * extent
        offsets = rng.multivariate_normal(np.zeros(2), cov, size=count,
                                          method="eigh")
    else:
        # Uniform over the extent ellipse: map the unit disc through the
        # matrix square root of the extent.
        w, q = np.linalg.eigh(extent)
        root = (q * np.sqrt(np.clip(w, 0.0, None))) @ q.T
        radii = np.sqrt(rng.uniform(size=count))
        angles = rng.uniform(0.0, 2.0 * np.pi, size=count)
        disc = np.column_stack([radii * np.cos(angles), radii * np.sin(angles)])
        offsets = disc @ root.T
    noise = rng.multivariate_normal(np.zeros(2), np.diag(config.noise_diag),
                                    size=count, method="eigh")
    return center + offsets + noise


def generate_frame(truth: list[GroundTruthTrack], step: int, config: ScenarioConfig,
                   rng: np.random.Generator) -> MeasurementFrame:
    """One scan: Poisson target returns plus uniform Poisson clutter, shuffled."""
    points = []
    labels = []
    for i, track in enumerate(truth):
        detected = rng.uniform() < config.detection_prob
        count = rng.poisson(config.lambda_t) if detected else 0
        if count:
            points.append(_sample_on_target(rng, track.centers[step],
                                            track.extents[step], config, count))
            labels.append(np.full(count, i + 1, dtype=int))
    n_clutter = rng.poisson(config.lambda_c)
    if n_clutter:
        x0, x1, y0, y1 = config.region
        clutter = np.column_stack([rng.uniform(x0, x1, size=n_clutter),
                                   rng.uniform(y0, y1, size=n_clutter)])
        points.append(clutter)
        labels.append(np.zeros(n_clutter, dtype=int))
    if not points:
        return MeasurementFrame(points=np.zeros((0, 2)), truth_labels=np.zeros(0, dtype=int))
    pts = np.vstack(points)
    labs = np.concatenate(labels)
    order = rng.permutation(len(pts))
    return MeasurementFrame(points=pts[order], truth_labels=labs[order])


def generate_run(config: ScenarioConfig, run: int = 0,
                 truth: list[GroundTruthTrack] | None = None) -> list[MeasurementFrame]:
    """All frames of one Monte-Carlo run."""
    if truth is None:
        truth = generate_truth(config)
    return [generate_frame(truth, k, config, frame_rng(config.seed, run, k))
            for k in range(config.duration_steps)]


def frames_to_rows(frames: list[MeasurementFrame]):
    """Flatten frames into (step, x, y, label) rows for CSV export."""
    rows = []
    for k, frame in enumerate(frames):
        labels = frame.truth_labels
        if labels is None:
            labels = np.full(len(frame), -1, dtype=int)
        for (x, y), lab in zip(frame.points, labels):
            rows.append((k, float(x), float(y), int(lab)))
    return rows
