"""Experiment drivers shared by the command line tool and the tests.

Every run function takes an ExperimentConfig, writes its outputs under
``out_dir``, and returns the results as plain data.  All randomness is
seeded: a reliability trial with index k uses the generator seeded by
(master seed, k), so any trial can be reproduced in isolation and the
CSV outputs are byte-identical across runs regardless of --jobs.
"""

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError
from .imgio import load_gray, save_gray, write_attribute_dump, write_pgm
from .loss import pose_loss
from .mesh import Mesh, ModelAnnotations, load_annotations, load_mesh
from .pose import (
    Pose,
    denormalize,
    from_vector,
    normalize,
    perturb,
    pose_to_camera,
)
from .render import (
    GrayImage,
    Lighting,
    composite_over_background,
    render_attributes,
    shade_phong,
)
from .simplex import SimplexConfig, minimize_with_restarts

PARAM_NAMES = ("mu_x", "mu_y", "delta_x", "delta_y", "psi_x", "psi_y", "focal")

# Reference scene for the bundled toy car fixture, in normalized pose
# coordinates, and its synthetic studio lighting.  The car spans most
# of the frame in a three-quarter view: the turned body keeps both the
# side and the front in frame, so every pose parameter moves visible
# silhouette and shading, and recovery from large starting deviations
# still sees overlapping silhouettes.
REFERENCE_POSE_NORM = (0.33, 0.62, 0.5, -0.08, 0.45, -0.08)
REFERENCE_FOCAL_NORM = 1.25
# Recovery counts as success below this normalized per-parameter error.
SUCCESS_THRESHOLD = 0.005
# A polished loss above this triggers rescue rounds from jittered
# starts.  The point-sampled rasterizer makes the loss a staircase at
# sub-pixel pose scales, so near-recovered poses stall anywhere up to
# about 3e-3; rescues resample that staircase and the lowest loss over
# all rounds wins.  Truly wrong basins sit decades higher.
ACCEPT_LOSS = 2e-3
RESCUE_ROUNDS = 10
# Normalized standard deviation of the rescue jitter.  A best-so-far
# loss below BASIN_LOSS means the pose is in the right basin but
# sub-pixel misaligned: rescues then resample around it at this sigma.
# Above it the pose is in a wrong basin, and rescues hunt around the
# original start, widening sigma each round up to RESCUE_SPREAD_CAP
# times this.  Observed losses are strongly bimodal (at most ~3e-3
# near the truth, 0.1 or more in wrong basins), so the gate is not
# delicate.
RESCUE_JITTER = 0.05
BASIN_LOSS = 0.02
RESCUE_SPREAD_CAP = 5


def default_lighting() -> Lighting:
    return Lighting.make(
        ambient=90.0, diffuse=140.0, direction=(0.35, 0.5, 0.75), offset=5.0
    )


def reference_pose(width: int, height: int, perspective: bool = False) -> Pose:
    vec = list(REFERENCE_POSE_NORM)
    if perspective:
        vec.append(REFERENCE_FOCAL_NORM)
    return denormalize(np.array(vec), width, height)


def default_simplex_config() -> SimplexConfig:
    """Coarse stage: basin hopping with large simplexes.

    The loose tolerance lets each leg converge inside its budget, which
    is what arms the restart loop; the restarts are what hop between
    the shallow local pockets of the rasterized loss.
    """
    return SimplexConfig(
        initial_step=0.06,
        convergence_tol=1e-3,
        abs_tol=1e-9,
        max_evals=500,
        max_restarts=6,
        restart_step=0.03,
    )


def polish_simplex_config() -> SimplexConfig:
    """Polish stage: descend the winning basin at pixel scale."""
    return SimplexConfig(
        initial_step=0.006,
        convergence_tol=1e-4,
        abs_tol=1e-10,
        max_evals=300,
        max_restarts=2,
        restart_step=0.003,
    )


def smooth_noise(width: int, height: int, seed: int, cells: int = 12) -> GrayImage:
    """Seeded smooth grayscale noise in roughly [30, 225]."""
    rng = np.random.default_rng(seed)

    def octave(n: int) -> np.ndarray:
        coarse = rng.standard_normal((n + 1, n + 1))
        gy = np.linspace(0.0, n, height)
        gx = np.linspace(0.0, n, width)
        y0 = np.minimum(gy.astype(np.int64), n - 1)
        x0 = np.minimum(gx.astype(np.int64), n - 1)
        fy = (gy - y0)[:, None]
        fx = (gx - x0)[None, :]
        c00 = coarse[np.ix_(y0, x0)]
        c01 = coarse[np.ix_(y0, x0 + 1)]
        c10 = coarse[np.ix_(y0 + 1, x0)]
        c11 = coarse[np.ix_(y0 + 1, x0 + 1)]
        return (
            (1 - fy) * ((1 - fx) * c00 + fx * c01)
            + fy * ((1 - fx) * c10 + fx * c11)
        )

    v = octave(cells) + 0.3 * octave(cells * 4)
    lo, hi = float(v.min()), float(v.max())
    span = hi - lo if hi > lo else 1.0
    return GrayImage(30.0 + (v - lo) / span * 195.0)


@dataclass
class ExperimentConfig:
    """Shared settings for the experiment drivers."""

    mesh_path: str | None = None
    annotations_path: str | None = None
    photo_path: str | None = None
    pose: Pose | None = None
    mode: str = "parallel"
    seed: int = 0
    out_dir: str = "."
    jobs: int = 1
    clip: bool = True
    min_pixels: int = 64
    width: int = 640
    height: int = 480
    lighting: Lighting = field(default_factory=default_lighting)
    background: str | None = None  # None, "noise", or an image path
    span: float = 0.20
    samples: int = 41
    bands: tuple[float, ...] = (1.0, 2.0, 4.0, 8.0, 16.0)
    trials_per_band: int = 10
    scenario: str = "artificial"
    simplex: SimplexConfig = field(default_factory=default_simplex_config)
    polish: SimplexConfig | None = field(default_factory=polish_simplex_config)
    accept_loss: float = ACCEPT_LOSS
    rescue_rounds: int = RESCUE_ROUNDS
    rescue_jitter: float = RESCUE_JITTER
    trace: bool = False

    def validate(self) -> None:
        if self.mode not in ("parallel", "perspective"):
            raise ConfigError(f"unknown mode '{self.mode}'")
        if self.scenario not in ("artificial", "composite", "real"):
            raise ConfigError(f"unknown scenario '{self.scenario}'")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1")
        if self.trials_per_band < 1:
            raise ConfigError("trials_per_band must be at least 1")
        if not self.bands:
            raise ConfigError("at least one perturbation band is required")
        if any(b <= 0 for b in self.bands):
            raise ConfigError("perturbation bands must be positive")
        if list(self.bands) != sorted(self.bands):
            raise ConfigError("perturbation bands must be ascending")
        if self.samples < 3 or self.samples % 2 == 0:
            raise ConfigError("samples must be an odd number >= 3")
        if not self.span > 0:
            raise ConfigError("span must be positive")
        if self.width < 1 or self.height < 1:
            raise ConfigError("image dimensions must be positive")
        if not self.accept_loss > 0:
            raise ConfigError("accept_loss must be positive")
        if self.rescue_rounds < 0:
            raise ConfigError("rescue_rounds must be nonnegative")
        if self.rescue_jitter < 0:
            raise ConfigError("rescue_jitter must be nonnegative")


def parse_config_file(path: str) -> dict[str, str]:
    """Line-oriented 'key = value' settings; '#' starts a comment."""
    values: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
    return values


def parse_pose_text(text: str) -> Pose:
    parts = text.split()
    if len(parts) not in (6, 7):
        raise ConfigError(
            f"a pose needs 6 or 7 numbers, got {len(parts)}"
        )
    try:
        values = [float(p) for p in parts]
    except ValueError as exc:
        raise ConfigError(f"bad number in pose '{text}'") from exc
    return Pose(
        mu=np.array(values[0:2]),
        delta=np.array(values[2:4]),
        psi_xy=np.array(values[4:6]),
        focal=values[6] if len(values) == 7 else None,
    )


def format_pose(pose: Pose) -> str:
    parts = [
        pose.mu[0], pose.mu[1], pose.delta[0], pose.delta[1],
        pose.psi_xy[0], pose.psi_xy[1],
    ]
    if pose.focal is not None:
        parts.append(pose.focal)
    return " ".join(f"{v:.17g}" for v in parts)


def _load_scene(cfg: ExperimentConfig) -> tuple[Mesh, ModelAnnotations]:
    if not cfg.mesh_path or not cfg.annotations_path:
        raise ConfigError("mesh and annotation paths are required")
    return load_mesh(cfg.mesh_path), load_annotations(cfg.annotations_path)


def synthesize_photo(
    cfg: ExperimentConfig, mesh: Mesh, annotations: ModelAnnotations
) -> GrayImage:
    """Render the configured pose into a photo, honoring background."""
    camera = pose_to_camera(
        cfg.pose, annotations, cfg.mode, cfg.width, cfg.height
    )
    attrs = render_attributes(mesh, camera)
    shaded = shade_phong(attrs, cfg.lighting)
    if cfg.background is None:
        return shaded
    if cfg.background == "noise":
        back = smooth_noise(cfg.width, cfg.height, cfg.seed)
    else:
        back = load_gray(cfg.background)
    return composite_over_background(shaded, attrs.coverage, back)


def run_render(cfg: ExperimentConfig) -> dict[str, str]:
    """Write the synthetic photo (8-bit and exact) plus attribute planes."""
    cfg.validate()
    if cfg.pose is None:
        raise ConfigError("render needs a pose")
    mesh, annotations = _load_scene(cfg)
    camera = pose_to_camera(
        cfg.pose, annotations, cfg.mode, cfg.width, cfg.height
    )
    attrs = render_attributes(mesh, camera)
    shaded = shade_phong(attrs, cfg.lighting)
    if cfg.background == "noise":
        shaded = composite_over_background(
            shaded, attrs.coverage, smooth_noise(cfg.width, cfg.height, cfg.seed)
        )
    elif cfg.background is not None:
        shaded = composite_over_background(
            shaded, attrs.coverage, load_gray(cfg.background)
        )
    os.makedirs(cfg.out_dir, exist_ok=True)
    paths = {
        "pgm": os.path.join(cfg.out_dir, "photo.pgm"),
        "exact": os.path.join(cfg.out_dir, "photo.p2f"),
        "attributes": os.path.join(cfg.out_dir, "attributes.txt"),
    }
    write_pgm(paths["pgm"], shaded)
    save_gray(paths["exact"], shaded)
    write_attribute_dump(paths["attributes"], attrs)
    return paths


def run_loss(cfg: ExperimentConfig) -> float:
    cfg.validate()
    if cfg.pose is None:
        raise ConfigError("loss needs a pose")
    if not cfg.photo_path:
        raise ConfigError("loss needs a photo")
    mesh, annotations = _load_scene(cfg)
    photo = load_gray(cfg.photo_path)
    return pose_loss(
        photo,
        mesh,
        annotations,
        cfg.pose,
        mode=cfg.mode,
        clip=cfg.clip,
        min_pixels=cfg.min_pixels,
    )


def make_objective(photo, mesh, annotations, mode, clip, min_pixels):
    """Loss as a function of the normalized pose vector, with clamping."""
    width, height = photo.width, photo.height

    def objective(vec: np.ndarray) -> float:
        pose = from_vector(vec, width, height, clamp=True)
        return pose_loss(
            photo, mesh, annotations, pose,
            mode=mode, clip=clip, min_pixels=min_pixels,
        )

    return objective


@dataclass
class StageRecord:
    """One optimizer stage inside a ladder search."""

    kind: str  # "coarse" or "polish"
    evaluations: int
    restarts: int
    converged: bool
    loss: float


@dataclass
class SearchOutcome:
    vec: np.ndarray
    loss: float
    evaluations: int
    restarts: int
    converged: bool
    stages: list
    legs: list  # (evaluations, converged) per simplex leg, all stages
    trace: list


def ladder_search(
    objective,
    start_vec: np.ndarray,
    coarse: SimplexConfig,
    polish: SimplexConfig | None,
    accept_loss: float,
    rescue_rounds: int,
    rescue_jitter: float,
    rng: np.random.Generator,
    trace: bool = False,
) -> SearchOutcome:
    """Coarse basin search, pixel-scale polish, then jittered rescues.

    The coarse stage hops between basins with large restart simplexes
    and a loose tolerance; the polish stage always follows it down the
    winning basin with steps matched to the pixel scale.  When the
    polished loss still exceeds accept_loss, the whole descent is
    retried from a jittered point and the lowest loss over all rounds
    wins.  A merely sub-pixel-misaligned best (loss under BASIN_LOSS)
    is resampled from jitters around itself; a wrong-basin best sends
    the hunt back to jitters around the start, widening each round.
    """
    stages: list[StageRecord] = []
    legs: list = []
    full_trace: list = []
    totals = {"evaluations": 0, "restarts": 0}

    def stage(kind: str, config: SimplexConfig, x0: np.ndarray):
        result = minimize_with_restarts(objective, x0, config, trace=trace)
        totals["evaluations"] += result.evaluations
        totals["restarts"] += result.restarts_used
        legs.extend(result.leg_log)
        if trace:
            offset = full_trace[-1][0] if full_trace else 0
            full_trace.extend((offset + i, v) for i, v in result.trace)
        stages.append(
            StageRecord(
                kind=kind,
                evaluations=result.evaluations,
                restarts=result.restarts_used,
                converged=result.converged,
                loss=result.best_value,
            )
        )
        return result

    def descend(x0: np.ndarray):
        result = stage("coarse", coarse, x0)
        vec, loss, conv = result.best_point, result.best_value, result.converged
        if polish is not None:
            fine = stage("polish", polish, vec)
            if fine.best_value < loss:
                vec, loss, conv = (
                    fine.best_point, fine.best_value, fine.converged,
                )
        return vec, loss, conv

    best_vec, best_loss, best_conv = descend(start_vec)
    rounds = 0
    while best_loss > accept_loss and rounds < rescue_rounds:
        rounds += 1
        if best_loss < BASIN_LOSS:
            center, sigma = best_vec, rescue_jitter
        else:
            spread = min(rounds, RESCUE_SPREAD_CAP)
            center, sigma = start_vec, rescue_jitter * spread
        jitter = center + rng.normal(0.0, sigma, size=start_vec.shape)
        vec, loss, conv = descend(jitter)
        if loss < best_loss:
            best_vec, best_loss, best_conv = vec, loss, conv
    return SearchOutcome(
        vec=best_vec,
        loss=best_loss,
        evaluations=totals["evaluations"],
        restarts=totals["restarts"],
        converged=best_conv,
        stages=stages,
        legs=legs,
        trace=full_trace,
    )


def run_landscape(cfg: ExperimentConfig):
    """Loss grids over every pair of base pose parameters.

    Returns {(name_a, name_b): (csv_path, grid)} where grid[i, j] holds
    the loss at (offset_a[i], offset_b[j]) in normalized units around
    the configured pose.
    """
    cfg.validate()
    if cfg.pose is None:
        raise ConfigError("landscape needs a center pose")
    if not cfg.photo_path:
        raise ConfigError("landscape needs a photo")
    mesh, annotations = _load_scene(cfg)
    photo = load_gray(cfg.photo_path)
    objective = make_objective(
        photo, mesh, annotations, cfg.mode, cfg.clip, cfg.min_pixels
    )
    center = normalize(cfg.pose, photo.width, photo.height)
    offsets = np.linspace(-cfg.span, cfg.span, cfg.samples)
    os.makedirs(cfg.out_dir, exist_ok=True)
    results = {}
    for a in range(6):
        for b in range(a + 1, 6):
            grid = np.empty((cfg.samples, cfg.samples))
            for i, da in enumerate(offsets):
                for j, db in enumerate(offsets):
                    vec = center.copy()
                    vec[a] += da
                    vec[b] += db
                    grid[i, j] = objective(vec)
            name_a, name_b = PARAM_NAMES[a], PARAM_NAMES[b]
            path = os.path.join(
                cfg.out_dir, f"landscape_{name_a}_{name_b}.csv"
            )
            with open(path, "w", encoding="ascii", newline="") as fh:
                fh.write(
                    f"# pairwise loss grid, center pose "
                    f"{format_pose(cfg.pose)}, normalized span "
                    f"{cfg.span:.17g}, {cfg.samples} samples per axis\n"
                )
                fh.write(f"{name_a}_offset,{name_b}_offset,loss\n")
                for i, da in enumerate(offsets):
                    for j, db in enumerate(offsets):
                        fh.write(
                            f"{da:.17g},{db:.17g},{grid[i, j]:.17g}\n"
                        )
            results[(name_a, name_b)] = (path, grid)
    return results


@dataclass
class EstimateResult:
    pose: Pose
    loss: float
    evaluations: int
    restarts: int
    converged: bool
    trace: list
    stages: list = field(default_factory=list)
    legs: list = field(default_factory=list)


def run_estimate(
    cfg: ExperimentConfig,
    photo: GrayImage | None = None,
    mesh: Mesh | None = None,
    annotations: ModelAnnotations | None = None,
) -> EstimateResult:
    """Minimize the loss starting from the configured pose."""
    cfg.validate()
    if cfg.pose is None:
        raise ConfigError("estimate needs a start pose")
    if photo is None:
        if not cfg.photo_path:
            raise ConfigError("estimate needs a photo")
        photo = load_gray(cfg.photo_path)
    if mesh is None or annotations is None:
        mesh, annotations = _load_scene(cfg)
    objective = make_objective(
        photo, mesh, annotations, cfg.mode, cfg.clip, cfg.min_pixels
    )
    start = normalize(cfg.pose, photo.width, photo.height)
    outcome = ladder_search(
        objective,
        start,
        coarse=cfg.simplex,
        polish=cfg.polish,
        accept_loss=cfg.accept_loss,
        rescue_rounds=cfg.rescue_rounds,
        rescue_jitter=cfg.rescue_jitter,
        rng=np.random.default_rng([cfg.seed]),
        trace=cfg.trace,
    )
    final = from_vector(outcome.vec, photo.width, photo.height, clamp=True)
    return EstimateResult(
        pose=final,
        loss=outcome.loss,
        evaluations=outcome.evaluations,
        restarts=outcome.restarts,
        converged=outcome.converged,
        trace=outcome.trace,
        stages=outcome.stages,
        legs=outcome.legs,
    )


@dataclass
class TrialResult:
    band: float
    index: int
    start: Pose
    final: Pose
    loss: float
    evaluations: int
    restarts: int
    converged: bool
    success: bool
    legs: list = field(default_factory=list)


@dataclass
class BandSummary:
    band: float
    trials: int
    successes: int

    @property
    def reliability(self) -> float:
        return self.successes / self.trials


@dataclass
class ReliabilityReport:
    scenario: str
    clip: bool
    bands: list[BandSummary]
    trials: list[TrialResult]
    trials_csv: str
    summary_csv: str


@dataclass
class _TrialTask:
    band: float
    index: int
    seed: int
    start_vec: np.ndarray
    truth_vec: np.ndarray
    photo: GrayImage
    mesh: Mesh
    annotations: ModelAnnotations
    mode: str
    clip: bool
    min_pixels: int
    simplex: SimplexConfig
    polish: SimplexConfig | None
    accept_loss: float
    rescue_rounds: int
    rescue_jitter: float
    width: int
    height: int
    success_by_loss: float | None  # reference loss for real photos


def _run_trial(task: _TrialTask) -> TrialResult:
    objective = make_objective(
        task.photo, task.mesh, task.annotations,
        task.mode, task.clip, task.min_pixels,
    )
    # The rescue stream is keyed by (seed, index, 1): disjoint from the
    # (seed, index) stream that drew the start pose, and private to the
    # trial, so results do not depend on worker scheduling.
    outcome = ladder_search(
        objective,
        task.start_vec,
        coarse=task.simplex,
        polish=task.polish,
        accept_loss=task.accept_loss,
        rescue_rounds=task.rescue_rounds,
        rescue_jitter=task.rescue_jitter,
        rng=np.random.default_rng([task.seed, task.index, 1]),
    )
    if task.success_by_loss is not None:
        success = outcome.loss < task.success_by_loss
    else:
        success = bool(
            np.max(np.abs(outcome.vec - task.truth_vec)) < SUCCESS_THRESHOLD
        )
    return TrialResult(
        band=task.band,
        index=task.index,
        start=from_vector(task.start_vec, task.width, task.height, clamp=True),
        final=from_vector(outcome.vec, task.width, task.height, clamp=True),
        loss=outcome.loss,
        evaluations=outcome.evaluations,
        restarts=outcome.restarts,
        converged=outcome.converged,
        success=success,
        legs=outcome.legs,
    )


def _pose_csv_fields(pose: Pose, perspective: bool) -> list[str]:
    vals = [
        pose.mu[0], pose.mu[1], pose.delta[0], pose.delta[1],
        pose.psi_xy[0], pose.psi_xy[1],
    ]
    if perspective:
        vals.append(pose.focal if pose.focal is not None else math.nan)
    return [f"{v:.17g}" for v in vals]


def run_reliability(
    cfg: ExperimentConfig,
    photo: GrayImage | None = None,
    mesh: Mesh | None = None,
    annotations: ModelAnnotations | None = None,
) -> ReliabilityReport:
    """Banded random-restart recovery protocol around the true pose.

    The configured pose is the ground truth; each trial perturbs it
    into one band, reruns the estimator, and scores success as a
    maximum normalized parameter error under SUCCESS_THRESHOLD (or,
    for real photos, a final loss beating the reference pose's loss).
    """
    cfg.validate()
    if cfg.pose is None:
        raise ConfigError("reliability needs the true pose")
    if mesh is None or annotations is None:
        mesh, annotations = _load_scene(cfg)
    if photo is None:
        if cfg.scenario == "real":
            if not cfg.photo_path:
                raise ConfigError("a real-photo scenario needs a photo")
            photo = load_gray(cfg.photo_path)
        else:
            probe = replace(
                cfg,
                background="noise" if cfg.scenario == "composite" else None,
            )
            photo = synthesize_photo(probe, mesh, annotations)
    width, height = photo.width, photo.height
    truth_vec = normalize(cfg.pose, width, height)
    reference_loss = None
    if cfg.scenario == "real":
        reference_loss = pose_loss(
            photo, mesh, annotations, cfg.pose,
            mode=cfg.mode, clip=cfg.clip, min_pixels=cfg.min_pixels,
        )

    tasks = []
    index = 0
    for band in cfg.bands:
        for _ in range(cfg.trials_per_band):
            rng = np.random.default_rng([cfg.seed, index])
            start = perturb(cfg.pose, band, rng, width, height)
            tasks.append(
                _TrialTask(
                    band=band,
                    index=index,
                    seed=cfg.seed,
                    start_vec=normalize(start, width, height),
                    truth_vec=truth_vec,
                    photo=photo,
                    mesh=mesh,
                    annotations=annotations,
                    mode=cfg.mode,
                    clip=cfg.clip,
                    min_pixels=cfg.min_pixels,
                    simplex=cfg.simplex,
                    polish=cfg.polish,
                    accept_loss=cfg.accept_loss,
                    rescue_rounds=cfg.rescue_rounds,
                    rescue_jitter=cfg.rescue_jitter,
                    width=width,
                    height=height,
                    success_by_loss=reference_loss,
                )
            )
            index += 1

    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            trials = list(pool.map(_run_trial, tasks, chunksize=1))
    else:
        trials = [_run_trial(t) for t in tasks]

    summaries = []
    for band in cfg.bands:
        band_trials = [t for t in trials if t.band == band]
        summaries.append(
            BandSummary(
                band=band,
                trials=len(band_trials),
                successes=sum(t.success for t in band_trials),
            )
        )

    os.makedirs(cfg.out_dir, exist_ok=True)
    perspective = cfg.mode == "perspective"
    pose_names = PARAM_NAMES[:7] if perspective else PARAM_NAMES[:6]
    trials_csv = os.path.join(cfg.out_dir, "reliability_trials.csv")
    with open(trials_csv, "w", encoding="ascii", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["band_percent", "trial"]
            + [f"start_{n}" for n in pose_names]
            + [f"final_{n}" for n in pose_names]
            + ["final_loss", "evaluations", "restarts", "converged",
               "success", "legs"]
        )
        for t in trials:
            legs_text = ";".join(
                f"{evals}{'+' if conv else '-'}" for evals, conv in t.legs
            )
            writer.writerow(
                [f"{t.band:.17g}", t.index]
                + _pose_csv_fields(t.start, perspective)
                + _pose_csv_fields(t.final, perspective)
                + [
                    f"{t.loss:.17g}",
                    t.evaluations,
                    t.restarts,
                    int(t.converged),
                    int(t.success),
                    legs_text,
                ]
            )
    summary_csv = os.path.join(cfg.out_dir, "reliability_summary.csv")
    with open(summary_csv, "w", encoding="ascii", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["band_percent", "trials", "successes", "reliability"])
        for s in summaries:
            writer.writerow(
                [f"{s.band:.17g}", s.trials, s.successes, f"{s.reliability:.17g}"]
            )
    return ReliabilityReport(
        scenario=cfg.scenario,
        clip=cfg.clip,
        bands=summaries,
        trials=trials,
        trials_csv=trials_csv,
        summary_csv=summary_csv,
    )
