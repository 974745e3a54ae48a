"""End-to-end acceptance gate for the shipped claims.

One test per claim, each printing a single line with the measured
numbers (visible under ``pytest -v -rA`` or ``-s``).  The recovery
criteria rerun the full estimation protocol at production settings and
dominate the runtime; everything else finishes in seconds.
"""

import time

import numpy as np
import pytest
import scipy.optimize

from posefit.harness import (
    ExperimentConfig,
    reference_pose,
    run_landscape,
    run_reliability,
    synthesize_photo,
)
from posefit.imgio import save_gray
from posefit.loss import (
    accumulate_stats,
    best_linear_fit,
    clip_mask,
    full_pixel_set,
    invariant_loss,
    pose_loss,
)
from posefit.mesh import load_annotations, load_mesh
from posefit.pose import pose_to_camera
from posefit.render import GrayImage, render_attributes, shade_phong

MESH = "fixtures/toycar.mesh"
ANN = "fixtures/toycar.ann"
RELIABILITY_SIZE = 192
SEED = 0
JOBS = 2
TRIALS_PER_BAND = 10


def announce(name: str, detail: str) -> None:
    print(f"[accept] {name}: PASS ({detail})")


@pytest.fixture(scope="module")
def car():
    return load_mesh(MESH), load_annotations(ANN)


def reliability_config(out_dir, **overrides) -> ExperimentConfig:
    values = dict(
        mesh_path=MESH,
        annotations_path=ANN,
        pose=reference_pose(RELIABILITY_SIZE, RELIABILITY_SIZE),
        width=RELIABILITY_SIZE,
        height=RELIABILITY_SIZE,
        seed=SEED,
        jobs=JOBS,
        trials_per_band=TRIALS_PER_BAND,
        out_dir=str(out_dir),
    )
    values.update(overrides)
    return ExperimentConfig(**values)


@pytest.fixture(scope="module")
def artificial_report(tmp_path_factory):
    cfg = reliability_config(
        tmp_path_factory.mktemp("accept_artificial"),
        scenario="artificial",
        bands=(1.0, 2.0, 4.0, 8.0, 16.0),
    )
    t0 = time.perf_counter()
    report = run_reliability(cfg)
    return report, time.perf_counter() - t0


@pytest.fixture(scope="module")
def composite_clip_report(tmp_path_factory):
    cfg = reliability_config(
        tmp_path_factory.mktemp("accept_composite"),
        scenario="composite",
        bands=(1.0, 2.0, 4.0, 8.0, 16.0),
    )
    return run_reliability(cfg)


@pytest.fixture(scope="module")
def composite_noclip_report(tmp_path_factory):
    cfg = reliability_config(
        tmp_path_factory.mktemp("accept_composite_noclip"),
        scenario="composite",
        bands=(16.0,),
        clip=False,
    )
    return run_reliability(cfg)


@pytest.fixture(scope="module")
def perspective_report(tmp_path_factory):
    cfg = reliability_config(
        tmp_path_factory.mktemp("accept_perspective"),
        scenario="artificial",
        mode="perspective",
        pose=reference_pose(
            RELIABILITY_SIZE, RELIABILITY_SIZE, perspective=True
        ),
        bands=(1.0, 2.0, 4.0),
    )
    return run_reliability(cfg)


def test_zero_loss_at_truth(car):
    mesh, ann = car
    width, height = 640, 480
    pose = reference_pose(width, height)
    cfg = ExperimentConfig(
        mesh_path=MESH, annotations_path=ANN, pose=pose,
        width=width, height=height,
    )
    photo = synthesize_photo(cfg, mesh, ann)
    t0 = time.perf_counter()
    loss = pose_loss(
        photo, mesh, ann, pose, mode="parallel", clip=True, min_pixels=64
    )
    dt = time.perf_counter() - t0
    assert loss <= 1e-9
    assert dt < 1.0
    announce("zero loss at truth", f"loss={loss:.2e}, {dt:.2f} s at 640x480")


def test_relighting_invariance(car):
    mesh, ann = car
    size = RELIABILITY_SIZE
    pose = reference_pose(size, size)
    cfg = ExperimentConfig(
        mesh_path=MESH, annotations_path=ANN, pose=pose,
        width=size, height=size,
    )
    photo = synthesize_photo(cfg, mesh, ann)
    base = pose_loss(
        photo, mesh, ann, pose, mode="parallel", clip=True, min_pixels=64
    )
    rng = np.random.default_rng(2024)
    worst = 0.0
    gains = []
    for k in range(100):
        if k == 0:
            gain, offset = -1.0, 255.0  # exact photographic negative
        else:
            gain = rng.uniform(0.1, 3.0) * (1 if rng.uniform() < 0.5 else -1)
            offset = rng.uniform(-40.0, 40.0)
        gains.append(gain)
        relit = GrayImage(gain * photo.pixels + offset)
        value = pose_loss(
            relit, mesh, ann, pose, mode="parallel", clip=True, min_pixels=64
        )
        worst = max(worst, abs(value - base))
    assert worst <= 1e-8
    assert min(gains) < 0 < max(gains)
    announce(
        "invariance under re-lighting",
        f"100 affine maps incl. negative, max change {worst:.2e}",
    )


def _image_stats(photo_values: np.ndarray, attr_values: np.ndarray):
    """PixelStats over flat sample arrays, one pixel per sample."""
    n = len(photo_values)
    photo = GrayImage(np.asarray(photo_values, dtype=np.float64).reshape(n, 1))
    planes = np.asarray(attr_values, dtype=np.float64).reshape(n, 1, -1)
    return accumulate_stats(photo, planes, full_pixel_set(photo))


def test_closed_form_fit_matches_iterative_refit():
    rng = np.random.default_rng(515)
    worst_gap = 0.0
    worst_identity = 0.0
    for _ in range(50):
        attrs = rng.normal(size=(50, 4))
        photo = rng.normal(size=50)
        stats = _image_stats(photo, attrs)
        residual = best_linear_fit(stats, "photo_from_attrs").residual

        centered_photo = photo - photo.mean()
        centered_attrs = attrs - attrs.mean(axis=0)
        var_photo = float(centered_photo @ centered_photo) / 50.0

        def objective(params):
            pred = attrs @ params[:4] + params[4]
            err = photo - pred
            return float(err @ err) / 50.0 / var_photo

        fit = scipy.optimize.minimize(
            objective,
            np.zeros(5),
            method="Nelder-Mead",
            options=dict(xatol=1e-10, fatol=1e-12, maxfev=20000),
        )
        worst_gap = max(worst_gap, abs(residual - fit.fun))

        cross = centered_attrs.T @ centered_photo / 50.0
        auto = centered_attrs.T @ centered_attrs / 50.0
        trace_term = float(cross @ np.linalg.solve(auto, cross)) / var_photo
        worst_identity = max(worst_identity, abs(residual - (1.0 - trace_term)))
    assert worst_gap <= 1e-6
    assert worst_identity <= 1e-9
    announce(
        "closed-form fit vs iterative refit",
        f"50 instances, max residual gap {worst_gap:.2e}, "
        f"identity gap {worst_identity:.2e}",
    )


def test_single_channel_reduction_is_one_minus_corr_squared():
    rng = np.random.default_rng(99)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(40, 200))
        x = rng.normal(size=n)
        y = 0.3 * x + rng.normal(size=n) * rng.uniform(0.2, 2.0)
        stats = _image_stats(x, y.reshape(n, 1))
        loss = invariant_loss(stats)
        corr = np.corrcoef(x, y)[0, 1]
        worst = max(worst, abs(loss - (1.0 - corr * corr)))
    assert worst <= 1e-12
    announce(
        "single-channel reduction",
        f"100 instances, max |loss - (1 - corr^2)| = {worst:.1e}",
    )


def test_landscape_minima_are_unique_at_truth(car, tmp_path):
    mesh, ann = car
    size = 128
    pose = reference_pose(size, size)
    cfg = ExperimentConfig(
        mesh_path=MESH, annotations_path=ANN, pose=pose,
        width=size, height=size, out_dir=str(tmp_path),
        span=0.20, samples=41,
    )
    photo = synthesize_photo(cfg, mesh, ann)
    photo_path = tmp_path / "photo.p2f"
    save_gray(str(photo_path), photo)
    cfg.photo_path = str(photo_path)
    t0 = time.perf_counter()
    results = run_landscape(cfg)
    dt = time.perf_counter() - t0
    assert len(results) == 15
    center = 20
    for (name_a, name_b), (_path, grid) in results.items():
        flat_min = int(np.argmin(grid))
        assert flat_min == center * 41 + center, (
            f"{name_a} x {name_b}: minimum at cell "
            f"{divmod(flat_min, 41)}, not the center"
        )
        assert int(np.sum(grid == grid.min())) == 1, (
            f"{name_a} x {name_b}: center minimum is not unique"
        )
    assert dt < 600.0
    announce(
        "landscape minima",
        f"15 grids of 41x41 at 128x128, unique center minimum, {dt:.0f} s",
    )


def test_recovery_reliability_parallel(artificial_report):
    report, dt = artificial_report
    rates = {b.band: b.reliability for b in report.bands}
    assert rates == {1.0: 1.0, 2.0: 1.0, 4.0: 1.0, 8.0: 1.0, 16.0: 1.0}, rates
    assert dt < 1800.0
    announce(
        "parallel-mode recovery",
        f"50 trials, reliability 1.0 in every band, {dt:.0f} s",
    )


def test_recovery_reliability_composite(
    composite_clip_report, composite_noclip_report
):
    clip_rates = {b.band: b.reliability for b in composite_clip_report.bands}
    for band in (1.0, 2.0, 4.0, 8.0):
        assert clip_rates[band] == 1.0, clip_rates
    noclip_16 = composite_noclip_report.bands[0].reliability
    assert clip_rates[16.0] >= noclip_16
    announce(
        "composited-background recovery",
        "clipped bands 1-8 at 1.0, band 16 "
        f"{clip_rates[16.0]:.1f} clipped vs {noclip_16:.1f} unclipped",
    )


def test_evaluation_budget_per_leg(artificial_report):
    report, _dt = artificial_report
    legs = [
        evals
        for trial in report.trials
        for evals, converged in trial.legs
        if converged
    ]
    assert legs, "no converged simplex legs recorded"
    median = float(np.median(legs))
    assert 50.0 <= median <= 500.0
    announce(
        "evaluation budget",
        f"median {median:.0f} evaluations over {len(legs)} converged legs",
    )


def test_render_and_loss_timing(car):
    mesh, ann = car
    width, height = 640, 480
    pose = reference_pose(width, height)
    camera = pose_to_camera(pose, ann, "parallel", width, height)
    lighting_cfg = ExperimentConfig(
        mesh_path=MESH, annotations_path=ANN, pose=pose,
        width=width, height=height,
    )
    photo = synthesize_photo(lighting_cfg, mesh, ann)
    attrs = render_attributes(mesh, camera)

    render_times = []
    for _ in range(5):
        t0 = time.perf_counter()
        render_attributes(mesh, camera)
        render_times.append(time.perf_counter() - t0)
    loss_times = []
    for _ in range(5):
        t0 = time.perf_counter()
        stats = accumulate_stats(photo, attrs, clip_mask(attrs))
        invariant_loss(stats)
        loss_times.append(time.perf_counter() - t0)
    render_s = min(render_times)
    loss_s = min(loss_times)

    # Soft budgets: warn in (1x, 2x], fail only above 2x.
    if render_s > 0.17:
        import warnings

        warnings.warn(f"render {render_s:.3f} s exceeds the 0.17 s budget")
    if loss_s > 0.04:
        import warnings

        warnings.warn(f"loss {loss_s:.3f} s exceeds the 0.04 s budget")
    assert render_s <= 0.34
    assert loss_s <= 0.08
    announce(
        "render and loss timing",
        f"render {render_s * 1000:.0f} ms (budget 170), "
        f"loss {loss_s * 1000:.1f} ms (budget 40) at 640x480",
    )


def test_recovery_reliability_perspective(perspective_report):
    # The remaining stand-in for photographs we cannot ship: the
    # property suites run as part of this same pytest invocation, and
    # the seven-parameter perspective estimator must be as reliable in
    # the narrow bands as the parallel one.
    report = perspective_report
    rates = {b.band: b.reliability for b in report.bands}
    assert rates == {1.0: 1.0, 2.0: 1.0, 4.0: 1.0}, rates
    announce(
        "perspective-mode recovery",
        "30 trials over bands 1/2/4, reliability 1.0, seven parameters",
    )
