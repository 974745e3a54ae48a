"""Command line front end.

Subcommands: render, loss, landscape, estimate, reliability.  Exit
status is 0 on success, 1 for usage problems (bad flags, malformed
config or pose text), and 2 when a run fails at runtime (unreadable
files, infeasible poses, degenerate inputs).
"""

import argparse
import os
import sys

from .errors import ConfigError, PosefitError
from .harness import (
    ACCEPT_LOSS,
    RESCUE_ROUNDS,
    ExperimentConfig,
    default_simplex_config,
    format_pose,
    parse_config_file,
    parse_pose_text,
    run_estimate,
    run_landscape,
    run_loss,
    run_reliability,
    run_render,
)
from .render import Lighting
from .simplex import SimplexConfig

# Config-file keys and how to coerce their raw string values.


def _as_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got '{text}'")


_CONFIG_KEYS = {
    "mesh": str,
    "annotations": str,
    "photo": str,
    "pose": str,
    "mode": str,
    "scenario": str,
    "background": str,
    "light": str,
    "out": str,
    "seed": int,
    "jobs": int,
    "width": int,
    "height": int,
    "samples": int,
    "trials": int,
    "min_pixels": int,
    "max_evals": int,
    "max_restarts": int,
    "span": float,
    "initial_step": float,
    "restart_step": float,
    "convergence_tol": float,
    "accept_loss": float,
    "rescue_rounds": int,
    "bands": str,
    "clip": _as_bool,
}


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; the contract here is 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _parse_bands(text: str) -> tuple[float, ...]:
    try:
        bands = tuple(float(p) for p in text.replace(",", " ").split())
    except ValueError as exc:
        raise ConfigError(f"bad band list '{text}'") from exc
    if not bands:
        raise ConfigError("band list is empty")
    return bands


def _parse_light(text: str) -> Lighting:
    parts = text.split()
    if len(parts) != 6:
        raise ConfigError(
            "light needs 6 numbers: ambient diffuse lx ly lz offset"
        )
    try:
        a, d, lx, ly, lz, off = (float(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"bad number in light '{text}'") from exc
    return Lighting.make(ambient=a, diffuse=d, direction=(lx, ly, lz), offset=off)


def _resolve_pose(text: str):
    try:
        return parse_pose_text(text)
    except ConfigError:
        if os.path.isfile(text):
            with open(text, "r", encoding="utf-8") as fh:
                for line in fh:
                    stripped = line.split("#", 1)[0].strip()
                    if stripped:
                        return parse_pose_text(stripped)
            raise ConfigError(f"no pose found in file '{text}'")
        raise


def _build_parser(defaults: dict) -> _Parser:
    parser = _Parser(
        prog="posefit",
        description="Fit the pose of a known mesh to a single grayscale photo.",
    )
    parser.add_argument(
        "--config", metavar="FILE",
        help="key = value defaults applied before other flags",
    )
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    def scene_args(p, need_photo: bool, need_pose: bool):
        p.add_argument("--mesh", required="mesh" not in defaults,
                       help="mesh file")
        p.add_argument("--annotations", required="annotations" not in defaults,
                       help="wheel and axle annotation file")
        if need_photo:
            p.add_argument("--photo", required="photo" not in defaults,
                           help="grayscale photo (binary 8-bit or exact real)")
        p.add_argument("--pose", required=need_pose and "pose" not in defaults,
                       help="pose as 'mu_x mu_y dx dy psi_x psi_y [focal]' "
                            "or a file holding that line")
        p.add_argument("--mode", choices=("parallel", "perspective"),
                       default="parallel")

    def loss_args(p):
        p.add_argument("--no-clip", dest="clip", action="store_false",
                       help="score every pixel instead of the covered ones")
        p.add_argument("--min-pixels", dest="min_pixels", type=int, default=64)
        p.set_defaults(clip=True)

    def optimizer_args(p):
        p.add_argument("--max-evals", dest="max_evals", type=int, default=500)
        p.add_argument("--max-restarts", dest="max_restarts", type=int, default=6)
        p.add_argument("--initial-step", dest="initial_step", type=float,
                       default=0.06)
        p.add_argument("--restart-step", dest="restart_step", type=float,
                       default=0.03)
        p.add_argument("--convergence-tol", dest="convergence_tol", type=float,
                       default=1e-3)
        p.add_argument("--accept-loss", dest="accept_loss", type=float,
                       default=ACCEPT_LOSS,
                       help="polished loss above this triggers rescue rounds")
        p.add_argument("--rescue-rounds", dest="rescue_rounds", type=int,
                       default=RESCUE_ROUNDS)
        p.add_argument("--no-polish", dest="polish", action="store_false",
                       help="skip the pixel-scale polish stage")
        p.set_defaults(polish=True)

    p_render = sub.add_parser("render", help="render a pose to images")
    scene_args(p_render, need_photo=False, need_pose=True)
    p_render.add_argument("--width", type=int, default=640)
    p_render.add_argument("--height", type=int, default=480)
    p_render.add_argument("--light", default=None,
                          help="'ambient diffuse lx ly lz offset'")
    p_render.add_argument("--background", default=None,
                          help="'noise' or a background image file")
    p_render.add_argument("--seed", type=int, default=0)
    p_render.add_argument("--out", default=".", help="output directory")

    p_loss = sub.add_parser("loss", help="score one pose against a photo")
    scene_args(p_loss, need_photo=True, need_pose=True)
    loss_args(p_loss)

    p_land = sub.add_parser("landscape",
                            help="pairwise loss grids around a pose")
    scene_args(p_land, need_photo=True, need_pose=True)
    loss_args(p_land)
    p_land.add_argument("--span", type=float, default=0.20,
                        help="normalized half-width of each grid axis")
    p_land.add_argument("--samples", type=int, default=41,
                        help="odd number of samples per axis")
    p_land.add_argument("--out", default=".", help="output directory")

    p_est = sub.add_parser("estimate", help="fit a pose starting from a guess")
    scene_args(p_est, need_photo=True, need_pose=True)
    loss_args(p_est)
    optimizer_args(p_est)
    p_est.add_argument("--trace", action="store_true",
                       help="write the per-evaluation loss trace")
    p_est.add_argument("--out", default=None, help="output directory")

    p_rel = sub.add_parser("reliability",
                           help="banded perturb-and-refit success rates")
    scene_args(p_rel, need_photo=False, need_pose=True)
    p_rel.add_argument("--photo", default=None,
                       help="measured photo (switches scoring to loss "
                            "improvement); synthetic scenarios render their own")
    loss_args(p_rel)
    optimizer_args(p_rel)
    p_rel.add_argument("--scenario",
                       choices=("artificial", "composite", "real"),
                       default="artificial")
    p_rel.add_argument("--bands", default="1,2,4,8,16",
                       help="perturbation bands in percent, ascending")
    p_rel.add_argument("--trials", dest="trials", type=int, default=10)
    # Success asks for a 0.5% normalized accuracy; at 192x192 that ball
    # spans a full pixel, so the point-sampled loss can still tell the
    # inside of the ball from the outside.
    p_rel.add_argument("--width", type=int, default=192)
    p_rel.add_argument("--height", type=int, default=192)
    p_rel.add_argument("--light", default=None)
    p_rel.add_argument("--seed", type=int, default=0)
    p_rel.add_argument("--jobs", type=int, default=1)
    p_rel.add_argument("--out", default=".", help="output directory")

    if defaults:
        # Subparsers parse into a fresh namespace and copy it over the
        # outer one, so defaults set only on the main parser would be
        # clobbered by the subcommand's own argument defaults.  Setting
        # them on every subparser rewrites the matching argument
        # defaults in place.
        parser.set_defaults(**defaults)
        for p in (p_render, p_loss, p_land, p_est, p_rel):
            p.set_defaults(**defaults)
    return parser


def _load_defaults(argv) -> dict:
    probe = _Parser(add_help=False)
    probe.add_argument("--config")
    known, _ = probe.parse_known_args(argv)
    if not known.config:
        return {}
    raw = parse_config_file(known.config)
    defaults = {}
    for key, value in raw.items():
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"unknown config key '{key}'")
        defaults[key] = _CONFIG_KEYS[key](value)
    return defaults


def _simplex_from(args) -> SimplexConfig:
    cfg = default_simplex_config()
    cfg.max_evals = args.max_evals
    cfg.max_restarts = args.max_restarts
    cfg.initial_step = args.initial_step
    cfg.restart_step = args.restart_step
    cfg.convergence_tol = args.convergence_tol
    return cfg


def _experiment_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig(
        mesh_path=args.mesh,
        annotations_path=args.annotations,
        photo_path=getattr(args, "photo", None),
        pose=_resolve_pose(args.pose) if args.pose else None,
        mode=args.mode,
        clip=getattr(args, "clip", True),
        min_pixels=getattr(args, "min_pixels", 64),
    )
    if getattr(args, "light", None):
        cfg.lighting = _parse_light(args.light)
    for name in ("seed", "jobs", "width", "height", "span", "samples",
                 "scenario", "background", "trace"):
        if hasattr(args, name):
            setattr(cfg, name, getattr(args, name))
    if hasattr(args, "bands"):
        cfg.bands = _parse_bands(args.bands)
    if hasattr(args, "trials"):
        cfg.trials_per_band = args.trials
    if getattr(args, "out", None):
        cfg.out_dir = args.out
    if hasattr(args, "max_evals"):
        cfg.simplex = _simplex_from(args)
        cfg.accept_loss = args.accept_loss
        cfg.rescue_rounds = args.rescue_rounds
        if not args.polish:
            cfg.polish = None
    return cfg


def _cmd_render(args) -> int:
    paths = run_render(_experiment_config(args))
    for kind in ("pgm", "exact", "attributes"):
        print(f"{kind}: {paths[kind]}")
    return 0


def _cmd_loss(args) -> int:
    print(f"{run_loss(_experiment_config(args)):.12g}")
    return 0


def _cmd_landscape(args) -> int:
    results = run_landscape(_experiment_config(args))
    for (name_a, name_b), (path, _grid) in sorted(results.items()):
        print(f"{name_a} x {name_b}: {path}")
    return 0


def _cmd_estimate(args) -> int:
    cfg = _experiment_config(args)
    cfg.trace = bool(getattr(args, "trace", False))
    result = run_estimate(cfg)
    print(f"pose: {format_pose(result.pose)}")
    print(f"loss: {result.loss:.12g}")
    print(
        f"evaluations: {result.evaluations} restarts: {result.restarts} "
        f"converged: {'yes' if result.converged else 'no'}"
    )
    if getattr(args, "out", None):
        os.makedirs(args.out, exist_ok=True)
        pose_path = os.path.join(args.out, "estimated_pose.txt")
        with open(pose_path, "w", encoding="ascii") as fh:
            fh.write(format_pose(result.pose) + "\n")
        print(f"pose file: {pose_path}")
        if cfg.trace:
            trace_path = os.path.join(args.out, "estimate_trace.csv")
            with open(trace_path, "w", encoding="ascii", newline="") as fh:
                fh.write("evaluation,loss\n")
                for idx, value in result.trace:
                    fh.write(f"{idx},{value:.17g}\n")
            print(f"trace file: {trace_path}")
    return 0


def _cmd_reliability(args) -> int:
    report = run_reliability(_experiment_config(args))
    for band in report.bands:
        print(
            f"band {band.band:g}%: {band.successes}/{band.trials} "
            f"recovered, reliability {band.reliability:.3f}"
        )
    print(f"trials file: {report.trials_csv}")
    print(f"summary file: {report.summary_csv}")
    return 0


_COMMANDS = {
    "render": _cmd_render,
    "loss": _cmd_loss,
    "landscape": _cmd_landscape,
    "estimate": _cmd_estimate,
    "reliability": _cmd_reliability,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        defaults = _load_defaults(argv)
    except (PosefitError, OSError) as exc:
        print(f"posefit: error: {exc}", file=sys.stderr)
        return 1
    parser = _build_parser(defaults)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits on usage errors and --help; keep main() a
        # plain function that returns the status instead.
        return int(exc.code or 0)
    if not args.command:
        parser.print_usage(sys.stderr)
        print("posefit: error: a command is required", file=sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"posefit: error: {exc}", file=sys.stderr)
        return 1
    except (PosefitError, OSError, ValueError) as exc:
        print(f"posefit: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
