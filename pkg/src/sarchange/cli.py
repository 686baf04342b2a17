"""Command-line interface: ``sarchange <subcommand> ...``.

Exit codes: 0 on success, 1 on usage errors, 2 on data errors.

Scene configuration for ``simulate`` (TOML)::

    width = 64
    height = 64
    count = 6                 # number of dates
    looks = 1.0               # ENL of the noisy images
    multilook = 3             # odd boxcar window of the denoised stack
    reflectivity = 1.0        # constant base reflectivity
    start = "2020-01-01"      # date of the first image
    interval_days = 12

    [[changes]]
    kind = "step"             # step | impulse | cycle | complex
    region = [0, 32, 32, 64]  # row0, row1, col0, col1 (exclusive ends)
    onset = 4
    offset = 5                # not used by steps
    factor = 4.0
    factor2 = 16.0            # complex only, default factor**2
"""
from __future__ import annotations

import argparse
import datetime as dt
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .classify import classify_stack
from .errors import FormatError, InputError, SarChangeError
from .glr import WEIGHTS, cumulative_monitor, pair_detect
from .io import load_stack, read_manifest, read_raster, save_stack, write_png, write_raster
from .magnitude import rainbow_colorize
from .reactiv import MODES, colorbar, compose_reactiv
from .roc import roc_curve
from .speckle import ChangeProfile, simulate_stack, temporal_multilook

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = ["main", "build_parser", "load_scene"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _probability(value: str) -> float:
    x = float(value)
    if not 0.0 < x < 1.0:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1), got {value}")
    return x


def _add_threshold(p):
    group = p.add_mutually_exclusive_group()
    group.add_argument("--tau", type=_probability, default=None, help="change probability threshold (default 0.99)")
    group.add_argument("--far", type=_probability, default=None, help="false alarm rate, same as --tau 1-FAR")


def _tau(args) -> float:
    if args.far is not None:
        return 1.0 - args.far
    return 0.99 if args.tau is None else args.tau


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sarchange", description="Change detection in multitemporal SAR image stacks.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="simulate a speckled stack with planted changes")
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, type=Path)

    p = sub.add_parser("detect-pair", help="GLR change detection between two dates")
    p.add_argument("--stack", required=True, type=Path)
    p.add_argument("--t", required=True, type=int, help="1-based reference date")
    p.add_argument("--t2", required=True, type=int, help="1-based second date")
    _add_threshold(p)
    p.add_argument("--alpha1", type=float, default=-2.0)
    p.add_argument("--alpha2", type=float, default=2.0)
    p.add_argument("--weights", choices=sorted(WEIGHTS), default="none")
    p.add_argument("--weight-threshold", type=float, default=None, help="required with weighted statistics")
    p.add_argument("--out", required=True, type=Path)

    p = sub.add_parser("monitor", help="compare every date with a reference date")
    p.add_argument("--stack", required=True, type=Path)
    p.add_argument("--reference", type=int, default=1)
    _add_threshold(p)
    p.add_argument("--out", required=True, type=Path)

    p = sub.add_parser("classify", help="per-pixel temporal change-type classification")
    p.add_argument("--stack", required=True, type=Path)
    _add_threshold(p)
    p.add_argument("--ewma", type=float, default=None, metavar="ALPHA", help="EWMA smoothing factor in (0, 1]")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, type=Path)

    p = sub.add_parser("reactiv", help="HSV change-time composite")
    p.add_argument("--stack", required=True, type=Path)
    p.add_argument("--mode", choices=MODES, default="max_change")
    _add_threshold(p)
    p.add_argument("--looks", type=float, default=None, help="looks for the saturation normalization")
    p.add_argument("--no-prescreen", action="store_true")
    p.add_argument("--out", required=True, type=Path)

    p = sub.add_parser("roc", help="ROC AUC of a score raster against a truth raster")
    p.add_argument("--scores", required=True, type=Path)
    p.add_argument("--truth", required=True, type=Path)
    return parser


def load_scene(path) -> dict:
    """Read and validate a ``simulate`` scene configuration."""
    try:
        doc = tomllib.loads(Path(path).read_text())
    except tomllib.TOMLDecodeError as exc:
        raise FormatError(f"{path}: {exc}") from None
    try:
        scene = {
            "width": int(doc["width"]),
            "height": int(doc["height"]),
            "count": int(doc["count"]),
            "looks": float(doc.get("looks", 1.0)),
            "multilook": int(doc.get("multilook", 3)),
            "reflectivity": float(doc.get("reflectivity", 1.0)),
            "start": str(doc.get("start", "2020-01-01")),
            "interval_days": float(doc.get("interval_days", 12)),
        }
    except KeyError as exc:
        raise FormatError(f"{path}: missing key {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        raise FormatError(f"{path}: {exc}") from None
    profiles = []
    for i, item in enumerate(doc.get("changes", [])):
        try:
            profiles.append(
                ChangeProfile(
                    region=tuple(item["region"]),
                    kind=item["kind"],
                    onset=int(item["onset"]),
                    offset=None if "offset" not in item else int(item["offset"]),
                    factor=float(item.get("factor", 4.0)),
                    factor2=None if "factor2" not in item else float(item["factor2"]),
                )
            )
        except KeyError as exc:
            raise FormatError(f"{path}: change {i} lacks {exc.args[0]!r}") from None
        except InputError as exc:
            raise FormatError(f"{path}: change {i}: {exc}") from None
    scene["changes"] = profiles
    return scene


def _inputs_of(manifest_path: Path) -> set:
    manifest = read_manifest(manifest_path)
    paths = {manifest_path.resolve()}
    paths.update(manifest.resolve(e).resolve() for e in manifest.entries)
    return paths


class _Outputs:
    """Output directory that refuses to write over any input file."""

    def __init__(self, directory: Path, inputs: set):
        self.directory = directory
        self.inputs = inputs
        self.written = []

    def path(self, name: str) -> Path:
        target = self.directory / name
        if target.resolve() in self.inputs:
            raise InputError(f"refusing to overwrite input file {target}")
        self.written.append(target)
        return target

    def raster(self, name: str, data) -> None:
        write_raster(self.path(name), np.asarray(data, dtype=np.float32))

    def png(self, name: str, image) -> None:
        write_png(self.path(name), image)


def _gray(values, lo=None, hi=None) -> np.ndarray:
    x = np.asarray(values, dtype=np.float64)
    finite = np.isfinite(x)
    if lo is None:
        lo = float(x[finite].min()) if finite.any() else 0.0
    if hi is None:
        hi = float(x[finite].max()) if finite.any() else 1.0
    span = hi - lo if hi > lo else 1.0
    x = np.where(np.isposinf(x), hi, np.where(np.isfinite(x), x, lo))
    return np.clip(np.floor((x - lo) / span * 255.0 + 0.5), 0, 255).astype(np.uint8)


def _cmd_simulate(args) -> None:
    scene = load_scene(args.config)
    out = _Outputs(args.out, {args.config.resolve()})
    shape = (scene["height"], scene["width"])
    base = np.full(shape, scene["reflectivity"])
    sim = simulate_stack(base, scene["changes"], scene["count"], scene["looks"], args.seed)
    start = dt.date.fromisoformat(scene["start"])
    dates = [(start + dt.timedelta(days=scene["interval_days"] * i)).isoformat() for i in range(scene["count"])]
    for name in ("noisy", "denoised"):
        if (args.out / name / "manifest.toml").resolve() in out.inputs:
            raise InputError("output would overwrite the configuration")
    noisy = sim.stack()
    save_stack(args.out / "noisy", noisy, dates)
    save_stack(args.out / "denoised", temporal_multilook(noisy, scene["multilook"]), dates)
    out.raster("truth_classes.rst", sim.classes)
    for t in range(1, scene["count"] + 1):
        out.raster(f"truth_{t:03d}.rst", sim.pair_truth(1, t))
    print(f"simulated {scene['count']} images of {shape[0]}x{shape[1]} into {args.out}")


def _cmd_detect_pair(args) -> None:
    stack = load_stack(args.stack)
    out = _Outputs(args.out, _inputs_of(args.stack))
    result = pair_detect(
        stack,
        args.t,
        args.t2,
        tau=_tau(args),
        weights=args.weights,
        weight_threshold=args.weight_threshold,
        alpha1=args.alpha1,
        alpha2=args.alpha2,
    )
    out.raster("similarity.rst", result.similarity)
    out.raster("probability.rst", result.probability)
    out.raster("mask.rst", result.mask)
    out.raster("signed_magnitude.rst", result.magnitude)
    out.png("similarity.png", _gray(result.similarity, lo=0.0))
    out.png("probability.png", _gray(result.probability, 0.0, 1.0))
    out.png("mask.png", result.mask.astype(np.uint8) * 255)
    out.png("signed_magnitude.png", rainbow_colorize(result.magnitude))
    print(f"threshold={result.threshold:.6g} changed={float(result.mask.mean()):.6f} saturated={int(result.saturated.sum())}")


def _cmd_monitor(args) -> None:
    stack = load_stack(args.stack)
    out = _Outputs(args.out, _inputs_of(args.stack))
    for step in cumulative_monitor(stack, args.reference, tau=_tau(args)):
        out.raster(f"signed_mask_{step.t:03d}.rst", step.signed_mask)
        out.raster(f"ratio_{step.t:03d}.rst", step.ratio)
        background = _gray(np.log1p(step.ratio))
        rgb = np.repeat(background[..., np.newaxis], 3, axis=-1)
        rgb[step.signed_mask > 0] = (255, 0, 0)
        rgb[step.signed_mask < 0] = (0, 0, 255)
        out.png(f"monitor_{step.t:03d}.png", rgb)
        print(f"t={step.t} increases={int((step.signed_mask > 0).sum())} decreases={int((step.signed_mask < 0).sum())}")


def _cmd_classify(args) -> None:
    stack = load_stack(args.stack)
    out = _Outputs(args.out, _inputs_of(args.stack))
    result = classify_stack(stack, tau=_tau(args), ewma_alpha=args.ewma, seed=args.seed)
    out.raster("classes.rst", result.classes)
    out.raster("clusters.rst", result.clusters)
    out.png("classes.png", result.rgb())
    counts = np.bincount(result.classes.reshape(-1), minlength=5)
    print(" ".join(f"{name}={int(c)}" for name, c in zip(("unchanged", "step", "impulse", "cycle", "complex"), counts)))


def _cmd_reactiv(args) -> None:
    stack = load_stack(args.stack)
    out = _Outputs(args.out, _inputs_of(args.stack))
    comp = compose_reactiv(stack, mode=args.mode, tau=_tau(args), looks=args.looks, prescreen=not args.no_prescreen)
    out.png("reactiv.png", comp.rgb)
    out.raster("time_index.rst", comp.time_index)
    out.raster("saturation.rst", comp.saturation)
    out.png("colorbar.png", colorbar())
    print(f"mode={comp.mode} pixels_with_time={int((comp.time_index > 0).sum())}")


def _cmd_roc(args) -> None:
    scores = read_raster(args.scores)
    truth = np.asarray(read_raster(args.truth)) != 0
    curve = roc_curve(scores, truth)
    print(f"AUC={curve.auc:.6f}")


_COMMANDS = {
    "simulate": _cmd_simulate,
    "detect-pair": _cmd_detect_pair,
    "monitor": _cmd_monitor,
    "classify": _cmd_classify,
    "reactiv": _cmd_reactiv,
    "roc": _cmd_roc,
}


def main(argv=None) -> int:
    """Run the CLI and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:
        # --help and --version
        return 0 if exc.code in (0, None) else 1
    try:
        _COMMANDS[args.command](args)
    except (SarChangeError, OSError) as exc:
        print(f"sarchange {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
