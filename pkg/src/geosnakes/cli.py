"""Command-line front end: ``segment``, ``analyze``, ``compare`` and ``synth``.

Every configuration field has a kebab-case flag. ``--config FILE`` reads
flat ``key=value`` lines (``#`` starts a comment); explicit flags override the
file, which overrides the defaults. A run's ``summary.txt`` is itself a valid
config file, so ``segment --config run/summary.txt`` repeats the run.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .diagnostics import (
    DEFAULT_PSP_RATIO,
    classify_contours,
    dice_coefficient,
    find_critical_points,
    write_critical_points,
)
from .edges import EdgeModelConfig, build_edge_model
from .fields import FieldError, gradient_central
from .flows import FlowParams
from .imageio import ImageReadError, read_image, render_overlay, to_uint8, write_gray, write_rgb_png
from .levelset import (
    Circle,
    Polygon,
    Rectangle,
    extract_contour,
    hausdorff_distance,
    read_contours,
    write_contours,
)
from .scheduler import METHODS, EvolutionError, ScheduleConfig, run_method
from .synth import KINDS, SynthError, SyntheticSpec, generate, ground_truth_level_set, standard_initializations

logger = logging.getLogger("geosnakes")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2
# PSP tolerance is this fraction of the largest normal sum seen in the run
PSP_TOL_FRACTION = 0.05

_SECTIONS = {
    "edge": EdgeModelConfig,
    "flow": FlowParams,
    "schedule": ScheduleConfig,
    "synth": SyntheticSpec,
}


class UsageError(ValueError):
    pass


def _config_keys() -> dict[str, tuple[str, str, type]]:
    """Flat key -> (section, field, type) for every configurable field."""
    keys = {}
    for section, cls in _SECTIONS.items():
        for f in dataclasses.fields(cls):
            key = "synthetic" if (section, f.name) == ("synth", "kind") else f.name
            typ = type(f.default)
            keys[key] = (section, f.name, typ)
    return keys


CONFIG_KEYS = _config_keys()
TOP_KEYS = ("method", "input", "init", "psp_ratio")


# --- initialisation specs ------------------------------------------------------


def parse_init(text: str) -> list:
    """``circle:cx,cy,r``, ``rect:x0,y0,x1,y1`` or ``poly:x,y,x,y,...``, joined by ``;``."""
    shapes = []
    for part in filter(None, (p.strip() for p in text.split(";"))):
        name, _, args = part.partition(":")
        try:
            vals = [float(v) for v in args.split(",")]
        except ValueError:
            raise UsageError(f"bad numbers in init shape {part!r}") from None
        if name == "circle" and len(vals) == 3:
            shapes.append(Circle(*vals))
        elif name == "rect" and len(vals) == 4:
            shapes.append(Rectangle(*vals))
        elif name == "poly" and len(vals) >= 6 and len(vals) % 2 == 0:
            shapes.append(Polygon(tuple(zip(vals[::2], vals[1::2]))))
        else:
            raise UsageError(f"cannot parse init shape {part!r}")
    if not shapes:
        raise UsageError("init spec is empty")
    return shapes


def format_init(shapes) -> str:
    parts = []
    for s in shapes:
        if isinstance(s, Circle):
            parts.append(f"circle:{s.cx!r},{s.cy!r},{s.r!r}")
        elif isinstance(s, Rectangle):
            parts.append(f"rect:{s.x0!r},{s.y0!r},{s.x1!r},{s.y1!r}")
        else:
            parts.append("poly:" + ",".join(f"{x!r},{y!r}" for x, y in s.vertices))
    return ";".join(parts)


# --- manifest ------------------------------------------------------------------


@dataclass
class RunManifest:
    method: str = "geosnakes_alt"
    input: str | None = None
    synthetic: SyntheticSpec | None = None
    edge: EdgeModelConfig = field(default_factory=EdgeModelConfig)
    flow: FlowParams = field(default_factory=FlowParams)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    init: str | None = None
    psp_ratio: float = DEFAULT_PSP_RATIO
    out: Path | None = None

    def validate(self) -> None:
        if (self.input is None) == (self.synthetic is None):
            raise UsageError("exactly one of --input and --synthetic is required")
        if self.method not in METHODS:
            raise UsageError(f"unknown method {self.method!r}; expected one of {', '.join(METHODS)}")
        try:
            self.edge.validate()
            self.flow.validate()
            self.schedule.validate()
            if self.synthetic is not None:
                self.synthetic.validate()
        except (FieldError, SynthError) as exc:
            raise UsageError(str(exc)) from exc

    def to_text(self) -> str:
        lines = [f"method={self.method}"]
        if self.input is not None:
            lines.append(f"input={self.input}")
        if self.init is not None:
            lines.append(f"init={self.init}")
        lines.append(f"psp_ratio={self.psp_ratio!r}")
        for key, (section, name, _) in CONFIG_KEYS.items():
            obj = getattr(self, section) if section != "synth" else self.synthetic
            if obj is None:
                continue
            value = getattr(obj, name)
            lines.append(f"{key}={value!r}" if isinstance(value, float) else f"{key}={value}")
        return "\n".join(lines) + "\n"


def _coerce(key: str, value: str, typ: type):
    try:
        if typ is bool:
            return value.strip().lower() in ("1", "true", "yes")
        if typ is int:
            return int(value)
        if typ is float:
            return float(value)
        return value
    except ValueError:
        raise UsageError(f"bad value for {key}: {value!r}") from None


def read_config_file(path) -> dict[str, str]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    values = {}
    for n, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or (key not in CONFIG_KEYS and key not in TOP_KEYS):
            raise UsageError(f"{path}:{n}: unknown or malformed config line {raw!r}")
        values[key] = value.strip()
    return values


def build_manifest(values: dict[str, str], out=None) -> RunManifest:
    m = RunManifest(out=Path(out) if out is not None else None)
    m.method = values.get("method", m.method)
    m.input = values.get("input")
    m.init = values.get("init")
    if "psp_ratio" in values:
        m.psp_ratio = _coerce("psp_ratio", values["psp_ratio"], float)
    synth_keys = {k for k, (s, _, _) in CONFIG_KEYS.items() if s == "synth"}
    if "synthetic" in values:
        m.synthetic = SyntheticSpec()
    elif synth_keys & values.keys():
        raise UsageError("synthetic-image options need --synthetic KIND")
    for key, value in values.items():
        if key not in CONFIG_KEYS:
            continue
        section, name, typ = CONFIG_KEYS[key]
        obj = m.synthetic if section == "synth" else getattr(m, section)
        setattr(obj, name, _coerce(key, value, typ))
    m.validate()
    if m.init is not None:
        parse_init(m.init)
    return m


# --- run helpers ---------------------------------------------------------------


def load_scene(m: RunManifest):
    """Image, optional ground-truth level set and default initial shapes."""
    if m.synthetic is not None:
        image, _ = generate(m.synthetic)
        truth = ground_truth_level_set(m.synthetic)
        default_init = standard_initializations(m.synthetic.kind, m.synthetic.width, m.synthetic.height)
        return image, truth, default_init
    image = read_image(m.input)
    h, w = image.shape
    return image, None, [Circle(w / 2, h / 2, 0.35 * min(w, h))]


def _write_snapshot(run_dir: Path, image: np.ndarray, iteration: int, contours) -> None:
    snap = run_dir / "snapshots"
    snap.mkdir(exist_ok=True)
    cpath = snap / f"contours_{iteration:06d}.txt"
    write_contours(cpath, contours)
    render_snapshot(image, cpath)


def render_snapshot(image: np.ndarray, contour_path: Path) -> Path:
    """Render ``contours_NNNNNN.txt`` to the matching ``snapshot_NNNNNN.png``."""
    contour_path = Path(contour_path)
    png = contour_path.with_name(contour_path.stem.replace("contours_", "snapshot_") + ".png")
    write_rgb_png(png, render_overlay(image, read_contours(contour_path)))
    return png


def render_run(run_dir) -> list[Path]:
    """Re-render every snapshot PNG of a finished run from its saved files."""
    run_dir = Path(run_dir)
    image = read_image(run_dir / "input.pgm")
    return [render_snapshot(image, p) for p in sorted((run_dir / "snapshots").glob("contours_*.txt"))]


@dataclass
class RunOutcome:
    method: str
    dice: float
    hausdorff: float
    iterations: int
    label: str
    seconds: float
    status: str = "ok"


def execute(m: RunManifest, run_dir: Path) -> RunOutcome:
    """Run one manifest and write all artifacts into ``run_dir``."""
    run_dir.mkdir(parents=True, exist_ok=True)
    image, truth, default_init = load_scene(m)
    shapes = parse_init(m.init) if m.init else default_init
    if m.init is None:
        m.init = format_init(shapes)
    write_gray(run_dir / "input.pgm", to_uint8(image, 0.0, 255.0) if image.min() >= 0 and image.max() <= 255
               else to_uint8(image))
    saved_image = read_image(run_dir / "input.pgm")

    t0 = time.perf_counter()
    result = run_method(m.method, image, m.edge, m.flow, m.schedule, shapes)
    seconds = time.perf_counter() - t0

    for iteration, contours in result.snapshots:
        _write_snapshot(run_dir, saved_image, iteration, contours)
    write_contours(run_dir / "final_contours.txt", result.contours)
    result.trace.write_csv(run_dir / "trace.csv")
    result.trace.write_phases_csv(run_dir / "phases.csv")

    edge = result.edge
    max_normal = float(result.trace.column("normal_sum").max())
    tol = max(PSP_TOL_FRACTION * max_normal, 1e-12)
    closed = [c for c in result.contours if c.closed]
    report = classify_contours(closed, edge.g, edge.F, result.phi, tol, m.psp_ratio) if closed else None

    dice = hd = math.nan
    if truth is not None:
        seg = result.phi < 0
        dice = dice_coefficient(seg, truth < 0)
        hd = hausdorff_distance(result.contours, extract_contour(truth))
    label = report.label if report is not None else "vanished"

    lines = [m.to_text(), "# --- phases: phase start_iter end_iter iterations converged seconds"]
    for p in result.trace.phases:
        lines.append(f"# {p.phase} {p.start_iter} {p.end_iter} {p.end_iter - p.start_iter} "
                     f"{p.converged} {p.seconds:.3f}")
    lines.append(f"# total_iterations {result.trace.total_iterations}")
    if result.vanished:
        lines.append(f"# contour vanished at iteration {result.trace.vanished_at}")
    lines.append(f"# --- stationarity (tol = {PSP_TOL_FRACTION} x max normal sum)")
    if report is not None:
        lines.extend(f"# psp.{ln}" for ln in report.to_text().splitlines())
    else:
        lines.append("# psp.label=vanished")
    if truth is not None:
        lines.append(f"# dice={dice!r}")
        lines.append(f"# hausdorff={hd!r}")
    lines.append(f"# wall_seconds={seconds:.3f}")
    (run_dir / "summary.txt").write_text("\n".join(lines) + "\n")
    return RunOutcome(m.method, dice, hd, result.trace.total_iterations, label, seconds)


# --- argument parsing ----------------------------------------------------------


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value file overriding the defaults")
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--input", help="input image (PGM or PNG)")
    p.add_argument("--synthetic", choices=KINDS, help="use a generated scene instead of --input")
    p.add_argument("--init", help="initial shapes, e.g. 'circle:40,40,28' or 'rect:5,5,75,75'")
    p.add_argument("--psp-ratio", type=float)
    for key, (section, _, typ) in CONFIG_KEYS.items():
        if key == "synthetic":
            continue
        p.add_argument("--" + key.replace("_", "-"), type=typ, metavar=typ.__name__.upper(),
                       help=f"{section} setting")


def _collect(args: argparse.Namespace) -> dict[str, str]:
    values = read_config_file(args.config) if args.config else {}
    for key in list(CONFIG_KEYS) + list(TOP_KEYS):
        v = getattr(args, key, None)
        if v is not None:
            values[key] = repr(v) if isinstance(v, float) else str(v)
    if args.input is not None:
        values.pop("synthetic", None)
    if args.synthetic is not None:
        values.pop("input", None)
    return values


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="geosnakes", description="Edge-based active contours with equilibrium flow.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True)

    seg = sub.add_parser("segment", help="evolve a contour and write all run artifacts")
    _add_config_flags(seg)
    seg.add_argument("--out", required=True, help="output directory")

    ana = sub.add_parser("analyze", help="edge indicator, force directions and critical points")
    ana.add_argument("--config")
    ana.add_argument("--input")
    ana.add_argument("--synthetic", choices=KINDS)
    ana.add_argument("--step", type=int, default=2, help="subsampling of the quiver CSV")
    for key, (section, _, typ) in CONFIG_KEYS.items():
        if section in ("edge", "synth") and key != "synthetic":
            ana.add_argument("--" + key.replace("_", "-"), type=typ, metavar=typ.__name__.upper())
    ana.add_argument("--out", required=True)

    cmp_ = sub.add_parser("compare", help="run several manifests on one input and tabulate metrics")
    cmp_.add_argument("manifests", nargs="*", help="key=value manifest files")
    cmp_.add_argument("--methods", help="comma-separated methods applied to --base or the flags below")
    cmp_.add_argument("--base", help="manifest used as the template for --methods")
    cmp_.add_argument("--synthetic", choices=KINDS)
    cmp_.add_argument("--input")
    cmp_.add_argument("--out", required=True)

    syn = sub.add_parser("synth", help="write a synthetic image and its mask")
    syn.add_argument("kind", choices=KINDS)
    for f in dataclasses.fields(SyntheticSpec):
        if f.name != "kind":
            syn.add_argument("--" + f.name.replace("_", "-"), type=type(f.default), default=f.default)
    syn.add_argument("--format", choices=("pgm", "png"), default="pgm")
    syn.add_argument("--out", required=True)
    return parser


def cmd_segment(args) -> int:
    m = build_manifest(_collect(args), args.out)
    out = execute(m, Path(args.out))
    logger.info("%s: %d iterations, %s", m.method, out.iterations, out.label)
    print(f"wrote {args.out} ({out.iterations} iterations, {out.label})")
    return EXIT_OK


def cmd_analyze(args) -> int:
    values = read_config_file(args.config) if args.config else {}
    for key in CONFIG_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = repr(v) if isinstance(v, float) else str(v)
    if args.input is not None:
        values["input"] = args.input
        values.pop("synthetic", None)
    m = build_manifest(values)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    image, _, _ = load_scene(m)
    edge = build_edge_model(image, m.edge)
    write_gray(out / "g.png", to_uint8(edge.g, 0.0, 1.0))

    grad = gradient_central(edge.g)
    gx, gy = grad.u, grad.v
    mag = np.hypot(gx, gy)
    safe = np.where(mag > 0, mag, 1.0)
    u = np.where(mag > 0, -gx / safe, 0.0)
    v = np.where(mag > 0, -gy / safe, 0.0)
    step = max(1, args.step)
    with open(out / "gradient.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y", "u", "v"])
        for y in range(0, image.shape[0], step):
            for x in range(0, image.shape[1], step):
                w.writerow([x, y, repr(float(u[y, x])), repr(float(v[y, x]))])
    write_critical_points(out / "critical_points.csv", find_critical_points(edge.g))
    print(f"wrote {out}")
    return EXIT_OK


def cmd_compare(args) -> int:
    manifests = []
    for path in args.manifests:
        manifests.append(build_manifest(read_config_file(path)))
    if args.methods:
        base = read_config_file(args.base) if args.base else {}
        if args.synthetic:
            base["synthetic"] = args.synthetic
            base.pop("input", None)
        if args.input:
            base["input"] = args.input
            base.pop("synthetic", None)
        for method in filter(None, (s.strip() for s in args.methods.split(","))):
            manifests.append(build_manifest({**base, "method": method}))
    if len(manifests) < 2:
        raise UsageError("compare needs at least two manifests")
    scenes = {(m.input, dataclasses.astuple(m.synthetic) if m.synthetic else None) for m in manifests}
    if len(scenes) > 1:
        raise UsageError("all compared manifests must use the same input")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    failed = False
    for i, m in enumerate(manifests):
        run_dir = out / f"{i:02d}_{m.method}"
        try:
            rows.append(execute(m, run_dir))
        except (EvolutionError, FieldError, RuntimeError) as exc:
            failed = True
            logger.error("%s failed: %s", m.method, exc)
            rows.append(RunOutcome(m.method, math.nan, math.nan, 0, "error", 0.0, f"error: {exc}"))
        _write_comparison(out / "comparison.csv", rows)
    print(f"wrote {out / 'comparison.csv'}")
    return EXIT_RUNTIME if failed else EXIT_OK


def _write_comparison(path: Path, rows: Sequence[RunOutcome]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "dice", "hausdorff", "iterations", "psp", "seconds", "status"])
        for r in rows:
            w.writerow([r.method, repr(r.dice), repr(r.hausdorff), r.iterations, r.label,
                        f"{r.seconds:.3f}", r.status])


def cmd_synth(args) -> int:
    kwargs = {f.name: getattr(args, f.name) for f in dataclasses.fields(SyntheticSpec) if f.name != "kind"}
    try:
        spec = SyntheticSpec(kind=args.kind, **kwargs)
        image, mask = generate(spec)
    except SynthError as exc:
        raise UsageError(str(exc)) from exc
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ext = "." + args.format
    write_gray(out / f"{args.kind}{ext}", np.clip(np.rint(image), 0, 255).astype(np.uint8))
    write_gray(out / f"{args.kind}_mask{ext}", (mask * 255).astype(np.uint8))
    print(f"wrote {out}")
    return EXIT_OK


COMMANDS = {"segment": cmd_segment, "analyze": cmd_analyze, "compare": cmd_compare, "synth": cmd_synth}


def main(argv: Sequence[str] | None = None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.verb](args)
    except (UsageError, FileNotFoundError, ImageReadError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (EvolutionError, FieldError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
