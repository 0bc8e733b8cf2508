"""Alternating curve evolution and single-flow drivers.

A run builds the edge model once, then evolves the level set in phases.
Phase ``c`` (counting from 0) runs the descent flow when ``c`` is even and
the equilibrium flow when it is odd. A phase ends when the contour stops
moving or after ``max_iteration`` steps. ``motion_tolerance`` is a contour
displacement in pixels accumulated over 10 iterations, so the per-iteration
test threshold is a tenth of it.
"""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .edges import EdgeModel, EdgeModelConfig, build_edge_model
from .fields import FieldError, VectorField, bilinear_sample
from .flows import SPEEDS, FlowContext, FlowParams
from .levelset import Contour, curvature, extract_contour, init_from_shapes, reinitialize

logger = logging.getLogger(__name__)

DESCENT = "descent"
EF = "EF"
METHODS = ("geosnakes_alt", "gac", "gac_balloon", "gac_adaptive", "chan_vese")
# closed contours enclosing less than this area (px^2) have collapsed below the grid
COLLAPSE_AREA = 1.0


class EvolutionError(RuntimeError):
    """The level set diverged or the contour vanished."""

    def __init__(self, message: str, cycle: int | None = None, iteration: int | None = None):
        super().__init__(message)
        self.cycle = cycle
        self.iteration = iteration


@dataclass
class ScheduleConfig:
    max_cycle: int = 3
    max_iteration: int = 3000
    motion_tolerance: float = 0.003
    window: int = 10
    min_iterations: int = 20
    reinit_every: int = 20
    reinit_iterations: int = 20
    snapshot_every: int = 100
    trace_every: int = 1

    def validate(self) -> None:
        if self.max_cycle < 1:
            raise FieldError("max_cycle must be >= 1")
        if self.max_iteration < 1:
            raise FieldError("max_iteration must be >= 1")
        if not self.motion_tolerance > 0:
            raise FieldError("motion_tolerance must be > 0")
        if self.window < 10:
            raise FieldError("the convergence window must span at least 10 iterations")
        if self.reinit_every < 0 or self.snapshot_every < 0 or self.trace_every < 1:
            raise FieldError("cadences must be non-negative (trace_every >= 1)")


@dataclass
class TraceRecord:
    iteration: int
    phase: str
    tangential_sum: float
    normal_sum: float
    points: int
    mean_disp: float


@dataclass
class PhaseRecord:
    phase: str
    start_iter: int
    end_iter: int
    converged: bool
    seconds: float = 0.0


@dataclass
class EvolutionTrace:
    records: list[TraceRecord] = field(default_factory=list)
    phases: list[PhaseRecord] = field(default_factory=list)
    vanished_at: int | None = None

    @property
    def total_iterations(self) -> int:
        return self.phases[-1].end_iter if self.phases else 0

    def boundaries(self) -> list[int]:
        return [p.end_iter for p in self.phases]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iter", "phase", "tangential_sum", "normal_sum", "points", "mean_disp"])
            for r in self.records:
                w.writerow([r.iteration, r.phase, repr(r.tangential_sum), repr(r.normal_sum),
                            r.points, repr(r.mean_disp)])

    def write_phases_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["phase", "start_iter", "end_iter"])
            for p in self.phases:
                w.writerow([p.phase, p.start_iter, p.end_iter])

    @classmethod
    def read_csv(cls, path, phases_path=None) -> EvolutionTrace:
        trace = cls()
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                trace.records.append(TraceRecord(
                    int(row["iter"]), row["phase"], float(row["tangential_sum"]),
                    float(row["normal_sum"]), int(row["points"]), float(row["mean_disp"])))
        if phases_path is not None:
            with open(phases_path, newline="") as fh:
                for row in csv.DictReader(fh):
                    trace.phases.append(PhaseRecord(row["phase"], int(row["start_iter"]),
                                                    int(row["end_iter"]), converged=False))
        return trace


@dataclass
class EvolutionResult:
    phi: np.ndarray
    contours: list[Contour]
    trace: EvolutionTrace
    edge: EdgeModel | None = None
    snapshots: list[tuple[int, list[Contour]]] = field(default_factory=list)

    @property
    def vanished(self) -> bool:
        return self.trace.vanished_at is not None


def detect_convergence(displacements: Sequence[float], tolerance: float) -> bool:
    """True when the mean per-iteration displacement over the window is below ``tolerance``."""
    if len(displacements) < 10:
        raise ValueError("the convergence window must hold at least 10 displacements")
    return float(np.mean(displacements)) < tolerance


def contour_velocities(contours: Sequence[Contour], g: np.ndarray, F: VectorField,
                       kappa: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-point tangential ``|<F, T>|`` and normal ``|g kappa + <F, N>|`` residuals.

    ``T`` is the discrete contour tangent and ``N`` its +90 degree rotation,
    the inward normal; ``g``, ``F`` and ``kappa`` are sampled bilinearly.
    """
    if not contours:
        return np.zeros(0), np.zeros(0)
    tan, nor = [], []
    for c in contours:
        t = c.tangents()
        n = c.inward_normals()
        fu = bilinear_sample(F.u, c.x, c.y)
        fv = bilinear_sample(F.v, c.x, c.y)
        gs = bilinear_sample(g, c.x, c.y)
        ks = bilinear_sample(kappa, c.x, c.y)
        tan.append(np.abs(fu * t[:, 0] + fv * t[:, 1]))
        nor.append(np.abs(gs * ks + fu * n[:, 0] + fv * n[:, 1]))
    return np.concatenate(tan), np.concatenate(nor)


def _collapsed(phi: np.ndarray, contours: Sequence[Contour] | None) -> bool:
    """Uniform sign, or closed contours that together enclose under ``COLLAPSE_AREA``.

    A one-pixel dent in ``phi`` has zero central gradient, so curvature
    motion cannot remove it; it is treated as a vanished contour.
    """
    if phi.min() >= 0 or phi.max() <= 0:
        return True
    if not contours or not all(c.closed for c in contours):
        return False
    return sum(abs(c.signed_area()) for c in contours) < COLLAPSE_AREA


def _front_motion(old: np.ndarray, new: np.ndarray, contours: Sequence[Contour]) -> float:
    """Mean normal displacement of the zero level set, ``|dphi| / |grad phi|`` on the contour."""
    pts = [c.points for c in contours if len(c.points)]
    if not pts:
        return 0.0
    xy = np.concatenate(pts)
    gy, gx = np.gradient(old)
    grad = np.hypot(bilinear_sample(gx, xy[:, 0], xy[:, 1]), bilinear_sample(gy, xy[:, 0], xy[:, 1]))
    change = np.abs(bilinear_sample(new - old, xy[:, 0], xy[:, 1]))
    return float(np.mean(change / np.maximum(grad, 1e-2)))


class Evolver:
    """Steps one level set through a sequence of phases, recording the trace."""

    def __init__(self, phi: np.ndarray, g: np.ndarray, F: VectorField, params: FlowParams,
                 schedule: ScheduleConfig, image: np.ndarray | None = None,
                 on_snapshot: Callable[[int, np.ndarray], None] | None = None):
        params.validate()
        schedule.validate()
        self.phi = np.array(phi, dtype=np.float64)
        self.g = g
        self.F = F
        self.image = image
        self.params = params
        self.schedule = schedule
        self.on_snapshot = on_snapshot
        self.iteration = 0
        self.trace = EvolutionTrace()
        self.snapshots: list[tuple[int, list[Contour]]] = []

    def _record(self, phase: str, disp: float) -> list[Contour]:
        contours = extract_contour(self.phi)
        tan, nor = contour_velocities(contours, self.g, self.F, curvature(self.phi))
        self.trace.records.append(TraceRecord(self.iteration, phase, float(tan.sum()),
                                              float(nor.sum()), int(tan.size), disp))
        return contours

    def _snapshot(self, contours=None) -> None:
        contours = extract_contour(self.phi) if contours is None else contours
        self.snapshots.append((self.iteration, contours))
        if self.on_snapshot is not None:
            self.on_snapshot(self.iteration, self.phi)

    def run_phase(self, kind: str, tag: str, cycle: int = 0, vanish_ok: bool = False) -> PhaseRecord:
        speed_fn = SPEEDS[kind]
        sched = self.schedule
        start = self.iteration
        t0 = time.perf_counter()
        window: list[float] = []
        converged = False
        contours = None
        if not self.trace.records:
            contours = self._record(tag, 0.0)
            self._snapshot(contours)
        for k in range(sched.max_iteration):
            if contours is None:
                contours = extract_contour(self.phi)
            ctx = FlowContext(self.g, self.F, self.phi, self.params, self.image)
            new = self.phi + self.params.dt * speed_fn(ctx)
            if not np.all(np.isfinite(new)):
                raise EvolutionError("level set became non-finite", cycle, self.iteration)
            disp = _front_motion(self.phi, new, contours)
            self.phi = new
            self.iteration += 1
            if sched.reinit_every and self.iteration % sched.reinit_every == 0:
                if self.phi.min() < 0 < self.phi.max():
                    self.phi = reinitialize(self.phi, sched.reinit_iterations)
            contours = None
            if self.iteration % sched.trace_every == 0:
                contours = self._record(tag, disp)
            if sched.snapshot_every and self.iteration % sched.snapshot_every == 0:
                self._snapshot(contours)
            if _collapsed(self.phi, contours):
                self.trace.vanished_at = self.iteration
                if vanish_ok:
                    logger.info("contour vanished at iteration %d", self.iteration)
                    break
                raise EvolutionError(
                    f"contour vanished in cycle {cycle} at iteration {self.iteration}",
                    cycle, self.iteration)
            window.append(disp)
            if len(window) > sched.window:
                window.pop(0)
            if (k + 1 >= sched.min_iterations and len(window) == sched.window
                    and detect_convergence(window, sched.motion_tolerance / 10.0)):
                converged = True
                break
        if self.iteration % sched.trace_every != 0:
            self._record(tag, window[-1] if window else 0.0)
        rec = PhaseRecord(tag, start, self.iteration, converged, time.perf_counter() - t0)
        self.trace.phases.append(rec)
        logger.info("%s phase: iterations %d-%d (%s)", tag, start, self.iteration,
                    "converged" if converged else "iteration cap")
        return rec

    def result(self, edge: EdgeModel | None = None) -> EvolutionResult:
        if not self.snapshots or self.snapshots[-1][0] != self.iteration:
            self._snapshot()
        return EvolutionResult(self.phi, extract_contour(self.phi), self.trace, edge, self.snapshots)


def _initial_phi(init_shapes, shape) -> np.ndarray:
    if isinstance(init_shapes, np.ndarray):
        if init_shapes.shape != shape:
            raise FieldError(f"initial level set has shape {init_shapes.shape}, image {shape}")
        return init_shapes.astype(np.float64)
    return init_from_shapes(init_shapes, shape[1], shape[0])


def run_alternating(image, edge_cfg: EdgeModelConfig, flow_params: FlowParams,
                    schedule: ScheduleConfig, init_shapes, edge: EdgeModel | None = None,
                    on_snapshot=None) -> EvolutionResult:
    """Alternate descent and equilibrium-flow phases, ``schedule.max_cycle`` phases in total."""
    edge = edge or build_edge_model(image, edge_cfg)
    phi = _initial_phi(init_shapes, edge.g.shape)
    ev = Evolver(phi, edge.g, edge.F, flow_params, schedule, edge.image, on_snapshot)
    for cycle in range(schedule.max_cycle):
        if cycle % 2 == 0:
            ev.run_phase("descent", DESCENT, cycle)
        else:
            ev.run_phase("ef", EF, cycle)
    return ev.result(edge)


def run_single_flow(image, edge_cfg: EdgeModelConfig, flow_params: FlowParams,
                    schedule: ScheduleConfig, init_shapes, flow_kind: str,
                    edge: EdgeModel | None = None, on_snapshot=None) -> EvolutionResult:
    """One phase of a baseline flow; a vanishing contour is reported, not raised."""
    if flow_kind not in ("gac", "gac_balloon", "gac_adaptive", "chan_vese"):
        raise ValueError(f"unknown flow kind {flow_kind!r}")
    edge = edge or build_edge_model(image, edge_cfg)
    phi = _initial_phi(init_shapes, edge.g.shape)
    ev = Evolver(phi, edge.g, edge.F, flow_params, schedule, edge.image, on_snapshot)
    ev.run_phase(flow_kind, DESCENT, vanish_ok=True)
    return ev.result(edge)


def run_method(method: str, image, edge_cfg: EdgeModelConfig, flow_params: FlowParams,
               schedule: ScheduleConfig, init_shapes, edge: EdgeModel | None = None,
               on_snapshot=None) -> EvolutionResult:
    if method == "geosnakes_alt":
        return run_alternating(image, edge_cfg, flow_params, schedule, init_shapes, edge, on_snapshot)
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    return run_single_flow(image, edge_cfg, flow_params, schedule, init_shapes, method, edge, on_snapshot)
