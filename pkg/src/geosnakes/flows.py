"""Per-iteration level-set speeds.

Every function returns the rate ``phi_t`` for one explicit step
``phi <- phi + dt * speed``. With the inside-negative convention a positive
rate moves the front inward (shrinks the region).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import (
    FieldError,
    VectorField,
    dot_field,
    gradient_central,
    rotate90,
    upwind_advection,
    upwind_gradient_magnitude,
)
from .levelset import central_gradient_norm, curvature, dirac_eps, heaviside_eps

CV_EPS = 1.5
# region statistics work on intensities rescaled from [0, 255] to [0, 1]
CV_INTENSITY_SCALE = 255.0


class FlowError(RuntimeError):
    """A speed evaluation produced unusable values."""


@dataclass
class FlowParams:
    dt: float = 0.1
    balloon: float = 1.0
    ada_lambda: float = 1.0
    ada_beta: float = 0.1
    cv_lambda1: float = 1.0
    cv_lambda2: float = 1.0
    cv_mu: float = 0.1
    cv_nu: float = 0.0
    # time gain of the region flow; its terms are O(1e-2) after intensity scaling
    cv_rate: float = 10.0
    rotation_direction: int = 1

    def validate(self) -> None:
        if not 0 < self.dt <= 0.25:
            raise FieldError(f"dt must lie in (0, 0.25], got {self.dt}")
        if self.rotation_direction not in (1, -1):
            raise FieldError(f"rotation_direction must be +1 or -1, got {self.rotation_direction}")
        if not 0 < self.cv_rate <= 20:
            raise FieldError(f"cv_rate must lie in (0, 20], got {self.cv_rate}")


@dataclass
class FlowContext:
    g: np.ndarray
    F: VectorField
    phi: np.ndarray
    params: FlowParams
    image: np.ndarray | None = None

    def __post_init__(self):
        shapes = {self.g.shape, self.F.shape, self.phi.shape}
        if self.image is not None:
            shapes.add(self.image.shape)
        if len(shapes) != 1:
            raise FieldError(f"flow context fields disagree in shape: {sorted(shapes)}")


def _finite(speed: np.ndarray, name: str) -> np.ndarray:
    if not np.all(np.isfinite(speed)):
        raise FlowError(f"{name} speed is not finite")
    return speed


def _smoothing_and_attraction(ctx: FlowContext) -> np.ndarray:
    kappa = curvature(ctx.phi)
    return ctx.g * kappa * central_gradient_norm(ctx.phi) + upwind_advection(ctx.phi, ctx.F)


def geosnakes_descent_speed(ctx: FlowContext) -> np.ndarray:
    """Normal part of the descent flow: ``g kappa |grad phi| - <F, grad phi>``.

    The curvature term uses central differences; the attraction term
    transports ``phi`` along ``F`` (roughly ``-grad g``) with upwinding, which
    pulls the front into the valleys of ``g``. The tangential part of the
    flow has no effect on the level set and is deliberately absent.
    """
    return _finite(_smoothing_and_attraction(ctx), "descent")


def equilibrium_flow_speed(ctx: FlowContext, upwind: bool = True) -> np.ndarray:
    """Equilibrium flow: transport of ``phi`` along the rotated force.

    The normal speed ``<F, T>`` equals ``<R^T F, N>``, so the flow is plain
    advection by ``rotate90(F, direction)``. ``upwind=False`` gives the
    central-difference value, exactly odd in the rotation direction, which is
    useful for analysis but not stable for time stepping.
    """
    W = rotate90(ctx.F, ctx.params.rotation_direction)
    if upwind:
        speed = upwind_advection(ctx.phi, W)
    else:
        grad = np.gradient(ctx.phi)
        speed = -(W.u * grad[1] + W.v * grad[0])
    return _finite(speed, "equilibrium flow")


def adaptive_balloon_weight(ctx: FlowContext) -> np.ndarray:
    """``lambda * beta * (1 - |<F_hat, N>|)``: zero where the force is normal.

    Where ``F`` or the level-set gradient vanishes the full weight applies.
    """
    p = ctx.params
    grad = gradient_central(ctx.phi)
    denom = ctx.F.norm() * grad.norm()
    # guarded ratio so a force exactly along the normal gives exactly 1
    align = np.abs(np.divide(dot_field(ctx.F, grad), denom, out=np.zeros_like(denom), where=denom > 0))
    return p.ada_lambda * p.ada_beta * (1.0 - np.minimum(align, 1.0))


def balloon_term(ctx: FlowContext, weight) -> np.ndarray:
    """``weight * g * |grad phi|`` with Godunov upwinding; positive shrinks."""
    w = np.broadcast_to(np.asarray(weight, dtype=np.float64), ctx.phi.shape)
    return w * ctx.g * upwind_gradient_magnitude(ctx.phi, w)


def gac_baseline_speed(ctx: FlowContext, with_balloon: bool = False, adaptive: bool = False) -> np.ndarray:
    speed = _smoothing_and_attraction(ctx)
    if adaptive:
        speed = speed + balloon_term(ctx, adaptive_balloon_weight(ctx))
    elif with_balloon:
        speed = speed + balloon_term(ctx, ctx.params.balloon)
    return _finite(speed, "GAC")


def region_means(image: np.ndarray, phi: np.ndarray, eps: float = CV_EPS) -> tuple[float, float]:
    """Heaviside-weighted mean intensity inside (``phi < 0``) and outside."""
    if phi.min() >= 0 or phi.max() <= 0:
        raise FlowError("region means need both an inside and an outside region")
    h_in = heaviside_eps(-phi, eps)
    h_out = 1.0 - h_in
    c1 = float(np.sum(image * h_in) / np.sum(h_in))
    c2 = float(np.sum(image * h_out) / np.sum(h_out))
    return c1, c2


def chan_vese_speed(ctx: FlowContext) -> np.ndarray:
    """Two-phase piecewise-constant region flow on intensities scaled to [0, 1].

    ``delta(phi) * (mu kappa + nu + l1 (I - c1)^2 - l2 (I - c2)^2)`` with
    ``c1`` the inside mean. The signs are those of the classical model
    rewritten for inside-negative ``phi``.
    """
    if ctx.image is None:
        raise FlowError("the region flow needs the intensity image")
    p = ctx.params
    image = ctx.image / CV_INTENSITY_SCALE
    c1, c2 = region_means(image, ctx.phi)
    data = p.cv_lambda1 * (image - c1) ** 2 - p.cv_lambda2 * (image - c2) ** 2
    speed = dirac_eps(ctx.phi, CV_EPS) * (p.cv_mu * curvature(ctx.phi) + p.cv_nu + data)
    return _finite(speed, "Chan-Vese")


SPEEDS = {
    "descent": geosnakes_descent_speed,
    "ef": equilibrium_flow_speed,
    "gac": lambda ctx: gac_baseline_speed(ctx),
    "gac_balloon": lambda ctx: gac_baseline_speed(ctx, with_balloon=True),
    "gac_adaptive": lambda ctx: gac_baseline_speed(ctx, adaptive=True),
    "chan_vese": lambda ctx: ctx.params.cv_rate * chan_vese_speed(ctx),
}
