"""Conjugate-gradient descent on the product manifold and the penalty outer loop.

The inner solver (PCGD) iterates conjugate direction -> Armijo backtracking
-> retraction on the penalized objective at fixed rho. The outer loop (PPM)
escalates rho whenever the measured constraint violation sigma fails to
shrink below a threshold eta, until the iterate is feasible to sigma_min
and has stopped moving.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import objective as obj
from .geometry import (
    DegenerateRetractionError,
    TangentVector,
    inner,
    retract,
    riemannian_gradient,
    transport,
)
from .model import ChannelScenario, DesignPoint, channel
from .objective import ObjectiveContext, PenaltyState

__all__ = [
    "PcgdConfig",
    "PpmConfig",
    "InnerTrace",
    "SolveTrace",
    "LineSearchError",
    "LineSearchResult",
    "pr_beta",
    "descent_direction",
    "armijo_search",
    "pcgd_solve",
    "ppm_solve",
    "centered_ula",
    "matched_beamformer",
    "initial_point",
    "stack_point",
]

# Below this squared gradient norm the iterate counts as stationary.
_STATIONARY_TOL = 1e-30

# Clamp range for the warm-started initial trial step.
_PSI_MIN, _PSI_MAX = 1e-6, 1e2


class LineSearchError(RuntimeError):
    """No backtracking step achieved sufficient decrease."""


@dataclass
class PcgdConfig:
    """Inner-loop settings: backtracking ratio, Armijo coefficient, budgets."""

    tau: float = 0.5
    armijo_coeff: float = 1e-4
    psi0: float = 1.0
    max_inner_iters: int = 500
    eps_inner: float = 1e-8
    max_backtracks: int = 50

    def __post_init__(self):
        if not (0.0 < self.tau < 1.0):
            raise ValueError("tau must lie in (0, 1)")
        if not (0.0 < self.armijo_coeff <= 1.0):
            raise ValueError("armijo_coeff must lie in (0, 1]")
        if self.psi0 <= 0 or self.eps_inner <= 0:
            raise ValueError("psi0 and eps_inner must be positive")
        if self.max_backtracks < 1:
            raise ValueError("max_backtracks must be at least 1")


@dataclass
class PpmConfig:
    """Outer-loop settings: initial penalty state, displacement tolerance, budget."""

    penalty: PenaltyState = field(default_factory=PenaltyState)
    eps_outer: float = 1e-8
    max_outer_iters: int = 100

    def __post_init__(self):
        if self.eps_outer <= 0:
            raise ValueError("eps_outer must be positive")
        if self.max_outer_iters < 1:
            raise ValueError("max_outer_iters must be at least 1")


@dataclass
class InnerTrace:
    """Per-accepted-iteration record of one PCGD run."""

    phi0: float = math.nan
    phi: list = field(default_factory=list)
    grad_norm: list = field(default_factory=list)
    step: list = field(default_factory=list)
    backtracks: list = field(default_factory=list)
    exit_reason: str = ""
    final_grad_norm: float = math.nan

    @property
    def iterations(self) -> int:
        return len(self.phi)

    @property
    def phi_final(self) -> float:
        return self.phi[-1] if self.phi else self.phi0


@dataclass
class SolveTrace:
    """Per-outer-iteration record of a PPM run (or a one-row baseline summary)."""

    phi: list = field(default_factory=list)
    rate: list = field(default_factory=list)
    rate_unclamped: list = field(default_factory=list)
    sigma: list = field(default_factory=list)
    rho: list = field(default_factory=list)
    inner_iters: list = field(default_factory=list)
    grad_norm: list = field(default_factory=list)
    duration: list = field(default_factory=list)
    converged: bool = False
    feasible: bool = False

    @property
    def outer_iterations(self) -> int:
        return len(self.phi)

    @property
    def total_inner_iterations(self) -> int:
        return int(sum(self.inner_iters))


@dataclass
class LineSearchResult:
    """Accepted Armijo step: size, ambient candidate, retracted point, value."""

    step: float
    ambient: tuple
    n_backtracks: int
    point: DesignPoint
    value: float


def pr_beta(
    grad_new: TangentVector,
    grad_old_transported: TangentVector,
    grad_old_normsq: float,
) -> float:
    """Polak-Ribiere-plus combination coefficient.

    beta = max(0, <g_new, g_new - T(g_old)> / ||g_old||^2). The clamp at
    zero doubles as an automatic restart; a vanishing old gradient norm
    also signals restart (returns 0: steepest descent).
    """
    if grad_old_normsq <= _STATIONARY_TOL:
        return 0.0
    diff = TangentVector(
        grad_new.dw - grad_old_transported.dw, grad_new.dp - grad_old_transported.dp
    )
    return max(0.0, inner(grad_new, diff) / grad_old_normsq)


def descent_direction(
    grad: TangentVector, prev_dir_transported: TangentVector | None, beta: float
) -> TangentVector:
    """Conjugate direction -grad + beta * transported previous direction.

    Falls back to steepest descent whenever the combination fails to be a
    descent direction.
    """
    if prev_dir_transported is None or beta == 0.0:
        return -grad
    d = TangentVector(
        -grad.dw + beta * prev_dir_transported.dw,
        -grad.dp + beta * prev_dir_transported.dp,
    )
    if inner(grad, d) >= 0.0:
        return -grad
    return d


def armijo_search(
    ctx: ObjectiveContext,
    point: DesignPoint,
    direction: TangentVector,
    grad: TangentVector,
    config: PcgdConfig,
    rho: float,
    psi: float | None = None,
    phi0: float | None = None,
) -> LineSearchResult:
    """Backtracking line search with retraction-first evaluation.

    Finds the smallest N with
    phi(retract(x + tau^N psi d)) <= phi(x) + armijo_coeff * tau^N psi * <grad, d>.
    The directional derivative must be negative. Degenerate retractions are
    treated as rejected trials (the step shrinks past them).
    """
    deriv = inner(grad, direction)
    if deriv >= 0.0:
        raise ValueError("armijo_search requires a descent direction")
    if psi is None:
        psi = config.psi0
    if phi0 is None:
        phi0 = obj.phi(ctx, point, rho)
    for n in range(config.max_backtracks + 1):
        step = psi * config.tau**n
        ambient = (point.w + step * direction.dw, point.p + step * direction.dp)
        try:
            candidate = retract(ambient)
        except DegenerateRetractionError:
            continue
        value = obj.phi(ctx, candidate, rho)
        if value <= phi0 + config.armijo_coeff * step * deriv:
            return LineSearchResult(step, ambient, n, candidate, value)
    raise LineSearchError(
        f"no sufficient decrease within {config.max_backtracks} backtracks"
    )


def pcgd_solve(
    ctx: ObjectiveContext,
    start: DesignPoint,
    rho: float,
    config: PcgdConfig,
    fix_positions: bool = False,
) -> tuple[DesignPoint, InnerTrace]:
    """Minimize phi at fixed rho by conjugate gradient descent on the manifold.

    Stops when the objective decrease per accepted step drops below
    eps_inner, the iteration budget is exhausted, the gradient vanishes, or
    the line search fails (stationary to tolerance). phi is non-increasing
    across accepted iterations. With fix_positions=True the Euclidean
    factor is frozen (dp forced to zero) and only the beamformer moves.
    """

    def rgrad(pt: DesignPoint) -> TangentVector:
        gw, gp = obj.euclidean_gradient(ctx, pt, rho)
        if fix_positions:
            gp = np.zeros_like(gp)
        return riemannian_gradient(gw, gp, pt)

    point = start.copy()
    phi_val = obj.phi(ctx, point, rho)
    grad = rgrad(point)
    gnormsq = inner(grad, grad)

    trace = InnerTrace(phi0=phi_val)
    prev_grad_t: TangentVector | None = None
    prev_dir_t: TangentVector | None = None
    prev_gnormsq = 0.0
    prev_decrease: float | None = None
    exit_reason = "max_iters"

    for it in range(config.max_inner_iters):
        if gnormsq <= _STATIONARY_TOL:
            exit_reason = "stationary"
            break
        if it == 0:
            direction = -grad
        else:
            beta = pr_beta(grad, prev_grad_t, prev_gnormsq)
            direction = descent_direction(grad, prev_dir_t, beta)
        deriv = inner(grad, direction)
        if prev_decrease is None:
            psi = config.psi0
        else:
            # warm start from the previous decrease (BB-flavored)
            psi = min(max(2.0 * prev_decrease / abs(deriv), _PSI_MIN), _PSI_MAX)
        try:
            ls = armijo_search(
                ctx, point, direction, grad, config, rho, psi=psi, phi0=phi_val
            )
        except LineSearchError:
            exit_reason = "line_search"
            break
        prev_decrease = phi_val - ls.value
        prev_grad_t = transport(grad, ls.point)
        prev_dir_t = transport(direction, ls.point)
        prev_gnormsq = gnormsq
        point, phi_val = ls.point, ls.value
        grad = rgrad(point)
        gnormsq = inner(grad, grad)
        trace.phi.append(phi_val)
        trace.grad_norm.append(math.sqrt(gnormsq))
        trace.step.append(ls.step)
        trace.backtracks.append(ls.n_backtracks)
        if prev_decrease < config.eps_inner:
            exit_reason = "delta_phi"
            break

    trace.exit_reason = exit_reason
    trace.final_grad_norm = math.sqrt(gnormsq)
    return point, trace


def stack_point(point: DesignPoint) -> np.ndarray:
    """Real coordinates [Re w, Im w, p] used for the displacement metric."""
    return np.concatenate([point.w.real, point.w.imag, point.p])


def ppm_solve(
    ctx: ObjectiveContext,
    start: DesignPoint,
    ppm_config: PpmConfig,
    pcgd_config: PcgdConfig,
) -> tuple[DesignPoint, SolveTrace]:
    """Penalty outer loop: solve at fixed rho, escalate on slow feasibility progress.

    After each inner solve, sigma is the worst constraint violation; rho is
    divided by c1 if sigma exceeded eta, and eta tracks c2 * sigma.
    Terminates once sigma <= sigma_min and the squared iterate displacement
    falls below eps_outer, or on the iteration budget (the trace is then
    flagged infeasible-at-tolerance if sigma is still too large).
    """
    scn = ctx.scenario
    pen = replace(ppm_config.penalty)
    point = start.copy()
    trace = SolveTrace()
    sigma = math.inf

    for _ in range(ppm_config.max_outer_iters):
        t0 = time.perf_counter()
        rho_used = pen.rho
        new_point, inner_trace = pcgd_solve(ctx, point, rho_used, pcgd_config)
        sigma = obj.max_violation(new_point.p, scn.wavelength, scn.aperture)
        if sigma > pen.eta:
            pen.rho = pen.rho / pen.c1
        pen.eta = pen.c2 * sigma

        displacement = float(
            np.sum((stack_point(new_point) - stack_point(point)) ** 2)
        )
        rate_gap = -math.log2(obj.ratio_objective(ctx, new_point))
        trace.phi.append(inner_trace.phi_final)
        trace.rate.append(max(0.0, rate_gap))
        trace.rate_unclamped.append(rate_gap)
        trace.sigma.append(sigma)
        trace.rho.append(rho_used)
        trace.inner_iters.append(inner_trace.iterations)
        trace.grad_norm.append(inner_trace.final_grad_norm)
        trace.duration.append(time.perf_counter() - t0)

        point = new_point
        if sigma <= pen.sigma_min and displacement < ppm_config.eps_outer:
            trace.converged = True
            break

    trace.feasible = sigma <= pen.sigma_min
    return point, trace


def centered_ula(
    num_antennas: int, wavelength: float, aperture: float
) -> np.ndarray:
    """Half-wavelength uniform array centered in [0, aperture]."""
    span = 0.5 * wavelength * (num_antennas - 1)
    if aperture < span:
        raise ValueError("aperture too small for a half-wavelength array")
    offset = 0.5 * (aperture - span)
    return offset + 0.5 * wavelength * np.arange(num_antennas)


def matched_beamformer(scenario: ChannelScenario, positions: np.ndarray) -> np.ndarray:
    """Constant-modulus beamformer phase-matched to Bob's channel.

    Entries with (numerically) zero channel fall back to 1.
    """
    h = channel(scenario, "b", positions)
    return np.exp(1j * np.angle(h))


def initial_point(scenario: ChannelScenario) -> DesignPoint:
    """Feasible default start: centered half-wavelength ULA with matched beamformer."""
    p = centered_ula(scenario.num_antennas, scenario.wavelength, scenario.aperture)
    return DesignPoint(matched_beamformer(scenario, p), p)
