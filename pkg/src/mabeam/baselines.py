"""Benchmark schemes: fixed, random, and sparse-selected arrays, plus projected GD.

All four return the same (DesignPoint, SolveTrace) shape as the penalty
product-manifold solver so the experiment harness can treat every method
uniformly; their traces carry a single summary row. Baseline outputs
satisfy the position constraints exactly and carry an exactly unit-modulus
beamformer.
"""

from __future__ import annotations

import math
import time
from enum import Enum

import numpy as np

from . import objective as obj
from .model import DesignPoint, secrecy_rate
from .objective import ObjectiveContext
from .solver import (
    InnerTrace,
    PcgdConfig,
    SolveTrace,
    centered_ula,
    initial_point,
    matched_beamformer,
    pcgd_solve,
)

__all__ = [
    "BaselineKind",
    "fpa_solve",
    "ra_solve",
    "sfpa_solve",
    "gdma_solve",
    "repair_positions",
]


_GDMA_PSI_MIN, _GDMA_PSI_MAX = 1e-6, 1e2


class BaselineKind(str, Enum):
    """The four comparison schemes."""

    FPA = "fpa"
    RA = "ra"
    SFPA = "sfpa"
    GDMA = "gdma"


def _summary_trace(
    ctx: ObjectiveContext,
    point: DesignPoint,
    inner_iterations: int,
    grad_norm: float,
    elapsed: float,
) -> SolveTrace:
    """One-row trace for a baseline: ratio objective as phi, rho unused (0)."""
    scn = ctx.scenario
    rate_gap = -math.log2(obj.ratio_objective(ctx, point))
    trace = SolveTrace()
    trace.phi.append(obj.ratio_objective(ctx, point))
    trace.rate.append(max(0.0, rate_gap))
    trace.rate_unclamped.append(rate_gap)
    trace.sigma.append(obj.max_violation(point.p, scn.wavelength, scn.aperture))
    trace.rho.append(0.0)
    trace.inner_iters.append(inner_iterations)
    trace.grad_norm.append(grad_norm)
    trace.duration.append(elapsed)
    trace.converged = True
    trace.feasible = True
    return trace


def _beamformer_only(
    ctx: ObjectiveContext, positions: np.ndarray, config: PcgdConfig
) -> tuple[DesignPoint, InnerTrace]:
    """Optimize w by PCGD on the circle factor at fixed feasible positions."""
    start = DesignPoint(matched_beamformer(ctx.scenario, positions), positions.copy())
    return pcgd_solve(ctx, start, rho=1.0, config=config, fix_positions=True)


def fpa_solve(ctx: ObjectiveContext, config: PcgdConfig) -> tuple[DesignPoint, SolveTrace]:
    """Fixed-position benchmark: centered half-wavelength ULA, beamformer-only."""
    scn = ctx.scenario
    t0 = time.perf_counter()
    p = centered_ula(scn.num_antennas, scn.wavelength, scn.aperture)
    point, inner_trace = _beamformer_only(ctx, p, config)
    elapsed = time.perf_counter() - t0
    return point, _summary_trace(
        ctx, point, inner_trace.iterations, inner_trace.final_grad_norm, elapsed
    )


def ra_solve(
    ctx: ObjectiveContext, config: PcgdConfig, rng_seed
) -> tuple[DesignPoint, SolveTrace]:
    """Random-position benchmark: uniform draw from the feasible set, beamformer-only.

    Positions use the simplex-shift construction: sort M uniforms on
    [0, L - (M-1)*lambda/2] and add back the half-wavelength offsets, which
    samples the spacing-feasible polytope uniformly. Fixed seed gives
    bit-reproducible positions.
    """
    scn = ctx.scenario
    t0 = time.perf_counter()
    rng = np.random.default_rng(rng_seed)
    slack = scn.aperture - 0.5 * scn.wavelength * (scn.num_antennas - 1)
    u = np.sort(rng.uniform(0.0, slack, scn.num_antennas))
    p = u + 0.5 * scn.wavelength * np.arange(scn.num_antennas)
    point, inner_trace = _beamformer_only(ctx, p, config)
    elapsed = time.perf_counter() - t0
    return point, _summary_trace(
        ctx, point, inner_trace.iterations, inner_trace.final_grad_norm, elapsed
    )


def sfpa_solve(ctx: ObjectiveContext, config: PcgdConfig) -> tuple[DesignPoint, SolveTrace]:
    """Sparse fixed-position benchmark: greedy selection on a half-wavelength grid.

    Grid points {0, lambda/2, ...} are added one at a time, each step
    keeping the candidate that maximizes the secrecy rate under the
    matched-phase beamformer heuristic; the final geometry then gets the
    full beamformer-only optimization.
    """
    scn = ctx.scenario
    t0 = time.perf_counter()
    half = 0.5 * scn.wavelength
    # tolerate roundoff in aperture/grid-step division
    n_grid = int(math.floor(scn.aperture / half + 1e-9)) + 1
    if n_grid < scn.num_antennas:
        raise ValueError(
            f"grid of {n_grid} points cannot host {scn.num_antennas} antennas"
        )
    grid = half * np.arange(n_grid)

    selected: list[int] = []
    for _ in range(scn.num_antennas):
        best_j, best_rate = -1, -math.inf
        for j in range(n_grid):
            if j in selected:
                continue
            trial = np.sort(grid[selected + [j]])
            w = matched_beamformer(scn, trial)
            rate = secrecy_rate(scn, DesignPoint(w, trial))
            if rate > best_rate:
                best_j, best_rate = j, rate
        selected.append(best_j)
    p = np.sort(grid[selected])

    point, inner_trace = _beamformer_only(ctx, p, config)
    elapsed = time.perf_counter() - t0
    return point, _summary_trace(
        ctx, point, inner_trace.iterations, inner_trace.final_grad_norm, elapsed
    )


def repair_positions(p: np.ndarray, wavelength: float, aperture: float) -> np.ndarray:
    """Project positions onto the feasible set by clipping and spacing passes.

    Clip to [0, L], sweep forward enforcing gaps >= lambda/2, then sweep
    backward from L re-enforcing the gaps. Feasible in one pass provided
    L >= (M-1)*lambda/2; idempotent on feasible inputs.
    """
    half = 0.5 * wavelength
    out = np.clip(np.asarray(p, dtype=float), 0.0, aperture).copy()
    for m in range(1, out.size):
        out[m] = max(out[m], out[m - 1] + half)
    out[-1] = min(out[-1], aperture)
    for m in range(out.size - 2, -1, -1):
        out[m] = min(out[m], out[m + 1] - half)
    return out


def gdma_solve(ctx: ObjectiveContext, config: PcgdConfig) -> tuple[DesignPoint, SolveTrace]:
    """Projected-gradient benchmark: joint Euclidean descent with direct projection.

    Steps follow the ratio objective's Euclidean gradient with Armijo
    backtracking on the unprojected objective; after each accepted step the
    beamformer is normalized entrywise and the positions repaired, and the
    loop stops when the objective change between projected iterates falls
    below eps_inner.
    """
    scn = ctx.scenario
    t0 = time.perf_counter()
    start = initial_point(scn)
    w, p = start.w.copy(), start.p.copy()
    f_cur = obj.ratio_objective(ctx, DesignPoint(w, p))
    psi = config.psi0
    iterations = 0
    grad_norm = math.nan

    for _ in range(config.max_inner_iters):
        gw, gp = obj.ratio_gradient(ctx, DesignPoint(w, p))
        # real-coordinate slope of f along -gradient
        slope = -(2.0 * float(np.sum(np.abs(gw) ** 2)) + float(gp @ gp))
        grad_norm = math.sqrt(-slope)
        if -slope <= 1e-30:
            break
        accepted = None
        for n in range(config.max_backtracks + 1):
            step = psi * config.tau**n
            trial = DesignPoint(w - step * gw, p - step * gp)
            if obj.ratio_objective(ctx, trial) <= f_cur + config.armijo_coeff * step * slope:
                accepted = (step, trial)
                break
        if accepted is None:
            break
        step, trial = accepted
        psi = min(max(step / config.tau, _GDMA_PSI_MIN), _GDMA_PSI_MAX)
        w = trial.w / np.abs(trial.w)
        p = repair_positions(trial.p, scn.wavelength, scn.aperture)
        f_new = obj.ratio_objective(ctx, DesignPoint(w, p))
        iterations += 1
        delta = abs(f_new - f_cur)
        f_cur = f_new
        if delta < config.eps_inner:
            break

    point = DesignPoint(w, p)
    elapsed = time.perf_counter() - t0
    return point, _summary_trace(ctx, point, iterations, grad_norm, elapsed)
