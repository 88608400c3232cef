"""Penalized ratio objective and its analytic Euclidean gradient.

Minimizing the eavesdropper-over-legitimate ratio

    R(w, p) = (1 + t_e * sum_l |beta_el|^2 |a(theta_el,p)^H w|^2)
            / (1 + t_b * sum_l |beta_bl|^2 |a(theta_bl,p)^H w|^2)

is equivalent to maximizing the (unclamped) secrecy rate: log2(1/R) equals
the Bob-minus-Eve rate difference. Position constraints (half-wavelength
spacing, aperture bounds) enter as softplus-smoothed hinge penalties scaled
by a factor rho, giving the smooth penalized objective

    phi(w, p) = R(w, p) + rho * sum_k softplus(c_k(p))

where c(p) stacks the M+1 inequality constraint values (all <= 0 when
feasible).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import ChannelScenario, DesignPoint

__all__ = [
    "PenaltyState",
    "ObjectiveContext",
    "ratio_objective",
    "ratio_gradient",
    "constraint_values",
    "max_violation",
    "smoothed_penalty",
    "penalty_gradient",
    "phi",
    "euclidean_gradient",
]

# Beyond this threshold softplus(x) = x to double precision; the guarded
# form avoids exp overflow.
_SOFTPLUS_CUTOFF = 30.0


def _softplus(x: np.ndarray) -> np.ndarray:
    """log(1 + exp(x)), overflow-safe for large positive x."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    big = x > _SOFTPLUS_CUTOFF
    out[~big] = np.log1p(np.exp(x[~big]))
    out[big] = x[big] + np.log1p(np.exp(-x[big]))
    return out


def _sigmoid(x: np.ndarray) -> np.ndarray:
    """d/dx softplus(x) = exp(x) / (1 + exp(x)), overflow-safe."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class PenaltyState:
    """Exterior-penalty bookkeeping: factor rho and its escalation schedule.

    rho is divided by c1 (hence increased) whenever the measured violation
    exceeds the threshold eta, which itself tracks c2 times the last
    violation. sigma_min is the feasibility tolerance at exit.
    """

    rho: float = 1.0
    eta: float = math.inf
    c1: float = 0.25
    c2: float = 0.9
    sigma_min: float = 1e-6

    def __post_init__(self):
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        if not (0.0 < self.c1 < 1.0 and 0.0 < self.c2 < 1.0):
            raise ValueError("c1 and c2 must lie in (0, 1)")
        if self.eta < 0 or self.sigma_min < 0:
            raise ValueError("eta and sigma_min must be nonnegative")


@dataclass
class ObjectiveContext:
    """Scenario plus precomputed per-side constants for fast evaluation.

    Derives t_i = P/(L_i sigma_i^2), the spatial frequencies
    kappa_l = (2 pi / lambda) cos(theta_l) and squared path gains per side.
    """

    scenario: ChannelScenario
    t_b: float = field(init=False)
    t_e: float = field(init=False)

    def __post_init__(self):
        scn = self.scenario
        self.t_b = scn.snr_scale("b")
        self.t_e = scn.snr_scale("e")
        k0 = 2.0 * math.pi / scn.wavelength
        self._kappa_b = np.array([k0 * math.cos(p.angle) for p in scn.paths_b])
        self._gains2_b = np.array([abs(p.gain) ** 2 for p in scn.paths_b])
        self._kappa_e = np.array([k0 * math.cos(p.angle) for p in scn.paths_e])
        self._gains2_e = np.array([abs(p.gain) ** 2 for p in scn.paths_e])

    def side_arrays(self, side: str) -> tuple[np.ndarray, np.ndarray]:
        if side == "b":
            return self._kappa_b, self._gains2_b
        return self._kappa_e, self._gains2_e


def _quad(ctx: ObjectiveContext, side: str, w: np.ndarray, p: np.ndarray) -> float:
    """sum_l |beta_l|^2 |a_l^H w|^2 via the cached spatial frequencies."""
    kappa, gains2 = ctx.side_arrays(side)
    # steering matrix row l: exp(j * kappa_l * p); s_l = a_l^H w
    s = np.exp(-1j * np.outer(kappa, p)) @ w
    return float(gains2 @ (s.real**2 + s.imag**2))


def _ratio_parts(ctx: ObjectiveContext, w: np.ndarray, p: np.ndarray) -> tuple[float, float]:
    """(numerator, denominator) = (1 + t_e*quad_e, 1 + t_b*quad_b)."""
    u = 1.0 + ctx.t_e * _quad(ctx, "e", w, p)
    v = 1.0 + ctx.t_b * _quad(ctx, "b", w, p)
    return u, v


def ratio_objective(ctx: ObjectiveContext, point: DesignPoint) -> float:
    """Eve-over-Bob SNR-like ratio; strictly positive, smaller is better."""
    u, v = _ratio_parts(ctx, point.w, point.p)
    return u / v


def constraint_values(p: np.ndarray, wavelength: float, aperture: float) -> np.ndarray:
    """Stacked inequality constraint values, all <= 0 iff p is feasible.

    Entries 0..M-2 are the spacing constraints p_m - p_{m+1} + lambda/2,
    entry M-1 is -p_1 and entry M is p_M - L.
    """
    p = np.asarray(p, dtype=float)
    gaps = p[:-1] - p[1:] + 0.5 * wavelength
    return np.concatenate([gaps, [-p[0], p[-1] - aperture]])


def max_violation(p: np.ndarray, wavelength: float, aperture: float) -> float:
    """Worst constraint violation sigma; zero exactly when p is feasible."""
    return float(max(0.0, np.max(constraint_values(p, wavelength, aperture))))


def smoothed_penalty(p: np.ndarray, wavelength: float, aperture: float) -> float:
    """Softplus-smoothed sum of the position constraint hinges."""
    return float(np.sum(_softplus(constraint_values(p, wavelength, aperture))))


def penalty_gradient(p: np.ndarray, wavelength: float, aperture: float) -> np.ndarray:
    """Gradient of smoothed_penalty with respect to the positions."""
    p = np.asarray(p, dtype=float)
    grad = np.zeros_like(p)
    sig = _sigmoid(p[:-1] - p[1:] + 0.5 * wavelength)
    grad[:-1] += sig
    grad[1:] -= sig
    grad[0] -= float(_sigmoid(np.array(-p[0])))
    grad[-1] += float(_sigmoid(np.array(p[-1] - aperture)))
    return grad


def phi(ctx: ObjectiveContext, point: DesignPoint, rho: float) -> float:
    """Penalized objective: ratio_objective + rho * smoothed_penalty."""
    if rho <= 0:
        raise ValueError("rho must be positive")
    scn = ctx.scenario
    return ratio_objective(ctx, point) + rho * smoothed_penalty(
        point.p, scn.wavelength, scn.aperture
    )


def _quad_gradients(
    ctx: ObjectiveContext, side: str, w: np.ndarray, p: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    """Value, conjugate w-gradient and p-gradient of sum_l |beta_l|^2 |a_l^H w|^2.

    The w-gradient is A w with A = sum_l |beta_l|^2 a_l a_l^H, i.e. the
    Wirtinger derivative with respect to conj(w); the first-order expansion
    carries a factor 2Re(.). The p-gradient follows from
    d|s_l|^2/dp_m = 2 Re(conj(s_l) * (-j kappa_l) * exp(-j kappa_l p_m) * w_m).
    """
    kappa, gains2 = ctx.side_arrays(side)
    E = np.exp(1j * np.outer(kappa, p))  # row l = a(theta_l, p)
    s = E.conj() @ w  # s_l = a_l^H w
    value = float(gains2 @ (s.real**2 + s.imag**2))
    grad_w = E.T @ (gains2 * s)
    grad_p = 2.0 * np.real(w * (E.conj().T @ (gains2 * (-1j * kappa) * s.conj())))
    return value, grad_w, grad_p


def ratio_gradient(
    ctx: ObjectiveContext, point: DesignPoint
) -> tuple[np.ndarray, np.ndarray]:
    """Euclidean gradient of the ratio objective alone (no penalty term)."""
    w, p = point.w, point.p
    qe, gw_e, gp_e = _quad_gradients(ctx, "e", w, p)
    qb, gw_b, gp_b = _quad_gradients(ctx, "b", w, p)
    u = 1.0 + ctx.t_e * qe
    v = 1.0 + ctx.t_b * qb
    grad_w = (ctx.t_e * v * gw_e - ctx.t_b * u * gw_b) / v**2
    grad_p = (ctx.t_e * v * gp_e - ctx.t_b * u * gp_b) / v**2
    return grad_w, grad_p


def euclidean_gradient(
    ctx: ObjectiveContext, point: DesignPoint, rho: float
) -> tuple[np.ndarray, np.ndarray]:
    """Euclidean gradient of phi: (conjugate w-gradient, real p-gradient).

    The w part satisfies phi(w + d) ~ phi(w) + 2 Re(grad_w^H d); the p part
    is an ordinary real gradient. Verified against central finite
    differences by the gradcheck harness.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    scn = ctx.scenario
    grad_w, grad_p = ratio_gradient(ctx, point)
    grad_p = grad_p + rho * penalty_gradient(point.p, scn.wavelength, scn.aperture)
    return grad_w, grad_p
