"""Product-manifold geometry: unit-modulus circle factor times Euclidean factor.

Tangent vectors pair a complex perturbation dw (tangent to the per-entry
unit circles: Re(dw_i * conj(w_i)) = 0) with an unconstrained real dp.
Projection doubles as Riemannian gradient and as vector transport; the
retraction normalizes each beamformer entry back to unit modulus.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import DesignPoint

__all__ = [
    "TangentVector",
    "DegenerateRetractionError",
    "riemannian_gradient",
    "transport",
    "retract",
    "inner",
]

# |w_i| below this during retraction signals a pathological step.
RETRACTION_EPS = 1e-14


class DegenerateRetractionError(RuntimeError):
    """A beamformer entry landed (numerically) at the origin; shrink the step."""


@dataclass
class TangentVector:
    """Paired perturbation (dw, dp) at some base point on the product manifold."""

    dw: np.ndarray
    dp: np.ndarray

    def __post_init__(self):
        self.dw = np.asarray(self.dw, dtype=complex)
        self.dp = np.asarray(self.dp, dtype=float)

    def __neg__(self) -> "TangentVector":
        return TangentVector(-self.dw, -self.dp)


def _project_w(dw: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Remove the per-entry radial component: dw - Re(dw * conj(w)) * w."""
    return dw - np.real(dw * np.conj(w)) * w


def riemannian_gradient(
    egrad_w: np.ndarray, egrad_p: np.ndarray, point: DesignPoint
) -> TangentVector:
    """Project the Euclidean gradient onto the tangent space at `point`."""
    return TangentVector(_project_w(np.asarray(egrad_w, dtype=complex), point.w),
                         np.array(egrad_p, dtype=float))


def transport(vec: TangentVector, to_point: DesignPoint) -> TangentVector:
    """Carry a tangent vector to the tangent space at `to_point`.

    The circle factor re-projects at the destination; the Euclidean factor
    is carried unchanged.
    """
    return TangentVector(_project_w(vec.dw, to_point.w), vec.dp.copy())


def retract(ambient: tuple[np.ndarray, np.ndarray]) -> DesignPoint:
    """Map an ambient pair back onto the manifold by per-entry normalization."""
    w, p = ambient
    w = np.asarray(w, dtype=complex)
    modulus = np.abs(w)
    if np.any(modulus < RETRACTION_EPS):
        raise DegenerateRetractionError(
            "beamformer entry too close to zero to normalize"
        )
    return DesignPoint(w / modulus, np.array(p, dtype=float))


def inner(vec1: TangentVector, vec2: TangentVector) -> float:
    """Sum metric: Re(dw1^H dw2) + dp1^T dp2."""
    return float(np.real(np.vdot(vec1.dw, vec2.dw)) + vec1.dp @ vec2.dp)
