"""Physical model: propagation paths, steering vectors, channels, secrecy rate.

A transmitter carries a linear array of M movable antennas at positions
p (meters) driven by a constant-modulus analog beamformer w (|w_i| = 1).
Bob and Eve each see a multipath channel built from far-field steering
vectors evaluated at the current antenna positions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Path",
    "ChannelScenario",
    "DesignPoint",
    "steering_vector",
    "channel",
    "beamformed_path_power",
    "secrecy_rate",
    "secrecy_rate_unclamped",
]

_LOG2 = math.log(2.0)


@dataclass(frozen=True)
class Path:
    """One propagation path: complex gain and azimuth angle in [0, pi]."""

    gain: complex
    angle: float

    def __post_init__(self):
        if not (np.isfinite(self.angle) and 0.0 <= self.angle <= math.pi):
            raise ValueError(f"path angle must lie in [0, pi], got {self.angle}")
        gain = complex(self.gain)
        if not (math.isfinite(gain.real) and math.isfinite(gain.imag)):
            raise ValueError("path gain must be finite")


@dataclass(frozen=True)
class ChannelScenario:
    """Static problem data: geometry limits, powers, and both path sets.

    `aperture` is the usable segment [0, L] for antenna positions and must
    admit a half-wavelength-spaced array: L >= (wavelength/2) * (M - 1).
    """

    wavelength: float
    num_antennas: int
    aperture: float
    power: float
    noise_b: float
    noise_e: float
    paths_b: tuple[Path, ...]
    paths_e: tuple[Path, ...]

    def __post_init__(self):
        object.__setattr__(self, "paths_b", tuple(self.paths_b))
        object.__setattr__(self, "paths_e", tuple(self.paths_e))
        if self.num_antennas < 2:
            raise ValueError("need at least 2 antennas")
        if self.wavelength <= 0 or self.power <= 0:
            raise ValueError("wavelength and power must be positive")
        if self.noise_b <= 0 or self.noise_e <= 0:
            raise ValueError("noise powers must be positive")
        if not self.paths_b or not self.paths_e:
            raise ValueError("both path lists must be non-empty")
        min_aperture = 0.5 * self.wavelength * (self.num_antennas - 1)
        if self.aperture < min_aperture:
            raise ValueError(
                f"aperture {self.aperture} cannot fit {self.num_antennas} antennas "
                f"at half-wavelength spacing (needs >= {min_aperture})"
            )

    def paths(self, side: str) -> tuple[Path, ...]:
        if side == "b":
            return self.paths_b
        if side == "e":
            return self.paths_e
        raise ValueError(f"side must be 'b' or 'e', got {side!r}")

    def noise(self, side: str) -> float:
        return self.noise_b if side == "b" else self.noise_e

    def snr_scale(self, side: str) -> float:
        """Per-side constant t_i = P / (L_i * sigma_i^2)."""
        return self.power / (len(self.paths(side)) * self.noise(side))


@dataclass
class DesignPoint:
    """The optimization variable pair (w, p).

    `w` is a complex beamformer whose entries sit on the unit circle
    (maintained by retraction, not enforced at construction) and `p` the
    antenna positions in meters.
    """

    w: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=complex)
        self.p = np.asarray(self.p, dtype=float)
        if self.w.shape != self.p.shape or self.w.ndim != 1:
            raise ValueError("w and p must be 1-D vectors of equal length")

    def copy(self) -> "DesignPoint":
        return DesignPoint(self.w.copy(), self.p.copy())

    def modulus_error(self) -> float:
        """Largest deviation of |w_i| from 1."""
        return float(np.max(np.abs(np.abs(self.w) - 1.0)))


def steering_vector(angle: float, positions: np.ndarray, wavelength: float) -> np.ndarray:
    """Far-field steering vector: entry m is exp(j * (2*pi/lambda) * cos(angle) * p_m)."""
    positions = np.asarray(positions, dtype=float)
    if wavelength <= 0:
        raise ValueError("wavelength must be positive")
    if not np.isfinite(angle) or not np.all(np.isfinite(positions)):
        raise ValueError("angle and positions must be finite")
    return np.exp(1j * (2.0 * math.pi / wavelength) * math.cos(angle) * positions)


def channel(scenario: ChannelScenario, side: str, positions: np.ndarray) -> np.ndarray:
    """Field-response channel: sqrt(1/L_i) * sum_l beta_l * a(theta_l, p)."""
    paths = scenario.paths(side)
    if not paths:
        raise ValueError("path list is empty")
    positions = np.asarray(positions, dtype=float)
    acc = np.zeros(positions.shape, dtype=complex)
    for path in paths:
        acc += path.gain * steering_vector(path.angle, positions, scenario.wavelength)
    return math.sqrt(1.0 / len(paths)) * acc


def beamformed_path_power(
    scenario: ChannelScenario, side: str, w: np.ndarray, positions: np.ndarray
) -> float:
    """Per-path beamformed power sum_l |beta_l|^2 * |a(theta_l, p)^H w|^2."""
    total = 0.0
    for path in scenario.paths(side):
        a = steering_vector(path.angle, positions, scenario.wavelength)
        total += abs(path.gain) ** 2 * abs(np.vdot(a, w)) ** 2
    return total


def secrecy_rate_unclamped(scenario: ChannelScenario, point: DesignPoint) -> float:
    """Bob-minus-Eve rate difference in bits, without the positive-part clamp."""
    qb = beamformed_path_power(scenario, "b", point.w, point.p)
    qe = beamformed_path_power(scenario, "e", point.w, point.p)
    rb = math.log1p(scenario.snr_scale("b") * qb) / _LOG2
    re = math.log1p(scenario.snr_scale("e") * qe) / _LOG2
    return rb - re


def secrecy_rate(scenario: ChannelScenario, point: DesignPoint) -> float:
    """Achievable secrecy rate in bits: the clamped rate difference, always >= 0."""
    return max(0.0, secrecy_rate_unclamped(scenario, point))
