"""Synthetic dataset with a planted lagged coupling.

The generator is the method's verification oracle: a target count series
driven by one feature at a known lag, plus an uncoupled noise feature. A
correct grid run flags the planted (feature, lag) cell and rejects the
noise feature.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date

import numpy as np

from trendlag import rng as rng_mod
from trendlag.importance import DEFAULT_LAGS
from trendlag.series import RAW_COUNT, SCALED, WeeklySeries

PLANTED_NAME = "planted"
NOISE_NAME = "noise"

# walk indices are padded on both sides so every lag in DEFAULT_LAGS is defined
_MARGIN = 4


@dataclass(frozen=True)
class SyntheticSpec:
    """Defaults are calibrated so the planted cell is recoverable: a negative
    base level carves silent weeks into the target (the zero floor), which the
    driving walk predicts and the target's own history cannot."""

    length: int = 262
    alpha: float = 0.8
    lag: int = 2  # the planted lag
    base: float = -30.0
    seasonal_amplitude: float = 0.0
    noise_std: float = 1.0
    seed: int = 0
    epoch: date = date(2015, 1, 1)

    def __post_init__(self) -> None:
        if self.length < 60:
            raise ValueError(f"synthetic length must be >= 60, got {self.length}")
        if self.noise_std < 0:
            raise ValueError("noise std must be >= 0")
        if self.lag not in DEFAULT_LAGS:
            raise ValueError(f"planted lag must be one of {DEFAULT_LAGS}, got {self.lag}")


def _integer_walk(g: np.random.Generator, n: int) -> np.ndarray:
    """Integer walk made of multi-week linear ramps, clipped to [0, 100].

    Produces search-trend-like swells that keep traversing the mid-range:
    slopes are nonzero, redrawn every ~5 weeks, and biased back toward the
    center so the walk mixes quickly and never saturates. Within a ramp the
    walk is exactly extrapolatable from its own recent values, while a noisy
    count series derived from it reveals level and slope only approximately.
    """
    walk = np.empty(n)
    pos = float(g.integers(35, 66))

    def draw_slope() -> float:
        s = float(g.integers(1, 4))  # |slope| in {1, 2, 3}
        if g.random() < 0.85:  # lean toward the center so the walk mixes fast
            return -s if pos > 50.0 else s
        return s if g.random() < 0.5 else -s

    mu = draw_slope()
    for i in range(n):
        if g.random() < 0.20:
            mu = draw_slope()
        pos += mu
        if pos > 90.0 and mu > 0 or pos < 10.0 and mu < 0:
            mu = -mu  # turn near the border
        pos = min(max(pos, 0.0), 100.0)
        walk[i] = pos
    return walk


def _as_trend(walk: np.ndarray, name: str, epoch: date) -> WeeklySeries:
    # rescale like an exported search trend: integer values, peak at 100
    scaled = np.round(100.0 * walk / walk.max())
    return WeeklySeries(epoch, scaled, SCALED, name=name)


def generate_synthetic(spec: SyntheticSpec) -> tuple[WeeklySeries, WeeklySeries, WeeklySeries]:
    """Return (target counts, planted feature, uncoupled noise feature)."""
    t = spec.length
    planted_walk = _integer_walk(
        rng_mod.stream(spec.seed, "synth/planted-walk"), t + 2 * _MARGIN
    )
    noise_walk = _integer_walk(
        rng_mod.stream(spec.seed, "synth/noise-walk"), t + 2 * _MARGIN
    )
    eps = rng_mod.stream(spec.seed, "synth/target-noise").normal(0.0, spec.noise_std, t) \
        if spec.noise_std > 0 else np.zeros(t)

    idx = np.arange(t)
    seasonal = spec.seasonal_amplitude * np.sin(2.0 * np.pi * idx / 52.0)
    driver = planted_walk[_MARGIN + idx - spec.lag]
    target = np.round(np.maximum(0.0, spec.base + spec.alpha * driver + seasonal + eps))

    target_series = WeeklySeries(spec.epoch, target, RAW_COUNT, name="target")
    planted = _as_trend(planted_walk[_MARGIN : _MARGIN + t], PLANTED_NAME, spec.epoch)
    noise = _as_trend(noise_walk[_MARGIN : _MARGIN + t], NOISE_NAME, spec.epoch)
    return target_series, planted, noise
