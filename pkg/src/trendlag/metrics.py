"""Evaluation metrics: scaled mean absolute error and a 1-D structural
similarity index for comparing the placement and intensity of local peaks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def scaled_mae(pred, truth) -> float:
    """Mean absolute residual on the 0-100 scale; flattens multi-horizon input."""
    p = np.asarray(pred, dtype=np.float64).ravel()
    t = np.asarray(truth, dtype=np.float64).ravel()
    if p.size != t.size:
        raise ValueError(f"length mismatch: predictions {p.size}, truth {t.size}")
    return float(np.mean(np.abs(p - t)))


@dataclass(frozen=True)
class SSIMConfig:
    """Uniform sliding-window SSIM with the standard stability constants."""

    window: int = 11
    data_range: float = 100.0

    def __post_init__(self) -> None:
        if self.window < 1 or self.window % 2 == 0:
            raise ValueError(f"window length must be odd and >= 1, got {self.window}")
        if self.data_range <= 0:
            raise ValueError("data range must be positive")

    @property
    def c1(self) -> float:
        return (0.01 * self.data_range) ** 2

    @property
    def c2(self) -> float:
        return (0.03 * self.data_range) ** 2


def _sliding(x: np.ndarray, window: int) -> np.ndarray:
    return np.lib.stride_tricks.sliding_window_view(x, window)


def ssim_1d(a, b, cfg: SSIMConfig = SSIMConfig()) -> float:
    """Mean structural similarity over sliding windows; lies in [-1, 1].

    Per window: [(2*mu_a*mu_b + C1) * (2*cov_ab + C2)] /
    [(mu_a^2 + mu_b^2 + C1) * (var_a + var_b + C2)], with population moments.
    """
    av = np.asarray(a, dtype=np.float64).ravel()
    bv = np.asarray(b, dtype=np.float64).ravel()
    if av.size != bv.size:
        raise ValueError(f"length mismatch: {av.size} vs {bv.size}")
    if av.size < cfg.window:
        raise ValueError(f"series length {av.size} shorter than window {cfg.window}")
    wa = _sliding(av, cfg.window)
    wb = _sliding(bv, cfg.window)
    mu_a = wa.mean(axis=1)
    mu_b = wb.mean(axis=1)
    var_a = ((wa - mu_a[:, None]) ** 2).mean(axis=1)
    var_b = ((wb - mu_b[:, None]) ** 2).mean(axis=1)
    cov = ((wa - mu_a[:, None]) * (wb - mu_b[:, None])).mean(axis=1)
    c1, c2 = cfg.c1, cfg.c2
    score = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / (
        (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    )
    return float(score.mean())
