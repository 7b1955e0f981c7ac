"""Reconstruction quality: relative error and single-window SSIM."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


def relative_error(estimate, truth, phase_aware: bool = False) -> float:
    """||estimate - truth|| / ||truth||.

    With ``phase_aware`` the estimate is first rotated by the global phase
    that best aligns it with ``truth`` (the phase of <estimate, truth>),
    which is the minimizer over all unit-modulus factors.
    """
    est = np.asarray(estimate, dtype=complex).ravel()
    ref = np.asarray(truth, dtype=complex).ravel()
    if est.shape != ref.shape:
        raise ValueError("estimate and truth differ in size")
    norm = np.linalg.norm(ref)
    if norm == 0:
        raise ValueError("relative error is undefined for a zero ground truth")
    if phase_aware:
        inner = np.vdot(est, ref)
        if inner != 0:
            est = est * (inner / abs(inner))
    return float(np.linalg.norm(est - ref) / norm)


@dataclass(frozen=True)
class SsimOptions:
    """Stabilizers ``c1 = (k1*L)^2``, ``c2 = (k2*L)^2``.

    ``dynamic_range`` (L) defaults to the ground-truth peak magnitude.
    Explicit ``c1``/``c2`` override the k-factors.
    """

    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: Optional[float] = None
    c1: Optional[float] = None
    c2: Optional[float] = None

    def constants(self, truth: np.ndarray):
        L = self.dynamic_range if self.dynamic_range is not None else float(np.max(truth))
        if L <= 0:
            L = 1.0
        c1 = self.c1 if self.c1 is not None else (self.k1 * L) ** 2
        c2 = self.c2 if self.c2 is not None else (self.k2 * L) ** 2
        if c1 <= 0 or c2 <= 0:
            raise ValueError("SSIM constants must be positive")
        return c1, c2


def ssim(estimate, truth, opts: Optional[SsimOptions] = None) -> float:
    """SSIM of the magnitude maps over one global window, clamped to [0, 1]."""
    est = np.abs(np.asarray(estimate))
    ref = np.abs(np.asarray(truth))
    if est.shape != ref.shape:
        raise ValueError(f"shape mismatch: {est.shape} vs {ref.shape}")
    c1, c2 = (opts or SsimOptions()).constants(ref)
    est, ref = est.ravel(), ref.ravel()
    mu_e, mu_r = est.mean(), ref.mean()
    var_e, var_r = est.var(), ref.var()
    cov = np.mean((est - mu_e) * (ref - mu_r))
    value = ((2 * mu_e * mu_r + c1) * (2 * cov + c2)) / ((mu_e ** 2 + mu_r ** 2 + c1) * (var_e + var_r + c2))
    return float(min(max(value, 0.0), 1.0))
