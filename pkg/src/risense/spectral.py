"""Rank, singular-value and resolution analysis of sensing operators."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


@dataclass(frozen=True)
class SpectralReport:
    singular_values: np.ndarray
    rank: int
    condition_number: float
    rank_bound: Optional[int] = None
    meta: dict = field(default_factory=dict)

    @property
    def sigma_max(self) -> float:
        return float(self.singular_values[0])

    @property
    def sigma_min(self) -> float:
        return float(self.singular_values[-1])


def spectral_report(matrix, rank_tol: float = 1e-10, bound: Optional[int] = None,
                    meta: Optional[dict] = None) -> SpectralReport:
    """Dense SVD summary; rank counts sigma_i >= rank_tol * sigma_max."""
    mat = np.asarray(getattr(matrix, "matrix", matrix))
    if mat.size == 0:
        raise ValueError("empty matrix")
    sv = np.linalg.svd(mat, compute_uv=False)
    smax = sv[0]
    rank = int(np.count_nonzero(sv >= rank_tol * smax)) if smax > 0 else 0
    cond = float(smax / sv[-1]) if sv[-1] > 0 else float("inf")
    return SpectralReport(sv, rank, cond, bound, dict(meta or {}))


def rank_bound(mode: str, roi_size: int, snapshots, elements: Sequence[int]) -> int:
    """Upper bound on operator rank from the problem dimensions.

    ``dedicated``: min(M, sum_k min(T_k, N_k)) with ``snapshots`` a list of T_k.
    ``shared``: min(M, T, sum_k N_k) with ``snapshots`` the common T.
    """
    elements = [int(n) for n in elements]
    if roi_size < 1 or any(n < 1 for n in elements):
        raise ValueError("counts must be positive")
    if mode == "dedicated":
        snapshots = list(np.broadcast_to(snapshots, (len(elements),)))
        if len(snapshots) != len(elements):
            raise ValueError("one snapshot count per panel is required")
        return int(min(roi_size, sum(min(int(t), n) for t, n in zip(snapshots, elements))))
    if mode == "shared":
        t = int(np.max(snapshots))
        return int(min(roi_size, t, sum(elements)))
    if mode == "single":
        return int(min(roi_size, int(np.max(snapshots)), elements[0]))
    raise ValueError(f"unknown mode {mode!r}")


def _beta(theta: float, delta: float) -> float:
    return np.sin(theta) - np.sin(theta + delta)


def two_source_vandermonde(theta: float, delta: float, n: int, spacing: float,
                           wavelength: float) -> np.ndarray:
    """N x 2 matrix with columns exp(j*2*pi*k*d*sin(angle)/lambda), k = 0..N-1."""
    k = np.arange(n)[:, None]
    s = np.sin(np.array([theta, theta + delta]))[None, :]
    return np.exp(2j * np.pi * k * spacing * s / wavelength)


def sin_ratio(n: int, x):
    """sin(N x) / sin(x), taking the limit value where sin(x) vanishes."""
    x = np.asarray(x, dtype=float)
    num = np.sin(n * x)
    den = np.sin(x)
    near = np.abs(den) < 1e-12
    safe = np.where(near, 1.0, den)
    out = num / safe
    if np.any(near):
        # x = m*pi: the ratio tends to N * cos(N m pi) / cos(m pi) = +/- N
        m = np.round(x / np.pi)
        limit = n * np.cos(n * m * np.pi) / np.cos(m * np.pi)
        out = np.where(near, limit, out)
    return out if out.ndim else float(out)


def vandermonde_extreme_singvals(theta: float, delta: float, n: int, spacing: float,
                                 wavelength: float, allow_degenerate: bool = False):
    """(sigma_max, sigma_min) of the two-source Vandermonde matrix.

    sigma^2 = N +/- |sin(pi N d beta / lambda) / sin(pi d beta / lambda)|,
    beta = sin(theta) - sin(theta + delta). When the two columns coincide
    (beta = 0, or beta a multiple of lambda/d) the ratio is replaced by its
    limit N, giving (sqrt(2N), 0); that case raises ValueError unless
    ``allow_degenerate`` is set.
    """
    if n < 1:
        raise ValueError("need at least one element")
    x = np.pi * spacing * _beta(theta, delta) / wavelength
    degenerate = abs(np.sin(x)) < 1e-12
    if degenerate and not allow_degenerate:
        raise ValueError("the two directions give identical columns (rank-deficient matrix)")
    ratio = abs(sin_ratio(n, x))
    return float(np.sqrt(n + ratio)), float(np.sqrt(max(n - ratio, 0.0)))


def sin_ratio_approx(n: int, x):
    """Second-order series N - N(N^2 - 1) x^2 / 6 of sin(N x)/sin(x)."""
    x = np.asarray(x, dtype=float)
    out = n - n * (n * n - 1) * x * x / 6.0
    return out if out.ndim else float(out)


def sin_ratio_series_coefficient(n: int, k: int) -> float:
    """Coefficient of x^(2k) in sin(N x)/sin(x) (exact finite sum)."""
    from math import factorial

    l = np.arange(n)
    return float((-1) ** k / factorial(2 * k) * np.sum((n - 1 - 2 * l).astype(float) ** (2 * k)))


def sigma_min_incidence_approx(theta: float, delta: float, n: int, spacing: float,
                               wavelength: float) -> float:
    """(pi/sqrt 6)(d/lambda) sqrt(N(N^2-1)) |delta| cos(theta).

    Small-separation estimate of the two-source sigma_min; valid while
    N*pi*d*|delta|*cos(theta)/lambda is well below 1.
    """
    return float(np.pi / np.sqrt(6) * spacing / wavelength * np.sqrt(n * (n * n - 1))
                 * abs(delta) * np.cos(theta))


def mp_sigma_min_approx(snapshots: int, n: int) -> float:
    """sqrt(T) - sqrt(N), the large-matrix estimate of sigma_min for T > N."""
    if snapshots <= n:
        raise ValueError("the estimate needs more snapshots than elements (T > N)")
    return float(np.sqrt(snapshots) - np.sqrt(n))


def mp_density(x, c: float):
    """Marchenko-Pastur density with ratio ``c`` = N/T in (0, 1)."""
    if not 0 < c < 1:
        raise ValueError("ratio c must lie in (0, 1)")
    x = np.asarray(x, dtype=float)
    a, b = (1 - np.sqrt(c)) ** 2, (1 + np.sqrt(c)) ** 2
    inside = np.clip(x - a, 0, None) * np.clip(b - x, 0, None)
    with np.errstate(divide="ignore", invalid="ignore"):
        dens = np.where(x > 0, np.sqrt(inside) / (2 * np.pi * c * np.where(x > 0, x, 1.0)), 0.0)
    return dens if dens.ndim else float(dens)


@dataclass(frozen=True)
class ResolutionQuery:
    """Two closely spaced incident waves on a uniform linear panel."""

    theta: float
    delta: float
    n: int
    spacing: float
    wavelength: float
    snapshots: int
    receiver_distance: float
    gain: float = 1.0
    snr: float = 1000.0  # linear

    def __post_init__(self):
        problems = []
        if self.n < 2:
            problems.append("N must be >= 2")
        if self.snapshots <= self.n:
            problems.append("T must exceed N")
        if self.delta == 0:
            problems.append("delta must be nonzero")
        if abs(np.cos(self.theta)) < 1e-12:
            problems.append("cos(theta) must be nonzero")
        if self.spacing <= 0 or self.wavelength <= 0 or self.receiver_distance <= 0:
            problems.append("spacing, wavelength and receiver distance must be positive")
        if self.gain == 0 or self.snr <= 0:
            problems.append("gain must be nonzero and SNR positive")
        if problems:
            raise ValueError("; ".join(problems))


def relative_error_bound(q: ResolutionQuery) -> float:
    """Approximate upper bound on the least-squares relative error.

    (sqrt6/pi) r_s / tau (d/lambda)^-1 (1 - sqrt(N/T))^-1 N^-3/2
    |delta|^-1 cos(theta)^-1 SNR^-1/2, with SNR = ||E||^2 / sigma^2.
    """
    return float(np.sqrt(6) / np.pi * q.receiver_distance / abs(q.gain)
                 / (q.spacing / q.wavelength) / (1 - np.sqrt(q.n / q.snapshots))
                 * q.n ** -1.5 / abs(q.delta) / abs(np.cos(q.theta)) / np.sqrt(q.snr))
