"""Field recovery: least squares for phased data, reweighted Wirtinger flow
for magnitude-only data, and peak picking on angular spectra."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .operators import MeasurementSet, SensingOperator

log = logging.getLogger(__name__)


class MagnitudeOnlyError(ValueError):
    """Least squares was asked to invert magnitude-only data."""


@dataclass(frozen=True)
class LsOptions:
    """``regularization`` is ``none``, ``tsvd`` (relative ``cutoff``) or ``ridge``."""

    regularization: str = "none"
    cutoff: float = 1e-6
    ridge: float = 0.0

    def __post_init__(self):
        if self.regularization not in ("none", "tsvd", "ridge"):
            raise ValueError(f"unknown regularization {self.regularization!r}")
        if not 0 < self.cutoff < 1:
            raise ValueError("cutoff must lie in (0, 1)")
        if self.ridge < 0:
            raise ValueError("ridge weight must be >= 0")


@dataclass(frozen=True)
class LsResult:
    field: np.ndarray
    residual: float
    rank: int


def _matrix(op):
    return np.asarray(getattr(op, "matrix", op))


def _values(meas):
    if isinstance(meas, MeasurementSet):
        if meas.magnitude_only:
            raise MagnitudeOnlyError("least squares needs phased data; use rwf_reconstruct "
                                     "for magnitude-only measurements")
        return meas.values
    return np.asarray(meas, dtype=complex)


def ls_reconstruct(op, meas, opts: Optional[LsOptions] = None) -> LsResult:
    """Pseudo-inverse solution H^+ S through the SVD of H.

    Without regularization only singular values below the floating-point
    floor (max(T, M) * eps * sigma_max) are dropped.
    """
    opts = opts or LsOptions()
    mat = _matrix(op)
    rhs = _values(meas)
    if mat.shape[0] < 1:
        raise ValueError("operator has no rows")
    if len(rhs) != mat.shape[0]:
        raise ValueError(f"{len(rhs)} measurements for an operator with {mat.shape[0]} rows")
    u, s, vh = np.linalg.svd(mat, full_matrices=False)
    smax = s[0] if s.size else 0.0
    if opts.regularization == "ridge" and opts.ridge > 0:
        filt = s / (s ** 2 + opts.ridge)
        rank = int(np.count_nonzero(s > 0))
    else:
        floor = max(mat.shape) * np.finfo(float).eps * smax
        if opts.regularization == "tsvd":
            floor = max(floor, opts.cutoff * smax)
        keep = s > floor
        filt = np.where(keep, 1.0 / np.where(keep, s, 1.0), 0.0)
        rank = int(np.count_nonzero(keep))
    est = vh.conj().T @ (filt * (u.conj().T @ rhs))
    residual = float(np.linalg.norm(mat @ est - rhs))
    return LsResult(est, residual, rank)


@dataclass(frozen=True)
class RwfOptions:
    """Reweighted Wirtinger flow settings.

    ``step`` is dimensionless; the applied step divides it by
    ``4 * ||H||_2^2 * mean_w(|Hz|^2)``. ``eta`` is the reweighting floor;
    ``None`` means ``median(|S|^2) * eta_scale``.
    """

    max_iters: int = 2000
    step: float = 1.0
    eta: Optional[float] = None
    eta_scale: float = 1e-3
    tol: float = 1e-8
    init: str = "spectral"
    initial: Optional[np.ndarray] = None
    max_backtracks: int = 40

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.step > 0 or not self.tol > 0 or not self.eta_scale > 0:
            raise ValueError("step, tol and eta_scale must be positive")
        if self.eta is not None and not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.init not in ("spectral", "provided"):
            raise ValueError(f"unknown init {self.init!r}")
        if self.init == "provided" and self.initial is None:
            raise ValueError("init='provided' needs an initial point")


@dataclass
class RwfResult:
    field: np.ndarray
    loss: float
    iterations: int
    converged: bool
    history: list = field(default_factory=list)


def rwf_weights(mat, intensities, z, eta):
    residual = np.abs(mat @ z) ** 2 - intensities
    return 1.0 / (np.abs(residual) + eta)


def rwf_loss(mat, intensities, z, weights=None) -> float:
    """sum_t w_t (|h_t z|^2 - y_t)^2 with y_t = |S_t|^2."""
    residual = np.abs(mat @ z) ** 2 - intensities
    w = 1.0 if weights is None else weights
    return float(np.sum(w * residual * residual))


def rwf_gradient(mat, intensities, z, weights=None) -> np.ndarray:
    """Wirtinger derivative of :func:`rwf_loss` with respect to conj(z).

    The real-coordinate gradient is (2*Re, 2*Im) of the returned vector.
    """
    u = mat @ z
    residual = np.abs(u) ** 2 - intensities
    w = 1.0 if weights is None else weights
    return 2.0 * (mat.conj().T @ (w * residual * u))


def spectral_init(mat, intensities) -> np.ndarray:
    """Leading eigenvector of sum_t y_t h_t^* h_t, scaled to fit the intensities."""
    weighted = (mat.conj().T * intensities) @ mat / len(intensities)
    _, vecs = np.linalg.eigh(weighted)
    z = vecs[:, -1]
    power = np.abs(mat @ z) ** 2
    denom = float(np.sum(power ** 2))
    scale = np.sqrt(max(float(np.sum(intensities * power)) / denom, 0.0)) if denom > 0 else 0.0
    return scale * z


def rwf_reconstruct(op, meas, opts: Optional[RwfOptions] = None) -> RwfResult:
    """Recover E (up to a global phase) from |S| ~ |H E|.

    Each iteration freezes the weights at the current point and takes a
    gradient step, halving it until the weighted loss does not increase.
    Stops when the relative decrease falls below ``tol``.
    """
    opts = opts or RwfOptions()
    mat = _matrix(op)
    mags = np.abs(meas.values if isinstance(meas, MeasurementSet) else np.asarray(meas))
    if isinstance(meas, MeasurementSet) and not meas.magnitude_only:
        log.debug("rwf given phased data; using magnitudes only")
    if len(mags) != mat.shape[0]:
        raise ValueError(f"{len(mags)} measurements for an operator with {mat.shape[0]} rows")
    if mat.shape[0] < mat.shape[1]:
        warnings.warn("fewer measurements than unknowns; magnitude-only recovery is ill-posed",
                      RuntimeWarning, stacklevel=2)
    y = mags ** 2
    m = mat.shape[1]
    if not np.any(y > 0):
        return RwfResult(np.zeros(m, dtype=complex), 0.0, 0, True)
    if opts.init == "provided":
        z = np.asarray(opts.initial, dtype=complex).ravel().copy()
        if z.size != m:
            raise ValueError("initial point has the wrong size")
    else:
        z = spectral_init(mat, y)
    eta = opts.eta if opts.eta is not None else float(np.median(y)) * opts.eta_scale
    if eta <= 0:
        eta = float(np.mean(y)) * opts.eta_scale
    lip = np.linalg.norm(mat, 2) ** 2

    best_z, best_loss = z.copy(), rwf_loss(mat, y, z)
    history = []
    converged = False
    it = 0
    for it in range(1, opts.max_iters + 1):
        u = mat @ z
        residual = np.abs(u) ** 2 - y
        w = 1.0 / (np.abs(residual) + eta)
        loss0 = float(np.sum(w * residual * residual))
        if loss0 == 0.0:
            converged = True
            break
        grad = 2.0 * (mat.conj().T @ (w * residual * u))
        scale = 4.0 * lip * float(np.sum(w * np.abs(u) ** 2) / np.sum(w))
        mu = opts.step / scale if scale > 0 else opts.step
        for _ in range(opts.max_backtracks):
            trial = z - mu * grad
            loss1 = rwf_loss(mat, y, trial, w)
            if loss1 <= loss0:
                break
            mu *= 0.5
        else:
            # no descent step at this resolution: stationary to machine precision
            converged = True
            break
        z = trial
        history.append((loss0, loss1))
        plain = rwf_loss(mat, y, z)
        if plain < best_loss:
            best_z, best_loss = z.copy(), plain
        if loss0 - loss1 <= opts.tol * loss0:
            converged = True
            break
    if not converged:
        log.info("rwf stopped at max_iters=%d without meeting tol", opts.max_iters)
    return RwfResult(best_z, best_loss, it, converged, history)


@dataclass(frozen=True)
class DoaEstimate:
    angles: np.ndarray
    spectrum: np.ndarray
    peaks: tuple  # ((angle, magnitude), ...) sorted by magnitude
    complete: bool = True

    @property
    def peak_angles(self) -> np.ndarray:
        return np.array([a for a, _ in self.peaks])


def extract_doa_peaks(estimate, angles, n_peaks: int = 1, min_separation: float = 0.0) -> DoaEstimate:
    """Greedy pick of the largest local maxima of |estimate| on a 1-D grid.

    ``angles`` must be sorted. Ties in magnitude go to the smaller index.
    ``complete`` is False when fewer than ``n_peaks`` maxima qualify.
    """
    if n_peaks < 1:
        raise ValueError("n_peaks must be >= 1")
    angles = np.asarray(angles, dtype=float)
    mag = np.abs(np.asarray(estimate)).ravel()
    if mag.shape != angles.shape:
        raise ValueError("spectrum and angle grid differ in length")
    left = np.concatenate([[-np.inf], mag[:-1]])
    right = np.concatenate([mag[1:], [-np.inf]])
    is_max = (mag > left) & (mag >= right) & (mag > 0)
    cand = np.flatnonzero(is_max)
    order = cand[np.lexsort((cand, -mag[cand]))]
    chosen = []
    for idx in order:
        if all(abs(angles[idx] - angles[j]) >= min_separation for j in chosen):
            chosen.append(idx)
            if len(chosen) == n_peaks:
                break
    peaks = tuple((float(angles[i]), float(mag[i])) for i in chosen)
    return DoaEstimate(angles, mag, peaks, len(chosen) == n_peaks)
