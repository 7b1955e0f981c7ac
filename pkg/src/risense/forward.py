"""Per-element forward aggregation, phase books and measurement noise."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import RisPanel, cartesian_to_spherical

_TWO_PI = 2.0 * np.pi


def derive_rng(seed: int, *stream) -> np.random.Generator:
    """Independent generator for ``(seed, *stream)``; order of draws across
    streams does not matter, so parallel trials stay reproducible."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *(int(s) for s in stream)]))


@dataclass(frozen=True)
class PhaseBook:
    """T x N configuration phases in [0, 2*pi); ``bits`` marks quantized books."""

    phases: np.ndarray
    bits: Optional[int] = None

    def __post_init__(self):
        phases = np.atleast_2d(np.asarray(self.phases, dtype=float))
        if phases.ndim != 2 or phases.size == 0:
            raise ValueError("phase book must be a non-empty T x N matrix")
        if np.any(phases < 0) or np.any(phases >= _TWO_PI):
            raise ValueError("phases must lie in [0, 2*pi)")
        if self.bits is not None:
            levels = _TWO_PI * np.arange(2 ** self.bits) / 2 ** self.bits
            if not np.all(np.min(np.abs(phases[..., None] - levels), axis=-1) < 1e-12):
                raise ValueError(f"phases are not on the {self.bits}-bit grid")
        phases.setflags(write=False)
        object.__setattr__(self, "phases", phases)

    @classmethod
    def random(cls, snapshots: int, n_elements: int, rng: np.random.Generator,
               bits: Optional[int] = None) -> "PhaseBook":
        """i.i.d. configurations: uniform on [0, 2*pi) or uniform over the n-bit levels."""
        if bits is None:
            phases = rng.uniform(0.0, _TWO_PI, size=(snapshots, n_elements))
        else:
            phases = _TWO_PI * rng.integers(0, 2 ** bits, size=(snapshots, n_elements)) / 2 ** bits
        return cls(np.mod(phases, _TWO_PI), bits)

    @property
    def snapshots(self) -> int:
        return self.phases.shape[0]

    @property
    def n_elements(self) -> int:
        return self.phases.shape[1]

    @property
    def matrix(self) -> np.ndarray:
        """The complex configuration matrix exp(j*phases)."""
        return np.exp(1j * self.phases)


@dataclass(frozen=True)
class NoiseDescriptor:
    variance: float = 0.0
    seed: int = 0
    kind: str = "complex-gaussian"

    def __post_init__(self):
        if not self.variance >= 0:
            raise ValueError(f"noise variance must be >= 0, got {self.variance}")
        if self.kind != "complex-gaussian":
            raise ValueError(f"unsupported noise kind {self.kind!r}")


def path_factor(r, wavelength: float):
    """Spherical-wave factor exp(-j*2*pi*r/wavelength) / r."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("path length must be positive")
    out = np.exp(-1j * _TWO_PI * r / wavelength) / r
    return complex(out) if out.ndim == 0 else out


def aggregate_direct(panel: RisPanel, source_positions, amplitudes, config, receiver) -> complex:
    """Field at ``receiver`` summed over every source-element-receiver path.

    Uses the exact element-wise distances, so it carries no far-field
    approximation. ``config`` is one row of phases (length N).
    """
    src = np.atleast_2d(np.asarray(source_positions, dtype=float))
    amp = np.atleast_1d(np.asarray(amplitudes, dtype=complex))
    config = np.asarray(config, dtype=float).ravel()
    rx = np.asarray(getattr(receiver, "position", receiver), dtype=float).reshape(3)
    if len(amp) != len(src):
        raise ValueError("one amplitude per source is required")
    if len(config) != panel.n_elements:
        raise ValueError("configuration length must equal the element count")
    elems = panel.elements
    d_in = np.linalg.norm(src[:, None, :] - elems[None, :, :], axis=-1)  # (M, N)
    d_out = np.linalg.norm(rx[None, :] - elems, axis=-1)  # (N,)
    if np.any(d_in <= 0):
        raise ValueError("a source coincides with a panel element")
    if np.any(d_out <= 0):
        raise ValueError("the receiver coincides with a panel element")
    gain = _element_gains(panel, src, rx)
    paths = gain * path_factor(d_in, panel.wavelength) * path_factor(d_out, panel.wavelength)[None, :]
    return complex(amp @ (paths @ np.exp(1j * config)))


def _element_gains(panel: RisPanel, src: np.ndarray, rx: np.ndarray):
    if panel.gain_pattern is None:
        return panel.element_gain
    # angles at each element in the panel's local frame
    rot = panel.rotation
    loc_in = (src[:, None, :] - panel.elements[None, :, :]) @ rot
    loc_out = (rx[None, :] - panel.elements) @ rot
    _, t_i, p_i = cartesian_to_spherical(loc_in.reshape(-1, 3))
    _, t_s, p_s = cartesian_to_spherical(loc_out)
    m, n = loc_in.shape[:2]
    return np.asarray(panel.gain_pattern(np.tile(t_s, m), np.tile(p_s, m), t_i, p_i),
                      dtype=complex).reshape(m, n)


def synthesize_noise(desc: NoiseDescriptor, length: int) -> np.ndarray:
    """Circular complex Gaussian noise, per-sample variance ``desc.variance``."""
    if length < 1:
        raise ValueError("noise length must be >= 1")
    rng = np.random.default_rng(desc.seed)
    scale = np.sqrt(desc.variance / 2.0)
    return scale * (rng.standard_normal(length) + 1j * rng.standard_normal(length))


def snr_of(field, variance: float) -> float:
    """10*log10(||E||^2 / variance) in dB."""
    if not variance > 0:
        raise ValueError("noise variance must be positive to define an SNR")
    power = float(np.vdot(field, field).real)
    return 10.0 * np.log10(power / variance)


def variance_for_snr(power: float, snr_db: float) -> float:
    """Noise variance giving ``power / variance`` equal to ``snr_db``."""
    return float(power) / 10.0 ** (snr_db / 10.0)
