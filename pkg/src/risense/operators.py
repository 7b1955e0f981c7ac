"""Far-field sensing operators for one or several panels, and measurements.

A single panel observed at a receiver maps the incident field on an RoI
grid through

    H = tau * l(r_s) * exp(j*Omega) @ diag(v) @ V

with ``v`` the steering row toward the receiver and ``V`` the incidence
matrix toward the RoI points. Multi-panel systems append the distance
normalization ``diag(l(r_i))`` per panel and either stack the blocks
(dedicated receivers) or sum them (one shared receiver).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .forward import NoiseDescriptor, PhaseBook, path_factor, synthesize_noise
from .geometry import (ReceiverPose, RegionOfInterest, RisPanel, SphericalDirection,
                       unit_vectors, voxel_to_panel_geometry)

FAR_FIELD_FACTOR = 10.0


class FarFieldWarning(UserWarning):
    """A source or receiver sits closer than the far-field threshold."""


@dataclass(frozen=True)
class PanelBlock:
    panel: str
    rows: slice
    gain: complex  # tau * l(r_s)
    receiver_distance: float


@dataclass(frozen=True)
class SensingOperator:
    matrix: np.ndarray
    mode: str
    blocks: tuple = ()
    roi_size: int = 0

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=complex)
        if mat.ndim != 2:
            raise ValueError("operator matrix must be 2-D")
        if self.mode not in ("single", "dedicated", "shared"):
            raise ValueError(f"unknown operator mode {self.mode!r}")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "roi_size", mat.shape[1])

    @property
    def shape(self):
        return self.matrix.shape

    def __matmul__(self, other):
        return self.matrix @ other


@dataclass(frozen=True)
class MeasurementSet:
    values: np.ndarray
    noise: NoiseDescriptor = field(default_factory=NoiseDescriptor)
    magnitude_only: bool = False

    def __post_init__(self):
        vals = np.asarray(self.values)
        if self.magnitude_only:
            vals = vals.astype(float)
            if np.any(vals < 0):
                raise ValueError("magnitude-only values must be nonnegative")
        else:
            vals = vals.astype(complex)
        object.__setattr__(self, "values", vals.ravel())

    def __len__(self):
        return len(self.values)


def steering_row(panel: RisPanel, direction: SphericalDirection) -> np.ndarray:
    """Entries exp(j*2*pi*p_n.u/lambda) with p_n taken from the panel reference."""
    u = unit_vectors([direction.theta], [direction.phi])[0]
    return np.exp(2j * np.pi * (panel.local_positions @ u) / panel.wavelength)


def _roi_directions(panel: RisPanel, roi: RegionOfInterest):
    if roi.mode == "angular":
        return roi.theta, roi.phi, None
    r, theta, phi = voxel_to_panel_geometry(roi, panel)
    return theta, phi, r


def incidence_matrix(panel: RisPanel, roi: RegionOfInterest) -> np.ndarray:
    """N x M matrix whose column m steers toward RoI point m."""
    if roi.size < 1:
        raise ValueError("RoI is empty")
    theta, phi, _ = _roi_directions(panel, roi)
    u = unit_vectors(theta, phi)
    return np.exp(2j * np.pi * (panel.local_positions @ u.T) / panel.wavelength)


def _check_far_field(panel: RisPanel, distances, what: str):
    limit = FAR_FIELD_FACTOR * panel.aperture
    dmin = float(np.min(distances))
    if limit > 0 and dmin < limit:
        warnings.warn(f"{what} at {dmin:.3g} m is inside {FAR_FIELD_FACTOR:g}x the aperture "
                      f"of panel {panel.name or '?'} ({limit:.3g} m); the factored model is approximate",
                      FarFieldWarning, stacklevel=3)


def _panel_operator(panel: RisPanel, phase_book: PhaseBook, roi: RegionOfInterest,
                    receiver: ReceiverPose):
    if phase_book.n_elements != panel.n_elements:
        raise ValueError(f"phase book has {phase_book.n_elements} columns, "
                         f"panel has {panel.n_elements} elements")
    r_s, theta_s, phi_s = receiver.relative_to(panel)
    _check_far_field(panel, [r_s], "receiver")
    v = steering_row(panel, SphericalDirection(theta_s, phi_s))
    gain = panel.element_gain * path_factor(r_s, panel.wavelength)
    mat = gain * (phase_book.matrix * v[None, :]) @ incidence_matrix(panel, roi)
    return mat, gain, r_s


def assemble_single(panel: RisPanel, phase_book: PhaseBook, roi: RegionOfInterest,
                    receiver: ReceiverPose) -> SensingOperator:
    """T x M operator of one panel, without RoI distance normalization."""
    mat, gain, r_s = _panel_operator(panel, phase_book, roi, receiver)
    block = PanelBlock(panel.name, slice(0, mat.shape[0]), gain, r_s)
    return SensingOperator(mat, "single", (block,))


def distance_normalization(panel: RisPanel, roi: RegionOfInterest) -> np.ndarray:
    """l(r_i) for every voxel, with r_i measured to the panel reference."""
    r, _, _ = voxel_to_panel_geometry(roi, panel)
    _check_far_field(panel, r, "RoI voxel")
    return path_factor(r, panel.wavelength)


def _normalized_block(panel, book, roi, receiver):
    mat, gain, r_s = _panel_operator(panel, book, roi, receiver)
    return mat * distance_normalization(panel, roi)[None, :], gain, r_s


def assemble_dedicated(panels: Sequence[RisPanel], receivers: Sequence[ReceiverPose],
                       phase_books: Sequence[PhaseBook], roi: RegionOfInterest) -> SensingOperator:
    """Stacked blocks H(Omega_k) diag(l(r_i,k)), one receiver per panel."""
    if not (len(panels) == len(receivers) == len(phase_books)) or not panels:
        raise ValueError("need one receiver and one phase book per panel")
    mats, blocks, row = [], [], 0
    for panel, receiver, book in zip(panels, receivers, phase_books):
        mat, gain, r_s = _normalized_block(panel, book, roi, receiver)
        blocks.append(PanelBlock(panel.name, slice(row, row + mat.shape[0]), gain, r_s))
        row += mat.shape[0]
        mats.append(mat)
    return SensingOperator(np.vstack(mats), "dedicated", tuple(blocks))


def assemble_shared(panels: Sequence[RisPanel], phase_books: Sequence[PhaseBook],
                    roi: RegionOfInterest, receiver: ReceiverPose) -> SensingOperator:
    """Sum of H(Omega_k) diag(l(r_i,k)) seen by one receiver.

    Panels switch configurations synchronously: row t of every phase book
    belongs to the same snapshot.
    """
    if len(panels) != len(phase_books) or not panels:
        raise ValueError("need one phase book per panel")
    snapshots = {book.snapshots for book in phase_books}
    if len(snapshots) != 1:
        raise ValueError(f"shared receiver needs equal snapshot counts, got {sorted(snapshots)}")
    total, blocks = None, []
    for panel, book in zip(panels, phase_books):
        mat, gain, r_s = _normalized_block(panel, book, roi, receiver)
        blocks.append(PanelBlock(panel.name, slice(0, mat.shape[0]), gain, r_s))
        total = mat if total is None else total + mat
    return SensingOperator(total, "shared", tuple(blocks))


def measure(op: SensingOperator, roi: RegionOfInterest, noise: Optional[NoiseDescriptor] = None,
            magnitude_only: bool = False) -> MeasurementSet:
    """S = H E + n, or |H E + n| when ``magnitude_only``."""
    noise = noise or NoiseDescriptor()
    if roi.field.size != op.shape[1]:
        raise ValueError(f"field has {roi.field.size} entries, operator expects {op.shape[1]}")
    values = op.matrix @ roi.field
    if noise.variance > 0:
        values = values + synthesize_noise(noise, len(values))
    if magnitude_only:
        values = np.abs(values)
    return MeasurementSet(values, noise, magnitude_only)
