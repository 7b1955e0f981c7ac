"""Coordinate conventions, panel layouts and region-of-interest grids.

Every panel carries a local frame: the element plane is the local xy-plane
and the local z-axis is the panel normal (boresight). Directions are given
as polar angle ``theta`` from the normal and azimuth ``phi`` measured from
the local x-axis. Positions are in meters and angles in radians.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0

_TWO_PI = 2.0 * np.pi


def wavelength_of(frequency_hz: float) -> float:
    if frequency_hz <= 0:
        raise ValueError(f"frequency must be positive, got {frequency_hz}")
    return SPEED_OF_LIGHT / frequency_hz


@dataclass(frozen=True)
class SphericalDirection:
    """Direction in a panel frame; ``phi`` is normalized to [0, 2*pi)."""

    theta: float
    phi: float = 0.0

    def __post_init__(self):
        theta = float(self.theta)
        if not (0.0 <= theta <= np.pi):
            raise ValueError(f"theta must lie in [0, pi], got {theta}")
        phi = float(np.mod(self.phi, _TWO_PI))
        if phi >= _TWO_PI:  # mod can round up to exactly 2*pi
            phi = 0.0
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "phi", phi)

    @classmethod
    def from_doa(cls, angle: float) -> "SphericalDirection":
        """In-plane direction at signed angle ``angle`` from boresight.

        Positive angles tilt toward the local +x axis (the array axis of a
        linear panel), negative ones toward -x.
        """
        if angle >= 0:
            return cls(angle, 0.0)
        return cls(-angle, np.pi)

    @property
    def doa(self) -> float:
        """Signed in-plane angle, the inverse of :meth:`from_doa`."""
        return float(np.arctan2(np.sin(self.theta) * np.cos(self.phi), np.cos(self.theta)))


def unit_direction(direction: SphericalDirection) -> np.ndarray:
    """Return ``[sin(t)cos(p), sin(t)sin(p), cos(t)]`` for a direction."""
    return unit_vectors(np.array([direction.theta]), np.array([direction.phi]))[0]


def unit_vectors(theta, phi) -> np.ndarray:
    """Vectorized :func:`unit_direction`; returns an array of shape (M, 3)."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    phi = np.broadcast_to(np.asarray(phi, dtype=float), theta.shape)
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)


def cartesian_to_spherical(vectors: np.ndarray):
    """Split local-frame vectors into (r, theta, phi) arrays."""
    vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
    r = np.linalg.norm(vectors, axis=1)
    if np.any(r <= 0):
        raise ValueError("point coincides with the frame origin")
    theta = np.arccos(np.clip(vectors[:, 2] / r, -1.0, 1.0))
    phi = np.mod(np.arctan2(vectors[:, 1], vectors[:, 0]), _TWO_PI)
    return r, theta, phi


@dataclass(frozen=True)
class Pose:
    """Rigid transform from a local frame to the global frame."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        rot = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        if not np.allclose(rot.T @ rot, np.eye(3), atol=1e-9) or np.linalg.det(rot) < 0:
            raise ValueError("rotation must be a proper orthonormal matrix")
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=float).reshape(3))

    @classmethod
    def facing(cls, position, target, up=(0.0, 0.0, 1.0)) -> "Pose":
        """Pose at ``position`` whose local z-axis points at ``target``.

        The local x-axis is horizontal (``normal x up``), so a linear panel
        built in this pose lies tangent to any circle centered on ``target``
        in the plane orthogonal to ``up``.
        """
        position = np.asarray(position, dtype=float)
        normal = np.asarray(target, dtype=float) - position
        norm = np.linalg.norm(normal)
        if norm == 0:
            raise ValueError("target coincides with position")
        normal = normal / norm
        x_axis = np.cross(normal, np.asarray(up, dtype=float))
        if np.linalg.norm(x_axis) < 1e-12:
            x_axis = np.array([1.0, 0.0, 0.0])
            x_axis = x_axis - normal * (x_axis @ normal)
        x_axis = x_axis / np.linalg.norm(x_axis)
        y_axis = np.cross(normal, x_axis)
        return cls(np.column_stack([x_axis, y_axis, normal]), position)

    def apply(self, local_points: np.ndarray) -> np.ndarray:
        return np.asarray(local_points, dtype=float) @ self.rotation.T + self.translation


GainPattern = Callable[[np.ndarray, np.ndarray, np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class RisPanel:
    """A reconfigurable surface: element positions plus its local frame.

    ``elements`` are global positions. ``rotation`` maps local axes to
    global ones and ``reference`` is the element centroid, which is the
    origin used for far-field phase terms and panel distances.
    ``gain_pattern``, when given, replaces the constant ``element_gain``
    in the per-element model; it is called as
    ``gain_pattern(theta_s, phi_s, theta_i, phi_i)`` with local angles.
    """

    elements: np.ndarray
    spacing: float
    wavelength: float
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    element_gain: complex = 1.0
    gain_pattern: Optional[GainPattern] = None
    name: str = ""

    def __post_init__(self):
        elements = np.atleast_2d(np.asarray(self.elements, dtype=float))
        if elements.ndim != 2 or elements.shape[1] != 3 or elements.shape[0] < 1:
            raise ValueError("elements must be a non-empty (N, 3) array")
        if not self.spacing > 0:
            raise ValueError(f"spacing must be positive, got {self.spacing}")
        if not self.wavelength > 0:
            raise ValueError(f"wavelength must be positive, got {self.wavelength}")
        if len(elements) > 1:
            diffs = elements[:, None, :] - elements[None, :, :]
            dist = np.linalg.norm(diffs, axis=-1) + np.eye(len(elements))
            if np.min(dist) <= 0:
                raise ValueError("element positions must be pairwise distinct")
        elements.setflags(write=False)
        object.__setattr__(self, "elements", elements)
        object.__setattr__(self, "rotation", Pose(self.rotation).rotation)
        object.__setattr__(self, "element_gain", complex(self.element_gain))

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def reference(self) -> np.ndarray:
        return self.elements.mean(axis=0)

    @property
    def normal(self) -> np.ndarray:
        return self.rotation[:, 2]

    @property
    def local_positions(self) -> np.ndarray:
        """Element offsets from the reference, expressed in the local frame."""
        return (self.elements - self.reference) @ self.rotation

    @property
    def aperture(self) -> float:
        if self.n_elements == 1:
            return 0.0
        diffs = self.elements[:, None, :] - self.elements[None, :, :]
        return float(np.max(np.linalg.norm(diffs, axis=-1)))

    def to_local(self, points: np.ndarray) -> np.ndarray:
        """Global points -> local-frame offsets from the reference."""
        return (np.atleast_2d(np.asarray(points, dtype=float)) - self.reference) @ self.rotation

    def locate(self, points: np.ndarray):
        """(r, theta, phi) of global points seen from the panel reference."""
        return cartesian_to_spherical(self.to_local(points))


def make_uniform_linear_panel(n_elems: int, spacing: float, wavelength: float,
                              pose: Optional[Pose] = None, element_gain: complex = 1.0,
                              name: str = "") -> RisPanel:
    """Linear panel with element ``k`` at local ``(k*spacing, 0, 0)``."""
    return make_uniform_planar_panel(1, n_elems, spacing, wavelength, pose, element_gain, name)


def make_uniform_planar_panel(rows: int, cols: int, spacing: float, wavelength: float,
                              pose: Optional[Pose] = None, element_gain: complex = 1.0,
                              name: str = "") -> RisPanel:
    """Planar panel, row-major: element ``r*cols + c`` sits at ``(c*d, r*d, 0)``."""
    if rows < 1 or cols < 1:
        raise ValueError("panel needs at least one row and one column")
    if not spacing > 0:
        raise ValueError(f"spacing must be positive, got {spacing}")
    if not wavelength > 0:
        raise ValueError(f"wavelength must be positive, got {wavelength}")
    pose = pose or Pose()
    rr, cc = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    local = np.stack([cc.ravel() * spacing, rr.ravel() * spacing, np.zeros(rows * cols)], axis=1)
    return RisPanel(pose.apply(local), spacing, wavelength, pose.rotation, element_gain, None, name)


@dataclass(frozen=True)
class RegionOfInterest:
    """Discretized scene: an angular grid or a Cartesian pixel grid.

    Angular grids hold per-point ``theta``/``phi`` in the frame of the
    panel they are used with. Cartesian grids are ``counts = (Mx, My)``
    pixels of size ``pixel_size`` starting at ``origin`` (lower-left
    corner) on the plane ``z``; point ``m = iy*Mx + ix`` sits at the pixel
    center.
    """

    mode: str
    theta: Optional[np.ndarray] = None
    phi: Optional[np.ndarray] = None
    origin: Optional[tuple] = None
    pixel_size: Optional[tuple] = None
    counts: Optional[tuple] = None
    z: float = 0.0
    field: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.mode == "angular":
            theta = np.atleast_1d(np.asarray(self.theta, dtype=float))
            phi = np.broadcast_to(np.asarray(0.0 if self.phi is None else self.phi, dtype=float),
                                  theta.shape).copy()
            if theta.size < 1:
                raise ValueError("angular RoI needs at least one direction")
            for t, p in zip(theta, phi):
                SphericalDirection(t, p)
            u = unit_vectors(theta, phi)
            if len(u) > 1:
                gaps = np.linalg.norm(u[:, None, :] - u[None, :, :], axis=-1) + np.eye(len(u))
                if np.min(gaps) < 1e-12:
                    raise ValueError("angular grid points must be pairwise distinct")
            object.__setattr__(self, "theta", theta)
            object.__setattr__(self, "phi", np.mod(phi, _TWO_PI))
        elif self.mode == "cartesian":
            mx, my = (int(c) for c in self.counts)
            dx, dy = (float(p) for p in self.pixel_size)
            if mx < 1 or my < 1:
                raise ValueError("pixel counts must be >= 1")
            if dx <= 0 or dy <= 0:
                raise ValueError("pixel size must be positive")
            object.__setattr__(self, "counts", (mx, my))
            object.__setattr__(self, "pixel_size", (dx, dy))
            object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))
            object.__setattr__(self, "z", float(self.z))
        else:
            raise ValueError(f"unknown RoI mode {self.mode!r}")
        if self.field is None:
            object.__setattr__(self, "field", np.zeros(self.size, dtype=complex))
        else:
            fld = np.asarray(self.field, dtype=complex).ravel()
            if fld.size != self.size:
                raise ValueError(f"field has {fld.size} entries, RoI has {self.size}")
            object.__setattr__(self, "field", fld)

    @property
    def size(self) -> int:
        if self.mode == "angular":
            return len(self.theta)
        return self.counts[0] * self.counts[1]

    @property
    def shape(self) -> tuple:
        """Grid shape for display: (My, Mx) or (M,)."""
        if self.mode == "angular":
            return (self.size,)
        return (self.counts[1], self.counts[0])

    @property
    def directions(self) -> list:
        if self.mode != "angular":
            raise ValueError("directions exist only for angular RoIs")
        return [SphericalDirection(t, p) for t, p in zip(self.theta, self.phi)]

    @property
    def points(self) -> np.ndarray:
        """Pixel-center positions, shape (M, 3); Cartesian mode only."""
        if self.mode != "cartesian":
            raise ValueError("points exist only for Cartesian RoIs")
        (mx, my), (dx, dy) = self.counts, self.pixel_size
        xs = self.origin[0] + (np.arange(mx) + 0.5) * dx
        ys = self.origin[1] + (np.arange(my) + 0.5) * dy
        gx, gy = np.meshgrid(xs, ys)
        return np.stack([gx.ravel(), gy.ravel(), np.full(mx * my, self.z)], axis=1)

    @property
    def center(self) -> np.ndarray:
        (mx, my), (dx, dy) = self.counts, self.pixel_size
        return np.array([self.origin[0] + mx * dx / 2, self.origin[1] + my * dy / 2, self.z])

    def with_field(self, field) -> "RegionOfInterest":
        return replace(self, field=np.asarray(field, dtype=complex).ravel())


def angular_roi(theta: Sequence[float], phi=0.0, field=None) -> RegionOfInterest:
    return RegionOfInterest("angular", theta=np.asarray(theta, dtype=float), phi=phi, field=field)


def doa_roi(angles: Sequence[float], field=None) -> RegionOfInterest:
    """Angular RoI over signed in-plane angles (see :meth:`SphericalDirection.from_doa`)."""
    dirs = [SphericalDirection.from_doa(a) for a in angles]
    return angular_roi([d.theta for d in dirs], [d.phi for d in dirs], field)


def discretize_roi_cartesian(origin, pixel_size, counts, z: float = 0.0) -> RegionOfInterest:
    if np.isscalar(pixel_size):
        pixel_size = (pixel_size, pixel_size)
    if np.isscalar(counts):
        counts = (counts, counts)
    return RegionOfInterest("cartesian", origin=tuple(origin)[:2], pixel_size=tuple(pixel_size),
                            counts=tuple(counts), z=z)


def voxel_to_panel_geometry(roi: RegionOfInterest, panel: RisPanel):
    """Distance and local angles of every voxel center from the panel reference."""
    if roi.mode != "cartesian":
        raise ValueError("voxel geometry requires a Cartesian RoI")
    local = panel.to_local(roi.points)
    if np.any(np.linalg.norm(local, axis=1) <= 0):
        raise ValueError("a voxel coincides with the panel reference")
    return cartesian_to_spherical(local)


@dataclass(frozen=True)
class ReceiverPose:
    position: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(3))

    @classmethod
    def from_panel(cls, panel: RisPanel, distance: float, theta: float, phi: float) -> "ReceiverPose":
        """Receiver at (distance, theta, phi) in the panel's local frame."""
        offset = distance * unit_vectors([theta], [phi])[0]
        return cls(panel.reference + panel.rotation @ offset)

    def relative_to(self, panel: RisPanel):
        """(r_s, theta_s, phi_s) of this receiver in the panel frame."""
        r, theta, phi = panel.locate(self.position)
        return float(r[0]), float(theta[0]), float(phi[0])
