"""Field sensing with reconfigurable intelligent surfaces.

Forward modelling, operator assembly, least-squares and phaseless
reconstruction, and spectral analysis of the resulting sensing operators.
"""
__version__ = "0.1.0"

from .geometry import (Pose, ReceiverPose, RegionOfInterest, RisPanel, SphericalDirection,
                       angular_roi, discretize_roi_cartesian, doa_roi, make_uniform_linear_panel,
                       make_uniform_planar_panel, wavelength_of)
from .forward import NoiseDescriptor, PhaseBook, aggregate_direct
from .operators import (MeasurementSet, SensingOperator, assemble_dedicated, assemble_shared,
                        assemble_single, measure)
from .reconstruction import (LsOptions, RwfOptions, extract_doa_peaks, ls_reconstruct,
                             rwf_reconstruct)
from .metrics import relative_error, ssim
from .spectral import ResolutionQuery, relative_error_bound, spectral_report

__all__ = [
    "Pose", "ReceiverPose", "RegionOfInterest", "RisPanel", "SphericalDirection",
    "angular_roi", "discretize_roi_cartesian", "doa_roi", "make_uniform_linear_panel",
    "make_uniform_planar_panel", "wavelength_of", "NoiseDescriptor", "PhaseBook",
    "aggregate_direct", "MeasurementSet", "SensingOperator", "assemble_dedicated",
    "assemble_shared", "assemble_single", "measure", "LsOptions", "RwfOptions",
    "extract_doa_peaks", "ls_reconstruct", "rwf_reconstruct", "relative_error", "ssim",
    "ResolutionQuery", "relative_error_bound", "spectral_report",
]
