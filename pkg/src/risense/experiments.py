"""Experiment orchestration: build a sensing system from a scenario, run
reconstructions, sweep parameters and check the resolution predictor."""
from __future__ import annotations

import copy
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .forward import NoiseDescriptor, PhaseBook, derive_rng
from .geometry import (Pose, ReceiverPose, RegionOfInterest, SphericalDirection,
                       discretize_roi_cartesian, doa_roi, make_uniform_linear_panel,
                       make_uniform_planar_panel)
from .metrics import relative_error, ssim
from .operators import (MeasurementSet, SensingOperator, assemble_dedicated, assemble_shared,
                        assemble_single, measure)
from .reconstruction import (DoaEstimate, LsOptions, MagnitudeOnlyError, RwfOptions,
                             extract_doa_peaks, ls_reconstruct, rwf_reconstruct)
from .scenario import STRATEGIES, Scenario, ScenarioError, source_field_cartesian, strategy_panels
from .spectral import (ResolutionQuery, SpectralReport, rank_bound, relative_error_bound,
                       spectral_report)

log = logging.getLogger(__name__)

PHASE_BITS = {"continuous": None, "1bit": 1, "2bit": 2}


class StageError(RuntimeError):
    """A pipeline stage failed; ``cause`` is the original exception."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"{stage}: {cause}")


class _stage:
    def __init__(self, name):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, kind, exc, tb):
        if exc is not None and not isinstance(exc, StageError):
            raise StageError(self.name, exc) from exc
        return False


@dataclass
class System:
    """Everything needed to synthesize and invert measurements."""

    scenario: Scenario
    roi: RegionOfInterest  # carries the ground-truth field
    panels: list
    receivers: list
    phase_books: list
    operator: SensingOperator
    rank_bound: int

    @property
    def truth(self) -> np.ndarray:
        return self.roi.field


@dataclass
class RunRecord:
    scenario_hash: str
    scenario: Scenario
    method: str
    roi: RegionOfInterest
    estimate: np.ndarray
    metrics: dict
    spectrum: SpectralReport
    wall_time: float
    version: str = __version__
    history: list = field(default_factory=list)
    measurements: Optional[MeasurementSet] = None
    doa: Optional[DoaEstimate] = None

    @property
    def truth(self) -> np.ndarray:
        return self.roi.field


def _seed_int(seed: int, *stream) -> int:
    return int(np.random.SeedSequence([seed, *stream]).generate_state(1, dtype=np.uint64)[0])


def _build_roi(scn: Scenario) -> RegionOfInterest:
    spec = scn["roi"]
    if spec["kind"] == "angular":
        start, stop, step = spec["grid_rad"]
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        angles = start + step * np.arange(count)
        roi = doa_roi(angles)
        field = np.zeros(roi.size, dtype=complex)
        for src in scn.sources:
            idx = int(np.argmin(np.abs(angles - src["angle_rad"])))
            field[idx] += src["amplitude"] * np.exp(1j * src["phase_rad"])
        return roi.with_field(field)
    size, pix, center = spec["size_m"], spec["pixel_size_m"], spec["center_m"]
    counts = (int(round(size[0] / pix[0])), int(round(size[1] / pix[1])))
    origin = (center[0] - size[0] / 2, center[1] - size[1] / 2)
    roi = discretize_roi_cartesian(origin, pix, counts, spec["height_m"])
    return roi.with_field(source_field_cartesian(scn.sources, roi.points, roi.pixel_size))


def _build_panel(spec: dict, wavelength: float):
    facing = Pose.facing(spec["position_m"], spec["facing_m"])
    if spec["layout"] == "planar":
        rows, cols = spec["rows"], spec["cols"]
    else:
        rows, cols = 1, spec["elements"]
    # center the element grid on the requested position
    offset = np.array([(cols - 1) * spec["spacing_m"] / 2, (rows - 1) * spec["spacing_m"] / 2, 0.0])
    pose = Pose(facing.rotation, facing.translation - facing.rotation @ offset)
    return make_uniform_planar_panel(rows, cols, spec["spacing_m"], wavelength, pose,
                                     spec["gain"], spec["id"])


def build_system(scn: Scenario) -> System:
    """Panels, receivers, phase books and the assembled operator."""
    with _stage("geometry"):
        lam = scn.wavelength
        roi = _build_roi(scn)
        panels = [_build_panel(p, lam) for p in scn.panels]
        rec = scn["receiver"]
        if scn["receiver_mode"] == "shared" and roi.mode == "cartesian":
            pos = rec.get("position_m") or list(roi.center + np.array([0.0, 0.0, rec["distance_m"]]))
            receivers = [ReceiverPose(pos)] * len(panels)
        else:
            receivers = [ReceiverPose(p["receiver_m"]) if "receiver_m" in p else
                         ReceiverPose.from_panel(panel, rec["distance_m"], rec["theta_rad"], rec["phi_rad"])
                         for p, panel in zip(scn.panels, panels)]
    with _stage("phase_books"):
        bits = PHASE_BITS[scn["phase_distribution"]]
        books = [PhaseBook.random(p["snapshots"], panel.n_elements, derive_rng(scn["seed"], 1, k), bits)
                 for k, (p, panel) in enumerate(zip(scn.panels, panels))]
    with _stage("operator_assembly"):
        elements = [panel.n_elements for panel in panels]
        snaps = [p["snapshots"] for p in scn.panels]
        if roi.mode == "angular":
            op = assemble_single(panels[0], books[0], roi, receivers[0])
            bound = rank_bound("single", roi.size, snaps[0], elements)
        elif scn["receiver_mode"] == "shared":
            op = assemble_shared(panels, books, roi, receivers[0])
            bound = rank_bound("shared", roi.size, snaps[0], elements)
        else:
            op = assemble_dedicated(panels, receivers, books, roi)
            bound = rank_bound("dedicated", roi.size, snaps, elements)
    return System(scn, roi, panels, receivers, books, op, bound)


def noise_variance(scn: Scenario, system: System) -> float:
    """Per-sample noise variance from ``noise.snr_db`` or ``noise.variance``.

    ``reference = "measurement"`` sets SNR = mean|HE|^2 / sigma^2;
    ``"field"`` sets SNR = ||E||^2 / sigma^2.
    """
    spec = scn["noise"]
    if "snr_db" not in spec:
        return float(spec["variance"])
    if spec["reference"] == "field":
        power = float(np.vdot(system.truth, system.truth).real)
    else:
        power = float(np.mean(np.abs(system.operator.matrix @ system.truth) ** 2))
    return power / 10.0 ** (spec["snr_db"] / 10.0)


def synthesize(system: System, magnitude_only: Optional[bool] = None) -> MeasurementSet:
    scn = system.scenario
    if magnitude_only is None:
        magnitude_only = scn["magnitude_only"]
    with _stage("measurement"):
        noise = NoiseDescriptor(noise_variance(scn, system), _seed_int(scn["seed"], 2))
        return measure(system.operator, system.roi, noise, magnitude_only)


def _method(scn: Scenario, meas: MeasurementSet, method: Optional[str]) -> str:
    method = method or scn["method"]
    if method == "auto":
        method = "rwf" if meas.magnitude_only else "ls"
    if method == "ls" and meas.magnitude_only:
        raise MagnitudeOnlyError("least squares cannot use magnitude-only measurements; use method 'rwf'")
    return method


def run_localization(scn: Scenario, measurements: Optional[MeasurementSet] = None,
                     method: Optional[str] = None, ls_options: Optional[LsOptions] = None,
                     rwf_options: Optional[RwfOptions] = None, system: Optional[System] = None) -> RunRecord:
    """Assemble, measure (unless ``measurements`` is given), reconstruct and score."""
    start = time.perf_counter()
    system = system or build_system(scn)
    meas = measurements if measurements is not None else synthesize(system)
    method = _method(scn, meas, method)
    history = []
    with _stage("reconstruction"):
        if method == "ls":
            res = ls_reconstruct(system.operator, meas, ls_options)
            est, extra = res.field, {"residual": res.residual, "ls_rank": res.rank}
        else:
            res = rwf_reconstruct(system.operator, meas, rwf_options)
            est, history = res.field, res.history
            extra = {"loss": res.loss, "iterations": res.iterations, "converged": res.converged}
    with _stage("spectral_analysis"):
        spec = spectral_report(system.operator, bound=system.rank_bound,
                               meta={"mode": system.operator.mode})
    with _stage("metrics"):
        truth = system.truth
        metrics = {
            "relative_error": relative_error(est, truth, phase_aware=(method == "rwf")),
            "ssim": ssim(est, truth),
            "rank": spec.rank,
            "rank_bound": system.rank_bound,
            "condition_number": spec.condition_number,
            "rows": int(system.operator.shape[0]),
            "roi_size": int(system.operator.shape[1]),
            "noise_variance": float(meas.noise.variance),
            **extra,
        }
    return RunRecord(scn.hash, scn, method, system.roi, est, metrics, spec,
                     time.perf_counter() - start, history=history, measurements=meas)


def run_doa(scn: Scenario, n_peaks: Optional[int] = None, min_separation: float = 0.0,
            measurements: Optional[MeasurementSet] = None, method: Optional[str] = None,
            rwf_options: Optional[RwfOptions] = None):
    """DoA estimation on an angular RoI; returns (DoaEstimate, RunRecord)."""
    if scn["roi"]["kind"] != "angular":
        raise ScenarioError("run_doa needs an angular RoI")
    record = run_localization(scn, measurements, method, rwf_options=rwf_options)
    angles = np.array([d.doa for d in record.roi.directions])
    order = np.argsort(angles, kind="stable")
    n_peaks = n_peaks or len(scn.sources)
    est = extract_doa_peaks(record.estimate[order], angles[order], n_peaks, min_separation)
    truth = sorted(s["angle_rad"] for s in scn.sources)
    found = sorted(est.peak_angles)
    if est.complete:
        record.metrics["doa_error_rad"] = float(max(abs(a - b) for a, b in zip(found, truth)))
    record.metrics["doa_peaks_rad"] = [float(a) for a in est.peak_angles]
    record.doa = est
    return est, record


def peak_pixel(record: RunRecord) -> int:
    return int(np.argmax(np.abs(record.estimate)))


# ---------------------------------------------------------------- sweeps

SWEEP_KINDS = ("measurements", "elements", "snr", "strategy")


def _with_snr(scn: Scenario, snr_db: Optional[float]) -> Scenario:
    raw = copy.deepcopy(scn.data)
    raw["noise"].pop("variance", None)
    raw["noise"].pop("snr_db", None)
    if snr_db is None:
        raw["noise"]["variance"] = 0.0
    else:
        raw["noise"]["snr_db"] = float(snr_db)
    from .scenario import from_dict

    return from_dict(raw)


def sweep_point(scn: Scenario, kind: str, value) -> Scenario:
    """Template scenario with one sweep parameter applied."""
    if kind == "measurements":
        return scn.with_panels([{**p, "snapshots": int(value)} for p in scn.panels])
    if kind == "elements":
        panels = []
        for p in scn.panels:
            if p["layout"] != "linear":
                raise ScenarioError("element sweeps need linear panels")
            panels.append({**p, "elements": int(value)})
        return scn.with_panels(panels)
    if kind == "snr":
        return _with_snr(scn, float(value))
    if kind == "strategy":
        template = {k: v for k, v in scn.panels[0].items()
                    if k in ("layout", "spacing_m", "gain")}
        return scn.with_panels(strategy_panels(str(value), layout_extra=template))
    raise ScenarioError(f"unknown sweep kind {kind!r}; expected one of {SWEEP_KINDS}")


def _run_point(args):
    scn, kind, value, seeds = args
    base = sweep_point(scn, kind, value)
    rows = []
    for i in range(seeds):
        rec = run_localization(base.replace(seed=base["seed"] + i))
        rows.append(rec.metrics)
    def avg(key):
        return float(np.mean([r[key] for r in rows]))
    row = {
        "kind": kind,
        "value": value,
        "seeds": seeds,
        "relative_error": avg("relative_error"),
        "ssim": avg("ssim"),
        "condition_number": avg("condition_number"),
        "rank": avg("rank"),
        "rank_bound": rows[0]["rank_bound"],
        "total_elements": int(sum(p["elements"] for p in base.panels)),
        "total_snapshots": int(sum(p["snapshots"] for p in base.panels)),
        "panels": "".join(str(p.get("landmark") or p["id"]) for p in base.panels)
        if kind == "strategy" else len(base.panels),
    }
    return row


def run_sweep(scn: Scenario, kind: str, values: Sequence, seeds: int = 1, jobs: int = 1) -> list:
    """One summary row per sweep value, metrics averaged over ``seeds`` runs.

    Run ``i`` of every point uses master seed ``scn.seed + i``, so points
    share phase books where their shapes agree.
    """
    if seeds < 1:
        raise ValueError("seeds must be >= 1")
    if kind not in SWEEP_KINDS:
        raise ScenarioError(f"unknown sweep kind {kind!r}; expected one of {SWEEP_KINDS}")
    tasks = [(scn, kind, v, seeds) for v in values]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_point, tasks))
    return [_run_point(t) for t in tasks]


def run_strategy_sweep(scn: Scenario, strategies: Sequence[str] = tuple(STRATEGIES),
                       snr_db: Optional[float] = 30.0, seeds: int = 1, jobs: int = 1) -> list:
    """Deployment strategies with 200 elements and 200 snapshots in total."""
    for s in strategies:
        if s not in STRATEGIES:
            raise ScenarioError(f"unknown strategy {s!r}; expected one of {list(STRATEGIES)}")
    if snr_db is not None:
        scn = _with_snr(scn, snr_db)
    return run_sweep(scn, "strategy", list(strategies), seeds, jobs)


# ------------------------------------------------------ resolution check

def resolution_trial_errors(q: ResolutionQuery, trials: int, seed: int = 0) -> np.ndarray:
    """LS relative errors for two unit sources at theta and theta + delta.

    The panel is a linear array at the origin, the receiver sits
    ``receiver_distance`` away on the panel normal, and the noise variance
    is ||E||^2 / SNR.
    """
    panel = make_uniform_linear_panel(q.n, q.spacing, q.wavelength, element_gain=q.gain, name="probe")
    roi = doa_roi([q.theta, q.theta + q.delta])
    receiver = ReceiverPose.from_panel(panel, q.receiver_distance, 0.0, 0.0)
    errors = np.empty(trials)
    for i in range(trials):
        rng = derive_rng(seed, 3, i)
        book = PhaseBook.random(q.snapshots, q.n, rng)
        op = assemble_single(panel, book, roi, receiver)
        field = np.exp(2j * np.pi * rng.random(2))
        noise = NoiseDescriptor(2.0 / q.snr, _seed_int(seed, 4, i))
        meas = measure(op, roi.with_field(field), noise)
        errors[i] = relative_error(ls_reconstruct(op, meas).field, field)
    return errors


def check_resolution_bound(q: ResolutionQuery, deltas: Sequence[float], trials: int = 20,
                           seed: int = 0) -> list:
    """Monte-Carlo of the LS error against the bound for each separation."""
    rows = []
    for delta in deltas:
        qd = ResolutionQuery(q.theta, float(delta), q.n, q.spacing, q.wavelength, q.snapshots,
                             q.receiver_distance, q.gain, q.snr)
        bound = relative_error_bound(qd)
        err = resolution_trial_errors(qd, trials, seed)
        rows.append({
            "delta_rad": float(delta),
            "bound": bound,
            "mean_error": float(err.mean()),
            "max_error": float(err.max()),
            "within_bound": float(np.mean(err <= bound)),
            "trials": trials,
        })
    return rows


# --------------------------------------------------------------- presets

def four_panel_scenario(**overrides) -> Scenario:
    """Four linear panels at landmarks A, C, E, G; 10 x 10 m RoI of 1 m pixels."""
    from .scenario import from_dict

    raw = {
        "sources": [
            {"shape": "rectangle", "from_m": [-3.5, 1.5], "to_m": [-1.5, 3.5]},
            {"shape": "l_shape", "corner_m": [0.5, -3.5], "arms_m": [3.0, 4.0]},
            {"shape": "point", "at_m": [-2.5, -2.5], "amplitude": 0.8},
        ]
    }
    raw.update(overrides)
    return from_dict(raw)


PROTOTYPE = {
    "operating_frequency_hz": 5.8e9,
    "element_distance_m": 0.025,
    "elements": 16,
    "snapshots": 500,
    "panel_gap_m": 2.81,
    "phase_distribution": "1bit",
}


def quarter_period_receiver_deg(frequency_hz: float, spacing: float) -> float:
    """Receiver angle with sin(theta_s) = lambda / (4 d).

    With binary phases every sensing row is real, so magnitudes cannot
    tell a source at spatial frequency s from its conjugate twin at
    -2 s_r - s (s_r the receiver's). Placing the receiver a quarter
    aliasing period off boresight moves the twin of broadside sources to
    the edge of the visible band.
    """
    from .geometry import wavelength_of

    ratio = wavelength_of(frequency_hz) / (4.0 * spacing)
    if ratio >= 1:
        raise ValueError("element spacing below a quarter wavelength has no such angle")
    return math.degrees(math.asin(ratio))


def prototype_doa_scenario(angle_deg: float = -8.5, snr_db: Optional[float] = 20.0, seed: int = 0,
                           magnitude_only: bool = True, extra_sources=()) -> Scenario:
    """One 16-element 1-bit panel, angular grid -60..60 deg in 0.5 deg steps."""
    from .scenario import from_dict

    raw = {
        "seed": seed,
        "operating_frequency_hz": PROTOTYPE["operating_frequency_hz"],
        "element_distance_m": PROTOTYPE["element_distance_m"],
        "phase_distribution": PROTOTYPE["phase_distribution"],
        "magnitude_only": magnitude_only,
        "roi": {"kind": "angular", "grid_deg": [-60.0, 60.0, 0.5]},
        "receiver": {"distance_m": 5.0, "phi_deg": 0.0, "theta_deg": quarter_period_receiver_deg(
            PROTOTYPE["operating_frequency_hz"], PROTOTYPE["element_distance_m"])},
        "ris": [{"id": "left", "elements": PROTOTYPE["elements"],
                 "snapshots": PROTOTYPE["snapshots"]}],
        "sources": [{"shape": "direction", "angle_deg": a} for a in (angle_deg, *extra_sources)],
    }
    raw["noise"] = {"snr_db": snr_db} if snr_db is not None else {"variance": 0.0}
    return from_dict(raw)


def prototype_localization_scenario(source_m=(-1.0, 6.0), snr_db: Optional[float] = 20.0,
                                    seed: int = 0, magnitude_only: bool = True) -> Scenario:
    """Two 16-element 1-bit panels 2.81 m apart facing a 12 x 12 m RoI of 2 m pixels."""
    from .scenario import from_dict

    half = PROTOTYPE["panel_gap_m"] / 2
    panels = [{"id": name, "position_m": [x, 0.0, 0.0], "facing_m": [x, 1.0, 0.0],
               "elements": PROTOTYPE["elements"], "snapshots": PROTOTYPE["snapshots"]}
              for name, x in (("left", -half), ("right", half))]
    raw = {
        "seed": seed,
        "operating_frequency_hz": PROTOTYPE["operating_frequency_hz"],
        "element_distance_m": PROTOTYPE["element_distance_m"],
        "phase_distribution": PROTOTYPE["phase_distribution"],
        "magnitude_only": magnitude_only,
        "roi": {"kind": "cartesian", "size_m": [12.0, 12.0], "pixel_size_m": [2.0, 2.0],
                "center_m": [0.0, 9.0]},
        "receiver": {"distance_m": 5.0, "phi_deg": 0.0, "theta_deg": quarter_period_receiver_deg(
            PROTOTYPE["operating_frequency_hz"], PROTOTYPE["element_distance_m"])},
        "ris": panels,
        "sources": [{"shape": "point", "at_m": list(source_m)}],
    }
    raw["noise"] = {"snr_db": snr_db} if snr_db is not None else {"variance": 0.0}
    return from_dict(raw)
