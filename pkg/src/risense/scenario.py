"""Scenario files: schema, defaults, validation and canonical form.

Scenarios are TOML. Keys mirror the simulation parameter table
(``operating_frequency_hz``, ``element_distance_m``,
``distance_roi_to_ris_m`` ...). Angles may be written in degrees
(``*_deg``) or radians (``*_rad``); the canonical form stores radians.
Omitted keys take the defaults below. The scenario hash is the SHA-256 of
the canonical JSON, so it does not depend on key order or on whether an
angle was written in degrees.

Minimal example::

    [[sources]]
    shape = "rectangle"
    from_m = [-3.0, -3.0]
    to_m = [-1.0, 1.0]
"""
from __future__ import annotations

import copy
import hashlib
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib
import tomli_w

LANDMARKS = "ABCDEFGH"
LANDMARK_STEP_DEG = 22.5

STRATEGIES = {
    "I": "A",
    "II": "AE",
    "III": "ACEG",
    "IV": "ABCDEFGH",
}

DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "operating_frequency_hz": 30e9,
    "element_distance_m": 0.01,
    "distance_roi_to_ris_m": 25.0,
    "landmark_offset_rad": 0.0,
    "receiver_mode": "dedicated",
    "phase_distribution": "continuous",
    "magnitude_only": False,
    "method": "auto",
    "roi": {
        "kind": "cartesian",
        "size_m": [10.0, 10.0],
        "pixel_size_m": [1.0, 1.0],
        "center_m": [0.0, 0.0],
        "height_m": 0.0,
    },
    "receiver": {
        "distance_m": 10.0,
        "theta_rad": math.radians(30.0),
        "phi_rad": 0.0,
    },
    "noise": {
        "variance": 0.0,
        "reference": "measurement",
    },
}

DEFAULT_PANEL = {"layout": "linear", "elements": 50, "snapshots": 100, "gain": 1.0}
DEFAULT_LANDMARK_SET = STRATEGIES["III"]

SOURCE_SHAPES = ("point", "rectangle", "l_shape", "direction")


class ScenarioError(ValueError):
    """Scenario failed to parse or validate; ``problems`` lists every issue."""

    def __init__(self, problems, path=None):
        self.problems = [problems] if isinstance(problems, str) else list(problems)
        where = f"{path}: " if path else ""
        super().__init__(where + "; ".join(self.problems))


def _angles_to_rad(node):
    """Replace ``*_deg`` keys by ``*_rad`` throughout a parsed tree."""
    if isinstance(node, list):
        return [_angles_to_rad(v) for v in node]
    if not isinstance(node, dict):
        return node
    out = {}
    for key, val in node.items():
        if key.endswith("_deg"):
            base = key[:-4] + "_rad"
            if base in node:
                raise ScenarioError(f"both {key} and {base} given")
            out[base] = _deg_value(val)
        else:
            out[key] = _angles_to_rad(val)
    return out


def _deg_value(val):
    if isinstance(val, list):
        return [_deg_value(v) for v in val]
    if isinstance(val, dict):
        return {k: _deg_value(v) for k, v in val.items()}
    return math.radians(val)


def _merge(defaults, given):
    out = copy.deepcopy(defaults)
    for key, val in given.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def landmark_angle(label: str, offset: float = 0.0) -> float:
    """Angular position (rad, about the RoI center) of landmark A..H."""
    if label not in LANDMARKS:
        raise ScenarioError(f"unknown landmark {label!r}; expected one of {LANDMARKS}")
    return offset + math.radians(LANDMARK_STEP_DEG) * LANDMARKS.index(label)


def landmark_position(label: str, center, radius: float, offset: float = 0.0, height: float = 0.0):
    a = landmark_angle(label, offset)
    return [center[0] + radius * math.cos(a), center[1] + radius * math.sin(a), height]


@dataclass(frozen=True)
class Scenario:
    """A validated, fully materialized scenario (see :func:`load_scenario`)."""

    data: dict

    @property
    def hash(self) -> str:
        return scenario_hash(self.data)

    def __getitem__(self, key):
        return self.data[key]

    @property
    def wavelength(self) -> float:
        from .geometry import wavelength_of

        return wavelength_of(self.data["operating_frequency_hz"])

    @property
    def panels(self) -> list:
        return self.data["ris"]

    @property
    def sources(self) -> list:
        return self.data["sources"]

    def replace(self, **changes) -> "Scenario":
        """New scenario with top-level or dotted keys (``noise.snr_db``) changed."""
        raw = copy.deepcopy(self.data)
        for key, val in changes.items():
            node = raw
            parts = key.split(".")
            for part in parts[:-1]:
                node = node.setdefault(part, {})
            if val is None:
                node.pop(parts[-1], None)
            else:
                node[parts[-1]] = val
        return from_dict(raw)

    def with_panels(self, panels: list) -> "Scenario":
        raw = copy.deepcopy(self.data)
        raw["ris"] = panels
        return from_dict(raw)

    def to_toml(self) -> str:
        return tomli_w.dumps(_for_toml(self.data))


def _for_toml(node):
    if isinstance(node, dict):
        return {k: _for_toml(v) for k, v in node.items() if v is not None}
    if isinstance(node, list):
        return [_for_toml(v) for v in node]
    return node


def canonical_json(data: dict) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"), allow_nan=False)


def scenario_hash(data: dict) -> str:
    return hashlib.sha256(canonical_json(data).encode()).hexdigest()[:16]


def _as_vec(val, n, name, problems):
    try:
        vec = [float(v) for v in val]
    except (TypeError, ValueError):
        problems.append(f"{name} must be a list of {n} numbers")
        return None
    if len(vec) != n:
        problems.append(f"{name} must have {n} entries, got {len(vec)}")
        return None
    return vec


def _materialize_panels(raw, problems):
    roi = raw["roi"]
    given = raw.get("ris")
    if given is None:
        given = [{"landmark": lab} for lab in DEFAULT_LANDMARK_SET]
    if not isinstance(given, list) or not given:
        problems.append("ris must be a non-empty list of panel tables")
        return []
    center = roi.get("center_m", [0.0, 0.0]) if roi.get("kind") == "cartesian" else [0.0, 0.0]
    height = float(roi.get("height_m", 0.0)) if roi.get("kind") == "cartesian" else 0.0
    center3 = [float(center[0]), float(center[1]), height]
    panels = []
    ids = set()
    for k, spec in enumerate(given):
        if not isinstance(spec, dict):
            problems.append(f"ris[{k}] must be a table")
            continue
        p = _merge(DEFAULT_PANEL, spec)
        p.setdefault("spacing_m", raw["element_distance_m"])
        label = p.get("landmark")
        if label is not None:
            if label not in LANDMARKS:
                problems.append(f"ris[{k}]: unknown landmark {label!r}")
                continue
            p.setdefault("id", label)
            if "position_m" not in p:
                p["position_m"] = landmark_position(label, center3, raw["distance_roi_to_ris_m"],
                                                    raw["landmark_offset_rad"], height)
        if roi.get("kind") == "angular":
            p.setdefault("position_m", [0.0, 0.0, 0.0])
            p.setdefault("facing_m", [0.0, 1.0, 0.0])
        p.setdefault("id", f"ris{k}")
        if p["id"] in ids:
            problems.append(f"ris[{k}]: duplicate id {p['id']!r}")
        ids.add(p["id"])
        if "position_m" not in p:
            problems.append(f"ris[{k}] needs a landmark or position_m")
            continue
        p["position_m"] = _as_vec(p["position_m"], 3, f"ris[{k}].position_m", problems)
        p.setdefault("facing_m", center3)
        p["facing_m"] = _as_vec(p["facing_m"], 3, f"ris[{k}].facing_m", problems)
        if p["layout"] == "planar":
            for key in ("rows", "cols"):
                if not isinstance(p.get(key), int) or p[key] < 1:
                    problems.append(f"ris[{k}].{key} must be a positive integer for planar panels")
            if isinstance(p.get("rows"), int) and isinstance(p.get("cols"), int):
                p["elements"] = p["rows"] * p["cols"]
        elif p["layout"] != "linear":
            problems.append(f"ris[{k}].layout must be 'linear' or 'planar'")
        if not isinstance(p["elements"], int) or p["elements"] < 1:
            problems.append(f"ris[{k}].elements must be a positive integer")
        if not isinstance(p["snapshots"], int) or p["snapshots"] < 1:
            problems.append(f"ris[{k}].snapshots must be a positive integer")
        if not float(p["spacing_m"]) > 0:
            problems.append(f"ris[{k}].spacing_m must be positive")
        p["spacing_m"] = float(p["spacing_m"])
        p["gain"] = float(p["gain"])
        if "receiver_m" in p:
            p["receiver_m"] = _as_vec(p["receiver_m"], 3, f"ris[{k}].receiver_m", problems)
        panels.append(p)
    return panels


def _validate_sources(raw, problems):
    sources = raw.get("sources")
    if not isinstance(sources, list) or not sources:
        problems.append("sources must be a non-empty list of source tables")
        return []
    kind = raw["roi"].get("kind")
    out = []
    for k, src in enumerate(sources):
        if not isinstance(src, dict):
            problems.append(f"sources[{k}] must be a table")
            continue
        s = dict(src)
        shape = s.get("shape")
        if shape not in SOURCE_SHAPES:
            problems.append(f"sources[{k}].shape must be one of {SOURCE_SHAPES}")
            continue
        s["amplitude"] = float(s.get("amplitude", 1.0))
        s["phase_rad"] = float(s.get("phase_rad", 0.0))
        if shape == "direction":
            if kind != "angular":
                problems.append(f"sources[{k}]: 'direction' sources need an angular RoI")
            if "angle_rad" not in s:
                problems.append(f"sources[{k}] needs angle_deg or angle_rad")
        else:
            if kind != "cartesian":
                problems.append(f"sources[{k}]: {shape!r} sources need a Cartesian RoI")
            need = {"point": ("at_m",), "rectangle": ("from_m", "to_m"),
                    "l_shape": ("corner_m", "arms_m")}[shape]
            for key in need:
                if key not in s:
                    problems.append(f"sources[{k}] ({shape}) needs {key}")
                else:
                    s[key] = _as_vec(s[key], 2, f"sources[{k}].{key}", problems)
        out.append(s)
    return out


def from_dict(given: dict, path=None) -> Scenario:
    """Validate a parsed scenario and fill defaults; raises ScenarioError."""
    if not isinstance(given, dict):
        raise ScenarioError("scenario must be a table", path)
    given = _angles_to_rad(given)
    raw = _merge(DEFAULTS, given)
    problems = []
    roi = raw["roi"]
    if roi.get("kind") == "angular":
        for key in ("size_m", "pixel_size_m", "center_m", "height_m"):
            if key in roi and key not in given.get("roi", {}):
                roi.pop(key)
        grid = roi.get("grid_rad")
        if grid is None:
            roi["grid_rad"] = grid = [math.radians(-60.0), math.radians(60.0), math.radians(0.5)]
        if not (isinstance(grid, list) and len(grid) == 3 and grid[2] > 0 and grid[1] >= grid[0]):
            problems.append("roi.grid must be [start, stop, step] with step > 0 and stop >= start")
        elif max(abs(grid[0]), abs(grid[1])) >= math.pi / 2:
            problems.append("roi.grid angles must lie strictly inside (-90, 90) degrees")
    elif roi.get("kind") == "cartesian":
        size = _as_vec(roi.get("size_m"), 2, "roi.size_m", problems)
        pix = _as_vec(roi.get("pixel_size_m"), 2, "roi.pixel_size_m", problems)
        roi["center_m"] = _as_vec(roi.get("center_m"), 2, "roi.center_m", problems)
        roi["height_m"] = float(roi.get("height_m", 0.0))
        if size and pix:
            if min(size) <= 0 or min(pix) <= 0:
                problems.append("roi sizes must be positive")
            else:
                counts = [size[0] / pix[0], size[1] / pix[1]]
                if any(abs(c - round(c)) > 1e-9 for c in counts):
                    problems.append("roi.size_m must be a whole number of pixels")
            roi["size_m"], roi["pixel_size_m"] = size, pix
    else:
        problems.append("roi.kind must be 'cartesian' or 'angular'")

    if raw["receiver_mode"] not in ("dedicated", "shared"):
        problems.append("receiver_mode must be 'dedicated' or 'shared'")
    if raw["phase_distribution"] not in ("continuous", "1bit", "2bit"):
        problems.append("phase_distribution must be 'continuous', '1bit' or '2bit'")
    if raw["method"] not in ("auto", "ls", "rwf"):
        problems.append("method must be 'auto', 'ls' or 'rwf'")
    if not raw["operating_frequency_hz"] > 0:
        problems.append("operating_frequency_hz must be positive")
    if not isinstance(raw["seed"], int) or raw["seed"] < 0:
        problems.append("seed must be a nonnegative integer")

    noise = raw["noise"]
    if "snr_db" in given.get("noise", {}) and "variance" in given.get("noise", {}):
        problems.append("noise: give snr_db or variance, not both")
    if "snr_db" in noise:
        noise.pop("variance", None)
        noise["snr_db"] = float(noise["snr_db"])
    else:
        noise["variance"] = float(noise.get("variance", 0.0))
        if noise["variance"] < 0:
            problems.append("noise.variance must be >= 0")
    if noise.get("reference") not in ("measurement", "field"):
        problems.append("noise.reference must be 'measurement' or 'field'")

    rec = raw["receiver"]
    if "position_m" in rec:
        rec["position_m"] = _as_vec(rec["position_m"], 3, "receiver.position_m", problems)
    if not float(rec.get("distance_m", 1.0)) > 0:
        problems.append("receiver.distance_m must be positive")

    raw["ris"] = _materialize_panels(raw, problems)
    raw["sources"] = _validate_sources(raw, problems)

    if roi.get("kind") == "angular" and len(raw["ris"]) != 1:
        problems.append("an angular RoI needs exactly one panel")
    if raw["receiver_mode"] == "shared" and raw["ris"]:
        counts = {p["snapshots"] for p in raw["ris"]}
        if len(counts) > 1:
            problems.append(f"shared receiver mode needs equal snapshots on every panel, got {sorted(counts)}")
        if any("receiver_m" in p for p in raw["ris"]):
            problems.append("per-panel receiver_m is only valid in dedicated mode")
    if problems:
        raise ScenarioError(problems, path)
    raw = json.loads(canonical_json(raw))  # plain JSON types only
    return Scenario(raw)


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise FileNotFoundError(f"scenario file not found: {path}") from None
    try:
        parsed = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"parse error: {exc}", path) from exc
    return from_dict(parsed, path)


def dump_scenario(scn: Scenario, path) -> Path:
    path = Path(path)
    path.write_text(scn.to_toml())
    return path


def strategy_panels(strategy: str, total_elements: int = 200, total_snapshots: int = 200,
                    layout_extra: Optional[dict] = None) -> list:
    """Panel tables for a deployment strategy with totals split evenly."""
    if strategy not in STRATEGIES:
        raise ScenarioError(f"unknown strategy {strategy!r}; expected one of {list(STRATEGIES)}")
    labels = STRATEGIES[strategy]
    k = len(labels)
    if total_elements % k or total_snapshots % k:
        raise ScenarioError(f"totals {total_elements}/{total_snapshots} do not split over {k} panels")
    return [{"landmark": lab, "elements": total_elements // k, "snapshots": total_snapshots // k,
             **(layout_extra or {})} for lab in labels]


def source_field_cartesian(sources: list, points: np.ndarray, pixel_size) -> np.ndarray:
    """Rasterize source masks onto pixel centers (unit amplitude by default)."""
    field = np.zeros(len(points), dtype=complex)
    dx, dy = pixel_size
    x, y = points[:, 0], points[:, 1]
    for s in sources:
        amp = s["amplitude"] * np.exp(1j * s["phase_rad"])
        shape = s["shape"]
        if shape == "point":
            d = (x - s["at_m"][0]) ** 2 + (y - s["at_m"][1]) ** 2
            mask = d == d.min()
            mask &= np.flatnonzero(mask)[0] == np.arange(len(points))
        elif shape == "rectangle":
            (x0, y0), (x1, y1) = s["from_m"], s["to_m"]
            mask = _between(x, x0, x1) & _between(y, y0, y1)
        else:  # l_shape: arms along +-x and +-y from the corner, strips of width w
            (cx, cy), (ax, ay) = s["corner_m"], s["arms_m"]
            half = float(s.get("width_m", min(dx, dy))) / 2 - 1e-9
            horiz = _between(x, cx, cx + ax) & (np.abs(y - cy) < half)
            vert = _between(y, cy, cy + ay) & (np.abs(x - cx) < half)
            mask = horiz | vert
        field[mask] += amp
    return field


def _between(v, a, b):
    lo, hi = min(a, b), max(a, b)
    return (v >= lo - 1e-9) & (v <= hi + 1e-9)
