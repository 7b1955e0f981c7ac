"""File artifacts: field grids, graymaps, spectra, metrics, measurement and
operator tables. Angles in files are radians; floats use 17 significant
digits so reruns with the same seed are byte-identical."""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .forward import NoiseDescriptor
from .operators import MeasurementSet


def _f(v) -> str:
    return format(float(v), ".17g")


def _grid_header(roi) -> list:
    if roi.mode == "angular":
        return ["# mode=angular", f"# points={roi.size}",
                "# x=signed in-plane angle (rad), y=0"]
    (mx, my), (dx, dy) = roi.counts, roi.pixel_size
    return ["# mode=cartesian", f"# counts={mx},{my}", f"# origin_m={_f(roi.origin[0])},{_f(roi.origin[1])}",
            f"# pixel_size_m={_f(dx)},{_f(dy)}", f"# z_m={_f(roi.z)}",
            "# order=row-major, m = iy*Mx + ix, x/y are pixel centers (m)"]


def _grid_xy(roi):
    if roi.mode == "angular":
        return np.array([d.doa for d in roi.directions]), np.zeros(roi.size)
    pts = roi.points
    return pts[:, 0], pts[:, 1]


def write_field_csv(roi, values, path, extra_header: Iterable[str] = ()) -> Path:
    path = Path(path)
    values = np.asarray(values, dtype=complex).ravel()
    x, y = _grid_xy(roi)
    lines = ["# risense field", *_grid_header(roi), *extra_header, "x,y,re,im,abs"]
    lines += [f"{_f(a)},{_f(b)},{_f(v.real)},{_f(v.imag)},{_f(abs(v))}"
              for a, b, v in zip(x, y, values)]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_field_csv(path) -> np.ndarray:
    rows = _data_rows(path)
    return np.array([float(r["re"]) + 1j * float(r["im"]) for r in rows])


def write_graymap(roi, values, path) -> Path:
    """Plain PGM of |values| scaled so the peak maps to 255; north row first."""
    path = Path(path)
    mag = np.abs(np.asarray(values)).reshape(roi.shape if roi.mode == "cartesian" else (1, roi.size))
    if roi.mode == "cartesian":
        mag = mag[::-1]
    peak = mag.max()
    img = np.zeros(mag.shape, dtype=int) if peak == 0 else np.rint(255 * mag / peak).astype(int)
    h, w = img.shape
    body = "\n".join(" ".join(str(v) for v in row) for row in img)
    path.write_text(f"P2\n{w} {h}\n255\n{body}\n")
    return path


def read_graymap(path) -> np.ndarray:
    tokens = Path(path).read_text().split()
    if tokens[0] != "P2":
        raise ValueError(f"{path}: not a plain PGM file")
    w, h = int(tokens[1]), int(tokens[2])
    return np.array(tokens[4:4 + w * h], dtype=int).reshape(h, w)


def write_spectrum_csv(singular_values, path) -> Path:
    path = Path(path)
    lines = ["index,sigma"] + [f"{i},{_f(s)}" for i, s in enumerate(singular_values)]
    path.write_text("\n".join(lines) + "\n")
    return path


def write_measurements(meas: MeasurementSet, path) -> Path:
    """``index,re,im,abs`` for phased data, ``index,abs`` for magnitudes."""
    path = Path(path)
    if meas.magnitude_only:
        lines = ["index,abs"] + [f"{i},{_f(v)}" for i, v in enumerate(meas.values)]
    else:
        lines = ["index,re,im,abs"] + [f"{i},{_f(v.real)},{_f(v.imag)},{_f(abs(v))}"
                                       for i, v in enumerate(meas.values)]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_measurements(path) -> MeasurementSet:
    """Inverse of :func:`write_measurements`; an ``abs``-only file is magnitude-only.

    Plain magnitude captures (one ``abs`` column) are accepted as well.
    """
    rows = _data_rows(path)
    if not rows:
        raise ValueError(f"{path}: no measurement rows")
    cols = set(rows[0])
    if {"re", "im"} <= cols:
        vals = np.array([float(r["re"]) + 1j * float(r["im"]) for r in rows])
        return MeasurementSet(vals, NoiseDescriptor(), False)
    if "abs" in cols:
        return MeasurementSet(np.array([float(r["abs"]) for r in rows]), NoiseDescriptor(), True)
    raise ValueError(f"{path}: expected columns re,im or abs, found {sorted(cols)}")


def write_operator(op, path) -> Path:
    path = Path(path)
    mat = np.asarray(getattr(op, "matrix", op))
    t, m = mat.shape
    lines = [f"# operator rows={t} cols={m}", "row,col,re,im"]
    lines += [f"{i},{j},{_f(mat[i, j].real)},{_f(mat[i, j].imag)}" for i in range(t) for j in range(m)]
    path.write_text("\n".join(lines) + "\n")
    return path


def write_table(rows: list, path, columns: Optional[list] = None) -> Path:
    """One CSV row per dict; columns default to first-seen key order."""
    path = Path(path)
    if columns is None:
        columns = []
        for r in rows:
            columns += [k for k in r if k not in columns]
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for r in rows:
            writer.writerow([_cell(r.get(c, "")) for c in columns])
    return path


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return _f(v)
    return v


def _data_rows(path) -> list:
    with Path(path).open(newline="") as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.startswith("#")]
    return list(csv.DictReader(lines))


def _jsonable(v):
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    return v


def metrics_document(record) -> dict:
    """Deterministic summary of a run (wall time is left out on purpose)."""
    spec = record.spectrum
    return _jsonable({
        "scenario_hash": record.scenario_hash,
        "version": record.version,
        "method": record.method,
        "metrics": record.metrics,
        "spectrum": {"rank": spec.rank, "rank_bound": spec.rank_bound,
                     "condition_number": spec.condition_number,
                     "sigma_max": spec.sigma_max, "sigma_min": spec.sigma_min},
    })


def emit_outputs(record, out_dir, figures: bool = True) -> dict:
    """Write every artifact of one run; returns {kind: path}.

    Files: ``field_<hash>.csv``, ``field_<hash>.pgm``, ``truth_<hash>.csv``,
    ``spectrum_<hash>.csv``, ``metrics_<hash>.json``, ``scenario_<hash>.toml``,
    ``rwf_log_<hash>.csv`` for phaseless runs, and PNG figures when
    ``figures`` is set.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    h = record.scenario_hash
    paths = {
        "field": write_field_csv(record.roi, record.estimate, out / f"field_{h}.csv",
                                 [f"# scenario={h}", f"# method={record.method}"]),
        "graymap": write_graymap(record.roi, record.estimate, out / f"field_{h}.pgm"),
        "truth": write_field_csv(record.roi, record.truth, out / f"truth_{h}.csv", [f"# scenario={h}"]),
        "spectrum": write_spectrum_csv(record.spectrum.singular_values, out / f"spectrum_{h}.csv"),
    }
    metrics_path = out / f"metrics_{h}.json"
    metrics_path.write_text(json.dumps(metrics_document(record), indent=2, sort_keys=True) + "\n")
    paths["metrics"] = metrics_path
    scn_path = out / f"scenario_{h}.toml"
    scn_path.write_text(record.scenario.to_toml())
    paths["scenario"] = scn_path
    if record.history:
        log_path = out / f"rwf_log_{h}.csv"
        write_table([{"iteration": i + 1, "loss_before": a, "loss_after": b}
                     for i, (a, b) in enumerate(record.history)], log_path)
        paths["rwf_log"] = log_path
    if figures:
        from .plotting import plot_field, plot_spectrum

        paths["field_png"] = plot_field(record, out / f"field_{h}.png")
        paths["spectrum_png"] = plot_spectrum(record.spectrum, out / f"spectrum_{h}.png")
    return paths
