"""Command-line entry point: ``risense {forward,reconstruct,spectrum,sweep,bound}``.

Angles are given in degrees on the command line and stored in radians in
every file. Exit codes: 0 success, 2 invalid input, 3 numerical failure
(including non-convergence), 4 I/O error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .experiments import (SWEEP_KINDS, StageError, _with_snr, build_system, check_resolution_bound,
                          run_doa, run_localization, run_sweep, synthesize)
from .geometry import wavelength_of
from .outputs import emit_outputs, read_measurements, write_measurements, write_operator, write_table
from .operators import MeasurementSet
from .reconstruction import RwfOptions
from .scenario import STRATEGIES, ScenarioError, load_scenario
from .spectral import ResolutionQuery, relative_error_bound

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("risense")


class NumericalFailure(RuntimeError):
    pass


def _float_list(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got {text!r}")


def _u64(text: str) -> int:
    try:
        val = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}")
    if not 0 <= val < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must lie in [0, 2^64)")
    return val


def _scenario_args(p, sweep=False):
    p.add_argument("--scenario", required=True, metavar="PATH", help="scenario TOML file")
    p.add_argument("--out", default=".", metavar="DIR", help="output directory (default: .)")
    p.add_argument("--seed", type=_u64, metavar="U64", help="override the master seed")
    p.add_argument("--snr-db", type=float, metavar="F", help="override the noise level (dB)")
    if not sweep:
        p.add_argument("--magnitude-only", action="store_true", help="keep only |S|")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="risense", description=__doc__.split("\n\n")[0],
                                     allow_abbrev=False)
    parser.add_argument("--version", action="version", version=f"risense {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("forward", help="synthesize measurements S = HE + n", allow_abbrev=False,
                       parents=[common])
    _scenario_args(p)
    p.add_argument("--operator", action="store_true", help="also write the operator as CSV")

    p = sub.add_parser("reconstruct", help="recover the field (least squares or RWF)", allow_abbrev=False,
                       parents=[common])
    _scenario_args(p)
    p.add_argument("--method", choices=("ls", "rwf"), help="solver (default: rwf for magnitudes, else ls)")
    p.add_argument("--measurements", metavar="CSV", help="use these measurements instead of synthesizing")
    p.add_argument("--max-iters", type=int, default=2000, metavar="K", help="RWF iteration cap")
    p.add_argument("--no-figures", action="store_true", help="skip PNG figures")

    p = sub.add_parser("spectrum", help="singular values, rank and rank bound", allow_abbrev=False,
                       parents=[common])
    _scenario_args(p)

    p = sub.add_parser("sweep", help="parameter sweep with one summary row per point", allow_abbrev=False,
                       parents=[common])
    _scenario_args(p, sweep=True)
    p.add_argument("--kind", required=True, choices=SWEEP_KINDS)
    p.add_argument("--sweep", metavar="LIST",
                   help="comma-separated values; strategy sweeps take labels such as I,II,III,IV")
    p.add_argument("--seeds", type=int, default=1, metavar="K", help="runs averaged per point")
    p.add_argument("--jobs", type=int, default=1, metavar="J", help="worker processes")
    p.add_argument("--no-figures", action="store_true", help="skip the PNG figure")

    p = sub.add_parser("bound", help="resolution bound for two close sources", allow_abbrev=False,
                       parents=[common])
    p.add_argument("--theta-deg", type=float, required=True, help="incidence angle of the first source")
    p.add_argument("--delta-deg", type=float, required=True, help="angular separation")
    p.add_argument("--elements", type=int, default=50)
    p.add_argument("--snapshots", type=int, default=500)
    p.add_argument("--spacing", type=float, default=0.01, metavar="M", help="element spacing (m)")
    p.add_argument("--frequency-hz", type=float, default=30e9)
    p.add_argument("--receiver-distance", type=float, default=10.0, metavar="M")
    p.add_argument("--gain", type=float, default=1.0, help="element gain tau")
    p.add_argument("--snr-db", type=float, default=30.0, metavar="F", help="||E||^2 / sigma^2 in dB")
    p.add_argument("--check", action="store_true", help="run a Monte-Carlo check against the bound")
    p.add_argument("--sweep", type=_float_list, metavar="LIST",
                   help="separations (deg) for --check; default: the single --delta-deg")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=_u64, default=0, metavar="U64")
    p.add_argument("--out", metavar="DIR", help="write the check table here")
    return parser


def _load(args):
    scn = load_scenario(args.scenario)
    if args.seed is not None:
        scn = scn.replace(seed=args.seed)
    if args.snr_db is not None:
        scn = _with_snr(scn, args.snr_db)
    if getattr(args, "magnitude_only", False):
        scn = scn.replace(magnitude_only=True)
    return scn


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_forward(args) -> int:
    scn = _load(args)
    system = build_system(scn)
    meas = synthesize(system)
    out = _out_dir(args)
    path = write_measurements(meas, out / f"measurements_{scn.hash}.csv")
    print(f"wrote {len(meas)} measurements to {path}")
    if args.operator:
        print(f"wrote operator to {write_operator(system.operator, out / f'operator_{scn.hash}.csv')}")
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    scn = _load(args)
    meas = read_measurements(args.measurements) if args.measurements else None
    if meas is not None and scn["magnitude_only"] and not meas.magnitude_only:
        meas = MeasurementSet(np.abs(meas.values), meas.noise, True)
    opts = RwfOptions(max_iters=args.max_iters)
    if scn["roi"]["kind"] == "angular":
        _, record = run_doa(scn, measurements=meas, method=args.method, rwf_options=opts)
    else:
        record = run_localization(scn, meas, args.method, rwf_options=opts)
    paths = emit_outputs(record, _out_dir(args), figures=not args.no_figures)
    m = record.metrics
    print(f"method={record.method} relative_error={m['relative_error']:.6g} ssim={m['ssim']:.6g} "
          f"rank={m['rank']}/{m['rank_bound']} wall_time_s={record.wall_time:.3f}")
    if "doa_peaks_rad" in m:
        print("doa_peaks_deg=" + ",".join(f"{math.degrees(a):.2f}" for a in m["doa_peaks_rad"]))
    for kind, path in paths.items():
        log.info("%s: %s", kind, path)
    if record.method == "rwf" and not m.get("converged", True):
        raise NumericalFailure(f"RWF did not converge in {m['iterations']} iterations "
                               f"(outputs written to {args.out})")
    return EXIT_OK


def cmd_spectrum(args) -> int:
    from .outputs import write_spectrum_csv
    from .spectral import spectral_report

    scn = _load(args)
    system = build_system(scn)
    rep = spectral_report(system.operator, bound=system.rank_bound)
    out = _out_dir(args)
    path = write_spectrum_csv(rep.singular_values, out / f"spectrum_{scn.hash}.csv")
    (out / f"spectrum_{scn.hash}.json").write_text(json.dumps({
        "rank": rep.rank, "rank_bound": rep.rank_bound, "condition_number": rep.condition_number,
        "sigma_max": rep.sigma_max, "sigma_min": rep.sigma_min, "mode": system.operator.mode,
    }, indent=2, sort_keys=True) + "\n")
    print(f"mode={system.operator.mode} shape={system.operator.shape[0]}x{system.operator.shape[1]} "
          f"rank={rep.rank} rank_bound={rep.rank_bound} condition_number={rep.condition_number:.6g}")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    scn = _load(args)
    if args.kind == "strategy":
        values = args.sweep.split(",") if args.sweep else list(STRATEGIES)
        for v in values:
            if v not in STRATEGIES:
                raise ScenarioError(f"unknown strategy {v!r}; expected one of {list(STRATEGIES)}")
        if args.snr_db is None and "snr_db" not in scn["noise"]:
            scn = _with_snr(scn, 30.0)
    else:
        if not args.sweep:
            raise ScenarioError(f"--sweep LIST is required for {args.kind} sweeps")
        values = _float_list(args.sweep)
        if args.kind != "snr":
            if any(v != int(v) or v < 1 for v in values):
                raise ScenarioError(f"{args.kind} sweep values must be positive integers")
            values = [int(v) for v in values]
    rows = run_sweep(scn, args.kind, values, args.seeds, args.jobs)
    out = _out_dir(args)
    path = write_table(rows, out / f"sweep_{args.kind}_{scn.hash}.csv")
    for r in rows:
        print(f"{args.kind}={r['value']} relative_error={r['relative_error']:.6g} ssim={r['ssim']:.6g} "
              f"condition_number={r['condition_number']:.6g}")
    print(f"wrote {path}")
    if not args.no_figures:
        from .plotting import plot_sweep

        plot_sweep(rows, args.kind, out / f"sweep_{args.kind}_{scn.hash}.png")
    return EXIT_OK


def cmd_bound(args) -> int:
    q = ResolutionQuery(math.radians(args.theta_deg), math.radians(args.delta_deg), args.elements,
                        args.spacing, wavelength_of(args.frequency_hz), args.snapshots,
                        args.receiver_distance, args.gain, 10.0 ** (args.snr_db / 10.0))
    print(f"bound={relative_error_bound(q):.6g}")
    if args.check:
        deltas = [math.radians(d) for d in (args.sweep or [args.delta_deg])]
        rows = check_resolution_bound(q, deltas, args.trials, args.seed)
        for r in rows:
            print(f"delta_deg={math.degrees(r['delta_rad']):.6g} bound={r['bound']:.6g} "
                  f"mean_error={r['mean_error']:.6g} within_bound={r['within_bound']:.3f}")
        total = float(np.mean([r["within_bound"] for r in rows]))
        print(f"empirical_within_bound_rate={total:.3f}")
        if args.out:
            out = _out_dir(args)
            write_table(rows, out / "bound_check.csv")
    return EXIT_OK


COMMANDS = {"forward": cmd_forward, "reconstruct": cmd_reconstruct, "spectrum": cmd_spectrum,
            "sweep": cmd_sweep, "bound": cmd_bound}


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, StageError):
        return _exit_code(exc.cause)
    if isinstance(exc, (OSError,)):
        return EXIT_IO
    if isinstance(exc, (NumericalFailure, np.linalg.LinAlgError, FloatingPointError)):
        return EXIT_NUMERIC
    return EXIT_INVALID


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ScenarioError, ValueError, OSError, StageError, NumericalFailure,
            np.linalg.LinAlgError) as exc:
        print(f"risense {args.command}: error: {exc}", file=sys.stderr)
        return _exit_code(exc)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
