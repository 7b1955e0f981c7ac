import csv

import numpy as np
import pytest

from risense.cli import build_parser, main

SCENARIO = """
seed = 3
[roi]
size_m = [6.0, 6.0]
pixel_size_m = [2.0, 2.0]

[[ris]]
landmark = "A"
elements = 12
snapshots = 20

[[ris]]
landmark = "E"
elements = 12
snapshots = 20

[[sources]]
shape = "point"
at_m = [1.0, -1.0]
"""


@pytest.fixture
def scenario(tmp_path):
    path = tmp_path / "scn.toml"
    path.write_text(SCENARIO)
    return path


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(ln for ln in fh if not ln.startswith("#")))


def test_forward_writes_one_row_per_snapshot(scenario, tmp_path, capsys):
    assert main(["forward", "--scenario", str(scenario), "--out", str(tmp_path / "o")]) == 0
    files = list((tmp_path / "o").glob("measurements_*.csv"))
    assert len(files) == 1 and len(_rows(files[0])) == 40


def test_forward_magnitude_only_is_nonnegative(scenario, tmp_path):
    out = tmp_path / "o"
    assert main(["forward", "--scenario", str(scenario), "--out", str(out), "--magnitude-only",
                 "--snr-db", "10"]) == 0
    rows = _rows(next(out.glob("measurements_*.csv")))
    assert list(rows[0]) == ["index", "abs"]
    assert all(float(r["abs"]) >= 0 for r in rows)


def test_missing_scenario_names_path(tmp_path, capsys):
    code = main(["forward", "--scenario", str(tmp_path / "absent.toml")])
    assert code == 4
    assert "absent.toml" in capsys.readouterr().err


def test_invalid_scenario_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text('receiver_mode = "broadcast"\n')
    assert main(["spectrum", "--scenario", str(bad)]) == 2
    err = capsys.readouterr().err
    assert "receiver_mode" in err and "sources" in err


def test_reconstruct_ls_and_guard(scenario, tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["reconstruct", "--scenario", str(scenario), "--out", str(out), "--no-figures"]) == 0
    assert list(out.glob("field_*.csv")) and list(out.glob("metrics_*.json"))
    main(["forward", "--scenario", str(scenario), "--out", str(out), "--magnitude-only"])
    mags = next(out.glob("measurements_*.csv"))
    code = main(["reconstruct", "--scenario", str(scenario), "--measurements", str(mags),
                 "--method", "ls", "--out", str(out)])
    assert code == 2
    assert "magnitude-only" in capsys.readouterr().err


def test_reconstruct_rwf_from_magnitude_csv(scenario, tmp_path):
    out = tmp_path / "o"
    main(["forward", "--scenario", str(scenario), "--out", str(out), "--magnitude-only"])
    mags = next(out.glob("measurements_*.csv"))
    code = main(["reconstruct", "--scenario", str(scenario), "--measurements", str(mags),
                 "--method", "rwf", "--out", str(out / "r")])
    assert code in (0, 3)
    assert list((out / "r").glob("rwf_log_*.csv")) and list((out / "r").glob("field_*.png"))


def test_spectrum_reports_rank_and_bound(scenario, tmp_path, capsys):
    assert main(["spectrum", "--scenario", str(scenario), "--out", str(tmp_path)]) == 0
    text = capsys.readouterr().out
    assert "rank=9" in text and "rank_bound=9" in text


def test_sweep_and_determinism(scenario, tmp_path):
    args = ["sweep", "--scenario", str(scenario), "--kind", "measurements", "--sweep", "2,20",
            "--no-figures", "--seed", "11"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    a = next((tmp_path / "a").glob("sweep_*.csv"))
    b = next((tmp_path / "b").glob("sweep_*.csv"))
    assert a.read_bytes() == b.read_bytes()
    assert len(_rows(a)) == 2


def test_bound_command(capsys):
    assert main(["bound", "--theta-deg", "10", "--delta-deg", "0.02"]) == 0
    b1 = float(capsys.readouterr().out.split("=")[1])
    main(["bound", "--theta-deg", "10", "--delta-deg", "0.01"])
    b2 = float(capsys.readouterr().out.split("=")[1])
    assert b2 == pytest.approx(2 * b1)
    assert main(["bound", "--theta-deg", "90", "--delta-deg", "0.01"]) == 2
    assert main(["bound", "--theta-deg", "10", "--delta-deg", "0.01", "--check", "--trials", "3"]) == 0
    assert "empirical_within_bound_rate" in capsys.readouterr().out


def test_help_lists_documented_flags_and_rejects_unknown():
    parser = build_parser()
    sub = parser._subparsers._group_actions[0].choices
    text = sub["reconstruct"].format_help() + sub["sweep"].format_help() + sub["bound"].format_help()
    for flag in ("--scenario", "--out", "--seed", "--snr-db", "--method", "--magnitude-only",
                 "--sweep", "--check"):
        assert flag in text
    with pytest.raises(SystemExit) as info:
        main(["forward", "--scenario", "x", "--frobnicate"])
    assert info.value.code == 2
