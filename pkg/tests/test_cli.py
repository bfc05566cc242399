import subprocess
import sys

import pytest

from photon_holes.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main
from photon_holes.fileio import import_histogram, parse_summary


def summary_of(capsys):
    return parse_summary(capsys.readouterr().out)


def test_run_writes_histogram_and_summary(tmp_path):
    out = tmp_path / "fig3c.csv"
    assert main(["run", "--scenario", "fig3c", "--pulses", "200000", "--out", str(out)]) == EXIT_OK
    h = import_histogram(out)
    assert h.n_bins == 180
    summary = parse_summary((tmp_path / "fig3c.summary.txt").read_text())
    assert summary["scenario"] == "fig3c" and summary["mode"] == "monte_carlo"
    assert 0 <= summary["visibility"] <= 1


def test_run_exact_to_stdout(capsys):
    assert main(["run", "--scenario", "fig3d", "--exact"]) == EXIT_OK
    s = summary_of(capsys)
    assert s["visibility"] == pytest.approx(0.847, abs=1e-3)
    assert s["S"] is None


def test_flags_override_config(tmp_path, capsys):
    cfg = tmp_path / "c.txt"
    cfg.write_text("scenario = fig3a\nmode = exact\nn_pulses = 1000\nseed = 4\n")
    assert main(["run", "--config", str(cfg), "--pulses", "2000"]) == EXIT_OK
    doubled = summary_of(capsys)["zero_delay_peak"]
    assert main(["run", "--config", str(cfg)]) == EXIT_OK
    assert doubled == pytest.approx(2 * summary_of(capsys)["zero_delay_peak"], rel=1e-12)


def test_seed_flag_is_reproducible(capsys):
    argv = ["run", "--scenario", "fig3a", "--pulses", "100000", "--seed", "9"]
    main(argv)
    first = capsys.readouterr().out
    main(argv)
    assert capsys.readouterr().out == first


def test_scan_phase(tmp_path):
    out = tmp_path / "scan.csv"
    assert main(["scan-phase", "--exact", "--points", "8", "--out", str(out)]) == EXIT_OK
    rows = out.read_text().splitlines()
    assert rows[0] == "phase_deg,p_both" and len(rows) == 9
    summary = parse_summary((tmp_path / "scan.summary.txt").read_text())
    assert summary["visibility"] == pytest.approx(0.85, abs=0.01)


def test_bell(capsys, tmp_path):
    cfg = tmp_path / "c.txt"
    cfg.write_text("overlap = 1\n")
    assert main(["bell", "--exact", "--config", str(cfg), "--delay-pulses", "2", "--phase-a", "45"]) == EXIT_OK
    s = summary_of(capsys)
    assert s["S"] > 2


def test_tpa_compare(tmp_path):
    out = tmp_path / "tpa.txt"
    assert main(["tpa-compare", "--exact", "--out", str(out)]) == EXIT_OK
    s = parse_summary(out.read_text())
    assert s["extra.suppression_tpa"] == 0
    assert s["extra.tv_route_a"] < 0.02


@pytest.mark.parametrize("argv", [
    [],
    ["fly"],
    ["run", "--scenario", "fig9"],
    ["run", "--pulses", "many"],
    ["run", "--scenario", "bell"],
    ["scan-phase", "--points", "2"],
    ["run", "--pulses", "0"],
    ["run", "--config", "/nonexistent/config.txt"],
])
def test_config_errors(argv, capsys):
    assert main(argv) == EXIT_CONFIG
    assert capsys.readouterr().err


def test_bad_config_text_names_line(tmp_path, capsys):
    cfg = tmp_path / "c.txt"
    cfg.write_text("seed = 1\noverlap = 1.3\n")
    assert main(["run", "--config", str(cfg)]) == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "line 2" in err and "overlap" in err


def test_unwritable_output_is_runtime_error(tmp_path, capsys):
    out = tmp_path / "no_such_dir" / "h.csv"
    assert main(["run", "--exact", "--out", str(out)]) == EXIT_RUNTIME
    assert "no_such_dir" in capsys.readouterr().err


def test_help_exits_cleanly():
    assert main(["--help"]) == EXIT_OK


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "photon_holes", "run", "--exact", "--scenario", "fig3a"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == EXIT_OK
    assert proc.stdout.startswith("scenario=fig3a\nmode=exact\n")
