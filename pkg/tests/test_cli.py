import json

import pytest

from phonon_gauge import cli
from phonon_gauge.config import parse_config
from phonon_gauge.dynamics import IntegrationError


def _simulate(tmp_path, text, out_name="out", extra=()):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(text)
    out = tmp_path / out_name
    return cli.main(["simulate", "--config", str(cfg), "--out", str(out), *extra]), out


SMALL_MAP = "experiment = fig2a_dressed_map\nmap.eta_points = 9\nmap.phase_points = 11\n"


def test_preset_list(capsys):
    assert cli.main(["preset", "--list"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 7
    assert lines[0].startswith("fig2a_dressed_map:")


def test_dressed_map_run_and_manifest(tmp_path):
    code, out = _simulate(tmp_path, SMALL_MAP)
    assert code == 0
    data = (out / "dressed_map.csv").read_text()
    assert data.startswith("eta_d,delta_phi,magnitude\n")
    assert len(data.splitlines()) == 1 + 9 * 11
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["experiment"] == "fig2a_dressed_map"
    assert manifest["parameters"]["map.eta_points"] == 9
    assert manifest["version"]
    assert "duration_seconds" in manifest
    assert "dressed_map.csv" in manifest["files"]


def test_rerun_is_bit_identical(tmp_path):
    _, out1 = _simulate(tmp_path, SMALL_MAP, "out1")
    _, out2 = _simulate(tmp_path, SMALL_MAP, "out2")
    assert (out1 / "dressed_map.csv").read_bytes() == (out2 / "dressed_map.csv").read_bytes()


def test_jobs_do_not_change_output(tmp_path):
    _, out1 = _simulate(tmp_path, SMALL_MAP, "serial")
    _, out2 = _simulate(tmp_path, SMALL_MAP, "parallel", extra=("--jobs", "2"))
    assert (out1 / "dressed_map.csv").read_bytes() == (out2 / "dressed_map.csv").read_bytes()


def test_format_flag_switches_serialisation(tmp_path):
    code, out = _simulate(tmp_path, SMALL_MAP, extra=("--format", "json"))
    assert code == 0
    payload = json.loads((out / "dressed_map.json").read_text())
    assert len(payload["eta_d"]) == 9


def test_ladder_spectrum_payload(tmp_path):
    code, out = _simulate(tmp_path, "experiment = fig2e_ladder_spectrum\n")
    assert code == 0
    payload = json.loads((out / "ladder_spectrum.json").read_text())
    assert len(payload["spectrum"]["eigenvalues"]) == 31
    centers = sorted(b["energy"] for b in payload["flat_bands"] if b["count"] >= 3)
    assert centers == pytest.approx([-2.0, 0.0, 2.0], abs=1e-9)
    assert len(payload["edge_states"]) >= 2


def test_flux_sweep_output(tmp_path):
    code, out = _simulate(
        tmp_path, "experiment = fig2f_flux_sweep\nsweep.points = 11\nladder.cells = 4\n"
    )
    assert code == 0
    lines = (out / "flux_sweep.csv").read_text().splitlines()
    assert len(lines) == 12
    assert lines[0].split(",")[0] == "phi"


def test_butterfly_output(tmp_path):
    code, out = _simulate(
        tmp_path,
        "experiment = butterfly\nbutterfly.size = 4\nbutterfly.points = 5\n",
    )
    assert code == 0
    lines = (out / "butterfly.csv").read_text().splitlines()
    assert len(lines) == 6
    assert lines[0].startswith("alpha,E_1")


def test_link_scan_pipeline_suppressed_grid(tmp_path):
    # a 2-point grid hits only the suppressed endpoints: exercises the full
    # pipeline without long integrations
    code, out = _simulate(tmp_path, "experiment = fig2b_link_scan\nscan.points = 2\n")
    assert code == 0
    lines = (out / "link_scan.csv").read_text().splitlines()
    assert len(lines) == 3
    assert lines[1].endswith(",0") and lines[2].endswith(",0")


def test_plaquette_pipeline_short_window(tmp_path):
    text = ("experiment = fig2cd_plaquette\nnumerics.window = 150\n"
            "numerics.samples = 16\n")
    code, out = _simulate(tmp_path, text, extra=("--format", "json"))
    assert code == 0
    eff = json.loads((out / "plaquette_effective.json").read_text())
    exact = json.loads((out / "plaquette_exact.json").read_text())
    assert len(eff["times"]) == 16 and len(exact["times"]) == 16
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["resolved"]["window"] == 150
    assert manifest["parameters"]["drive.rabi_frequency"] == 0.25


def test_custom_spectrum(tmp_path):
    text = "experiment = custom\narray.layout = rhombic_ladder\narray.cells = 3\n"
    code, out = _simulate(tmp_path, text)
    assert code == 0
    payload = json.loads((out / "custom_spectrum.json").read_text())
    assert payload["n_sites"] == 10


def test_config_error_exit_code(tmp_path, capsys):
    code, _ = _simulate(tmp_path, "experiment = fig2b_link_scan\nnumerics.n_max = -1\n")
    assert code == 1
    assert "numerics.n_max" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    out = tmp_path / "out"
    assert cli.main(["simulate", "--config", str(tmp_path / "nope.cfg"),
                     "--out", str(out)]) == 1


def test_custom_zero_sites_is_invalid_geometry(tmp_path, capsys):
    text = "experiment = custom\narray.layout = square\narray.nx = 0\narray.ny = 2\n"
    code, _ = _simulate(tmp_path, text)
    assert code == 1
    assert "config error" in capsys.readouterr().err


def test_numerical_failure_exit_code(tmp_path, monkeypatch, capsys):
    def boom(*args, **kwargs):
        raise IntegrationError("norm drifted; dt = 1.0 is too large")

    monkeypatch.setitem(cli._RUNNERS, "fig2a_dressed_map", boom)
    code, _ = _simulate(tmp_path, SMALL_MAP)
    assert code == 2
    assert "numerical failure" in capsys.readouterr().err


def test_env_var_overrides_out(tmp_path, monkeypatch):
    target = tmp_path / "env_out"
    monkeypatch.setenv(cli.ENV_OUT, str(target))
    cfg = tmp_path / "run.cfg"
    cfg.write_text(SMALL_MAP)
    assert cli.main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "ignored")]) == 0
    assert (target / "dressed_map.csv").exists()
    assert not (tmp_path / "ignored").exists()


def test_csv_uses_17_significant_digits(tmp_path):
    _, out = _simulate(tmp_path, SMALL_MAP)
    row = (out / "dressed_map.csv").read_text().splitlines()[15]
    mag = row.split(",")[2]
    value = float(mag)
    assert format(value, ".17g") == mag


def test_run_experiment_library_entry(tmp_path):
    cfg = parse_config(SMALL_MAP)
    files = cli.run_experiment(cfg, tmp_path / "lib_out")
    assert files[-1] == "manifest.json"
    assert (tmp_path / "lib_out" / "dressed_map.csv").exists()
