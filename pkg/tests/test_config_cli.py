import math
import textwrap

import numpy as np
import pytest
import yaml

from vaporqed.cli import EXIT_CONFIG, EXIT_OK, EXIT_PARTIAL, EXIT_RUNTIME, emit_plotdata, load_record, main, run
from vaporqed.config import config_hash, dump_config, load_config, parse_config, plan_points
from vaporqed.errors import ConfigError


def write(tmp_path, text, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(textwrap.dedent(text))
    return path


def test_minimal_config_defaults(tmp_path):
    cfg = load_config(write(tmp_path, "experiment: validity_scan\n"))
    assert cfg.ensemble.n_atoms == 1
    assert cfg.options.validity_threshold == 0.1
    assert cfg.propagation.method == "auto"
    assert cfg.format == "vaporqed-config/1"


def test_negative_coupling_names_field():
    with pytest.raises(ConfigError, match=r"ensemble\.g12.*line 4"):
        parse_config("experiment: lambda\nensemble:\n  n_atoms: 2\n  g12: -1.0\n")


def test_unknown_key_rejected_with_line():
    with pytest.raises(ConfigError, match=r"cavity\.omega_c3.*unknown key.*line 3"):
        parse_config("experiment: lambda\ncavity:\n  omega_c3: 5\n")


def test_yaml_syntax_error_reports_line():
    with pytest.raises(ConfigError, match=r"YAML parse error at line \d+"):
        parse_config("experiment: lambda\nensemble: [1, 2\n")


def test_missing_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/cfg.yaml")


def test_sweep_planning():
    cfg = parse_config(
        "experiment: full_vs_effective\nsweep:\n  - parameter: ensemble.detuning\n    values: [50, 100, 200]\n"
    )
    points = plan_points(cfg)
    assert [ov["ensemble.detuning"] for ov, _ in points] == [50, 100, 200]
    assert all(p.sweep == [] for _, p in points)
    assert points[2][1].ensemble.detuning == 200


def test_sweep_path_must_exist():
    with pytest.raises(ConfigError, match="does not exist"):
        parse_config("experiment: lambda\nsweep:\n  - parameter: ensemble.bogus\n    values: [1]\n")


def test_sweep_value_validated():
    with pytest.raises(ConfigError, match="sweep point"):
        parse_config("experiment: lambda\nsweep:\n  - parameter: ensemble.g12\n    values: [1, -1]\n")


def test_round_trip(tmp_path):
    cfg = parse_config(
        "experiment: single_photon\nseed: 7\nensemble:\n  n_atoms: 3\n  coupling_model: gaussian_mode\n"
        "sweep:\n  - parameter: options.n2\n    values: [1, 4]\n"
    )
    again = load_config(write(tmp_path, dump_config(cfg)))
    assert again == cfg
    assert config_hash(again) == config_hash(cfg)


def test_full_vs_effective_sweep_monotone(tmp_path):
    cfg = parse_config(
        """
        experiment: full_vs_effective
        ensemble: {n_atoms: 1, g12: 1.0, g23: 1.0}
        propagation: {t_final: 80.0, n_samples: 256}
        sweep:
          - parameter: ensemble.detuning
            values: [50, 100, 200]
        """
    )
    record = run(cfg, tmp_path / "out")
    values = [p.summary["discrepancy"] for p in record.points]
    assert len(values) == 3
    assert values[0] > values[1] > values[2]


def test_validity_scan_table(tmp_path):
    cfg = parse_config("experiment: validity_scan\nensemble: {n_atoms: 3, detuning: 100}\n")
    record = run(cfg, tmp_path / "out")
    table = record.points[0].series["validity_table"]
    assert table.columns == ("atom", "r1", "r2", "r3", "r4", "pass")
    assert table.data.shape == (3, 6)
    assert record.points[0].summary["validity_pass"]


def test_classical_drive_run_and_determinism(tmp_path):
    text = "experiment: classical_drive\nseed: 3\nensemble: {n_atoms: 4, detuning: 50, drive_rabi: 2.0, g23: 1.0}\n"
    cfg = parse_config(text)
    first = run(cfg, tmp_path / "a")
    second = run(parse_config(text), tmp_path / "b")
    g_eff = 2.0 * 1.0 / (2 * 50.0)
    measured = first.points[0].summary["measured_frequency"]
    assert measured == pytest.approx(2 * g_eff * math.sqrt(4), rel=0.01)
    assert measured == second.points[0].summary["measured_frequency"]
    a = (tmp_path / "a" / "point_000" / "summary.yaml").read_text()
    b = (tmp_path / "b" / "point_000" / "summary.yaml").read_text()
    assert a == b


@pytest.fixture(scope="module")
def single_photon_results(tmp_path_factory):
    out = tmp_path_factory.mktemp("sp")
    cfg = parse_config(
        "experiment: single_photon\nensemble: {n_atoms: 2}\npropagation: {periods: 20, n_samples: 512}\n"
        "sweep:\n  - parameter: options.n2\n    values: [1, 4, 9]\n"
    )
    run(cfg, out)
    return out


def test_results_layout(single_photon_results):
    manifest = yaml.safe_load((single_photon_results / "manifest.yaml").read_text())
    assert manifest["format"] == "vaporqed-results/1"
    assert [p["directory"] for p in manifest["points"]] == ["point_000", "point_001", "point_002"]
    assert (single_photon_results / "point_001" / "n2.dat").exists()
    assert (single_photon_results / "point_001" / "summary.yaml").exists()


def test_plotdata_series(single_photon_results):
    record = load_record(single_photon_results)
    text = emit_plotdata(record, "n2", point=1)
    header = [line for line in text.splitlines() if line.startswith("#")]
    assert any(record.config_hash in line for line in header)
    assert any("units" in line for line in header)
    data = np.loadtxt(text.splitlines(), comments="#")
    assert data.shape[1] == 2
    assert data[0, 0] == 0.0
    assert data[0, 1] == pytest.approx(4.0)


def test_plotdata_unknown_name(single_photon_results):
    record = load_record(single_photon_results)
    with pytest.raises(KeyError, match="available:.*psi1_population"):
        emit_plotdata(record, "nope")


def test_plotdata_frequency_summary(single_photon_results):
    text = emit_plotdata(load_record(single_photon_results), "frequency_vs_sqrt_n2")
    assert "# columns: n2 sqrt_n2 measured_omega analytic_omega" in text
    data = np.loadtxt(text.splitlines(), comments="#")
    np.testing.assert_allclose(data[:, 1], [1, 2, 3])
    np.testing.assert_allclose(data[:, 2] / data[0, 2], [1, 2, 3], rtol=0.01)


def test_cli_exit_codes(tmp_path, capsys):
    good = write(tmp_path, "experiment: validity_scan\n", "good.yaml")
    bad = write(tmp_path, "experiment: validity_scan\nensemble: {g12: -1}\n", "bad.yaml")
    partial = write(
        tmp_path,
        "experiment: classical_drive\nensemble: {n_atoms: 1}\nsweep:\n  - parameter: options.n2\n    values: [1, 2]\n",
        "partial.yaml",
    )
    failing = write(tmp_path, "experiment: classical_drive\noptions: {n2: 2}\n", "failing.yaml")
    assert main(["validate", str(good)]) == EXIT_OK
    assert main(["validate", str(bad)]) == EXIT_CONFIG
    assert "g12" in capsys.readouterr().err
    assert main(["run", str(good), "-o", str(tmp_path / "r0")]) == EXIT_OK
    assert main(["run", str(partial), "-o", str(tmp_path / "r1")]) == EXIT_PARTIAL
    assert main(["run", str(failing), "-o", str(tmp_path / "r2")]) == EXIT_RUNTIME
    capsys.readouterr()
    assert main(["report", str(tmp_path / "r1")]) == EXIT_OK
    report = capsys.readouterr().out
    assert "failed: 1" in report and "error=" in report
    assert main(["plotdata", str(tmp_path / "r0"), "missing"]) == EXIT_RUNTIME
    out = tmp_path / "table.dat"
    assert main(["plotdata", str(tmp_path / "r0"), "validity_table", "-o", str(out)]) == EXIT_OK
    assert out.read_text().startswith("# vaporqed")


def test_worker_pool_matches_inline(tmp_path, monkeypatch):
    text = "experiment: single_photon\nensemble: {n_atoms: 1}\nsweep:\n  - parameter: options.n2\n    values: [1, 2]\n"
    inline = run(parse_config(text), tmp_path / "inline")
    monkeypatch.setenv("VAPORQED_WORKERS", "2")
    pooled = run(parse_config(text), tmp_path / "pooled")
    for a, b in zip(inline.points, pooled.points):
        assert a.summary["measured_frequency"] == b.summary["measured_frequency"]
