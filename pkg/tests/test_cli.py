import json

import numpy as np
import pytest

from nopa_chain import __version__
from nopa_chain.cli import (
    EXIT_NUMERICAL,
    EXIT_OK,
    EXIT_UNSTABLE,
    EXIT_VALIDATION,
    RunConfig,
    main,
    parse_n_range,
    read_config_file,
    resolve_run_config,
)
from nopa_chain.model import scenario_config
from nopa_chain.spectra import spectrum_from_csv, squeezing_spectra

from reference_values import OPTIMAL_BOTH, TARGET_25DB, THRESHOLDS


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def data_lines(text):
    return [ln for ln in text.splitlines() if ln and not ln.startswith("#")]


def header(text):
    first = text.splitlines()[0]
    assert first.startswith("# ")
    return json.loads(first[2:])


def test_parse_n_range():
    assert parse_n_range("2..6") == [2, 3, 4, 5, 6]
    assert parse_n_range("3") == [3]
    assert parse_n_range("2,4") == [2, 4]


def test_threshold_single_row(capsys):
    code, out, _ = run(capsys, "threshold", "--n", "2", "--lossless")
    assert code == EXIT_OK
    rows = data_lines(out)
    assert len(rows) == 2
    assert float(rows[1].split(",")[2]) == pytest.approx(0.4142, abs=5e-5)


def test_threshold_full_table(capsys):
    code, out, _ = run(capsys, "threshold", "--n", "2..6", "--scenarios", "all", "--paper-precision")
    assert code == EXIT_OK
    rows = [r.split(",") for r in data_lines(out)[1:]]
    assert len(rows) == 15
    order = ["lossless", "transmission_only", "transmission_and_amplification"]
    for n_text, scenario, x_th, _ in rows:
        assert float(x_th) == THRESHOLDS[int(n_text)][order.index(scenario)]


def test_invalid_chain_length(capsys):
    code, _, err = run(capsys, "threshold", "--n", "1")
    assert code == EXIT_VALIDATION
    assert "N >= 2" in err


def test_unknown_flag(capsys):
    code, _, _ = run(capsys, "threshold", "--bogus")
    assert code == EXIT_VALIDATION


def test_spectrum_above_threshold(capsys):
    code, _, err = run(capsys, "spectrum", "--n", "2", "--x", "0.5", "--lossless")
    assert code == EXIT_UNSTABLE
    assert "unstable" in err


def test_spectrum_equal_power_flat(capsys):
    code, out, _ = run(capsys, "spectrum", "--n", "3", "--losses", "both", "--omega-points", "7")
    assert code == EXIT_OK
    data = spectrum_from_csv(out)
    assert data["omega_rad_s"][0] == 1e4
    cfg = scenario_config(3, 0.13 * np.sqrt(2), "transmission_and_amplification")
    ref = squeezing_spectra(cfg, [0.0]).v_sum_db[0]
    assert data["v_sum_db"][0] == pytest.approx(ref, abs=1e-3)


def test_spectrum_at_target_operating_point(capsys):
    code, out, _ = run(capsys, "spectrum", "--n", "3", "--x", "0.2579", "--losses", "both",
                       "--omega-points", "2")
    assert code == EXIT_OK
    assert spectrum_from_csv(out)["v_sum_db"][0] == pytest.approx(TARGET_25DB[3][5], abs=1e-3)


def test_spectrum_delay_flag_matches_library(capsys):
    code, out, _ = run(capsys, "spectrum", "--n", "2", "--delay", "--omega-min", "1e4",
                       "--omega-max", "1e9", "--omega-points", "4")
    assert code == EXIT_OK
    cfg = scenario_config(2, 0.13 * np.sqrt(3), "transmission_and_amplification", delay=True)
    ref = squeezing_spectra(cfg, np.logspace(4, 9, 4))
    np.testing.assert_allclose(spectrum_from_csv(out)["v_sum"], ref.v_sum, rtol=1e-9)


def test_negativity_two_nopa(capsys):
    code, out, _ = run(capsys, "negativity", "--n", "2", "--lossless")
    assert code == EXIT_OK
    rows = {r.split(",")[1]: float(r.split(",")[3]) for r in data_lines(out)[1:]}
    assert rows == pytest.approx(
        {"a1-b1": 0.1921, "a2-b2": 0.1921, "a1-b2": 0.0, "a2-b1": 0.4850, "a_c-b_c": 0.0},
        abs=5e-5,
    )


def test_negativity_trajectory_samples(capsys):
    code, out, _ = run(capsys, "negativity", "--n", "2", "--lossless", "--trajectory",
                       "--t-end", "2e-7", "--dt", "1e-10")
    assert code == EXIT_OK
    rows = data_lines(out)
    assert len(rows) == 2002
    assert rows[0].count("E(") == 5


def test_negativity_sync_check(capsys):
    code, _, err = run(capsys, "negativity", "--n", "2..6", "--lossless", "--sync-check")
    assert code == EXIT_OK
    assert err.count("pass") == 5


def test_covariance_steady_state(capsys):
    code, out, _ = run(capsys, "covariance", "--n", "2", "--lossless", "--format", "json")
    assert code == EXIT_OK
    doc = json.loads(out)
    p = np.array(doc["steady_state"])
    assert p.shape == (8, 8)
    np.testing.assert_allclose(p, p.T)


def test_covariance_trajectory(capsys):
    code, out, _ = run(capsys, "covariance", "--n", "2", "--lossless", "--trajectory",
                       "--t-end", "1e-9", "--dt", "1e-10")
    assert code == EXIT_OK
    assert len(data_lines(out)) == 12


def test_sweep_target(capsys):
    code, out, _ = run(capsys, "sweep", "--kind", "target-db", "--target", "-25", "--n", "2..3")
    assert code == EXIT_OK
    rows = [r.split(",") for r in data_lines(out)[1:]]
    assert len(rows) == 6
    lossless = [r for r in rows if r[1] == "lossless"]
    assert float(lossless[0][2]) == pytest.approx(TARGET_25DB[2][0], abs=5e-5)


def test_sweep_optimal_both(capsys):
    code, out, _ = run(capsys, "sweep", "--kind", "optimal", "--losses", "both", "--n", "6")
    assert code == EXIT_OK
    row = data_lines(out)[1].split(",")
    assert float(row[2]) == pytest.approx(OPTIMAL_BOTH[6][0], abs=5e-5)
    assert float(row[5]) == pytest.approx(OPTIMAL_BOTH[6][3], abs=5e-4)


def test_sweep_threshold_approach(capsys):
    code, out, _ = run(capsys, "sweep", "--kind", "threshold-approach", "--n", "4", "--k-points", "5")
    assert code == EXIT_OK
    rows = data_lines(out)
    assert rows[0].endswith(",k")
    v = [float(r.split(",")[5]) for r in rows[1:]]
    assert len(v) == 5 and all(a > b for a, b in zip(v, v[1:]))


def test_dde_check(capsys):
    code, out, _ = run(capsys, "dde-check", "--n", "2..3")
    assert code == EXIT_OK
    rows = data_lines(out)[1:]
    assert all(r.endswith("True") for r in rows)


def test_dde_check_unstable(capsys):
    code, _, _ = run(capsys, "dde-check", "--n", "2", "--x", "0.42", "--lossless", "--delay")
    assert code == EXIT_UNSTABLE


def test_numerical_error_exit(capsys, monkeypatch):
    import nopa_chain.cli as cli
    from nopa_chain.stability import StabilityError

    def boom(rc):
        raise StabilityError("solver failed")

    monkeypatch.setitem(cli.COMMANDS, "threshold", boom)
    code, _, err = run(capsys, "threshold", "--n", "2")
    assert code == EXIT_NUMERICAL
    assert "numerical" in err


def test_metadata_header(capsys):
    _, out, _ = run(capsys, "threshold", "--n", "2", "--lossless")
    meta = header(out)
    assert meta["version"] == __version__
    assert meta["run_config"]["n"] == "2"
    # the embedded config reproduces the run
    rc = RunConfig(**meta["run_config"])
    assert rc.losses == "none"


def test_deterministic_output(capsys, tmp_path):
    prefix = tmp_path / "run"
    args = ["spectrum", "--n", "4", "--omega-points", "20", "--output", str(prefix), "--format", "both"]
    assert main(args) == EXIT_OK
    first = (prefix.with_suffix(".csv").read_bytes(), prefix.with_suffix(".json").read_bytes())
    assert main(args) == EXIT_OK
    second = (prefix.with_suffix(".csv").read_bytes(), prefix.with_suffix(".json").read_bytes())
    assert first == second
    doc = json.loads(first[1])
    assert doc["metadata"]["run_config"]["omega_points"] == 20


def test_config_file_with_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# lossless two-NOPA run\nn = 2\nlosses = none\nomega_points = 3\ndelay = false\n")
    assert read_config_file(cfg) == {"n": "2", "losses": "none", "omega_points": 3, "delay": False}
    rc = resolve_run_config(["--config", str(cfg), "spectrum", "--omega-points", "5"])
    assert rc.omega_points == 5 and rc.n == "2" and rc.losses == "none"
    code, out, _ = run(capsys, "--config", str(cfg), "spectrum")
    assert code == EXIT_OK
    assert len(data_lines(out)) == 4


def test_config_file_errors(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour = blue\n")
    code, _, err = run(capsys, "--config", str(bad), "threshold")
    assert code == EXIT_VALIDATION
    assert "unknown key" in err
    bad.write_text("omega_points = many\n")
    code, _, _ = run(capsys, "--config", str(bad), "spectrum")
    assert code == EXIT_VALIDATION
