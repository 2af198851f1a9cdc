import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nopa_chain.model import assemble_state_space, make_config, scenario_config
from nopa_chain.spectra import (
    CSV_COLUMNS,
    DB_FLOOR,
    SpectrumError,
    UnstableConfigError,
    closed_form_factor,
    closed_form_v0,
    default_omega_grid,
    epr_entangled,
    spectrum_from_csv,
    spectrum_to_csv,
    squeezing_spectra,
    theta_defaults,
    to_db,
    transfer_function,
    v_at_zero,
)
from nopa_chain.stability import threshold_eigen_reduction
from nopa_chain.sweep import equal_power_x

from oracles import cascade_transfer, spectra_from_transfer

SCENARIOS = ["lossless", "transmission_only", "transmission_and_amplification"]


def lossless(n, x, **kw):
    return make_config(n, x, transmission_on=False, **kw)


def test_vacuum_transfer_is_unitary():
    cfg = make_config(4, 0.0, amplification_loss_on=True, allow_zero_pump=True)
    ss = assemble_state_space(cfg)
    for w in (0.0, 1e6, 1e9):
        h = transfer_function(ss, w)
        np.testing.assert_allclose(h @ h.conj().T, np.eye(4), atol=1e-10)


def test_high_frequency_limit_is_d():
    ss = assemble_state_space(make_config(3, 0.1))
    h = transfer_function(ss, 1e16)
    np.testing.assert_allclose(h, ss.d_matrix, atol=1e-7)


def test_transfer_requires_omega():
    with pytest.raises(ValueError):
        transfer_function(assemble_state_space(make_config(2, 0.1)))


def test_singular_resolvent_reported():
    x_th = math.tan(math.pi / 8)
    ss = assemble_state_space(lossless(2, x_th))
    with pytest.raises(SpectrumError):
        transfer_function(ss, 0.0)


@pytest.mark.parametrize("n", range(2, 7))
@pytest.mark.parametrize("scenario", SCENARIOS)
def test_vacuum_pass_through(n, scenario):
    cfg = scenario_config(n, 0.0, scenario, allow_zero_pump=True)
    spec = squeezing_spectra(cfg, np.logspace(2, 10, 25))
    np.testing.assert_allclose(spec.v_plus, 2.0, rtol=1e-12)
    np.testing.assert_allclose(spec.v_minus, 2.0, rtol=1e-12)
    np.testing.assert_allclose(spec.v_sum, 4.0, rtol=1e-12)
    # the criterion is strict, so the exact vacuum value is not entangled
    assert not epr_entangled(4.0)


def test_minus_25_db_operating_point():
    # the pump is quoted to four decimals and V(0) is steep in x here, so the
    # rounded pump lands about 0.02 dB short of the target
    spec = squeezing_spectra(lossless(2, 0.3978), [0.0])
    assert spec.v_sum_db[0] == pytest.approx(-24.978, abs=1e-3)
    spec = squeezing_spectra(lossless(2, 0.39784154), [0.0])
    assert spec.v_sum_db[0] == pytest.approx(-25.0, abs=1e-5)


def test_both_losses_operating_point():
    spec = squeezing_spectra(scenario_config(6, 0.1269, "transmission_and_amplification"), [0.0])
    assert spec.v_sum_db[0] == pytest.approx(-4.2975, abs=5e-4)
    assert spec.v_plus_db[0] == pytest.approx(-7.3078, abs=5e-4)


def test_unstable_config_refused():
    with pytest.raises(UnstableConfigError) as info:
        squeezing_spectra(lossless(2, 0.5), [1.0])
    assert info.value.diagnostic["max_real_eigenvalue"] > 0


@pytest.mark.parametrize("n", range(2, 7))
def test_closed_form_matches_model(n):
    x_th = math.tan(math.pi / (4 * n))
    theta_sum = sum(theta_defaults(n))
    for x in np.linspace(0.01, 0.98, 25) * x_th:
        vp, vm = v_at_zero(lossless(n, x))
        ref = closed_form_v0(n, x, theta_sum)
        assert vp == pytest.approx(ref, rel=1e-9)
        assert vm == pytest.approx(ref, rel=1e-9)


def test_closed_form_n3_pi():
    vp, _ = v_at_zero(lossless(3, 0.2))
    assert vp == pytest.approx(closed_form_v0(3, 0.2, math.pi), rel=1e-9)


def test_closed_form_small_pump_limit():
    for n in range(2, 7):
        assert closed_form_v0(n, 1e-9, 0.0) == pytest.approx(2.0, rel=1e-7)


def test_closed_form_domain_errors():
    with pytest.raises(ValueError):
        closed_form_v0(7, 0.1, 0.0)
    with pytest.raises(ValueError):
        closed_form_v0(2, math.sqrt(3 - math.sqrt(8)), 0.0)


@pytest.mark.parametrize("n,sign", [(2, -1), (3, 1), (4, -1), (5, 1), (6, -1)])
def test_bracket_sign_structure(n, sign):
    x_th = math.tan(math.pi / (4 * n))
    xs = np.linspace(1e-3, 1 - 1e-3, 100) * x_th
    assert all(np.sign(closed_form_factor(n, x)) == sign for x in xs)


@pytest.mark.parametrize("n", range(2, 7))
def test_default_phases_minimise_v0(n):
    x = 0.5 * math.tan(math.pi / (4 * n))
    grid = np.linspace(-math.pi, math.pi, 360, endpoint=False)
    values = [v_at_zero(lossless(n, x, theta_a=t, theta_b=0.0))[0] for t in grid]
    best = v_at_zero(lossless(n, x))[0]
    assert best <= min(values) * (1 + 1e-12)


@settings(max_examples=25, deadline=None)
@given(
    n=st.integers(2, 6),
    frac=st.floats(0.05, 0.95),
    th_a=st.floats(-3.0, 3.0),
    delta=st.floats(-3.0, 3.0),
    scenario=st.sampled_from(SCENARIOS),
)
def test_theta_sum_dependence(n, frac, th_a, delta, scenario):
    x = frac * math.tan(math.pi / (4 * n))
    v1 = v_at_zero(scenario_config(n, x, scenario, theta_a=th_a, theta_b=0.2))
    v2 = v_at_zero(scenario_config(n, x, scenario, theta_a=th_a + delta, theta_b=0.2 - delta))
    assert v1[0] == pytest.approx(v2[0], rel=1e-10)
    assert v1[1] == pytest.approx(v2[1], rel=1e-10)


@pytest.mark.parametrize("n", range(2, 7))
@pytest.mark.parametrize("scenario", SCENARIOS)
def test_v_plus_equals_v_minus_at_defaults(n, scenario):
    spec = squeezing_spectra(scenario_config(n, equal_power_x(n), scenario), default_omega_grid(60))
    residual = np.abs(spec.v_plus - spec.v_minus) / spec.v_plus
    assert residual.max() < 1e-9


@pytest.mark.parametrize("n", range(2, 7))
@pytest.mark.parametrize("scenario", SCENARIOS)
def test_low_frequency_flatness(n, scenario):
    cfg = scenario_config(n, equal_power_x(n), scenario)
    spec = squeezing_spectra(cfg, np.concatenate([[0.0], np.logspace(0, 3, 10)]))
    assert np.max(np.abs(spec.v_sum - spec.v_sum[0]) / spec.v_sum[0]) < 1e-3


@pytest.mark.parametrize("n", range(2, 7))
def test_delay_leaves_zero_frequency_unchanged(n):
    cfg = scenario_config(n, equal_power_x(n), "transmission_and_amplification", delay=True)
    d = squeezing_spectra(cfg, [0.0], delayed=True)
    f = squeezing_spectra(cfg, [0.0], delayed=False)
    assert d.v_sum[0] == pytest.approx(f.v_sum[0], rel=1e-9)


@pytest.mark.parametrize("n", [2, 4, 6])
def test_delayed_spectrum_matches_cascade(n):
    cfg = scenario_config(n, equal_power_x(n), "transmission_only", delay=True)
    grid = np.logspace(4, 10, 30)
    spec = squeezing_spectra(cfg, grid)
    for k, w in enumerate(grid):
        vp, vm = spectra_from_transfer(cascade_transfer(cfg, w))
        assert spec.v_plus[k] == pytest.approx(vp, rel=1e-9)
        assert spec.v_minus[k] == pytest.approx(vm, rel=1e-9)


def test_spectra_non_negative_and_db_consistent():
    spec = squeezing_spectra(make_config(3, 0.2, amplification_loss_on=True))
    assert spec.omega_grid.size == 500
    assert np.all(spec.v_plus >= 0) and np.all(spec.v_minus >= 0)
    np.testing.assert_allclose(spec.v_sum, spec.v_plus + spec.v_minus)
    np.testing.assert_allclose(spec.v_plus_db, 10 * np.log10(spec.v_plus))


def test_to_db_floor():
    assert to_db(0.0) == DB_FLOOR
    np.testing.assert_array_equal(to_db(np.array([0.0, 1.0])), [DB_FLOOR, 0.0])


@pytest.mark.parametrize("value,expected", [(3.9, True), (4.0, False), (4.1, False)])
def test_epr_criterion(value, expected):
    assert epr_entangled(value) is expected


def test_epr_rejects_negative():
    with pytest.raises(ValueError):
        epr_entangled(-1.0)


def test_csv_header_only_for_empty_grid():
    spec = squeezing_spectra(make_config(2, 0.1), [])
    assert spectrum_to_csv(spec).strip() == ",".join(CSV_COLUMNS)


def test_csv_round_trip():
    spec = squeezing_spectra(make_config(3, 0.15))
    text = spectrum_to_csv(spec, header="# provenance\n")
    assert len(text.strip().splitlines()) == 502
    parsed = spectrum_from_csv(text)
    np.testing.assert_array_equal(parsed["omega_rad_s"], spec.omega_grid)
    np.testing.assert_array_equal(parsed["v_plus"], spec.v_plus)
    np.testing.assert_array_equal(parsed["v_sum_db"], spec.v_sum_db)


def test_json_carries_config():
    cfg = make_config(2, 0.1)
    doc = json.loads(squeezing_spectra(cfg, [1.0, 2.0]).to_json())
    assert doc["config"]["n_nopas"] == 2
    assert doc["delayed"] is False
    assert len(doc["v_sum_db"]) == 2
