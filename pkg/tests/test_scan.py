import dataclasses
import json
import math

import pytest

import sqzlab as sl
from tests.conftest import BAND, FS

# small but honest pipeline settings for fast sweep tests
SMALL_PLAN = dict(n_samples=2**19, fs=FS, segment_length=2**14)


def test_derive_seed_is_stable_and_distinct():
    assert sl.derive_seed(7, 1, 2) == sl.derive_seed(7, 1, 2)
    seen = {sl.derive_seed(7, i, t) for i in range(8) for t in range(4)}
    assert len(seen) == 32
    assert sl.derive_seed(8, 1, 2) != sl.derive_seed(7, 1, 2)
    assert all(0 <= s < 2**63 for s in seen)


def test_simulate_point_metrics():
    spec = sl.SqueezingSpec(r=1.0, band=BAND)
    plan = sl.SweepPlan(trials=1, base_seed=5, **SMALL_PLAN)
    sig = sl.PhaseSignal.sinusoid(0.05, 2000.0)
    m = sl.simulate_point(spec, spec, sl.InterferometerConfig.optimal(), sig, plan, 5)
    n = sl.photon_flux(spec).n_flux
    assert m["n_flux"] == pytest.approx(n, rel=1e-12)
    assert m["qcrb"] == pytest.approx(float(sl.qcrb_two_squeezed(n, BAND.width)))
    assert m["sql"] == pytest.approx(float(sl.sql_line(n, BAND.width)))
    assert m["lossy_psd"] == pytest.approx(m["qcrb"], rel=1e-12)  # lossless
    assert m["tone_amplitude"] == pytest.approx(0.05, rel=0.15)
    assert m["snr"] > 5.0
    assert m["noise_floor"] == pytest.approx(m["qcrb"], rel=0.25)


def test_flux_sweep_rows_and_determinism(tmp_path):
    plan = sl.SweepPlan(trials=2, base_seed=21, **SMALL_PLAN)
    sig = sl.PhaseSignal.sinusoid(0.05, 2000.0)
    result = sl.run_flux_sweep([0.7, 1.0], 1.0, BAND, sig, plan)
    assert len(result.rows) == 4
    assert [r.point_index for r in result.rows] == [0, 0, 1, 1]
    assert result.rows[0].params == (("r", 0.7), ("eta", 1.0))
    # same plan, byte-identical CSV
    again = sl.run_flux_sweep([0.7, 1.0], 1.0, BAND, sig, plan)
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    sl.write_sweep_csv(result, p1)
    sl.write_sweep_csv(again, p2)
    assert p1.read_bytes() == p2.read_bytes()
    # threads do not change the result
    threaded = dataclasses.replace(plan, threads=2)
    par = sl.run_flux_sweep([0.7, 1.0], 1.0, BAND, sig, threaded)
    sl.write_sweep_csv(par, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_flux_sweep_rejects_zero_r():
    plan = sl.SweepPlan(trials=1, base_seed=1, **SMALL_PLAN)
    with pytest.raises(ValueError):
        sl.run_flux_sweep([0.0, 1.0], 1.0, BAND, sl.PhaseSignal.zero(), plan)


def test_vetoes_accept_clean_run():
    plan = sl.SweepPlan(trials=2, base_seed=31, **SMALL_PLAN)
    sig = sl.PhaseSignal.sinusoid(0.05, 2000.0)
    result = sl.apply_vetoes(sl.run_flux_sweep([1.0], 1.0, BAND, sig, plan))
    for row in result.rows:
        assert row.accepted
        flags = dict(row.vetoes)
        assert flags["tone"] == "pass"
        assert flags["floor_stability"] == "pass"
        assert flags["flux_drift"] == "pass"
        assert flags["loss"] == "pass"
        assert flags["symmetry"] == "pass"


def test_vetoes_not_applicable_with_single_trial():
    plan = sl.SweepPlan(trials=1, base_seed=32, **SMALL_PLAN)
    result = sl.apply_vetoes(
        sl.run_flux_sweep([1.0], 1.0, BAND, sl.PhaseSignal.zero(), plan)
    )
    flags = dict(result.rows[0].vetoes)
    assert flags["floor_stability"] == "n/a"
    assert flags["flux_drift"] == "n/a"
    assert flags["tone"] == "n/a"  # no tone injected
    assert result.rows[0].accepted


def test_veto_catches_normalization_error():
    # a doubled (V+ - V-) normalization halves the recovered tone: biased
    spec = sl.SqueezingSpec(r=1.0, band=BAND)
    plan = sl.SweepPlan(trials=1, base_seed=33, **SMALL_PLAN)
    sig = sl.PhaseSignal.sinusoid(0.05, 2000.0)
    v_plus, v_minus = sl.effective_variances(spec)
    wrong = sl.EstimatorConfig(
        band=BAND, v_plus=v_minus + 2 * (v_plus - v_minus), v_minus=v_minus, fs=FS
    )
    m = sl.simulate_point(
        spec, spec, sl.InterferometerConfig.optimal(), sig, plan, 33,
        estimator_config=wrong,
    )
    row = sl.SweepRow(
        point_index=0, trial=0, seed=33, params=(("r", 1.0), ("eta", 1.0)),
        n_flux=m["n_flux"], noise_floor=m["noise_floor"],
        tone_amplitude=m["tone_amplitude"], snr=m["snr"],
        qcrb=m["qcrb"], sql=m["sql"], lossy_psd=m["lossy_psd"],
    )
    plan_echo = sl.SweepPlan(trials=1, base_seed=33, **SMALL_PLAN)
    result = sl.SweepResult(
        plan=plan_echo,
        axes=(("r", (1.0,)),),
        fixed=(
            ("eta", 1.0),
            ("signal_kind", "sinusoid"),
            ("signal_amplitude_rad", 0.05),
            ("signal_frequency_hz", 2000.0),
            ("symmetry_ratio", 0.0),
        ),
        rows=(row,),
    )
    vetoed = sl.apply_vetoes(result)
    assert dict(vetoed.rows[0].vetoes)["tone"] == "fail"
    assert not vetoed.rows[0].accepted


def test_veto_catches_high_loss():
    # eta^2 = 0.6 is 40% loss, beyond the 30% acceptance bound
    plan = sl.SweepPlan(trials=1, base_seed=34, **SMALL_PLAN)
    result = sl.apply_vetoes(
        sl.run_flux_sweep([1.0], math.sqrt(0.6), BAND, sl.PhaseSignal.zero(), plan)
    )
    assert dict(result.rows[0].vetoes)["loss"] == "fail"
    assert not result.rows[0].accepted


def test_sweep_floors_respect_quantum_bound():
    """No simulated point beats the quantum bound beyond statistics, and
    lossless points with n >= 4 sit below the SQL by ~1/(n+2)."""
    plan = sl.SweepPlan(trials=1, base_seed=41, **SMALL_PLAN)
    result = sl.run_flux_sweep(
        [sl.r_for_flux(4.0), sl.r_for_flux(8.0)], 1.0, BAND, sl.PhaseSignal.zero(), plan
    )
    # relative statistical sigma of a floor averaged over 2.8-40 kHz
    sigma = 1.0 / math.sqrt(plan.duration * (40000.0 - 2800.0))
    for row in result.rows:
        assert row.noise_floor >= row.qcrb * (1.0 - 3.0 * sigma)
        n = row.n_flux
        assert row.noise_floor / row.sql <= (1.0 / (n + 2.0)) * 1.10


def test_snr_map_far_detuned_is_unity():
    spec = sl.SqueezingSpec(r=1.15, band=BAND)
    plan = sl.SweepPlan(trials=1, base_seed=35, **SMALL_PLAN)
    sig = sl.PhaseSignal.sinusoid(0.05, 2000.0)
    result = sl.run_snr_map(
        spec, spec, [0.0, math.pi / 4], [-math.pi / 2, -math.pi / 4], 0.0, sig, plan
    )
    assert len(result.rows) == 4
    by_params = {row.params: row.snr for row in result.rows}
    optimal = by_params[(("theta_s", 0.0), ("theta_1", -math.pi / 2))]
    detuned = by_params[(("theta_s", math.pi / 4), ("theta_1", -math.pi / 4))]
    assert optimal > 3.0
    assert detuned == pytest.approx(1.0, abs=0.4)


def test_csv_and_manifest_layout(tmp_path):
    plan = sl.SweepPlan(trials=1, base_seed=36, **SMALL_PLAN)
    result = sl.apply_vetoes(
        sl.run_flux_sweep([0.8], 0.9, BAND, sl.PhaseSignal.zero(), plan)
    )
    csv_path = tmp_path / "sweep.csv"
    man_path = tmp_path / "sweep_manifest.json"
    sl.write_sweep_csv(result, csv_path)
    sl.write_manifest(result, man_path, config_echo={"note": "test"})

    lines = csv_path.read_text().splitlines()
    header = lines[0].split(",")
    assert header[:5] == ["point", "trial", "seed", "r", "eta"]
    for col in ("noise_floor", "qcrb", "sql", "lossy_psd", "veto_loss", "accepted"):
        assert col in header
    assert len(lines) == 2

    manifest = json.loads(man_path.read_text())
    assert manifest["schema_version"] == 1
    assert manifest["plan"]["base_seed"] == 36
    assert manifest["axes"] == {"r": [0.8]}
    assert manifest["seeds"] == [
        {"point": 0, "trial": 0, "seed": sl.derive_seed(36, 0, 0)}
    ]
    assert manifest["config"] == {"note": "test"}
