import math

import numpy as np
import pytest
from scipy import signal as sps

import sqzlab as sl
from tests.conftest import BAND, FS, in_band_level, out_of_band_level


def test_psd_shape_values():
    spec0 = sl.SqueezingSpec(r=0.0, band=BAND)
    omega = 2 * math.pi * np.array([1e3, 450e3, 2e6])
    assert np.allclose(sl.psd_shape(spec0, "q", omega), 0.5)
    spec = sl.SqueezingSpec(r=math.log(2), band=BAND)
    assert sl.psd_shape(spec, "q", BAND.center) == pytest.approx(2.0)
    assert sl.psd_shape(spec, "p", BAND.center) == pytest.approx(0.125)
    lossy = sl.SqueezingSpec(r=math.log(2), eta=0.9, band=BAND)
    assert sl.psd_shape(lossy, "q", BAND.center) == pytest.approx(1.715)
    with pytest.raises(ValueError):
        sl.psd_shape(spec, "x", BAND.center)


def test_vacuum_records_are_white():
    spec = sl.SqueezingSpec(r=0.0, band=BAND)
    fields = sl.synth_squeezed_pair(spec, spec, 2**19 / FS, FS, seed=5)
    psd = sl.welch_psd(fields.q1, 2**12)
    # flat at the vacuum level 1/2 everywhere, 5% tolerance
    assert in_band_level(psd) == pytest.approx(0.5, rel=0.05)
    assert out_of_band_level(psd) == pytest.approx(0.5, rel=0.05)


def test_squeezed_pair_levels():
    # 2^21 samples give >= 64 Welch segments at 2^14; 5% tolerance
    spec = sl.SqueezingSpec(r=math.log(2), band=BAND)
    fields = sl.synth_squeezed_pair(spec, spec, 2**21 / FS, FS, seed=7)
    psd_q = sl.welch_psd(fields.q1, 2**14)
    psd_p = sl.welch_psd(fields.p1, 2**14)
    assert psd_q.n_segments >= 64
    assert in_band_level(psd_q) == pytest.approx(2.0, rel=0.05)
    assert out_of_band_level(psd_q) == pytest.approx(0.5, rel=0.05)
    assert in_band_level(psd_p) == pytest.approx(0.125, rel=0.05)
    # minimum-uncertainty product for the pure state
    assert in_band_level(psd_q) * in_band_level(psd_p) == pytest.approx(0.25, rel=0.10)


def test_lossy_level():
    spec = sl.SqueezingSpec(r=math.log(2), eta=0.9, band=BAND)
    fields = sl.synth_squeezed_pair(spec, spec, 2**20 / FS, FS, seed=9)
    psd_q = sl.welch_psd(fields.q1, 2**13)
    assert in_band_level(psd_q) == pytest.approx(1.715, rel=0.05)


def test_record_means_are_small():
    spec = sl.SqueezingSpec(r=math.log(2), band=BAND)
    fields = sl.synth_squeezed_pair(spec, spec, 2**19 / FS, FS, seed=13)
    for rec in (fields.q1, fields.p1, fields.q2, fields.p2):
        n = len(rec)
        bound = 4.0 * rec.samples.std() / math.sqrt(n)
        assert abs(rec.samples.mean()) < bound


def test_determinism_and_independence():
    spec = sl.SqueezingSpec(r=0.8, band=BAND)
    a = sl.synth_squeezed_pair(spec, spec, 2**18 / FS, FS, seed=21)
    b = sl.synth_squeezed_pair(spec, spec, 2**18 / FS, FS, seed=21)
    assert a.q1.samples.tobytes() == b.q1.samples.tobytes()
    assert a.p2.samples.tobytes() == b.p2.samples.tobytes()

    c = sl.synth_squeezed_pair(spec, spec, 2**18 / FS, FS, seed=22)
    n = len(a.q1)
    for x, y in [(a.q1, c.q1), (a.q1, a.p1), (a.q1, a.q2)]:
        corr = np.dot(x.samples, y.samples) / (
            n * x.samples.std() * y.samples.std()
        )
        assert abs(corr) < 4.0 / math.sqrt(n)


def test_time_domain_fir_oracle():
    """Frequency-domain synthesis against white noise through an FIR
    approximation of the brick wall, in-band levels within 5%."""
    n = 2**20
    spec = sl.SqueezingSpec(r=math.log(2), band=BAND)
    fields = sl.synth_squeezed_pair(spec, spec, n / FS, FS, seed=31)
    level_fft = in_band_level(sl.welch_psd(fields.q1, 2**13))

    rng = np.random.default_rng(31)
    taps = sps.firwin(4097, [200e3, 700e3], pass_zero=False, fs=FS)
    white = rng.standard_normal(n)
    v_plus = 2.0
    oracle = sps.fftconvolve(white, taps, mode="same") * math.sqrt(v_plus * FS)
    psd_oracle = sl.welch_psd(oracle, 2**13, fs=FS)
    level_fir = in_band_level(psd_oracle)
    assert level_fft == pytest.approx(level_fir, rel=0.05)
    assert level_fir == pytest.approx(v_plus, rel=0.05)


def test_nyquist_and_length_validation():
    spec = sl.SqueezingSpec(r=0.5, band=BAND)
    with pytest.raises(ValueError):
        sl.synth_squeezed_pair(spec, spec, 2**16 / 1e6, 1e6, seed=1)  # band > Nyquist
    with pytest.raises(ValueError):
        sl.synth_squeezed_pair(spec, spec, 1000 / FS, FS, seed=1)  # not power of two


def test_record_validation():
    with pytest.raises(ValueError):
        sl.QuadratureRecord(np.array([1.0, np.nan, 0.0, 0.0]), FS)
    with pytest.raises(ValueError):
        sl.QuadratureRecord(np.zeros(6), FS)  # not a power of two
    rec = sl.QuadratureRecord(np.zeros(8), FS, "q1")
    with pytest.raises(ValueError):
        rec.samples[0] = 1.0  # immutable


def test_field_pair_validation():
    rec8 = sl.QuadratureRecord(np.zeros(8), FS)
    rec16 = sl.QuadratureRecord(np.zeros(16), FS)
    rec8_slow = sl.QuadratureRecord(np.zeros(8), FS / 2)
    with pytest.raises(ValueError):
        sl.FieldPair(rec8, rec8, rec8, rec16)
    with pytest.raises(ValueError):
        sl.FieldPair(rec8, rec8, rec8, rec8_slow)


def test_binary_round_trip(tmp_path):
    spec = sl.SqueezingSpec(r=0.6, band=BAND)
    fields = sl.synth_squeezed_pair(spec, spec, 2**12 / FS, FS, seed=77)
    path = tmp_path / "q1.sqzrec"
    sl.write_record(path, fields.q1)
    back = sl.read_record(path)
    assert back.sample_rate == fields.q1.sample_rate
    assert back.label == "q1"
    assert np.array_equal(back.samples, fields.q1.samples)
    # 32-byte header, then little-endian doubles
    raw = path.read_bytes()
    assert raw[:8] == b"SQZREC\x00\x00"
    assert len(raw) == 32 + 8 * len(fields.q1)


def test_binary_rejects_garbage(tmp_path):
    path = tmp_path / "bad.sqzrec"
    path.write_bytes(b"NOTMAGIC" + b"\x00" * 64)
    with pytest.raises(ValueError):
        sl.read_record(path)
