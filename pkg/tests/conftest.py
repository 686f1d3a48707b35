import math

import numpy as np
import pytest

import sqzlab as sl

FS = 7e6
BAND = sl.Band.from_edges_hz(200e3, 700e3)


@pytest.fixture(scope="session")
def band():
    return BAND


@pytest.fixture(scope="session")
def pure_fields():
    """Shared lossless r=ln2 input pair, 2^20 samples at 7 MS/s."""
    spec = sl.SqueezingSpec(r=math.log(2), band=BAND)
    return spec, sl.synth_squeezed_pair(spec, spec, 2**20 / FS, FS, seed=11)


def in_band_level(psd, lo_hz=210e3, hi_hz=690e3):
    """Mean two-sided PSD level safely inside the default band."""
    sel = (psd.frequencies >= lo_hz) & (psd.frequencies <= hi_hz)
    return float(np.mean(psd.psd[sel])) / 2.0


def out_of_band_level(psd, lo_hz=1.0e6, hi_hz=3.0e6):
    sel = (psd.frequencies >= lo_hz) & (psd.frequencies <= hi_hz)
    return float(np.mean(psd.psd[sel])) / 2.0
