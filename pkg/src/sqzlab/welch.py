"""Welch PSD estimation and the scalar spectral metrics derived from it.

All reported spectra are one-sided densities: white noise of variance
``sigma^2`` at rate ``fs`` gives a flat level ``2 sigma^2 / fs``.  The
analytic reference curves elsewhere in the package are two-sided, so
comparisons divide measured levels by two.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np
from scipy import signal as sps

SCHEMA_VERSION = 1

# Analysis bands from the data-processing recipe (Hz): the noise floor is
# the mean PSD between 2.8 and 40 kHz, clear of the 2 kHz tone; the tone
# band for the SNR statistic runs from 1.2 to 2.8 kHz.
FLOOR_BAND = (2800.0, 40000.0)
SIGNAL_BAND = (1200.0, 2800.0)


@dataclass(frozen=True)
class PsdEstimate:
    """One-sided Welch PSD with its estimation metadata."""

    frequencies: np.ndarray
    psd: np.ndarray
    segment_length: int
    overlap: float
    window: str
    n_segments: int

    @property
    def df(self) -> float:
        return float(self.frequencies[1] - self.frequencies[0])


@dataclass(frozen=True)
class FloorAndTone:
    """Noise floor (units^2/Hz, one-sided), recovered tone amplitude, and
    the tone-band SNR statistic."""

    floor: float
    tone_amplitude: float
    snr: float

    def __post_init__(self):
        if not self.floor > 0.0:
            raise ValueError("noise floor must be positive")
        if self.snr < 0.0:
            raise ValueError("snr must be >= 0")


def _samples_and_rate(x, fs):
    samples = getattr(x, "samples", None)
    if samples is not None:
        return np.asarray(samples, dtype=float), x.sample_rate
    if fs is None:
        raise ValueError("fs is required when passing a bare array")
    return np.asarray(x, dtype=float), fs


def welch_psd(
    x,
    segment_length: int = 2**16,
    overlap: float = 0.5,
    window: str = "hann",
    *,
    fs: float | None = None,
) -> PsdEstimate:
    """Averaged modified periodogram of a record.

    ``x`` may be any object with ``samples``/``sample_rate`` attributes
    or a bare array with ``fs`` given.  Segment means are removed before
    windowing.
    """
    samples, rate = _samples_and_rate(x, fs)
    n = len(samples)
    if segment_length < 2 or (segment_length & (segment_length - 1)) != 0:
        raise ValueError(f"segment length must be a power of two, got {segment_length}")
    if segment_length > n:
        raise ValueError(f"segment length {segment_length} exceeds record length {n}")
    if not 0.0 <= overlap < 1.0:
        raise ValueError(f"overlap fraction must be in [0, 1), got {overlap}")

    noverlap = int(segment_length * overlap)
    freqs, psd = sps.welch(
        samples,
        fs=rate,
        window=window,
        nperseg=segment_length,
        noverlap=noverlap,
        detrend="constant",
        scaling="density",
        return_onesided=True,
    )
    step = segment_length - noverlap
    n_segments = (n - segment_length) // step + 1
    return PsdEstimate(
        frequencies=freqs,
        psd=psd,
        segment_length=segment_length,
        overlap=overlap,
        window=window,
        n_segments=n_segments,
    )


def _band_selection(
    psd: PsdEstimate,
    lo_hz: float,
    hi_hz: float,
    exclusions: Iterable[tuple[float, float]] = (),
) -> np.ndarray:
    f = psd.frequencies
    if lo_hz < f[0] or hi_hz > f[-1]:
        raise ValueError(
            f"band [{lo_hz}, {hi_hz}] Hz outside PSD range [{f[0]}, {f[-1]}]"
        )
    keep = (f >= lo_hz) & (f <= hi_hz)
    for ex_lo, ex_hi in exclusions:
        keep &= ~((f >= ex_lo) & (f <= ex_hi))
    return keep


def band_power(psd: PsdEstimate, lo_hz: float, hi_hz: float) -> float:
    """Integrated one-sided PSD over a band (units^2)."""
    keep = _band_selection(psd, lo_hz, hi_hz)
    return float(np.sum(psd.psd[keep]) * psd.df)


def noise_floor(
    psd: PsdEstimate,
    band_lo: float = FLOOR_BAND[0],
    band_hi: float = FLOOR_BAND[1],
    exclusions: Iterable[tuple[float, float]] = (),
) -> float:
    """Mean one-sided PSD over the analysis band, minus excluded bins."""
    keep = _band_selection(psd, band_lo, band_hi, exclusions)
    if not np.any(keep):
        raise ValueError("no PSD bins left in the floor band after exclusions")
    return float(np.mean(psd.psd[keep]))


def tone_exclusion(tone_hz: float, psd: PsdEstimate, n_widths: int = 3) -> tuple[float, float]:
    """Exclusion interval of +-n resolution bandwidths around a tone."""
    return (tone_hz - n_widths * psd.df, tone_hz + n_widths * psd.df)


def tone_amplitude(
    psd: PsdEstimate,
    tone_hz: float,
    half_width_bins: int = 4,
    floor: float | None = None,
) -> float:
    """Amplitude of a sinusoid from the integrated PSD around its frequency.

    The integral over the tone window equals ``A^2/2`` plus the noise
    floor contribution, which is subtracted (estimated from flanking
    windows when ``floor`` is not given).  The window must be wide
    enough to capture the window-function spread of the tone.
    """
    f = psd.frequencies
    df = psd.df
    half = half_width_bins * df
    win = (f >= tone_hz - half) & (f <= tone_hz + half)
    if not np.any(win):
        raise ValueError(f"tone at {tone_hz} Hz outside PSD range")
    power = float(np.sum(psd.psd[win]) * df)
    if floor is None:
        flank = ((f >= tone_hz - 3 * half) & (f < tone_hz - half)) | (
            (f > tone_hz + half) & (f <= tone_hz + 3 * half)
        )
        if not np.any(flank):
            raise ValueError("no flanking bins available for floor estimation")
        floor = float(np.mean(psd.psd[flank]))
    net = power - floor * np.count_nonzero(win) * df
    return math.sqrt(2.0 * max(net, 0.0))


def snr_statistic(
    psd: PsdEstimate,
    signal_lo: float = SIGNAL_BAND[0],
    signal_hi: float = SIGNAL_BAND[1],
    noise_lo: float = FLOOR_BAND[0],
    noise_hi: float = FLOOR_BAND[1],
) -> float:
    """Integrated PSD in the tone band over the mean integrated PSD of
    equal-width neighborhoods in the floor band.  Unity when no tone is
    present."""
    sig = _band_selection(psd, signal_lo, signal_hi)
    noise = _band_selection(psd, noise_lo, noise_hi)
    if not np.any(sig) or not np.any(noise):
        raise ValueError("PSD does not cover the SNR analysis bands")
    sig_power = float(np.sum(psd.psd[sig]) * psd.df)
    noise_level = float(np.mean(psd.psd[noise]))
    return sig_power / (noise_level * np.count_nonzero(sig) * psd.df)


def floor_and_tone(
    psd: PsdEstimate,
    tone_hz: float = 2000.0,
    exclusions: Iterable[tuple[float, float]] = (),
) -> FloorAndTone:
    """The three scalar metrics of one phase-estimate PSD."""
    return FloorAndTone(
        floor=noise_floor(psd, exclusions=exclusions),
        tone_amplitude=tone_amplitude(psd, tone_hz),
        snr=snr_statistic(psd),
    )


def write_psd_csv(psd: PsdEstimate, path, extra_meta: dict | None = None) -> None:
    """Write the PSD as ``frequency_hz,psd`` CSV plus a JSON sidecar.

    The sidecar (same name, ``.json``) records the estimation metadata.
    Output is byte-deterministic for identical inputs.
    """
    path = Path(path)
    lines = ["frequency_hz,psd"]
    for f, p in zip(psd.frequencies, psd.psd):
        lines.append(f"{float(f)!r},{float(p)!r}")
    path.write_text("\n".join(lines) + "\n")

    meta = {
        "schema_version": SCHEMA_VERSION,
        "sides": "one-sided",
        "window": psd.window,
        "segment_length": psd.segment_length,
        "overlap": psd.overlap,
        "n_segments": psd.n_segments,
        "df_hz": psd.df,
    }
    if extra_meta:
        meta.update(extra_meta)
    sidecar = path.with_suffix(".json")
    sidecar.write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
