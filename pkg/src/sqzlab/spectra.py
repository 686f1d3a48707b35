"""Parameter objects and unit conventions for band-limited squeezed fields.

Conventions used throughout the package:

* All internal frequencies are angular (rad/s); the CLI converts from Hz.
* Quadrature spectra are two-sided and referenced to vacuum, whose
  two-sided PSD is ``1/2`` at every frequency.  The squeezing and
  anti-squeezing levels ``v_minus``/``v_plus`` are then the in-band
  PSD values directly, and a record's variance is the integral of its
  two-sided PSD over (-fs/2, fs/2].
* Loss is an amplitude transmission ``eta``; ``1 - eta**2`` is the
  end-to-end power loss of one squeezed path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Two-sided vacuum quadrature PSD (shot-noise reference level).
VACUUM_LEVEL = 0.5

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Band:
    """Two-sided ideal brick-wall pass band.

    The filter is 1 for ``|omega - center| <= width/2`` and for
    ``|omega + center| <= width/2``, and 0 elsewhere.  ``center`` and
    ``width`` are angular frequencies (rad/s).  The band may not cross
    zero frequency.
    """

    center: float
    width: float

    def __post_init__(self):
        if not (math.isfinite(self.center) and math.isfinite(self.width)):
            raise ValueError("band parameters must be finite")
        if self.width <= 0.0:
            raise ValueError(f"band width must be positive, got {self.width}")
        if self.center < 0.0:
            raise ValueError(f"band center must be >= 0, got {self.center}")
        if self.center - self.width / 2.0 < 0.0:
            raise ValueError("band crosses zero frequency (center - width/2 < 0)")

    @classmethod
    def from_edges_hz(cls, lo_hz: float, hi_hz: float) -> "Band":
        """Band from lower/upper edge in Hz (lab convention)."""
        if not hi_hz > lo_hz:
            raise ValueError(f"need hi_hz > lo_hz, got [{lo_hz}, {hi_hz}]")
        lo = TWO_PI * lo_hz
        hi = TWO_PI * hi_hz
        return cls(center=0.5 * (lo + hi), width=hi - lo)

    @property
    def lo(self) -> float:
        """Lower band edge (rad/s)."""
        return self.center - self.width / 2.0

    @property
    def hi(self) -> float:
        """Upper band edge (rad/s)."""
        return self.center + self.width / 2.0

    @property
    def width_hz(self) -> float:
        return self.width / TWO_PI

    def indicator(self, omega) -> np.ndarray:
        """Evaluate the two-sided filter at angular frequencies ``omega``.

        Edges are inclusive up to a relative rounding slack so that
        frequencies constructed to sit exactly on an edge pass.
        """
        a = np.abs(np.asarray(omega, dtype=float))
        tol = 1e-9 * self.hi
        return ((a >= self.lo - tol) & (a <= self.hi + tol)).astype(float)


@dataclass(frozen=True)
class SqueezingSpec:
    """Squeezing level, loss, and band of one input squeezed field.

    ``r`` is the (pure-state) squeezing parameter and ``eta`` the
    amplitude transmission of the path.  The effective in-band PSD
    levels are ``(eta**2 * exp(+-2r) + 1 - eta**2) / 2``.
    """

    r: float
    eta: float = 1.0
    band: Band = Band(center=TWO_PI * 450e3, width=TWO_PI * 500e3)

    def __post_init__(self):
        if not math.isfinite(self.r) or self.r < 0.0:
            raise ValueError(f"squeezing parameter r must be >= 0, got {self.r}")
        if not (0.0 < self.eta <= 1.0):
            raise ValueError(f"transmission eta must be in (0, 1], got {self.eta}")


@dataclass(frozen=True)
class FluxReport:
    """Photon flux per frequency mode and the variances it derives from."""

    n_flux: float
    n_pure: float
    v_plus: float
    v_minus: float


def effective_variances(spec: SqueezingSpec) -> tuple[float, float]:
    """Effective anti-squeezing and squeezing PSD levels (V+, V-).

    Loss mixes the pure levels exp(+-2r)/2 with vacuum:
    ``V+- = (eta^2 exp(+-2r) + 1 - eta^2) / 2``.
    """
    t = spec.eta**2
    v_plus = 0.5 * (t * math.exp(2.0 * spec.r) + 1.0 - t)
    v_minus = 0.5 * (t * math.exp(-2.0 * spec.r) + 1.0 - t)
    return v_plus, v_minus


def photon_flux(spec: SqueezingSpec) -> FluxReport:
    """Photon flux per mode, ``n = V+ + V- - 1`` (0 for vacuum).

    For a lossless field this equals the pure-state occupancy
    ``2 sinh^2 r``, reported alongside as ``n_pure``.
    """
    v_plus, v_minus = effective_variances(spec)
    return FluxReport(
        n_flux=v_plus + v_minus - 1.0,
        n_pure=2.0 * math.sinh(spec.r) ** 2,
        v_plus=v_plus,
        v_minus=v_minus,
    )


def db_to_r(squeeze_db: float) -> float:
    """Squeezing parameter from a decibel level.

    ``squeeze_db`` is the noise suppression of the squeezed quadrature
    relative to shot noise, so ``exp(-2r) = 10**(-dB/10)``.
    """
    if not math.isfinite(squeeze_db) or squeeze_db < 0.0:
        raise ValueError(f"squeezing level in dB must be >= 0, got {squeeze_db}")
    return (math.log(10.0) / 20.0) * squeeze_db


def r_for_flux(n: float) -> float:
    """Pure-state squeezing parameter giving photon flux ``n`` per mode.

    Inverts ``n = 2 sinh^2 r``.
    """
    if not math.isfinite(n) or n <= 0.0:
        raise ValueError(f"photon flux must be > 0, got {n}")
    return math.asinh(math.sqrt(n / 2.0))


def band_bin_range(n: int, fs: float, band: Band) -> tuple[int, int]:
    """Inclusive rfft bin index range ``[ka, kb]`` inside the band.

    This is the discrete authority on band membership shared by the
    synthesizer and the filter, so both see identical edges.  DC and
    Nyquist are always excluded.
    """
    if band.hi >= math.pi * fs:
        raise ValueError("band exceeds Nyquist")
    df = fs / n
    ka = int(math.ceil(band.lo / TWO_PI / df - 1e-9))
    kb = int(math.floor(band.hi / TWO_PI / df + 1e-9))
    ka = max(ka, 1)
    kb = min(kb, n // 2 - 1)
    if kb < ka:
        raise ValueError("band contains no frequency bins at this resolution")
    return ka, kb
