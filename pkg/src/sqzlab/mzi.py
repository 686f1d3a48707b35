"""Mach-Zehnder propagation of quadrature records and homodyne readout.

The canonical representation is the real 4x4 orthogonal-symplectic
transform acting on ``(q1, p1, q2, p2)``; the complex 2x2 mode matrix it
derives from is kept only as the oracle in :func:`quadrature_transfer`.

Sign conventions, fixed once here: the homodyne outputs are the
q-quadratures of the transformed modes, and a positive phase signal
advances the phase of the *second* arm, so the differential arm phase
entering the transfer is ``phi_d - signal(t)``.  With the optimal
setpoint ``(phi_d, theta_s, theta_1, theta_2) = (-pi/2, 0, -pi/2, 0)``
and signal ``dphi`` this yields

    out1 = (p1 - q2)/sqrt(2) - (dphi/(2 sqrt 2)) (p1 + q2)
    out2 = (p1 + q2)/sqrt(2) + (dphi/(2 sqrt 2)) (p1 - q2)

to first order in ``dphi``.  The signal is treated quasi-statically
(signal frequencies are far below the band frequencies, which are far
below the optical free spectral range).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .spectra import VACUUM_LEVEL, SqueezingSpec, effective_variances
from .synth import FieldPair, QuadratureRecord

# Largest signal amplitude for which the linearized transfer is accepted.
MAX_LINEAR_AMPLITUDE = 0.1


@dataclass(frozen=True)
class InterferometerConfig:
    """The four phase angles: differential arm phase, relative squeezing
    angle, and the two homodyne readout angles (rad)."""

    phi_d: float
    theta_s: float
    theta_1: float
    theta_2: float

    def __post_init__(self):
        for name in ("phi_d", "theta_s", "theta_1", "theta_2"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @classmethod
    def optimal(cls) -> "InterferometerConfig":
        """The setpoint at which the estimator is unbiased and optimal."""
        return cls(phi_d=-math.pi / 2, theta_s=0.0, theta_1=-math.pi / 2, theta_2=0.0)


@dataclass(frozen=True)
class PhaseSignal:
    """Differential phase signal injected into the interferometer.

    ``kind`` is one of ``"zero"``, ``"sinusoid"``, ``"samples"``.
    """

    kind: str
    amplitude: float = 0.0
    frequency: float = 0.0
    phase: float = 0.0
    samples: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in ("zero", "sinusoid", "samples"):
            raise ValueError(f"unknown signal kind {self.kind!r}")
        if self.kind == "sinusoid":
            if not math.isfinite(self.amplitude):
                raise ValueError("sinusoid amplitude must be finite")
            if not self.frequency > 0.0:
                raise ValueError("sinusoid frequency must be positive")
        if self.kind == "samples" and self.samples is None:
            raise ValueError("kind 'samples' requires a sample array")

    @classmethod
    def zero(cls) -> "PhaseSignal":
        return cls(kind="zero")

    @classmethod
    def sinusoid(cls, amplitude: float, frequency: float, phase: float = 0.0) -> "PhaseSignal":
        return cls(kind="sinusoid", amplitude=amplitude, frequency=frequency, phase=phase)

    @classmethod
    def from_samples(cls, samples) -> "PhaseSignal":
        return cls(kind="samples", samples=np.asarray(samples, dtype=float))

    def render(self, n: int, fs: float) -> np.ndarray:
        """Sample the signal on the record grid."""
        if self.kind == "zero":
            return np.zeros(n)
        if self.kind == "sinusoid":
            t = np.arange(n) / fs
            return self.amplitude * np.sin(2.0 * np.pi * self.frequency * t + self.phase)
        if len(self.samples) != n:
            raise ValueError(
                f"signal has {len(self.samples)} samples, records have {n}"
            )
        return self.samples

    def max_abs(self, n: int, fs: float) -> float:
        if self.kind == "zero":
            return 0.0
        if self.kind == "sinusoid":
            return abs(self.amplitude)
        return float(np.max(np.abs(self.samples)))


@dataclass(frozen=True)
class HomodynePair:
    """The two simultaneously measured commuting output quadratures."""

    out1: QuadratureRecord
    out2: QuadratureRecord

    def __post_init__(self):
        if len(self.out1) != len(self.out2):
            raise ValueError("output records must share one length")
        if self.out1.sample_rate != self.out2.sample_rate:
            raise ValueError("output records must share one sample rate")

    @property
    def sample_rate(self) -> float:
        return self.out1.sample_rate

    def __len__(self) -> int:
        return len(self.out1)


def quadrature_transfer(config: InterferometerConfig, delta_phi: float = 0.0) -> np.ndarray:
    """Real 4x4 transfer matrix on ``(q1, p1, q2, p2)`` at one instant.

    Derived from the complex mode matrix; orthogonal and symplectic for
    any angles.  Rows 0 and 2 are the measured output quadratures.
    """
    phi = config.phi_d - delta_phi
    c = math.cos(phi / 2.0)
    s = math.sin(phi / 2.0)
    t1, t2, ts = config.theta_1, config.theta_2, config.theta_s
    c1, s1 = math.cos(t1), math.sin(t1)
    c2, s2 = math.cos(t2), math.sin(t2)
    c1s, s1s = math.cos(t1 + ts), math.sin(t1 + ts)
    c2s, s2s = math.cos(t2 + ts), math.sin(t2 + ts)
    return np.array(
        [
            [c * c1, -c * s1, -s * s1s, -s * c1s],
            [c * s1, c * c1, s * c1s, -s * s1s],
            [-s * s2, -s * c2, c * c2s, -c * s2s],
            [s * c2, -s * s2, c * s2s, c * c2s],
        ]
    )


def transfer_exact(
    fields: FieldPair, config: InterferometerConfig, signal: PhaseSignal
) -> HomodynePair:
    """Propagate the inputs through the full transfer, sample by sample.

    The signal modulates the differential arm phase instantaneously;
    the measured outputs are the q-rows of the 4x4 transform.
    """
    n = len(fields)
    fs = fields.sample_rate
    dphi = signal.render(n, fs)
    phi_half = 0.5 * (config.phi_d - dphi)
    c = np.cos(phi_half)
    s = np.sin(phi_half)
    t1, t2, ts = config.theta_1, config.theta_2, config.theta_s

    q1, p1 = fields.q1.samples, fields.p1.samples
    q2, p2 = fields.q2.samples, fields.p2.samples

    out1 = c * (math.cos(t1) * q1 - math.sin(t1) * p1) - s * (
        math.sin(t1 + ts) * q2 + math.cos(t1 + ts) * p2
    )
    out2 = -s * (math.sin(t2) * q1 + math.cos(t2) * p1) + c * (
        math.cos(t2 + ts) * q2 - math.sin(t2 + ts) * p2
    )
    return HomodynePair(
        out1=QuadratureRecord(out1, fs, "out1"),
        out2=QuadratureRecord(out2, fs, "out2"),
    )


def transfer_linearized(fields: FieldPair, signal: PhaseSignal) -> HomodynePair:
    """Small-signal transfer at the optimal setpoint, first order in the
    signal. Rejected for amplitudes above MAX_LINEAR_AMPLITUDE."""
    n = len(fields)
    fs = fields.sample_rate
    if signal.max_abs(n, fs) > MAX_LINEAR_AMPLITUDE + 1e-12:
        raise ValueError(
            f"linearized transfer needs |signal| <= {MAX_LINEAR_AMPLITUDE} rad"
        )
    dphi = signal.render(n, fs)
    p1 = fields.p1.samples
    q2 = fields.q2.samples
    diff = (p1 - q2) / math.sqrt(2.0)
    summ = (p1 + q2) / math.sqrt(2.0)
    half = dphi / (2.0 * math.sqrt(2.0))
    out1 = diff - half * (p1 + q2)
    out2 = summ + half * (p1 - q2)
    return HomodynePair(
        out1=QuadratureRecord(out1, fs, "out1"),
        out2=QuadratureRecord(out2, fs, "out2"),
    )


def _input_levels(spec1: SqueezingSpec, spec2: SqueezingSpec) -> np.ndarray:
    vp1, vm1 = effective_variances(spec1)
    vp2, vm2 = effective_variances(spec2)
    return np.array([vp1, vm1, vp2, vm2])


def _input_variances(spec1: SqueezingSpec, spec2: SqueezingSpec, fs: float) -> np.ndarray:
    levels = _input_levels(spec1, spec2)
    widths_hz = np.array(
        [
            spec1.band.width_hz,
            spec1.band.width_hz,
            spec2.band.width_hz,
            spec2.band.width_hz,
        ]
    )
    # Total record variance: in-band level over +-band plus vacuum elsewhere.
    return levels * 2.0 * widths_hz + VACUUM_LEVEL * (fs - 2.0 * widths_hz)


def output_variances(
    spec1: SqueezingSpec,
    spec2: SqueezingSpec,
    config: InterferometerConfig,
    fs: Optional[float] = None,
) -> tuple[float, float]:
    """Analytic variances of the two measured outputs at zero signal.

    With ``fs`` given, these are total record variances at that sample
    rate; without it, in-band PSD levels referenced to vacuum = 1/2
    (both input bands must then coincide).
    """
    if fs is None:
        if spec1.band != spec2.band:
            raise ValueError("level map requires both inputs to share one band")
        base = _input_levels(spec1, spec2)
    else:
        base = _input_variances(spec1, spec2, fs)
    m = quadrature_transfer(config)
    var1 = float(m[0] ** 2 @ base)
    var2 = float(m[2] ** 2 @ base)
    return var1, var2


def scan_output_variance(
    spec1: SqueezingSpec,
    spec2: SqueezingSpec,
    theta_s_grid,
    theta_grid,
    *,
    output: int = 1,
    phi_d: float = -math.pi / 2,
    theta_fixed: float = 0.0,
    fs: Optional[float] = None,
) -> np.ndarray:
    """Analytic output-variance map over (theta_s, theta_i), no Monte Carlo.

    ``theta_grid`` scans the readout angle of the selected ``output``
    (1 or 2); the other homodyne angle is held at ``theta_fixed``.
    Returns shape ``(len(theta_s_grid), len(theta_grid))``; the map is
    pi-periodic in each angle.  Units as in :func:`output_variances`.
    """
    theta_s_grid = np.asarray(theta_s_grid, dtype=float)
    theta_grid = np.asarray(theta_grid, dtype=float)
    if output not in (1, 2):
        raise ValueError(f"output must be 1 or 2, got {output}")
    if len(theta_s_grid) < 8 or len(theta_grid) < 8:
        raise ValueError("grid must be at least 8x8")

    out = np.empty((len(theta_s_grid), len(theta_grid)))
    for i, ts in enumerate(theta_s_grid):
        for j, th in enumerate(theta_grid):
            if output == 1:
                config = InterferometerConfig(phi_d, ts, th, theta_fixed)
            else:
                config = InterferometerConfig(phi_d, ts, theta_fixed, th)
            out[i, j] = output_variances(spec1, spec2, config, fs)[output - 1]
    return out
