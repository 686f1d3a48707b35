"""Synthesis of Gaussian quadrature records with prescribed band spectra.

Records are classical samples of the symmetric-ordered (Wigner)
statistics of the field quadratures.  This is exact for every statistic
of commuting homodyne outputs of Gaussian states propagated through
linear optics, which is all the downstream modules consume.

Synthesis is done in the frequency domain: independent complex Gaussian
Fourier coefficients are drawn with variance proportional to the target
two-sided PSD and inverse-FFT'd, which realizes the ideal brick-wall
band edges exactly.  Loss enters as PSD mixing
``eta^2 * squeezed + (1 - eta^2) * vacuum``, equivalent to amplitude
mixing with an independent vacuum field for Gaussian processes.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import fft as sfft

from .spectra import VACUUM_LEVEL, SqueezingSpec, band_bin_range, effective_variances

_MAGIC = b"SQZREC\x00\x00"
_FORMAT_VERSION = 1
_HEADER = struct.Struct("<8sI4sdQ")  # magic, version, label, fs, length = 32 bytes
assert _HEADER.size == 32


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class QuadratureRecord:
    """Uniformly sampled real record of one quadrature.

    ``label`` names the quadrature and port, e.g. ``"q1"`` or ``"p2"``.
    Samples are immutable after creation.
    """

    samples: np.ndarray
    sample_rate: float
    label: str = ""

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1 or len(samples) < 2 or not _is_power_of_two(len(samples)):
            raise ValueError("record length must be a power of two >= 2")
        if not np.all(np.isfinite(samples)):
            raise ValueError("record contains non-finite samples")
        if not self.sample_rate > 0.0:
            raise ValueError(f"sample rate must be positive, got {self.sample_rate}")
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class FieldPair:
    """The four input quadrature records of the two interferometer ports.

    The underlying noise processes are mutually independent; all records
    share length and sample rate.
    """

    q1: QuadratureRecord
    p1: QuadratureRecord
    q2: QuadratureRecord
    p2: QuadratureRecord

    def __post_init__(self):
        records = (self.q1, self.p1, self.q2, self.p2)
        if len({len(rec) for rec in records}) != 1:
            raise ValueError("all four records must share one length")
        if len({rec.sample_rate for rec in records}) != 1:
            raise ValueError("all four records must share one sample rate")

    @property
    def sample_rate(self) -> float:
        return self.q1.sample_rate

    def __len__(self) -> int:
        return len(self.q1)


def psd_shape(spec: SqueezingSpec, quadrature: str, omega) -> np.ndarray:
    """Target two-sided PSD of one input quadrature at ``omega`` (rad/s).

    Returns V+ (for ``"q"``) or V- (for ``"p"``) inside the band and the
    vacuum level 1/2 outside.  This is the synthesis target, exposed so
    tests can use it as an oracle.
    """
    if quadrature not in ("q", "p"):
        raise ValueError(f"quadrature must be 'q' or 'p', got {quadrature!r}")
    v_plus, v_minus = effective_variances(spec)
    level = v_plus if quadrature == "q" else v_minus
    h = spec.band.indicator(omega)
    return VACUUM_LEVEL + (level - VACUUM_LEVEL) * h


def _synth_record(
    spec: SqueezingSpec,
    quadrature: str,
    n: int,
    fs: float,
    seed_seq: np.random.SeedSequence,
    label: str,
) -> QuadratureRecord:
    rng = np.random.default_rng(seed_seq)
    v_plus, v_minus = effective_variances(spec)
    level = v_plus if quadrature == "q" else v_minus
    ka, kb = band_bin_range(n, fs, spec.band)

    # Coefficient scale chosen so that Var(x) = sum over two-sided bins of
    # PSD * fs/n; interior rfft bins carry half the energy in each of +-k.
    nf = n // 2 + 1
    re = rng.standard_normal(nf)
    im = rng.standard_normal(nf)
    coeff = np.empty(nf, dtype=complex)
    coeff.real = re
    coeff.imag = im
    scale_vac = math.sqrt(fs * n * VACUUM_LEVEL / 2.0)
    coeff *= scale_vac
    coeff[ka : kb + 1] *= math.sqrt(level / VACUUM_LEVEL)
    # DC and Nyquist coefficients are real and sit outside every band
    # (pinned to vacuum), carrying the full two-sided bin energy.
    coeff[0] = re[0] * scale_vac * math.sqrt(2.0)
    coeff[-1] = re[-1] * scale_vac * math.sqrt(2.0)

    samples = sfft.irfft(coeff, n=n, overwrite_x=True)
    return QuadratureRecord(samples=samples, sample_rate=fs, label=label)


def synth_squeezed_pair(
    spec1: SqueezingSpec,
    spec2: SqueezingSpec,
    duration: float,
    fs: float,
    seed: int,
) -> FieldPair:
    """Generate the four independent input records for the two ports.

    ``duration * fs`` must round to a power of two (FFT synthesis), and
    both bands must lie below Nyquist.  The same ``seed`` reproduces the
    output bit-for-bit.
    """
    n_float = duration * fs
    n = int(round(n_float))
    if abs(n_float - n) > 1e-6 or not _is_power_of_two(n) or n < 2:
        raise ValueError(
            f"duration * fs must be a power of two, got {n_float!r}"
        )
    nyquist = np.pi * fs  # rad/s
    for spec in (spec1, spec2):
        if spec.band.hi >= nyquist:
            raise ValueError(
                f"band upper edge {spec.band.hi / (2 * np.pi):g} Hz exceeds "
                f"Nyquist {fs / 2:g} Hz"
            )

    children = np.random.SeedSequence(seed).spawn(4)
    return FieldPair(
        q1=_synth_record(spec1, "q", n, fs, children[0], "q1"),
        p1=_synth_record(spec1, "p", n, fs, children[1], "p1"),
        q2=_synth_record(spec2, "q", n, fs, children[2], "q2"),
        p2=_synth_record(spec2, "p", n, fs, children[3], "p2"),
    )


def write_record(path, record: QuadratureRecord) -> None:
    """Dump a record: 32-byte header then little-endian float64 samples."""
    label = record.label.encode("ascii", "replace")[:4].ljust(4, b"\x00")
    header = _HEADER.pack(
        _MAGIC, _FORMAT_VERSION, label, record.sample_rate, len(record)
    )
    data = np.ascontiguousarray(record.samples, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data.tobytes())


def read_record(path) -> QuadratureRecord:
    """Read a record written by :func:`write_record`."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, version, label, fs, length = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != _FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported format version {version}")
    samples = np.frombuffer(raw, dtype="<f8", count=length, offset=_HEADER.size)
    return QuadratureRecord(
        samples=samples.astype(float),
        sample_rate=fs,
        label=label.rstrip(b"\x00").decode("ascii"),
    )
