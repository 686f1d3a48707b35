"""Parameter sweeps: flux scans, angle maps, vetoes, and result files.

Each grid point runs the full pipeline (synthesize inputs, propagate,
estimate, spectral metrics) with a seed derived deterministically from
the plan's base seed and the point/trial indices, so identical plans
produce byte-identical result files.  Grid points are independent and
may be computed in parallel; rows are always emitted in grid order.

Reported noise floors and the attached theory columns are two-sided PSD
levels (rad^2/Hz); the factor of two relative to the one-sided exported
spectra is applied here, in one place.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import __version__
from .bounds import lossy_estimator_psd, qcrb_two_squeezed, sql_line
from .estimator import EstimatorConfig, estimate_phase
from .mzi import InterferometerConfig, PhaseSignal, transfer_exact
from .spectra import Band, SqueezingSpec, effective_variances, photon_flux
from .synth import synth_squeezed_pair
from .welch import (
    FLOOR_BAND,
    noise_floor,
    snr_statistic,
    tone_amplitude,
    tone_exclusion,
    welch_psd,
)

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class SweepPlan:
    """Per-point acquisition settings and the seed policy.

    ``n_samples`` must be a power of two.  Point seeds are derived from
    ``base_seed`` and the (point, trial) indices via
    :func:`derive_seed`.
    """

    n_samples: int = 2**24
    fs: float = 7e6
    trials: int = 3
    base_seed: int = 0
    segment_length: int = 2**16
    overlap: float = 0.5
    window: str = "hann"
    normalization: str = "per-frequency"
    threads: int = 1

    def __post_init__(self):
        if self.n_samples < 2 or (self.n_samples & (self.n_samples - 1)) != 0:
            raise ValueError(f"n_samples must be a power of two, got {self.n_samples}")
        if not self.fs > 0.0:
            raise ValueError("fs must be positive")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    @property
    def duration(self) -> float:
        return self.n_samples / self.fs


@dataclass(frozen=True)
class SweepRow:
    """One pipeline run: grid parameters, measured metrics, theory values.

    ``noise_floor`` and the theory columns are two-sided rad^2/Hz.
    ``vetoes`` maps criterion name to "pass"/"fail"/"n/a" once
    :func:`apply_vetoes` has run.
    """

    point_index: int
    trial: int
    seed: int
    params: tuple[tuple[str, float], ...]
    n_flux: float
    noise_floor: float
    tone_amplitude: float
    snr: float
    qcrb: float
    sql: float
    lossy_psd: float
    vetoes: Optional[tuple[tuple[str, str], ...]] = None
    accepted: Optional[bool] = None


@dataclass(frozen=True)
class SweepResult:
    """Rows in grid order plus the plan and fixed settings that made them."""

    plan: SweepPlan
    axes: tuple[tuple[str, tuple[float, ...]], ...]
    fixed: tuple[tuple[str, object], ...]
    rows: tuple[SweepRow, ...]

    def fixed_value(self, key: str):
        for k, v in self.fixed:
            if k == key:
                return v
        raise KeyError(key)


def derive_seed(base_seed: int, *indices: int) -> int:
    """Deterministic per-point seed: base seed XOR a hash of the indices."""
    h = hashlib.blake2b(digest_size=8)
    for idx in indices:
        h.update(struct.pack("<q", int(idx)))
    return (int(base_seed) ^ int.from_bytes(h.digest(), "little")) & (2**63 - 1)


def simulate_point(
    spec1: SqueezingSpec,
    spec2: SqueezingSpec,
    config: InterferometerConfig,
    signal: PhaseSignal,
    plan: SweepPlan,
    seed: int,
    *,
    estimator_config: Optional[EstimatorConfig] = None,
    with_spectra: bool = False,
) -> dict:
    """Run the full pipeline once and reduce it to scalar metrics.

    The estimator normalization variances default to the known truth of
    the first input spec.  Returns floor/tone/snr plus the analytic
    reference values at the same flux; with ``with_spectra`` the Welch
    spectra are included as well.
    """
    fields = synth_squeezed_pair(spec1, spec2, plan.duration, plan.fs, seed)
    pair = transfer_exact(fields, config, signal)
    if estimator_config is None:
        estimator_config = EstimatorConfig.from_spec(spec1, plan.fs)
    phase = estimate_phase(pair, estimator_config, normalization=plan.normalization)
    psd = welch_psd(
        phase, plan.segment_length, plan.overlap, plan.window
    )

    exclusions = []
    tone = math.nan
    if signal.kind == "sinusoid":
        if FLOOR_BAND[0] <= signal.frequency <= FLOOR_BAND[1]:
            exclusions.append(tone_exclusion(signal.frequency, psd))
        tone = tone_amplitude(psd, signal.frequency)

    floor_two_sided = noise_floor(psd, exclusions=exclusions) / 2.0
    n_flux = photon_flux(spec1).n_flux
    delta_omega = estimator_config.band.width
    metrics = {
        "n_flux": n_flux,
        "noise_floor": floor_two_sided,
        "tone_amplitude": tone,
        "snr": snr_statistic(psd),
        "qcrb": float(qcrb_two_squeezed(n_flux, delta_omega)),
        "sql": float(sql_line(n_flux, delta_omega)),
        "lossy_psd": lossy_estimator_psd(spec1.r, spec1.eta, delta_omega),
    }
    if with_spectra:
        metrics["phase_psd"] = psd
        metrics["out1_psd"] = welch_psd(pair.out1, plan.segment_length, plan.overlap, plan.window)
        metrics["out2_psd"] = welch_psd(pair.out2, plan.segment_length, plan.overlap, plan.window)
    return metrics


def _run_grid(
    tasks: Sequence[tuple[int, int, int, Callable[[int], dict], tuple[tuple[str, float], ...]]],
    threads: int,
) -> list[SweepRow]:
    def run(task):
        point, trial, seed, fn, params = task
        metrics = fn(seed)
        return SweepRow(
            point_index=point,
            trial=trial,
            seed=seed,
            params=params,
            n_flux=metrics["n_flux"],
            noise_floor=metrics["noise_floor"],
            tone_amplitude=metrics["tone_amplitude"],
            snr=metrics["snr"],
            qcrb=metrics["qcrb"],
            sql=metrics["sql"],
            lossy_psd=metrics["lossy_psd"],
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run, tasks))
    return [run(task) for task in tasks]


def run_flux_sweep(
    r_values: Sequence[float],
    eta: float,
    band: Band,
    signal: PhaseSignal,
    plan: SweepPlan,
) -> SweepResult:
    """Flux scan: one pipeline run per squeezing value per trial.

    Both ports carry the same spec at each point; rows include the
    quantum bound, SQL, and lossy theory at the point's flux.
    """
    r_values = [float(r) for r in r_values]
    if not r_values:
        raise ValueError("flux sweep needs at least one r value")
    if any(r <= 0.0 for r in r_values):
        raise ValueError("flux sweep needs r > 0 at every point")
    config = InterferometerConfig.optimal()

    tasks = []
    for i, r in enumerate(r_values):
        spec = SqueezingSpec(r=r, eta=eta, band=band)
        params = (("r", r), ("eta", float(eta)))

        def fn(seed, spec=spec):
            return simulate_point(spec, spec, config, signal, plan, seed)

        for trial in range(plan.trials):
            tasks.append((i, trial, derive_seed(plan.base_seed, i, trial), fn, params))

    rows = _run_grid(tasks, plan.threads)
    fixed = (
        ("eta", float(eta)),
        ("band_lo_hz", band.lo / (2 * math.pi)),
        ("band_hi_hz", band.hi / (2 * math.pi)),
        ("signal_kind", signal.kind),
        ("signal_amplitude_rad", float(signal.amplitude)),
        ("signal_frequency_hz", float(signal.frequency)),
        ("symmetry_ratio", 0.0),  # both ports share one spec by construction
    )
    return SweepResult(
        plan=plan,
        axes=(("r", tuple(r_values)),),
        fixed=fixed,
        rows=tuple(rows),
    )


def run_snr_map(
    spec1: SqueezingSpec,
    spec2: SqueezingSpec,
    theta_s_grid: Sequence[float],
    theta_1_grid: Sequence[float],
    theta_2: float,
    signal: PhaseSignal,
    plan: SweepPlan,
) -> SweepResult:
    """SNR of the recovered tone over a (theta_s, theta_1) angle grid.

    The second readout angle is held at its given (optimal) value and
    the interferometer stays on the mid fringe.  With the grid covering
    one period, the map peaks at (0, -pi/2) modulo pi.
    """
    theta_s_grid = [float(t) for t in theta_s_grid]
    theta_1_grid = [float(t) for t in theta_1_grid]
    if not theta_s_grid or not theta_1_grid:
        raise ValueError("angle grids must be non-empty")

    tasks = []
    point = 0
    for ts in theta_s_grid:
        for t1 in theta_1_grid:
            config = InterferometerConfig(
                phi_d=-math.pi / 2, theta_s=ts, theta_1=t1, theta_2=theta_2
            )
            params = (("theta_s", ts), ("theta_1", t1))

            def fn(seed, config=config):
                return simulate_point(spec1, spec2, config, signal, plan, seed)

            for trial in range(plan.trials):
                tasks.append(
                    (point, trial, derive_seed(plan.base_seed, point, trial), fn, params)
                )
            point += 1

    rows = _run_grid(tasks, plan.threads)
    vp1, vm1 = effective_variances(spec1)
    vp2, vm2 = effective_variances(spec2)
    symmetry = float(np.std([vm1, vm2]) / max(vp1, vp2))
    fixed = (
        ("r1", spec1.r),
        ("r2", spec2.r),
        ("eta1", spec1.eta),
        ("eta2", spec2.eta),
        ("band_lo_hz", spec1.band.lo / (2 * math.pi)),
        ("band_hi_hz", spec1.band.hi / (2 * math.pi)),
        ("theta_2", float(theta_2)),
        ("signal_kind", signal.kind),
        ("signal_amplitude_rad", float(signal.amplitude)),
        ("signal_frequency_hz", float(signal.frequency)),
        ("symmetry_ratio", symmetry),
    )
    return SweepResult(
        plan=plan,
        axes=(("theta_s", tuple(theta_s_grid)), ("theta_1", tuple(theta_1_grid))),
        fixed=fixed,
        rows=tuple(rows),
    )


@dataclass(frozen=True)
class VetoThresholds:
    """Acceptance thresholds for sweep rows, mirroring the experimental
    data-quality criteria reinterpreted for simulation."""

    tone_tolerance: float = 0.30
    floor_stability: float = 0.30
    flux_drift: float = 0.30
    loss_single: float = 0.30
    loss_mean: float = 0.35
    symmetry: float = 0.15


def apply_vetoes(result: SweepResult, thresholds: VetoThresholds = VetoThresholds()) -> SweepResult:
    """Flag each row against the five acceptance criteria.

    (1) tone recovered within ``tone_tolerance`` of the injected value;
    (2) trial-to-trial floor stability within ``floor_stability`` of the
    point mean (n/a with a single trial); (3) flux drift across trials
    within ``flux_drift`` (n/a with a single trial); (4) power loss
    below ``loss_single`` and mean loss below ``loss_mean``; (5) the two
    sources' squeezing levels symmetric to within ``symmetry``.
    Criteria without the data they need are marked "n/a".
    """
    injected = float(result.fixed_value("signal_amplitude_rad"))
    has_tone = result.fixed_value("signal_kind") == "sinusoid" and injected > 0.0
    symmetry_ratio = float(result.fixed_value("symmetry_ratio"))

    by_point: dict[int, list[SweepRow]] = {}
    for row in result.rows:
        by_point.setdefault(row.point_index, []).append(row)

    point_floor_ok: dict[int, Optional[bool]] = {}
    point_flux_ok: dict[int, Optional[bool]] = {}
    for point, rows in by_point.items():
        if len(rows) < 2:
            point_floor_ok[point] = None
            point_flux_ok[point] = None
            continue
        floors = np.array([r.noise_floor for r in rows])
        fluxes = np.array([r.n_flux for r in rows])
        point_floor_ok[point] = bool(
            np.all(np.abs(floors / floors.mean() - 1.0) <= thresholds.floor_stability)
        )
        point_flux_ok[point] = bool(
            fluxes.max() <= (1.0 + thresholds.flux_drift) * fluxes.min()
        )

    def flag(ok: Optional[bool]) -> str:
        if ok is None:
            return "n/a"
        return "pass" if ok else "fail"

    new_rows = []
    for row in result.rows:
        loss = _row_loss(result, row)
        checks = {
            "tone": (
                abs(row.tone_amplitude / injected - 1.0) <= thresholds.tone_tolerance
                if has_tone and math.isfinite(row.tone_amplitude)
                else None
            ),
            "floor_stability": point_floor_ok[row.point_index],
            "flux_drift": point_flux_ok[row.point_index],
            "loss": loss <= thresholds.loss_single and loss <= thresholds.loss_mean,
            "symmetry": symmetry_ratio <= thresholds.symmetry,
        }
        vetoes = tuple((name, flag(ok)) for name, ok in checks.items())
        accepted = all(v != "fail" for _, v in vetoes)
        new_rows.append(dataclasses.replace(row, vetoes=vetoes, accepted=accepted))

    return dataclasses.replace(result, rows=tuple(new_rows))


def _row_loss(result: SweepResult, row: SweepRow) -> float:
    params = dict(row.params)
    if "eta" in params:
        return 1.0 - params["eta"] ** 2
    fixed = {name: value for name, value in result.fixed}
    etas = [float(fixed[k]) for k in ("eta", "eta1", "eta2") if k in fixed]
    if not etas:
        return 0.0
    return max(1.0 - eta**2 for eta in etas)


def _format(value) -> str:
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return repr(value)
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def write_sweep_csv(result: SweepResult, path) -> None:
    """One CSV row per pipeline run, in grid order; byte-deterministic."""
    param_names = [name for name, _ in result.rows[0].params] if result.rows else []
    columns = (
        ["point", "trial", "seed"]
        + param_names
        + ["n_flux", "noise_floor", "tone_amplitude", "snr", "qcrb", "sql", "lossy_psd"]
    )
    has_vetoes = result.rows and result.rows[0].vetoes is not None
    if has_vetoes:
        columns += [f"veto_{name}" for name, _ in result.rows[0].vetoes] + ["accepted"]

    lines = [",".join(columns)]
    for row in result.rows:
        values = [row.point_index, row.trial, row.seed]
        values += [value for _, value in row.params]
        values += [
            row.n_flux,
            row.noise_floor,
            row.tone_amplitude,
            row.snr,
            row.qcrb,
            row.sql,
            row.lossy_psd,
        ]
        if has_vetoes:
            values += [status for _, status in row.vetoes] + [row.accepted]
        lines.append(",".join(_format(v) for v in values))
    Path(path).write_text("\n".join(lines) + "\n")


def write_manifest(result: SweepResult, path, config_echo: dict | None = None) -> None:
    """JSON manifest: plan, axes, fixed settings, per-row seeds, version.

    Simulation error bars are purely statistical (no drift is modeled),
    noted here so downstream consumers do not misread them.
    """
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "code_version": __version__,
        "plan": dataclasses.asdict(result.plan),
        "axes": {name: list(grid) for name, grid in result.axes},
        "fixed": {name: value for name, value in result.fixed},
        "seeds": [
            {"point": row.point_index, "trial": row.trial, "seed": row.seed}
            for row in result.rows
        ],
        "n_rows": len(result.rows),
        "error_bars": "statistical only; no drift modeled",
    }
    if config_echo is not None:
        manifest["config"] = config_echo
    Path(path).write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
