"""Command-line front end: config parsing, orchestration, file output.

This is the only module with side effects.  Subcommands:

* ``simulate`` - one full pipeline run; writes homodyne and phase PSDs,
  scalar metrics, and a manifest.
* ``sweep``    - flux sweep with veto flags (CSV + manifest).
* ``scan``     - SNR map over the squeezing and first readout angle
  (CSV + manifest).
* ``bounds``   - analytic reference curves as CSV on stdout.

Configs are TOML (JSON is accepted as an equivalent); frequencies in
configs are Hz and are converted to angular units at this boundary.
Unknown config keys are rejected.  Exit codes: 0 success, 2 config
error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from . import __version__
from .bounds import (
    lossy_estimator_psd,
    qcrb_two_squeezed,
    sql_line,
    sqz_coherent_homodyne,
    sqz_coherent_qcrb,
)
from .estimator import NORMALIZATIONS
from .mzi import InterferometerConfig, PhaseSignal
from .scan import (
    SCHEMA_VERSION,
    SweepPlan,
    apply_vetoes,
    run_flux_sweep,
    run_snr_map,
    simulate_point,
    write_manifest,
    write_sweep_csv,
)
from .spectra import Band, SqueezingSpec, db_to_r, r_for_flux
from .welch import write_psd_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

THREADS_ENV = "HCL_THREADS"


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


def _load_config(path: Path) -> dict:
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    data = path.read_bytes()
    if path.suffix.lower() == ".json":
        try:
            return json.loads(data)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    try:
        return tomllib.loads(data.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"{path}: invalid TOML: {exc}") from exc


class _Section:
    """Strict key access to one config table: unknown keys are rejected."""

    def __init__(self, name: str, raw: dict):
        if not isinstance(raw, dict):
            raise ConfigError(f"[{name}] must be a table")
        self.name = name
        self.raw = raw
        self.seen: set[str] = set()

    def get(self, key, default=None, kind=None, required=False):
        self.seen.add(key)
        if key not in self.raw:
            if required:
                raise ConfigError(f"[{self.name}] missing required key {key!r}")
            return default
        value = self.raw[key]
        if kind is float:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"[{self.name}].{key} must be a number")
            return float(value)
        if kind is int:
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"[{self.name}].{key} must be an integer")
            return value
        if kind is str and not isinstance(value, str):
            raise ConfigError(f"[{self.name}].{key} must be a string")
        if kind is list and not isinstance(value, list):
            raise ConfigError(f"[{self.name}].{key} must be a list")
        return value

    def finish(self):
        unknown = set(self.raw) - self.seen
        if unknown:
            raise ConfigError(
                f"[{self.name}] has unknown keys: {', '.join(sorted(unknown))}"
            )


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """Fully validated run configuration (all angular units converted)."""

    spec1: SqueezingSpec
    spec2: SqueezingSpec
    interferometer: InterferometerConfig
    signal: PhaseSignal
    plan: SweepPlan
    sweep_r_values: tuple[float, ...]
    sweep_eta: float
    scan_theta_s: tuple[float, ...]
    scan_theta_1: tuple[float, ...]
    scan_theta_2: float
    echo: dict


def _parse_squeezer(name: str, raw: dict, band: Band) -> SqueezingSpec:
    sec = _Section(name, raw)
    r = sec.get("r", kind=float)
    squeeze_db = sec.get("squeeze_db", kind=float)
    eta = sec.get("eta", default=1.0, kind=float)
    sec.finish()
    if (r is None) == (squeeze_db is None):
        raise ConfigError(f"[{name}] needs exactly one of 'r' or 'squeeze_db'")
    if squeeze_db is not None:
        r = db_to_r(squeeze_db)
    try:
        spec = SqueezingSpec(r=r, eta=eta, band=band)
    except ValueError as exc:
        raise ConfigError(f"[{name}]: {exc}") from exc
    if spec.r <= 0.0:
        raise ConfigError(
            f"[{name}]: r = 0 gives V+ = V-, the estimator normalization "
            "is degenerate"
        )
    return spec


def _angle_grid(start: float, span: float, count: int) -> tuple[float, ...]:
    return tuple(start + k * span / count for k in range(count))


def parse_config(raw: dict, seed_override=None, threads_override=None) -> RunConfig:
    """Validate a config mapping and build the domain objects.

    Frequencies are Hz here; everything downstream is angular.
    """
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a table")
    known_sections = {
        "run",
        "band",
        "squeezer1",
        "squeezer2",
        "interferometer",
        "signal",
        "welch",
        "sweep",
        "scan",
    }
    unknown = set(raw) - known_sections
    if unknown:
        raise ConfigError(f"unknown config sections: {', '.join(sorted(unknown))}")

    band_sec = _Section("band", raw.get("band", {}))
    lo_hz = band_sec.get("lo_hz", default=200e3, kind=float)
    hi_hz = band_sec.get("hi_hz", default=700e3, kind=float)
    band_sec.finish()
    try:
        band = Band.from_edges_hz(lo_hz, hi_hz)
    except ValueError as exc:
        raise ConfigError(f"[band]: {exc}") from exc

    if "squeezer1" not in raw:
        raise ConfigError("missing required section [squeezer1]")
    spec1 = _parse_squeezer("squeezer1", raw["squeezer1"], band)
    spec2 = (
        _parse_squeezer("squeezer2", raw["squeezer2"], band)
        if "squeezer2" in raw
        else spec1
    )

    ifo_sec = _Section("interferometer", raw.get("interferometer", {}))
    optimal = InterferometerConfig.optimal()
    try:
        interferometer = InterferometerConfig(
            phi_d=ifo_sec.get("phi_d", default=optimal.phi_d, kind=float),
            theta_s=ifo_sec.get("theta_s", default=optimal.theta_s, kind=float),
            theta_1=ifo_sec.get("theta_1", default=optimal.theta_1, kind=float),
            theta_2=ifo_sec.get("theta_2", default=optimal.theta_2, kind=float),
        )
    except ValueError as exc:
        raise ConfigError(f"[interferometer]: {exc}") from exc
    ifo_sec.finish()

    sig_sec = _Section("signal", raw.get("signal", {}))
    kind = sig_sec.get("kind", default="zero", kind=str)
    amplitude = sig_sec.get("amplitude_rad", default=0.0, kind=float)
    frequency = sig_sec.get("frequency_hz", default=0.0, kind=float)
    phase = sig_sec.get("phase_rad", default=0.0, kind=float)
    sig_sec.finish()
    try:
        signal = PhaseSignal(
            kind=kind, amplitude=amplitude, frequency=frequency, phase=phase
        )
    except ValueError as exc:
        raise ConfigError(f"[signal]: {exc}") from exc

    run_sec = _Section("run", raw.get("run", {}))
    n_samples = run_sec.get("n_samples", default=2**24, kind=int)
    fs_hz = run_sec.get("fs_hz", default=7e6, kind=float)
    seed = run_sec.get("seed", default=0, kind=int)
    trials = run_sec.get("trials", default=1, kind=int)
    normalization = run_sec.get("normalization", default="per-frequency", kind=str)
    run_sec.finish()
    if normalization not in NORMALIZATIONS:
        raise ConfigError(
            f"[run].normalization must be one of {NORMALIZATIONS}, got {normalization!r}"
        )
    if seed_override is not None:
        seed = seed_override
    if seed < 0:
        raise ConfigError("[run].seed must be non-negative")

    welch_sec = _Section("welch", raw.get("welch", {}))
    segment_length = welch_sec.get("segment_length", default=2**16, kind=int)
    overlap = welch_sec.get("overlap", default=0.5, kind=float)
    window = welch_sec.get("window", default="hann", kind=str)
    welch_sec.finish()
    if segment_length < 2 or (segment_length & (segment_length - 1)) != 0:
        raise ConfigError("[welch].segment_length must be a power of two")
    if not 0.0 <= overlap < 1.0:
        raise ConfigError("[welch].overlap must be in [0, 1)")

    threads = threads_override if threads_override is not None else 1
    try:
        plan = SweepPlan(
            n_samples=n_samples,
            fs=fs_hz,
            trials=trials,
            base_seed=seed,
            segment_length=segment_length,
            overlap=overlap,
            window=window,
            normalization=normalization,
            threads=threads,
        )
    except ValueError as exc:
        raise ConfigError(f"[run]/[welch]: {exc}") from exc
    if segment_length > n_samples:
        raise ConfigError("[welch].segment_length exceeds [run].n_samples")
    nyq = math.pi * plan.fs
    if band.hi >= nyq:
        raise ConfigError("[band] upper edge is at or above Nyquist")

    sweep_sec = _Section("sweep", raw.get("sweep", {}))
    r_values = sweep_sec.get("r_values", kind=list)
    n_values = sweep_sec.get("n_values", kind=list)
    sweep_eta = sweep_sec.get("eta", default=spec1.eta, kind=float)
    sweep_sec.finish()
    if r_values is not None and n_values is not None:
        raise ConfigError("[sweep] accepts 'r_values' or 'n_values', not both")
    if n_values is not None:
        try:
            r_values = [r_for_flux(float(n)) for n in n_values]
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[sweep].n_values: {exc}") from exc
    if r_values is None:
        r_values = [spec1.r]
    try:
        r_values = tuple(float(r) for r in r_values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[sweep].r_values: {exc}") from exc
    if any(r <= 0.0 for r in r_values):
        raise ConfigError("[sweep] r values must be > 0")

    scan_sec = _Section("scan", raw.get("scan", {}))
    ts_points = scan_sec.get("theta_s_points", default=16, kind=int)
    t1_points = scan_sec.get("theta_1_points", default=16, kind=int)
    ts_values = scan_sec.get("theta_s_values", kind=list)
    t1_values = scan_sec.get("theta_1_values", kind=list)
    scan_theta_2 = scan_sec.get("theta_2", default=optimal.theta_2, kind=float)
    scan_sec.finish()
    if ts_values is None:
        if ts_points < 2:
            raise ConfigError("[scan].theta_s_points must be >= 2")
        ts_values = _angle_grid(-math.pi / 2, math.pi, ts_points)
    if t1_values is None:
        if t1_points < 2:
            raise ConfigError("[scan].theta_1_points must be >= 2")
        t1_values = _angle_grid(-math.pi, math.pi, t1_points)

    return RunConfig(
        spec1=spec1,
        spec2=spec2,
        interferometer=interferometer,
        signal=signal,
        plan=plan,
        sweep_r_values=r_values,
        sweep_eta=sweep_eta,
        scan_theta_s=tuple(float(t) for t in ts_values),
        scan_theta_1=tuple(float(t) for t in t1_values),
        scan_theta_2=scan_theta_2,
        echo=raw,
    )


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def cmd_simulate(args) -> int:
    cfg = parse_config(
        _load_config(Path(args.config)), args.seed, _threads(args)
    )
    out = _out_dir(args)
    metrics = simulate_point(
        cfg.spec1,
        cfg.spec2,
        cfg.interferometer,
        cfg.signal,
        cfg.plan,
        cfg.plan.base_seed,
        with_spectra=True,
    )
    if not all(
        math.isfinite(metrics[k]) for k in ("noise_floor", "snr", "n_flux")
    ):
        raise FloatingPointError("pipeline produced non-finite metrics")

    write_psd_csv(metrics["out1_psd"], out / "out1_psd.csv")
    write_psd_csv(metrics["out2_psd"], out / "out2_psd.csv")
    write_psd_csv(metrics["phase_psd"], out / "phase_psd.csv")
    scalars = {
        key: metrics[key]
        for key in ("n_flux", "noise_floor", "tone_amplitude", "snr", "qcrb", "sql", "lossy_psd")
    }
    if math.isnan(scalars["tone_amplitude"]):
        scalars["tone_amplitude"] = None
    _write_json(
        out / "metrics.json",
        {"schema_version": SCHEMA_VERSION, "seed": cfg.plan.base_seed, **scalars},
    )
    _write_json(
        out / "manifest.json",
        {
            "schema_version": SCHEMA_VERSION,
            "code_version": __version__,
            "command": "simulate",
            "seed": cfg.plan.base_seed,
            "config": cfg.echo,
        },
    )
    print(f"simulate: wrote {out}/{{out1,out2,phase}}_psd.csv, metrics.json")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = parse_config(_load_config(Path(args.config)), args.seed, _threads(args))
    out = _out_dir(args)
    result = run_flux_sweep(
        cfg.sweep_r_values, cfg.sweep_eta, cfg.spec1.band, cfg.signal, cfg.plan
    )
    result = apply_vetoes(result)
    write_sweep_csv(result, out / "sweep.csv")
    write_manifest(result, out / "sweep_manifest.json", config_echo=cfg.echo)
    print(f"sweep: wrote {out}/sweep.csv ({len(result.rows)} rows)")
    return EXIT_OK


def cmd_scan(args) -> int:
    cfg = parse_config(_load_config(Path(args.config)), args.seed, _threads(args))
    out = _out_dir(args)
    result = run_snr_map(
        cfg.spec1,
        cfg.spec2,
        cfg.scan_theta_s,
        cfg.scan_theta_1,
        cfg.scan_theta_2,
        cfg.signal,
        cfg.plan,
    )
    result = apply_vetoes(result)
    write_sweep_csv(result, out / "scan.csv")
    write_manifest(result, out / "scan_manifest.json", config_echo=cfg.echo)
    print(f"scan: wrote {out}/scan.csv ({len(result.rows)} rows)")
    return EXIT_OK


def cmd_bounds(args) -> int:
    if args.n_min <= 0 or args.n_max <= args.n_min:
        raise ConfigError("need 0 < --n-min < --n-max")
    if args.points < 2:
        raise ConfigError("--points must be >= 2")
    if not 0.0 < args.eta <= 1.0:
        raise ConfigError("--eta must be in (0, 1]")
    delta_omega = 2.0 * math.pi * args.band_width_hz
    if delta_omega <= 0:
        raise ConfigError("--band-width-hz must be positive")

    n_grid = np.geomspace(args.n_min, args.n_max, args.points)
    lines = ["n,qcrb,sql,sqz_coh_qcrb,sqz_coh_homodyne,lossy_psd"]
    for n in n_grid:
        n = float(n)
        # Invert the post-loss flux for the lossy curve at this eta.
        r = 0.5 * math.acosh(1.0 + n / args.eta**2)
        lines.append(
            ",".join(
                repr(v)
                for v in (
                    n,
                    float(qcrb_two_squeezed(n, delta_omega)),
                    float(sql_line(n, delta_omega)),
                    float(sqz_coherent_qcrb(n, delta_omega)),
                    float(sqz_coherent_homodyne(n, delta_omega)),
                    lossy_estimator_psd(r, args.eta, delta_omega),
                )
            )
        )
    print("\n".join(lines))
    return EXIT_OK


def _threads(args) -> int:
    if args.threads is not None:
        value = args.threads
    else:
        env = os.environ.get(THREADS_ENV)
        if env is None:
            return 1
        try:
            value = int(env)
        except ValueError as exc:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}") from exc
    if value < 1:
        raise ConfigError("thread count must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sqzlab",
        description="Squeezed-light interferometry laboratory",
    )
    parser.add_argument("--version", action="version", version=f"sqzlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_run_command(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="TOML (or JSON) run config")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override [run].seed")
        p.add_argument(
            "--threads",
            type=int,
            default=None,
            help=f"worker threads for grid points (default ${THREADS_ENV} or 1)",
        )
        p.set_defaults(func=func)
        return p

    add_run_command("simulate", cmd_simulate, "single pipeline run with PSD outputs")
    add_run_command("sweep", cmd_sweep, "flux sweep with veto flags")
    add_run_command("scan", cmd_scan, "SNR map over (theta_s, theta_1)")

    b = sub.add_parser("bounds", help="analytic reference curves as CSV on stdout")
    b.add_argument("--n-min", type=float, default=0.5)
    b.add_argument("--n-max", type=float, default=32.0)
    b.add_argument("--points", type=int, default=20)
    b.add_argument("--eta", type=float, default=1.0, help="amplitude transmission")
    b.add_argument(
        "--band-width-hz", type=float, default=500e3, help="squeezing band width"
    )
    b.set_defaults(func=cmd_bounds)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # numeric or I/O failure with diagnostic
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    raise SystemExit(main())
