"""Analytic reference curves for phase-estimation noise floors.

All values are two-sided PSD levels in rad^2/Hz at analysis frequencies
far below the squeezing band width ``delta_omega`` (rad/s).  ``n`` is
the photon flux per frequency mode.  This module performs no Monte
Carlo; it is the oracle layer the simulations are checked against.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .spectra import SqueezingSpec, photon_flux

logger = logging.getLogger(__name__)


def _check_flux(n) -> np.ndarray:
    n = np.asarray(n, dtype=float)
    if np.any(n <= 0.0):
        raise ValueError("photon flux must be > 0")
    return n


def qcrb_two_squeezed(n, delta_omega: float):
    """Quantum bound with both ports squeezed: ``pi/(delta_omega n(n+2))``.

    Diverges as the flux vanishes and falls as 1/n^2 for n >> 2
    (Heisenberg scaling of the PSD).
    """
    n = _check_flux(n)
    return math.pi / (delta_omega * n * (n + 2.0))


def sql_line(n, delta_omega: float):
    """Shot-noise (standard quantum limit) reference: ``pi/(delta_omega n)``.

    Convention: the bound with the coherent gain ``n(n+2)`` replaced by
    ``n``, so the SQL-to-bound ratio is exactly ``n + 2`` and the
    amplitude precision scales as ``1/sqrt(n)``.
    """
    n = _check_flux(n)
    return math.pi / (delta_omega * n)


def sqz_coherent_qcrb(n, delta_omega: float):
    """Quantum bound for one squeezed and one coherent input of equal
    flux: ``pi/(delta_omega n(n+3/2))``."""
    n = _check_flux(n)
    return math.pi / (delta_omega * n * (n + 1.5))


def sqz_coherent_homodyne(n, delta_omega: float):
    """Dark-fringe homodyne floor for the squeezed+coherent scheme:
    ``pi/(delta_omega n(n+1))``; does not saturate its quantum bound."""
    n = _check_flux(n)
    return math.pi / (delta_omega * n * (n + 1.0))


def lossy_estimator_psd(r: float, eta: float, delta_omega: float) -> float:
    """Noise floor of the nonlinear estimator with lossy inputs:
    ``4 pi V+ V- / ((V+ - V-)^2 delta_omega)`` with the effective levels
    ``V+- = (eta^2 exp(+-2r) + 1 - eta^2)/2``.

    Equals the two-squeezed quantum bound at the post-loss flux iff
    ``eta = 1``, and exceeds it otherwise.
    """
    if r <= 0.0:
        raise ValueError("lossy floor undefined for r = 0")
    t = eta**2
    v_plus = 0.5 * (t * math.exp(2.0 * r) + 1.0 - t)
    v_minus = 0.5 * (t * math.exp(-2.0 * r) + 1.0 - t)
    return 4.0 * math.pi * v_plus * v_minus / ((v_plus - v_minus) ** 2 * delta_omega)


@dataclass(frozen=True)
class BoundsReport:
    """The reference curves evaluated at one operating point."""

    n_flux: float
    qcrb_two_sqz: float
    lossy_estimator_psd: float
    sql: float
    sqz_coherent_qcrb: float
    sqz_coherent_homodyne: float


def bounds_report(r: float, eta: float, delta_omega: float) -> BoundsReport:
    """All reference values for a squeezed pair of parameters (r, eta).

    The flux-parameterized curves are evaluated at the post-loss photon
    flux."""
    spec = SqueezingSpec(r=r, eta=eta)
    n = photon_flux(spec).n_flux
    return BoundsReport(
        n_flux=n,
        qcrb_two_sqz=float(qcrb_two_squeezed(n, delta_omega)),
        lossy_estimator_psd=lossy_estimator_psd(r, eta, delta_omega),
        sql=float(sql_line(n, delta_omega)),
        sqz_coherent_qcrb=float(sqz_coherent_qcrb(n, delta_omega)),
        sqz_coherent_homodyne=float(sqz_coherent_homodyne(n, delta_omega)),
    )


@dataclass(frozen=True)
class ScalingFit:
    """Log-log least-squares fit of floor-vs-flux points."""

    points: tuple[tuple[float, float], ...]
    exponent: float
    residual: float


def fit_scaling(points: Sequence[tuple[float, float]]) -> ScalingFit:
    """Least-squares slope of log(psd) against log(n).

    Needs at least three points whose flux values span a factor of four
    or more.  Points exactly on a power law return its exponent; the
    two-squeezed bound gives a slope approaching -2 from above as the
    large-flux end grows, and the SQL line gives exactly -1.
    """
    pts = [(float(n), float(p)) for n, p in points]
    if len(pts) < 3:
        raise ValueError("need at least 3 points to fit a scaling exponent")
    n_vals = np.array([p[0] for p in pts])
    psd_vals = np.array([p[1] for p in pts])
    if np.any(n_vals <= 0.0) or np.any(psd_vals <= 0.0):
        raise ValueError("scaling fit needs positive flux and PSD values")
    if len(np.unique(n_vals)) < 2:
        raise ValueError("degenerate flux values")
    if n_vals.max() / n_vals.min() < 4.0:
        raise ValueError("flux values must span at least a factor of 4")

    x = np.log(n_vals)
    y = np.log(psd_vals)
    design = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    return ScalingFit(
        points=tuple(pts),
        exponent=float(coef[1]),
        residual=float(np.sqrt(np.mean(resid**2))),
    )


def lossy_floor_crosscheck(
    r_values: Sequence[float] = (0.3, 0.6, 0.9, 1.2),
    loss_values: Sequence[float] = (0.05, 0.15, 0.25, 0.35),
    delta_omega: float = 2.0 * math.pi * 500e3,
) -> dict:
    """Compare the canonical lossy floor against an alternative closed
    form that circulates with the opposite loss-parameter convention.

    The alternative form reads, with ``loss`` the power loss and
    ``T = 1 - loss`` the power transmission,

        pi (1 + 2 loss T^2 n) / (delta_omega T^3 n (T n + 2))

    and is evaluated under both photon-number readings: the pre-loss
    occupancy ``2 sinh^2 r`` and the post-loss flux.  Returns the
    maximum relative deviation from :func:`lossy_estimator_psd` for
    each reading plus an ``agrees`` flag at 1e-9 relative.  On
    disagreement a warning is logged and the canonical form prevails
    for every value reported by this package.
    """

    def alternative(loss: float, n: float) -> float:
        t = 1.0 - loss
        return (
            math.pi
            * (1.0 + 2.0 * loss * t**2 * n)
            / (delta_omega * t**3 * n * (t * n + 2.0))
        )

    dev_pure = 0.0
    dev_flux = 0.0
    for r in r_values:
        for loss in loss_values:
            eta = math.sqrt(1.0 - loss)
            canonical = lossy_estimator_psd(r, eta, delta_omega)
            n_pure = 2.0 * math.sinh(r) ** 2
            n_flux = photon_flux(SqueezingSpec(r=r, eta=eta)).n_flux
            dev_pure = max(dev_pure, abs(alternative(loss, n_pure) / canonical - 1.0))
            dev_flux = max(dev_flux, abs(alternative(loss, n_flux) / canonical - 1.0))

    agrees = min(dev_pure, dev_flux) <= 1e-9
    if not agrees:
        logger.warning(
            "alternative lossy-floor form deviates from the canonical one "
            "(max rel. dev. %.3g with pre-loss occupancy, %.3g with post-loss "
            "flux); the canonical form prevails",
            dev_pure,
            dev_flux,
        )
    return {
        "agrees": agrees,
        "max_rel_dev_pre_loss_occupancy": dev_pure,
        "max_rel_dev_post_loss_flux": dev_flux,
        "tolerance": 1e-9,
    }
