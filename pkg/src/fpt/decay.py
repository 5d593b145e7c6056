"""Asymptotic decay rate of the first-passage density.

The ratio sequence x_r = h_r(y_plus)/h_{r+1}(y_plus) tends to the decay
rate lambda, but only at O(1/r), so a variant of Aitken's method tuned to
hyperbolically-convergent sequences is applied:

    (A1 x)_r = x_r + d_r (d_r + d_{r-1}) / (d_{r-1} - d_r),

which is exact whenever x_r = L + 1/(a + b*r).  The plain Aitken
delta-squared (A0) is kept for comparison; it undercorrects here.

Exact rates for the worked models (OU via parabolic-cylinder zeros,
arithmetic Brownian motion, dry-friction via a transcendental pole
condition, tanh via the Romanovski eigenvalue at the n=1 zero) live in
`lambda_exact`, and the two boundary asymptotes in `lambda_asymptotic`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import oupcf
from .errors import InputError, NumericsError
from .forcefield import ForceField, InvariantMeasure
from .hseries import HGrid, HTable, build_table

__all__ = ["DecayEstimate", "ratio_sequence", "aitken_A0", "aitken_A1",
           "estimate_lambda", "lambda_asymptotic", "lambda_exact",
           "tanh_eigenvalues"]

# entries where |d_{r-1} - d_r| falls below this multiple of eps*|x_r|
# are numerically meaningless and get flagged instead of returned
STABILITY_FACTOR = 1e3 * np.finfo(float).eps


@dataclass(frozen=True)
class DecayEstimate:
    """Ratio sequence, accelerated sequence, and the chosen rate."""

    x: np.ndarray                     # x_r = h_r/h_{r+1}, r = 1..
    delta: np.ndarray                 # x_r - x_{r-1}
    accel: np.ndarray                 # A1 values (nan where unstable)
    stable: np.ndarray                # stability mask for accel
    lam: float
    table: HTable = field(repr=False, default=None)

    @property
    def lambda_(self):
        return self.lam


def ratio_sequence(table: HTable, y_plus):
    """x_r = h_r(y_plus)/h_{r+1}(y_plus) for r = 1..r_max-1."""
    logs = np.array([table.log_interpolator(r)(float(y_plus))
                     for r in range(1, table.r_max + 1)])
    if np.any(np.isnan(logs)):
        raise InputError(f"y_plus = {y_plus:g} outside the table grid")
    return np.exp(logs[:-1] - logs[1:])


def _accelerate(x, corrector):
    x = np.asarray(x, float)
    if len(x) < 3:
        raise InputError("acceleration needs at least 3 sequence terms")
    d = np.diff(x)
    vals = np.full(len(x) - 2, np.nan)
    ok = np.zeros(len(x) - 2, dtype=bool)
    for i in range(len(x) - 2):
        dm, dr = d[i], d[i + 1]
        den = dm - dr
        if abs(den) < STABILITY_FACTOR * abs(x[i + 2]):
            continue
        vals[i] = x[i + 2] + corrector(dr, dm) / den
        ok[i] = True
    return vals, ok


def aitken_A0(x):
    """Classic Aitken delta-squared:  x_r + d_r^2/(d_{r-1}-d_r).
    Immediate convergence when the differences are geometric."""
    return _accelerate(x, lambda dr, dm: dr * dr)


def aitken_A1(x):
    """Hyperbolic variant:  x_r + d_r(d_r+d_{r-1})/(d_{r-1}-d_r).
    Exact when x_r = L + 1/(a + b*r); derived by requiring
    1/(x_r - L) to be in arithmetic progression."""
    return _accelerate(x, lambda dr, dm: dr * (dr + dm))


def estimate_lambda(ff: ForceField, im: InvariantMeasure, y_plus,
                    r_max: int = 4, grid: HGrid = None) -> DecayEstimate:
    """Decay-rate estimate from the h-table ratio sequence.

    Builds the table (default grid Z=-10, step 1/32 up to y_plus), forms
    the ratios, applies the hyperbolic accelerator, and returns the first
    stable accelerated term; raw sequences ride along for diagnostics.
    """
    if r_max < 4:
        raise InputError("r_max >= 4 needed for one accelerated term")
    if grid is None:
        grid = HGrid(z_max=max(float(y_plus), HGrid.Z + 1.0) + 1e-9)
    table = build_table(ff, im, grid, r_max)
    x = ratio_sequence(table, y_plus)
    accel, ok = aitken_A1(x)
    if not np.any(ok):
        raise NumericsError("no stable accelerated term; raw ratios: "
                            + np.array2string(x, precision=6))
    lam = float(accel[np.argmax(ok)])
    if lam < 0.0:
        raise NumericsError(
            f"accelerated estimate went negative ({lam:g}); ratios "
            + np.array2string(x, precision=6))
    return DecayEstimate(x=x, delta=np.diff(x), accel=accel, stable=ok,
                         lam=lam, table=table)


def lambda_asymptotic(im: InvariantMeasure, y_plus, side):
    """Boundary asymptotes of the decay rate.

    far_left  (boundary deep in the left tail):  psi^2 / (4 Psi^2),
    far_right (boundary deep in the right tail): -psi'(y_plus),
               evaluated as -psi * d(log psi)/dy by central differences
               so only the measure is needed.
    """
    y_plus = float(y_plus)
    if side == "far_left":
        return float(np.exp(2.0 * (im.log_psi(y_plus) - im.log_Psi(y_plus))) / 4.0)
    if side == "far_right":
        h = 1e-6 * max(1.0, abs(y_plus))
        slope = (im.log_psi(y_plus + h) - im.log_psi(y_plus - h)) / (2.0 * h)
        return float(-slope * im.psi(y_plus))
    raise InputError(f"unknown side {side!r}")


def _dry_friction_lambda(mu, y_plus):
    """Rightmost pole of the dry-friction problem.

    For y_plus <= 1/mu the only singularity in (-mu^2/4, 0) is the branch
    point, so lambda = mu^2/4.  Beyond that, substituting
    beta = sqrt(mu^2+4s) in the pole condition gives

        beta/mu = 1 - exp(-beta*y_plus),   beta in (0, mu),

    whose largest root determines lambda = (mu^2 - beta^2)/4.
    """
    if y_plus <= 1.0 / mu:
        return mu * mu / 4.0

    g = lambda b: b / mu - 1.0 + np.exp(-b * y_plus)
    # g(mu) = exp(-mu*y_plus) > 0; scan down until negative
    hi = mu
    lo = None
    for frac in np.linspace(1.0 - 1e-9, 1e-6, 2000):
        if g(frac * mu) < 0.0:
            lo = frac * mu
            break
        hi = frac * mu
    if lo is None:
        raise NumericsError(
            f"dry-friction pole bracket failed for mu={mu:g}, y_plus={y_plus:g}")
    beta = brentq(g, lo, hi, xtol=1e-14, rtol=8 * np.finfo(float).eps)
    return (mu * mu - beta * beta) / 4.0


def tanh_eigenvalues(alpha, gamma, n_max=8):
    """Romanovski eigenvalue ladder lambda_n = n*gamma*(alpha - n*gamma)
    for the drift -alpha*tanh(gamma*y); only levels with alpha/gamma > 2n
    have a genuine polynomial behind them (the family is defective)."""
    n = np.arange(1, n_max + 1)
    lam = n * gamma * (alpha - n * gamma)
    valid = alpha / gamma > 2.0 * n
    return lam, valid


def lambda_exact(model, y_plus, mu=1.0, alpha=2.0, gamma=1.0,
                 parameterization="amplitude"):
    """Exact (or semi-analytic) decay rate for the worked models.

    ou           rightmost parabolic-cylinder zero,
    abm          mu^2/4 for any boundary,
    dry_friction mu^2/4 below y_plus = 1/mu, else the pole condition,
    tanh         only the boundary at the n=1 polynomial zero (y_plus = 0)
                 is covered: min of gamma*(alpha-gamma) and the
                 branch-point value alpha^2/4.
    """
    y_plus = float(y_plus)
    if model == "ou":
        return oupcf.rightmost_zero(y_plus)
    if model == "abm":
        if mu <= 0:
            raise InputError("abm needs mu > 0")
        return mu * mu / 4.0
    if model == "dry_friction":
        if mu <= 0:
            raise InputError("dry_friction needs mu > 0")
        return _dry_friction_lambda(mu, y_plus)
    if model == "tanh":
        amp = alpha if parameterization == "amplitude" else alpha / gamma
        if abs(y_plus) > 1e-12:
            raise NumericsError(
                "no polynomial eigenvalue available: the n=1 Romanovski zero "
                "sits at y_plus = 0 and higher levels are out of scope")
        if amp / gamma <= 1.0:
            raise NumericsError("no polynomial eigenvalue available: the "
                                "Romanovski family is empty for alpha <= gamma")
        return min(gamma * (amp - gamma), amp * amp / 4.0)
    raise InputError(f"unknown model {model!r}")
