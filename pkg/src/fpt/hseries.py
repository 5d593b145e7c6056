"""Spatial tables of the Taylor coefficients h_r of the log-derivative
H(s,z) of the bounded homogeneous solution.

H(s,z) expands as sum_r (-s)^r h_r(z); the ratios h_r/h_{r+1} at the
boundary converge to the decay rate and the integrals of h_r give the
first-passage cumulants, so this table is the computational backbone.

Construction (per column r >= 2):

  seed   h_r(Z) = c_{r-1} * h_1(Z)^(2r-1)   (c = Catalan numbers; valid
         deep in the left tail for fields with -y*A(y) -> +inf),
  march  I_r(z) = int_{-inf}^z psi * sum_{k=1}^{r-1} h_k h_{r-k},
         accumulated rightward with the logarithmic trapezium rule
         (exact on piecewise exponentials), then h_r = I_r / psi.

Everything is carried in log space: psi underflows long before the left
cutoff matters, and the seeds involve high powers of small h_1 values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from math import comb
import warnings

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import InputError, NumericsError
from .forcefield import ForceField, InvariantMeasure, classify

__all__ = ["HGrid", "HTable", "catalan_numbers", "h1", "build_table",
           "cumulant_integrand", "integrate_h"]


def catalan_numbers(n):
    """c_0 .. c_n with c_r = (2r)!/(r!(r+1)!)."""
    return np.array([comb(2 * r, r) // (r + 1) for r in range(n + 1)], dtype=float)


@dataclass(frozen=True)
class HGrid:
    """Uniform spatial grid for the march: z_j = Z + j*step, covering
    [Z, z_max].  The defaults (Z=-10, step=1/32) keep the seed region deep
    enough in the left tail for all built-in fields."""

    Z: float = -10.0
    step: float = 1.0 / 32.0
    z_max: float = 3.0

    def __post_init__(self):
        if self.step <= 0:
            raise InputError("grid step must be positive")
        if self.Z >= self.z_max:
            raise InputError("grid needs Z < z_max")

    @cached_property
    def nodes(self):
        n = int(np.ceil((self.z_max - self.Z) / self.step - 1e-12)) + 1
        return self.Z + self.step * np.arange(n)


@dataclass(frozen=True)
class HTable:
    """Grid of log h_r values, r = 1..r_max (row r-1)."""

    grid: HGrid
    r_max: int
    log_values: np.ndarray
    catalan: np.ndarray = field(repr=False, default=None)

    @property
    def values(self):
        return np.exp(self.log_values)

    def log_interpolator(self, r):
        if not 1 <= r <= self.r_max:
            raise InputError(f"r = {r} outside table range 1..{self.r_max}")
        return PchipInterpolator(self.grid.nodes, self.log_values[r - 1],
                                 extrapolate=False)

    def h_at(self, r, z):
        """h_r(z), interpolating in log space between grid nodes."""
        z = np.asarray(z, float)
        if np.any(z < self.grid.nodes[0] - 1e-12) or np.any(z > self.grid.nodes[-1] + 1e-12):
            raise InputError("query point outside the table grid")
        zc = np.clip(z, self.grid.nodes[0], self.grid.nodes[-1])
        return np.exp(self.log_interpolator(r)(zc))


def h1(ff: ForceField, im: InvariantMeasure, y):
    """First coefficient, Psi(y)/psi(y) for completely absorbing problems.

    Evaluated from the measure's log forms so the far-left tail (where
    both Psi and psi underflow) stays usable.
    """
    flags = classify(ff, im)
    if flags.completely_absorbing is False:
        warnings.warn("problem does not look completely absorbing; "
                      "h_1 = Psi/psi assumes it is")
    val = _log_h1(im, y)
    if np.any(~np.isfinite(val)):
        raise NumericsError(
            "psi underflows at the requested point; move the evaluation "
            "point (or the grid cutoff Z) to the right")
    return np.exp(val)


def _log_h1(im, y):
    # -inf - -inf = nan is possible for underflowing measures; callers
    # check finiteness and raise a diagnostic error
    with np.errstate(invalid="ignore"):
        return np.asarray(im.log_Psi(y), float) - np.asarray(im.log_psi(y), float)


def _log_trapezium_increment(logS0, logS1, step):
    """log of step*(S1-S0)/(log S1 - log S0), the trapezium rule for
    piecewise-exponential integrands; falls back to the arithmetic rule
    when the two ordinates are nearly equal."""
    d = logS1 - logS0
    if abs(d) < 1e-12:
        return np.log(step / 2.0) + np.logaddexp(logS0, logS1)
    return (np.log(step) + max(logS0, logS1)
            + np.log1p(-np.exp(-abs(d))) - np.log(abs(d)))


def build_table(ff: ForceField, im: InvariantMeasure, grid: HGrid = None,
                r_max: int = 4) -> HTable:
    """Run the seeded march for r = 2..r_max over the grid."""
    if r_max < 2:
        raise InputError("r_max must be >= 2")
    if grid is None:
        grid = HGrid()
    flags = classify(ff, im)
    if flags.S_minus is False:
        warnings.warn(f"field {ff.label!r}: -y*A(y) does not blow up at "
                      "-inf; the left-edge seeds may be inaccurate")

    z = grid.nodes
    n = len(z)
    cat = catalan_numbers(r_max)
    log_psi = np.asarray(im.log_psi(z), float)
    logh = np.empty((r_max, n))
    logh[0] = _log_h1(im, z)
    if not np.all(np.isfinite(logh[0])):
        raise NumericsError("h_1 not finite on the grid; psi may underflow "
                            f"near Z = {grid.Z:g}")

    step = grid.step
    for r in range(2, r_max + 1):
        # log of the convolution sum_{k=1}^{r-1} h_k h_{r-k} at every node
        terms = np.array([logh[k - 1] + logh[r - k - 1] for k in range(1, r)])
        m = terms.max(axis=0)
        logconv = m + np.log(np.exp(terms - m).sum(axis=0))
        logS = log_psi + logconv
        if not np.all(np.isfinite(logS)):
            j = int(np.argmax(~np.isfinite(logS)))
            raise NumericsError(
                f"non-finite integrand S_{r} at z = {z[j]:g} "
                f"(log psi = {log_psi[j]:g}, log conv = {logconv[j]:g})")

        row = np.empty(n)
        row[0] = np.log(cat[r - 1]) + (2 * r - 1) * logh[0, 0]
        logI = row[0] + log_psi[0]
        for j in range(n - 1):
            logI = np.logaddexp(logI, _log_trapezium_increment(logS[j], logS[j + 1], step))
            row[j + 1] = logI - log_psi[j + 1]
        logh[r - 1] = row

    return HTable(grid=grid, r_max=r_max, log_values=logh, catalan=cat)


def cumulant_integrand(table: HTable, r: int):
    """Expose z -> h_r(z) for downstream quadrature (monotone-cubic
    interpolation of the table in log space, so values are positive and
    grid nodes are reproduced exactly)."""
    interp = table.log_interpolator(r)

    def integrand(zz):
        return np.exp(interp(np.asarray(zz, float)))

    return integrand


_GL_X, _GL_W = np.polynomial.legendre.leggauss(10)


def integrate_h(table: HTable, r: int, a, b):
    """int_a^b h_r, splitting at grid nodes and applying 10-point
    Gauss-Legendre per cell.  The interpolant is a cubic in each cell, so
    exp(cubic) is analytic there and the fixed rule converges past double
    precision; adaptive quadrature, by contrast, stalls on the C^1 seams
    between cells."""
    a, b = float(a), float(b)
    if b < a:
        raise InputError("needs a <= b")
    if b == a:
        return 0.0
    z = table.grid.nodes
    if a < z[0] - 1e-12 or b > z[-1] + 1e-12:
        raise InputError("integration range outside the table grid")
    interp = table.log_interpolator(r)
    cuts = np.concatenate(([a], z[(z > a) & (z < b)], [b]))
    lo, hi = cuts[:-1], cuts[1:]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    pts = mid[:, None] + half[:, None] * _GL_X[None, :]
    vals = np.exp(interp(np.clip(pts, z[0], z[-1])))
    return float(np.sum(half * (vals @ _GL_W)))
