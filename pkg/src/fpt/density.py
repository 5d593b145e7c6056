"""Global first-passage density approximation.

For a boundary y_plus, start y0 < y_plus, and q = exp(-2 theta tau):

    f(tau) = (y_plus-y0) e^{-lam tau} / sqrt(pi (1-q)^3 / (2 theta^3))
             * exp(-theta sqrt(q) (y0-y_plus)^2 / (2(1-q)))
             * (psi(y_plus)/psi(y0))^(sqrt(q)/(1+sqrt(q)))
             * ((1+sqrt(q))/2)^nu
             * exp(rho (1-sqrt(q))/(1+sqrt(q)))

with theta the average mean-reversion rate (Fisher information of the
invariant density), lam the decay rate, nu fixed by the boundary-layer
balance theta*nu = 3 theta - 2 lam + A'(y_plus) + A(y_plus)^2/2, and rho
calibrated so the density integrates to one.  The formula is exact for
the OU model with the boundary at equilibrium and, in the theta -> 0
limit, for Brownian motion with drift (inverse Gaussian).

Normalization quadrature: the integral has an essential singularity at
tau = 0 and a slow exponential tail, so it is assembled from three exact
or spectrally-accurate pieces (see `_normalization`).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
import warnings

import numpy as np
from scipy import integrate, special
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from . import decay as _decay
from .errors import InputError, NumericsError
from .forcefield import ForceField, InvariantMeasure

__all__ = ["DensityModel", "theta_fisher", "nu_coefficient", "build_model",
           "calibrate_rho", "eval_density", "log_density", "h_ansatz",
           "solve_h_tilde", "HTildeSolution", "ou_short_time_remainder",
           "levy_smirnov"]

SQRT_HALF_PI = np.sqrt(np.pi / 2.0)


# ----------------------------------------------------------------------
# parameters
# ----------------------------------------------------------------------

def theta_fisher(ff: ForceField, im: InvariantMeasure, domain=(-40.0, 40.0)):
    """Average rate of mean reversion <A^2> over the invariant density
    (the Fisher information of the location family psi(y - m)).

    Cross-checked against <-A'> within 1e-6; the identity fails by
    construction for kinked fields whose A' follows a one-sided
    convention (dry-friction), which only triggers a warning.  For a
    non-normalizable measure (ABM limit) returns 0 with a warning.
    """
    if not im.normalizable:
        warnings.warn("non-normalizable invariant density: theta = 0 (ABM limit)")
        return 0.0

    def w2(y):
        return np.asarray(ff.A(y), float) ** 2 * im.psi(y)

    def w1(y):
        return -np.asarray(ff.A_prime(y), float) * im.psi(y)

    a2, _ = integrate.quad(w2, domain[0], domain[1], limit=400)
    a1, _ = integrate.quad(w1, domain[0], domain[1], limit=400)
    if abs(a1 - a2) > 1e-6 * max(abs(a2), 1.0):
        warnings.warn(
            f"<A^2> = {a2:.8g} and <-A'> = {a1:.8g} disagree; expected for "
            "kinked drifts with a one-sided derivative convention")
    return float(a2)


def nu_coefficient(ff: ForceField, theta, lam, y_plus):
    """nu = [3 theta - 2 lam + A'(y_plus) + A(y_plus)^2/2] / theta."""
    if theta <= 0:
        raise InputError("nu is defined for theta > 0; the theta -> 0 limit "
                         "is handled inside the evaluator")
    y_plus = float(y_plus)
    ap = float(ff.A_prime(y_plus))
    a = float(ff.A(y_plus))
    return (3.0 * theta - 2.0 * lam + ap + 0.5 * a * a) / theta


@dataclass(frozen=True)
class DensityModel:
    """Calibrated parameter set for one (y0, y_plus) pair.  Immutable;
    sweeps over starting points re-calibrate rho per point."""

    ff: ForceField
    im: InvariantMeasure
    y0: float
    y_plus: float
    theta: float
    lam: float
    nu: float
    rho: float = 0.0
    lambda_source: str = "exact"
    rho_sensitivity: float = None     # d(normalization)/d(rho) at calibration
    calibration_residual: float = None

    def __post_init__(self):
        if self.y0 >= self.y_plus:
            raise InputError("needs y0 < y_plus")

    @property
    def b(self):
        return self.y_plus - self.y0

    def q_of_tau(self, tau):
        return np.exp(-2.0 * self.theta * np.asarray(tau, float))


# ----------------------------------------------------------------------
# evaluation
# ----------------------------------------------------------------------

def log_density(model: DensityModel, tau):
    """log f(tau, y0); vectorized over tau (all entries must be > 0)."""
    tau = np.asarray(tau, float)
    if np.any(tau <= 0.0):
        raise InputError("density is defined for tau > 0")
    b = model.b
    dlpsi = float(model.im.log_psi(model.y_plus) - model.im.log_psi(model.y0))

    if model.theta == 0.0:
        # theta -> 0 limit: all reversion factors collapse, leaving the
        # inverse Gaussian of a drifting Brownian motion
        return (np.log(b) - 0.5 * np.log(4.0 * np.pi * tau**3)
                - b * b / (4.0 * tau) - model.lam * tau + 0.5 * dlpsi)

    th = model.theta
    w = np.exp(-th * tau)                       # sqrt(q)
    one_m_q = -np.expm1(-2.0 * th * tau)
    # (1-q)^3 is kept inside the log: it underflows long before 1-q does
    return (np.log(b) - model.lam * tau
            - 0.5 * (np.log(np.pi / (2.0 * th**3)) + 3.0 * np.log(one_m_q))
            - th * w * b * b / (2.0 * one_m_q)
            + w / (1.0 + w) * dlpsi
            + model.nu * np.log1p(w) - model.nu * np.log(2.0)
            + model.rho * (1.0 - w) / (1.0 + w))


def eval_density(model: DensityModel, tau):
    with np.errstate(under="ignore"):
        return np.exp(log_density(model, tau))


def levy_smirnov(b, tau):
    """Short-time universal density (b/sqrt(4 pi tau^3)) e^{-b^2/4tau}."""
    tau = np.asarray(tau, float)
    with np.errstate(under="ignore"):
        return b / np.sqrt(4.0 * np.pi * tau**3) * np.exp(-b * b / (4.0 * tau))


# ----------------------------------------------------------------------
# normalization and calibration
# ----------------------------------------------------------------------

def _normalization(model: DensityModel, rho=None, n_mid=400, n_tail=48,
                   w_split=0.05):
    """int_0^inf f dtau, assembled from three pieces.

    head   tau < tau_c where q > 1 - 1e-8: exact integral of the short-time
           form, erfc(b / (2 sqrt(tau_c)));
    mid    Gauss-Legendre in x = b/(2 sqrt(tau)), i.e. against the measure
           d erfc = (2/sqrt(pi)) e^{-x^2} dx, which absorbs the essential
           singularity exactly and leaves a slowly-varying factor f/LS;
    tail   tau > T with w = e^{-theta tau} < w_split:  f = w^{lam/theta}
           G(w)/... with G analytic at w = 0, so Gauss-Jacobi with weight
           w^{lam/theta - 1} on [0, w_split] is spectrally accurate.
    """
    m = model if rho is None else replace(model, rho=float(rho))
    if m.theta == 0.0:
        # inverse Gaussian with drift mu = A: integrates to exp(mu*b/2 - |mu|b/2)
        mu = float(m.ff.A(0.5 * (m.y0 + m.y_plus)))
        return float(np.exp(0.5 * m.b * (mu - abs(mu))))

    th, lam, b = m.theta, m.lam, m.b
    tau_c = -np.log1p(-1e-8) / (2.0 * th)
    head = special.erfc(b / (2.0 * np.sqrt(tau_c)))

    T = -np.log(w_split) / th
    a = lam / th
    # tail: (1/theta) int_0^wsplit w^(a-1) G(w) dw,  G = f * e^{lam tau}
    xj, wj = special.roots_jacobi(n_tail, 0.0, a - 1.0)
    w_nodes = (xj + 1.0) * (w_split / 2.0)
    taus = -np.log(w_nodes) / th
    with np.errstate(under="ignore"):
        G = np.exp(log_density(m, taus) + lam * taus)
    tail = (w_split / 2.0) ** a * float(wj @ G) / th

    x_lo = b / (2.0 * np.sqrt(T))
    x_hi = min(b / (2.0 * np.sqrt(tau_c)), x_lo + 9.0)
    xg, wg = np.polynomial.legendre.leggauss(n_mid)
    x = 0.5 * (xg + 1.0) * (x_hi - x_lo) + x_lo
    tau = b * b / (4.0 * x * x)
    log_ls = (np.log(b) - 0.5 * np.log(4.0 * np.pi * tau**3)
              - b * b / (4.0 * tau))
    with np.errstate(under="ignore"):
        ratio = np.exp(log_density(m, tau) - log_ls)
        mid = 0.5 * (x_hi - x_lo) * float(
            wg @ (ratio * (2.0 / np.sqrt(np.pi)) * np.exp(-x * x)))

    return head + mid + tail


def calibrate_rho(model: DensityModel, bracket=20.0, tol=1e-10,
                  max_expand=5):
    """Solve normalization(rho) = 1 for rho.

    The normalization is strictly increasing in rho, so a bracketed root
    find is safe; the initial bracket [-20, 20] is doubled until it
    straddles 1.  The sensitivity d(norm)/d(rho) is recorded: it vanishes
    as y0 -> y_plus, where rho becomes unidentifiable (flagged by a
    warning, not an error).
    """
    if model.theta <= 0.0:
        raise InputError("calibration requires theta > 0; the ABM limit "
                         "needs no rho (its factors are unity)")
    if model.lam <= 0.0:
        raise InputError("calibration requires lam > 0")

    g = lambda r: _normalization(model, rho=r) - 1.0
    lo, hi = -bracket, bracket
    glo, ghi = g(lo), g(hi)
    expand = 0
    while glo * ghi > 0.0:
        expand += 1
        if expand > max_expand:
            raise NumericsError(
                f"rho bracket exhausted: normalization - 1 is {glo:.3e} at "
                f"rho = {lo:g} and {ghi:.3e} at rho = {hi:g}")
        lo *= 2.0
        hi *= 2.0
        glo, ghi = g(lo), g(hi)

    rho = brentq(g, lo, hi, xtol=1e-13, rtol=8 * np.finfo(float).eps)
    resid = g(rho)
    if abs(resid) > tol:
        raise NumericsError(f"calibration residual {resid:.2e} above {tol:g}")

    drho = 1e-4
    sens = (_normalization(model, rho=rho + drho)
            - _normalization(model, rho=rho - drho)) / (2 * drho)
    if abs(sens) < 1e-4:
        warnings.warn(
            f"normalization nearly independent of rho (sensitivity "
            f"{sens:.2e}); start too close to the boundary for rho to matter")
    return float(rho), float(sens), float(resid)


def build_model(ff: ForceField, im: InvariantMeasure, y0, y_plus,
                theta=None, lam=None, lambda_source=None,
                model_name=None, model_params=None) -> DensityModel:
    """Assemble and calibrate a DensityModel.

    lam defaults to the exact rate when `model_name` identifies a solvable
    model (ou, abm, dry_friction, and tanh at its polynomial-zero
    boundary), falling back to the accelerated ratio-sequence estimate.
    theta defaults to the Fisher value.  rho is then calibrated by
    normalization; for theta = 0 (ABM) no calibration is needed.
    """
    y0, y_plus = float(y0), float(y_plus)
    params = dict(model_params or {})

    if theta is None:
        known = getattr(im, "fisher_theta", None)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            theta = theta_fisher(ff, im) if known is None else float(known)

    if lam is None:
        src = None
        if model_name is not None:
            try:
                lam = _decay.lambda_exact(model_name, y_plus, **params)
                src = "exact"
            except (NumericsError, InputError):
                lam = None
        if lam is None:
            lam = _decay.estimate_lambda(ff, im, y_plus).lam
            src = "ratio-accelerated"
        lambda_source = lambda_source or src
    lambda_source = lambda_source or "user"

    if theta == 0.0:
        return DensityModel(ff=ff, im=im, y0=y0, y_plus=y_plus, theta=0.0,
                            lam=float(lam), nu=0.0, rho=0.0,
                            lambda_source=lambda_source)

    nu = nu_coefficient(ff, theta, lam, y_plus)
    raw = DensityModel(ff=ff, im=im, y0=y0, y_plus=y_plus, theta=float(theta),
                       lam=float(lam), nu=float(nu),
                       lambda_source=lambda_source)
    rho, sens, resid = calibrate_rho(raw)
    return replace(raw, rho=rho, rho_sensitivity=sens,
                   calibration_residual=resid)


# ----------------------------------------------------------------------
# spatial log-derivative diagnostics
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class HTildeSolution:
    """Regular part of the steady-state log-derivative, from integrating
    the Riccati balance leftward from the boundary."""

    y_plus: float
    y_reached: float                  # leftmost covered point
    blew_up: bool
    h_tilde: object                   # callable on [y_reached, y_plus]
    rho_ode: object                   # callable: int_y^{y_plus} h_tilde

    def __call__(self, y):
        return self.h_tilde(y)


def solve_h_tilde(ff: ForceField, lam, y_plus, y_min, eps=1e-4,
                  blowup=1e6) -> HTildeSolution:
    """Integrate h~' = lam + h~^2 - A h~ + (2 h~ - A)/(y_plus - y)
    leftward from the boundary.

    The boundary values h~(y_plus) = A(y_plus)/2 and
    h~'(y_plus) = (lam - A(y_plus)^2/4 + A'(y_plus))/3 regularize the
    0/0 at y = y_plus; integration starts a Taylor step eps below it.
    Riccati blow-up before y_min is reported on the result, not raised:
    this solver is a diagnostic, normalization calibration stays
    authoritative for rho.
    """
    y_plus, y_min = float(y_plus), float(y_min)
    if y_min >= y_plus - eps:
        raise InputError("y_min must sit below y_plus - eps")
    a_b = float(ff.A(y_plus))
    ap_b = float(ff.A_prime(y_plus))
    h0 = 0.5 * a_b
    h0p = (lam - 0.25 * a_b * a_b + ap_b) / 3.0
    y_start = y_plus - eps
    h_start = h0 - eps * h0p

    def rhs(y, state):
        h, _ = state
        return [lam + h * h - ff.A(y) * h + (2.0 * h - ff.A(y)) / (y_plus - y),
                -h]

    def blew(y, state):
        return abs(state[0]) - blowup
    blew.terminal = True

    sol = solve_ivp(rhs, (y_start, y_min), [h_start, eps * 0.5 * (h0 + h_start)],
                    method="RK45", dense_output=True, rtol=1e-10, atol=1e-12,
                    events=blew, max_step=0.1)
    blew_up = sol.status == 1
    y_reached = float(sol.t[-1])
    if blew_up:
        warnings.warn(f"h~ integration blew up at y = {y_reached:g} "
                      "(Riccati instability); coverage truncated")

    def h_tilde(y):
        y = np.asarray(y, float)
        if np.any(y < y_reached - 1e-12) or np.any(y > y_plus + 1e-12):
            raise InputError(f"h~ available on [{y_reached:g}, {y_plus:g}] only")
        near = y > y_start
        out = np.where(near, h0 + (y - y_plus) * h0p,
                       sol.sol(np.clip(y, y_reached, y_start))[0])
        return out if out.ndim else float(out)

    def rho_ode(y):
        y = np.asarray(y, float)
        if np.any(y < y_reached - 1e-12) or np.any(y > y_plus + 1e-12):
            raise InputError(f"rho_ode available on [{y_reached:g}, {y_plus:g}] only")
        near = y > y_start
        # Taylor sliver: int_y^{y_plus} (h0 + (z-y_plus) h0') dz
        d = y_plus - y
        sliver = h0 * d - 0.5 * h0p * d * d
        out = np.where(near, sliver, sol.sol(np.clip(y, y_reached, y_start))[1])
        return out if out.ndim else float(out)

    return HTildeSolution(y_plus=y_plus, y_reached=y_reached,
                          blew_up=blew_up, h_tilde=h_tilde, rho_ode=rho_ode)


def h_ansatz(model: DensityModel, tau, y, h_tilde=None):
    """Spatial log-derivative -d(ln f)/dy implied by the global formula
    (residual term omitted):

        theta sqrt(q)(y - y_plus)/(1-q) + sqrt(q) A(y)/(1+sqrt(q))
        + 1/(y_plus - y) + [(1-sqrt(q))/(1+sqrt(q))] h~(y).

    `h_tilde` defaults to a fresh Riccati solve down to y.
    """
    tau = np.asarray(tau, float)
    if np.any(tau <= 0):
        raise InputError("tau must be positive")
    y = float(y)
    if y >= model.y_plus:
        raise InputError("needs y < y_plus")
    if h_tilde is None:
        h_tilde = solve_h_tilde(model.ff, model.lam, model.y_plus,
                                y - max(0.5, 0.1 * (model.y_plus - y)))
    th = model.theta
    w = np.exp(-th * tau)
    one_m_q = -np.expm1(-2.0 * th * tau)
    return (th * w * (y - model.y_plus) / one_m_q
            + w * float(model.ff.A(y)) / (1.0 + w)
            + 1.0 / (model.y_plus - y)
            + (1.0 - w) / (1.0 + w) * float(h_tilde(y)))


def ou_short_time_remainder(y0, y_plus, tau):
    """Linearized short-time residual of the OU log-derivative:

        R~(tau, y) = (tau y_plus / 4) z Phi(-z)/phi(z) - tau (y_plus - y)/6,
        z = (y_plus - y) / sqrt(2 tau).

    The Mills ratio Phi(-z)/phi(z) is evaluated through erfcx, so the
    outer zone z >> 1 (where it tends to 1/z) is exact to rounding.
    """
    tau = np.asarray(tau, float)
    if np.any(tau <= 0):
        raise InputError("tau must be positive")
    y0, y_plus = float(y0), float(y_plus)
    z = (y_plus - y0) / np.sqrt(2.0 * tau)
    mills = SQRT_HALF_PI * special.erfcx(z / np.sqrt(2.0))
    return 0.25 * tau * y_plus * z * mills - tau * (y_plus - y0) / 6.0
