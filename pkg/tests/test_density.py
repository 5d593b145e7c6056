import numpy as np
import pytest
from scipy import integrate

import fpt
from fpt.density import _normalization
from fpt.errors import InputError


def _ou0_log_closed_form(tau, y0):
    """Known exact first-passage density for OU with the boundary at
    equilibrium, evaluated in 50-digit arithmetic so the comparison is
    independent of the library's floating-point arrangement."""
    import mpmath as mp
    mp.mp.dps = 50
    out = []
    for t in np.atleast_1d(tau):
        t = mp.mpf(float(t))
        q = mp.e ** (-2 * t)
        val = (abs(mp.mpf(y0)) * mp.e ** (-t)
               / mp.sqrt(mp.pi * (1 - q) ** 3 / 2)
               * mp.e ** (-(y0 * mp.e ** (-t)) ** 2 / (2 * (1 - q))))
        out.append(float(mp.log(val)))
    return np.array(out)


def _invgauss(tau, b, mu):
    return (b / np.sqrt(4 * np.pi * tau**3)
            * np.exp(-(b - mu * tau) ** 2 / (4 * tau)))


# ----------------------------------------------------------------------
# theta and nu
# ----------------------------------------------------------------------

def test_theta_fisher_ou(ou):
    assert fpt.theta_fisher(*ou) == pytest.approx(1.0, abs=1e-10)


def test_theta_fisher_dry_friction_warns(dry_friction):
    # <A^2> = mu^2 a.e., but <-A'> = 0 under the kink convention
    with pytest.warns(UserWarning):
        val = fpt.theta_fisher(*dry_friction)
    assert val == pytest.approx(1.0, abs=1e-10)


def test_theta_fisher_tanh(tanh2):
    # alpha^2/(alpha+gamma^2) in the ratio parameterization = 4/3 here
    assert fpt.theta_fisher(*tanh2) == pytest.approx(4.0 / 3.0, rel=1e-8)
    assert tanh2[1].fisher_theta == pytest.approx(4.0 / 3.0, rel=1e-14)


def test_theta_fisher_abm_is_zero(abm):
    with pytest.warns(UserWarning):
        assert fpt.theta_fisher(*abm) == 0.0


def test_theta_quadrature_route_matches_closed_form(ou):
    ff, _ = ou
    im_q = fpt.measure_from_drift(ff.A, domain=(-12.0, 12.0), n=241)
    assert fpt.theta_fisher(ff, im_q) == pytest.approx(1.0, abs=1e-8)


def test_nu_zero_at_equilibrium_boundary(ou):
    ff, _ = ou
    lam = fpt.lambda_exact("ou", 0.0)
    assert lam == 1.0
    assert fpt.nu_coefficient(ff, 1.0, lam, 0.0) == 0.0


def test_nu_identity_exact(ou):
    ff, _ = ou
    theta, lam, yp = 1.0, fpt.rightmost_zero(1.0), 1.0
    nu = fpt.nu_coefficient(ff, theta, lam, yp)
    lhs = theta * nu
    rhs = 3 * theta - 2 * lam + float(ff.A_prime(yp)) + 0.5 * float(ff.A(yp)) ** 2
    assert lhs == pytest.approx(rhs, rel=1e-14)
    assert nu == pytest.approx(1.724, abs=5e-4)   # with the 3 s.f. rate 0.388


# ----------------------------------------------------------------------
# calibration
# ----------------------------------------------------------------------

def test_rho_vanishes_at_equilibrium_boundary(ou):
    ff, im = ou
    for y0 in (-0.5, -1.0, -2.0):
        m = fpt.build_model(ff, im, y0, 0.0, model_name="ou")
        assert abs(m.rho) < 1e-6
        assert abs(m.calibration_residual) < 1e-10


def test_calibrated_density_integrates_to_one(ou, tanh2, dry_friction):
    """Independent check with adaptive quadrature (the calibration itself
    uses fixed-node rules, so this is a genuine cross-examination)."""
    cases = [(ou, -1.0, 1.0, "ou"),
             (tanh2, -1.5, 0.5, None),
             (dry_friction, -2.0, -1.0, "dry_friction")]
    for (ff, im), y0, yp, name in cases:
        m = fpt.build_model(ff, im, y0, yp, model_name=name)
        val, _ = integrate.quad(lambda t: fpt.eval_density(m, t), 0.0, np.inf,
                                limit=500)
        assert val == pytest.approx(1.0, abs=1e-8)


def test_internal_normalization_matches_adaptive_quad(ou):
    ff, im = ou
    m = fpt.build_model(ff, im, -2.0, 1.0, model_name="ou")
    mine = _normalization(m)
    ref, _ = integrate.quad(lambda t: fpt.eval_density(m, t), 0.0, np.inf,
                            limit=500, epsabs=1e-12, epsrel=1e-12)
    assert mine == pytest.approx(ref, abs=5e-10)


def test_rho_sensitivity_flagged_near_boundary(ou):
    ff, im = ou
    lam = fpt.rightmost_zero(0.5)
    raw = fpt.DensityModel(ff=ff, im=im, y0=0.5 - 1e-4, y_plus=0.5, theta=1.0,
                           lam=lam, nu=fpt.nu_coefficient(ff, 1.0, lam, 0.5))
    with pytest.warns(UserWarning, match="rho"):
        rho, sens, resid = fpt.calibrate_rho(raw)
    assert abs(sens) < 1e-4
    # rho-bearing factors are inert here: normalization barely moves with rho
    assert abs(_normalization(raw, rho=5.0) - _normalization(raw, rho=0.0)) < 5e-3


def test_lambda_source_selection(ou, tanh2):
    m = fpt.build_model(*ou, y0=-1.0, y_plus=1.0, model_name="ou")
    assert m.lambda_source == "exact"
    m2 = fpt.build_model(*tanh2, y0=-1.0, y_plus=1.0, model_name="tanh",
                         model_params={"alpha": 2.0, "gamma": 1.0})
    assert m2.lambda_source == "ratio-accelerated"


# ----------------------------------------------------------------------
# exact special cases
# ----------------------------------------------------------------------

@pytest.mark.parametrize("y0", [-0.5, -1.0, -2.0])
def test_exact_for_ou_boundary_at_equilibrium(ou, y0):
    m = fpt.build_model(*ou, y0=y0, y_plus=0.0, model_name="ou")
    tau = np.geomspace(1e-3, 10.0, 40)
    got = fpt.log_density(m, tau)
    ref = _ou0_log_closed_form(tau, y0)
    # |d log f| is the relative error of f, valid below underflow too
    assert np.max(np.abs(got - ref)) < 1e-10


def test_abm_limit_is_inverse_gaussian(abm):
    ff, im = abm
    m = fpt.build_model(ff, im, 0.0, 1.5, model_name="abm",
                        model_params={"mu": 1.0})
    assert m.theta == 0.0 and m.rho == 0.0
    tau = np.geomspace(1e-3, 20.0, 50)
    got = fpt.eval_density(m, tau)
    ref = _invgauss(tau, 1.5, 1.0)
    assert np.max(np.abs(got / ref - 1.0)) < 1e-10
    val, _ = integrate.quad(lambda t: fpt.eval_density(m, t), 0.0, np.inf)
    assert val == pytest.approx(1.0, abs=1e-9)


# ----------------------------------------------------------------------
# asymptotic laws
# ----------------------------------------------------------------------

def test_short_time_law(ou, tanh2, dry_friction):
    """f / LS tends to the drift (Girsanov) constant
    (psi(y_plus)/psi(y0))^(1/2); for a symmetric pair it is exactly the
    bare short-time density."""
    tau = 1e-4
    for (ff, im), y0, yp, name in [(ou, -1.0, 1.0, "ou"),
                                   (tanh2, -1.0, 1.0, None),
                                   (dry_friction, -1.0, 1.0, "dry_friction")]:
        m = fpt.build_model(ff, im, y0, yp, model_name=name)
        girsanov = np.exp(0.5 * (im.log_psi(yp) - im.log_psi(y0)))
        assert girsanov == pytest.approx(1.0, rel=1e-12)   # symmetric pair
        log_ls = (np.log(m.b) - 0.5 * np.log(4 * np.pi * tau**3)
                  - m.b**2 / (4 * tau))
        ratio = np.exp(fpt.log_density(m, tau) - log_ls)
        assert ratio == pytest.approx(1.0, rel=1e-2)


def test_short_time_law_asymmetric_start(ou):
    # the exact equilibrium-boundary case shows the Girsanov constant
    m = fpt.build_model(*ou, y0=-1.0, y_plus=0.0, model_name="ou")
    tau = 1e-4
    log_ls = np.log(1.0) - 0.5 * np.log(4 * np.pi * tau**3) - 1.0 / (4 * tau)
    ratio = np.exp(fpt.log_density(m, tau) - log_ls)
    girsanov = np.exp(0.5 * (m.im.log_psi(0.0) - m.im.log_psi(-1.0)))
    assert ratio == pytest.approx(girsanov, rel=1e-2)
    assert girsanov == pytest.approx(np.exp(0.25), rel=1e-12)


def test_long_time_log_slope(ou, dry_friction):
    for (ff, im), y0, yp, name in [(ou, -1.0, 0.0, "ou"),
                                   (ou, -1.0, 1.0, "ou"),
                                   (dry_friction, -1.0, 0.5, "dry_friction")]:
        m = fpt.build_model(ff, im, y0, yp, model_name=name)
        t1, t2 = 8.0 / m.lam, 12.0 / m.lam
        slope = ((fpt.log_density(m, t1) - fpt.log_density(m, t2)) / (t2 - t1))
        assert slope == pytest.approx(m.lam, rel=1e-2)


# ----------------------------------------------------------------------
# spatial log-derivative diagnostics
# ----------------------------------------------------------------------

def test_h_tilde_vanishes_for_equilibrium_boundary(ou):
    sol = fpt.solve_h_tilde(ou[0], 1.0, 0.0, -4.0)
    ys = np.linspace(-4.0, -0.1, 50)
    assert np.max(np.abs(sol(ys))) <= 1e-6
    assert not sol.blew_up


def test_h_tilde_boundary_data(ou):
    ff, _ = ou
    lam = fpt.rightmost_zero(1.0)
    sol = fpt.solve_h_tilde(ff, lam, 1.0, -2.0)
    assert sol(1.0) == pytest.approx(-0.5, abs=1e-12)          # A(1)/2
    eps = 1e-6
    fd = (sol(1.0) - sol(1.0 - eps)) / eps
    assert fd == pytest.approx((lam - 0.25 + (-1.0)) / 3.0, abs=1e-6)


def test_h_tilde_against_eigenfunction_route(ou):
    """Dual-route check: the Riccati integration must reproduce
    lam * D(1-lam, y)/D(-lam, y) - 1/(y_plus - y) built from the
    parabolic-cylinder eigenfunction."""
    ff, _ = ou
    lam = fpt.rightmost_zero(1.0)
    sol = fpt.solve_h_tilde(ff, lam, 1.0, -3.0)
    for y in (-2.0, -1.0, 0.0, 0.5, 0.9):
        exact = lam * fpt.pcf(1.0 - lam, y) / fpt.pcf(-lam, y) - 1.0 / (1.0 - y)
        assert sol(y) == pytest.approx(exact, abs=1e-9)


def test_h_ansatz_limits(ou):
    ff, im = ou
    lam = fpt.rightmost_zero(1.0)
    sol = fpt.solve_h_tilde(ff, lam, 1.0, -3.0)
    m = fpt.build_model(ff, im, -1.0, 1.0, model_name="ou")

    # Laurent behaviour at small tau
    tau, y = 1e-7, -1.0
    lead = (y - 1.0) / (2 * tau) + float(ff.A(y)) / 2 + 1.0 / (1.0 - y)
    assert fpt.h_ansatz(m, tau, y, h_tilde=sol) == pytest.approx(lead, abs=1e-4)

    # boundary: (y_plus - y) * h -> 1 for all time
    for tau in (0.05, 1.0, 20.0):
        y = 1.0 - 1e-6
        assert (1.0 - y) * fpt.h_ansatz(m, tau, y, h_tilde=sol) == pytest.approx(
            1.0, abs=1e-5)

    # late time: the steady profile 1/(y_plus-y) + h~
    hbar = 1.0 / 2.0 + sol(-1.0)
    assert fpt.h_ansatz(m, 60.0, -1.0, h_tilde=sol) == pytest.approx(hbar, rel=1e-12)


def test_log_density_slope_consistency(ou):
    """-d(ln f)/dy from the formula equals the ansatz when the rho family
    rho(y) = int_y^{y+} h~ is used, exactly in the equilibrium-boundary
    case (h~ = 0, rho = 0)."""
    ff, im = ou
    m = fpt.build_model(ff, im, -1.0, 0.0, model_name="ou")
    sol = fpt.solve_h_tilde(ff, 1.0, 0.0, -3.0)
    rng = np.random.default_rng(3)
    for tau in rng.uniform(0.05, 5.0, 6):
        dy = 1e-6
        ma = fpt.DensityModel(ff=ff, im=im, y0=-1.0 - dy, y_plus=0.0,
                              theta=m.theta, lam=m.lam, nu=m.nu, rho=0.0)
        mb = fpt.DensityModel(ff=ff, im=im, y0=-1.0 + dy, y_plus=0.0,
                              theta=m.theta, lam=m.lam, nu=m.nu, rho=0.0)
        fd = -(fpt.log_density(mb, tau) - fpt.log_density(ma, tau)) / (2 * dy)
        assert fd == pytest.approx(fpt.h_ansatz(m, tau, -1.0, h_tilde=sol),
                                   rel=1e-6)


def test_rho_factor_is_the_only_rho_dependence(ou):
    """The tau-dependent factor multiplying rho is (1-sqrt q)/(1+sqrt q)
    exactly: algebraic identity of the formula."""
    ff, im = ou
    m = fpt.build_model(ff, im, -1.0, 1.0, model_name="ou")
    from dataclasses import replace
    rng = np.random.default_rng(5)
    for tau in rng.uniform(0.01, 30.0, 8):
        w = np.exp(-m.theta * tau)
        d = (fpt.log_density(replace(m, rho=2.5), tau)
             - fpt.log_density(replace(m, rho=1.0), tau))
        assert d == pytest.approx(1.5 * (1 - w) / (1 + w), rel=1e-12)


# ----------------------------------------------------------------------
# short-time remainder (OU linearization)
# ----------------------------------------------------------------------

def test_remainder_vanishes_at_boundary():
    assert fpt.ou_short_time_remainder(2.0, 2.0, 0.3) == 0.0


def test_remainder_equilibrium_boundary_form():
    # y_plus = 0: only the polynomial piece survives, R~ = tau*y/6
    tau, y = 0.2, -1.3
    assert fpt.ou_short_time_remainder(y, 0.0, tau) == pytest.approx(
        tau * y / 6.0, rel=1e-10)


def test_remainder_outer_zone_mills_limit():
    # z >> 1: z Phi(-z)/phi(z) -> 1, so R~ -> tau*(y_plus/4 - (y_plus-y)/6)
    tau = 1e-2
    y_plus = 1.0
    y = y_plus - 8.0 * np.sqrt(2 * tau)    # z = 8
    got = fpt.ou_short_time_remainder(y, y_plus, tau)
    limit = tau * (y_plus / 4.0 - (y_plus - y) / 6.0)
    mills_first = 0.25 * tau * y_plus      # the term carrying the Mills ratio
    assert abs((got - limit) / mills_first) < 0.02


def test_eval_density_rejects_nonpositive_tau(ou):
    m = fpt.build_model(*ou, y0=-1.0, y_plus=0.0, model_name="ou")
    with pytest.raises(InputError):
        fpt.eval_density(m, 0.0)
    with pytest.raises(InputError):
        fpt.eval_density(m, np.array([1.0, -0.5]))


def test_calibration_at_extreme_rate_ratios(ou):
    """lam/theta spans [0.0116, 4.3] here; the far-boundary end drives the
    tail quadrature weight exponent toward its -1 limit."""
    ff, im = ou
    for y0, yp in ((-1.0, 3.0), (-4.0, -2.5)):
        m = fpt.build_model(ff, im, y0, yp, model_name="ou")
        val, _ = integrate.quad(lambda t: fpt.eval_density(m, t), 0.0, np.inf,
                                limit=800)
        assert val == pytest.approx(1.0, abs=1e-8)


def test_build_model_accepts_overrides(ou):
    ff, im = ou
    m = fpt.build_model(ff, im, -1.0, 0.0, theta=1.3, lam=0.9)
    assert m.theta == 1.3 and m.lam == 0.9
    assert m.lambda_source == "user"
    # still normalized after calibration with the overridden parameters
    val, _ = integrate.quad(lambda t: fpt.eval_density(m, t), 0.0, np.inf,
                            limit=500)
    assert val == pytest.approx(1.0, abs=1e-8)


def test_model_objects_are_immutable(ou):
    from dataclasses import FrozenInstanceError
    m = fpt.build_model(*ou, y0=-1.0, y_plus=0.0, model_name="ou")
    with pytest.raises(FrozenInstanceError):
        m.rho = 1.0
    with pytest.raises(FrozenInstanceError):
        ou[0].kappa = 2.0


def test_concurrent_evaluation_matches_serial(ou):
    """Frozen models are advertised as thread-shareable; a pool of readers
    must reproduce the serial sweep bit for bit."""
    from concurrent.futures import ThreadPoolExecutor
    m = fpt.build_model(*ou, y0=-1.0, y_plus=1.0, model_name="ou")
    taus = np.linspace(0.05, 12.0, 60)
    serial = fpt.eval_density(m, taus)
    with ThreadPoolExecutor(max_workers=8) as pool:
        parallel = np.array(list(pool.map(lambda t: float(fpt.eval_density(m, t)),
                                          taus)))
    assert np.array_equal(serial, parallel)
