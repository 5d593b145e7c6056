"""Command-line front end.

Subcommands: lambda, hseries, cumulants, density, oracle (pde|tree|mc),
table1, fig1, validate, pcf.  Global flags: --out, --seed, --config.
Exit codes: 0 success, 2 numeric failure, 3 bad input.

All CSV output is deterministic (shortest round-trip float formatting,
fixed column order) and carries '#' comment headers echoing the tool
version and the full parameter set.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field, asdict

import numpy as np

from . import __version__
from .cumulants import cumulants as _compute_cumulants
from . import decay as _decay
from . import density as _density
from . import hseries as _hseries
from . import oracle as _oracle
from . import oupcf as _oupcf
from .errors import InputError, NumericsError
from .forcefield import builtin, load_field

TABLE1_ROWS = [-2.86, -2.33, -np.sqrt(3.0), -1.0, -0.5, 0.0,
               0.5, 1.0, 1.5, 2.0, 2.5, 3.0]


@dataclass
class RunConfig:
    """Echoable invocation record; serialize -> parse is the identity."""

    command: str
    model: str = "ou"
    params: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)
    out: str = None
    seed: int = 0
    config: str = None

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))


class _Parser(argparse.ArgumentParser):
    def error(self, message):          # bad input is exit code 3
        self.print_usage(sys.stderr)
        self.exit(3, f"{self.prog}: error: {message}\n")


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write_csv(path, cfg: RunConfig, columns, rows):
    lines = [f"# fpt {__version__}",
             f"# command: {cfg.command}",
             f"# config: {cfg.to_json()}",
             ",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    text = "\n".join(lines) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _field_from_args(args):
    if getattr(args, "config", None):
        return load_field(args.config), "custom"
    params = {}
    if args.model in ("dry_friction", "abm"):
        params["mu"] = args.mu
    if args.model == "tanh":
        params.update(alpha=args.alpha, gamma=args.gamma,
                      parameterization=args.parameterization)
    return builtin(args.model, **params), args.model


def _model_params(args):
    if args.model in ("dry_friction", "abm"):
        return {"mu": args.mu}
    if args.model == "tanh":
        return {"alpha": args.alpha, "gamma": args.gamma,
                "parameterization": args.parameterization}
    return {}


def _parse_sweep(text):
    try:
        a, b, n = text.split(":")
        return float(a), float(b), int(n)
    except Exception:
        raise InputError(f"sweep must be 'start:stop:count', got {text!r}")


def _add_model_args(p):
    p.add_argument("--model", default="ou",
                   choices=["ou", "dry_friction", "tanh", "abm"])
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--parameterization", default="amplitude",
                   choices=["amplitude", "ratio"])
    p.add_argument("--config", help="JSON custom field spec (overrides --model)")


def _exact_or_none(name, y_plus, params):
    try:
        return _decay.lambda_exact(name, y_plus, **params)
    except (NumericsError, InputError):
        return None


# ----------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------

def cmd_pcf(args, cfg):
    rows = [(args.s, args.y, _oupcf.pcf(args.s, args.y))]
    cols = ["s", "y", "value"]
    if args.zero is not None:
        rows.append((None, args.zero, -_oupcf.rightmost_zero(args.zero)))
    _write_csv(args.out, cfg, cols, rows)


def cmd_lambda(args, cfg):
    (ff, im), name = _field_from_args(args)
    params = _model_params(args)
    if args.sweep:
        a, b, n = _parse_sweep(args.sweep)
        barriers = np.linspace(a, b, n)
    else:
        barriers = [args.barrier]
    rows = []
    for yp in barriers:
        est = _decay.estimate_lambda(ff, im, float(yp), r_max=args.rmax)
        exact = _exact_or_none(name, float(yp), params) if args.exact else None
        rows.append((yp, est.lam, exact,
                     _decay.lambda_asymptotic(im, yp, "far_left"),
                     _decay.lambda_asymptotic(im, yp, "far_right")))
    _write_csv(args.out, cfg,
               ["y_plus", "lambda_est", "lambda_exact",
                "lambda_asym_left", "lambda_asym_right"], rows)


def cmd_hseries(args, cfg):
    (ff, im), _ = _field_from_args(args)
    grid = _hseries.HGrid(Z=args.zleft, step=args.step, z_max=args.zmax)
    table = _hseries.build_table(ff, im, grid, args.rmax)
    cols = ["z"] + [f"h_{r}" for r in range(1, args.rmax + 1)]
    vals = table.values
    rows = [(z, *vals[:, j]) for j, z in enumerate(grid.nodes)]
    _write_csv(args.out, cfg, cols, rows)


def cmd_cumulants(args, cfg):
    (ff, im), _ = _field_from_args(args)
    grid = _hseries.HGrid(z_max=max(args.barrier, _hseries.HGrid.Z + 1.0) + 1e-9)
    table = _hseries.build_table(ff, im, grid, args.rmax)
    cs = _compute_cumulants(table, args.start, args.barrier, im=im)
    rows = [(r + 1, cs.kappa_r[r], cs.kappa_r[r] / ff.kappa ** (r + 1))
            for r in range(len(cs.kappa_r))]
    rows.append(("mean_direct", cs.mean_direct, None))
    _write_csv(args.out, cfg, ["r", "kappa_r_dimensionless", "kappa_r_dimensional"], rows)


def _build_density_model(args):
    (ff, im), name = _field_from_args(args)
    return _density.build_model(
        ff, im, args.start, args.barrier,
        model_name=None if name == "custom" else name,
        model_params=_model_params(args))


def cmd_density(args, cfg):
    model = _build_density_model(args)
    tau = np.linspace(args.tmax / args.n, args.tmax, args.n)
    fvals = _density.eval_density(model, tau)
    cols = ["tau", "f_formula"]
    if args.validate:
        grid = _oracle.solve_pde(model.ff, model.y_plus,
                                 dy=args.dy, dtau=args.dtau,
                                 tau_max=args.tmax, probe_y=(model.y0,))
        fpde = np.interp(tau, grid.probe_tau, grid.probe_f[0])
        rows = [(t, fv, fp, abs(fv - fp))
                for t, fv, fp in zip(tau, fvals, fpde)]
        cols += ["f_pde", "abs_err"]
    else:
        rows = list(zip(tau, fvals))
    _write_csv(args.out, cfg, cols, rows)


def cmd_oracle(args, cfg):
    (ff, im), _ = _field_from_args(args)
    if args.oracle == "pde":
        grid = _oracle.solve_pde(ff, args.barrier, dy=args.dy, dtau=args.dtau,
                                 tau_max=args.tmax, probe_y=(args.start,))
        rows = list(zip(grid.probe_tau, grid.probe_F[0], grid.probe_f[0]))
        _write_csv(args.out, cfg, ["tau", "F", "f"], rows)
    elif args.oracle == "tree":
        res = _oracle.solve_tree(ff, args.barrier, args.start,
                                 dtau=args.dtau, tau_max=args.tmax)
        rows = list(zip(res.tau_nodes, res.absorbed_mass, res.F))
        _write_csv(args.out, cfg, ["tau", "absorbed_mass", "F"], rows)
    elif args.oracle == "mc":
        res = _oracle.simulate(ff, args.barrier, args.start, dt=args.dt,
                               n_paths=args.paths, tau_max=args.tmax,
                               bridge=not args.no_bridge, seed=cfg.seed)
        tgrid = np.linspace(args.tmax / 200, args.tmax, 200)
        emp = np.searchsorted(res.samples, tgrid, side="right") / res.n_paths
        rows = [(res.mean, res.mean_standard_error, res.censored_count)]
        _write_csv(args.out, cfg, ["mean", "mean_se", "censored"], rows)
        if args.out:
            curve_path = args.out.replace(".csv", "") + "_cdf.csv"
            _write_csv(curve_path, cfg, ["tau", "F_empirical"],
                       list(zip(tgrid, emp)))
    else:
        raise InputError(f"unknown oracle {args.oracle!r}")


def cmd_table1(args, cfg):
    ff, im = builtin("ou")
    rows = []
    for yp in TABLE1_ROWS:
        exact = _oupcf.rightmost_zero(yp)
        est = _decay.estimate_lambda(ff, im, yp).lam
        rows.append((yp, exact, est))
    _write_csv(args.out, cfg, ["y_plus", "lambda_exact", "lambda_est"], rows)


def cmd_fig1(args, cfg):
    (ff, im), name = _field_from_args(args)
    params = _model_params(args)
    a, b, n = _parse_sweep(args.sweep)
    rows = []
    for yp in np.linspace(a, b, n):
        est = _decay.estimate_lambda(ff, im, float(yp), r_max=args.rmax)
        rows.append(("sweep", yp, est.lam, _exact_or_none(name, float(yp), params),
                     _decay.lambda_asymptotic(im, yp, "far_left"),
                     _decay.lambda_asymptotic(im, yp, "far_right")))
    # orthogonal-polynomial zero markers, where the model has them
    if name == "ou":
        for order in range(1, 6):
            z = _oupcf.hermite_leftmost_zero(order)
            if a <= z <= b:
                rows.append(("marker", z, None, float(order), None, None))
    elif name == "tanh":
        amp = args.alpha if args.parameterization == "amplitude" \
            else args.alpha / args.gamma
        if amp / args.gamma > 1.0 and a <= 0.0 <= b:
            rows.append(("marker", 0.0, None,
                         args.gamma * (amp - args.gamma), None, None))
    _write_csv(args.out, cfg,
               ["kind", "y_plus", "lambda_est", "lambda_exact",
                "lambda_asym_left", "lambda_asym_right"], rows)


def cmd_validate(args, cfg):
    (ff, im), name = _field_from_args(args)
    params = _model_params(args)
    barriers = [float(v) for v in args.barriers.split(",")]
    offsets = [float(v) for v in args.offsets.split(",")]
    report = {"tool": f"fpt {__version__}", "model": name, "params": params,
              "cases": []}
    curves = []
    for yp in barriers:
        for off in offsets:
            y0 = yp - off
            case = {"y_plus": yp, "y0": y0}
            try:
                model = _density.build_model(
                    ff, im, y0, yp,
                    model_name=None if name == "custom" else name,
                    model_params=params)
                tmax = args.tmax or min(80.0, max(10.0, 8.0 / model.lam))
                dtau = 1e-3 if tmax <= 20 else 2e-3
                grid = _oracle.solve_pde(ff, yp, dy=args.dy, dtau=dtau,
                                         tau_max=tmax, probe_y=(y0,))
                tau = grid.probe_tau[1:]
                f_pde = grid.probe_f[0][1:]
                f_formula = _density.eval_density(model, tau)
                case.update(
                    lam=model.lam, lambda_source=model.lambda_source,
                    theta=model.theta, nu=model.nu, rho=model.rho,
                    tau_max=tmax,
                    l1=_oracle.l1_distance(tau, f_formula, f_pde),
                    sup=float(np.max(np.abs(f_formula - f_pde))),
                    normalization_residual=model.calibration_residual,
                    tail_slope_error=_tail_slope_error(model, tau, f_pde),
                    status="ok")
                for t, fa, fb in zip(tau[::args.curve_stride],
                                     f_formula[::args.curve_stride],
                                     f_pde[::args.curve_stride]):
                    curves.append((f"{yp:g}/{y0:g}", t, fa, fb))
            except (NumericsError, InputError) as exc:
                case.update(status="failed", error=str(exc))
            report["cases"].append(case)

    text = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
        curve_path = args.out.rsplit(".", 1)[0] + "_curves.csv"
        _write_csv(curve_path, cfg, ["case", "tau", "f_formula", "f_pde"], curves)
    else:
        sys.stdout.write(text + "\n")


def _tail_slope_error(model, tau, f_pde):
    """Relative mismatch between the PDE curve's late-time log-slope and
    the model's decay rate (regression over the last usable stretch)."""
    lo, hi = 0.55 * tau[-1], 0.9 * tau[-1]
    sel = (tau >= lo) & (tau <= hi) & (f_pde > 0.0)
    if np.count_nonzero(sel) < 10:
        return float("nan")
    slope = -np.polyfit(tau[sel], np.log(f_pde[sel]), 1)[0]
    return float(abs(slope / model.lam - 1.0))


# ----------------------------------------------------------------------
# wiring
# ----------------------------------------------------------------------

def build_parser():
    p = _Parser(prog="fpt", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"fpt {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--out", help="output CSV/JSON path (default stdout)")
        sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("pcf", help="evaluate the parabolic-cylinder relative")
    sp.add_argument("--s", type=float, required=True)
    sp.add_argument("--y", type=float, required=True)
    sp.add_argument("--zero", type=float,
                    help="also report the rightmost zero for this barrier")
    common(sp)

    sp = sub.add_parser("lambda", help="decay-rate estimates")
    _add_model_args(sp)
    sp.add_argument("--barrier", type=float, default=0.0)
    sp.add_argument("--sweep", help="start:stop:count barrier sweep")
    sp.add_argument("--exact", action="store_true")
    sp.add_argument("--rmax", type=int, default=4)
    common(sp)

    sp = sub.add_parser("hseries", help="coefficient table as CSV")
    _add_model_args(sp)
    sp.add_argument("--rmax", type=int, default=6)
    sp.add_argument("--zleft", type=float, default=-10.0)
    sp.add_argument("--step", type=float, default=1.0 / 32.0)
    sp.add_argument("--zmax", type=float, default=3.0)
    common(sp)

    sp = sub.add_parser("cumulants", help="passage-time cumulants")
    _add_model_args(sp)
    sp.add_argument("--start", type=float, required=True)
    sp.add_argument("--barrier", type=float, required=True)
    sp.add_argument("--rmax", type=int, default=4)
    common(sp)

    sp = sub.add_parser("density", help="global density approximation")
    _add_model_args(sp)
    sp.add_argument("--start", type=float, required=True)
    sp.add_argument("--barrier", type=float, required=True)
    sp.add_argument("--tmax", type=float, default=10.0)
    sp.add_argument("--n", type=int, default=200)
    sp.add_argument("--validate", action="store_true",
                    help="add PDE reference columns")
    sp.add_argument("--dy", type=float, default=1.0 / 200.0)
    sp.add_argument("--dtau", type=float, default=1e-3)
    common(sp)

    sp = sub.add_parser("oracle", help="numerical ground truth")
    sp.add_argument("oracle", choices=["pde", "tree", "mc"])
    _add_model_args(sp)
    sp.add_argument("--start", type=float, required=True)
    sp.add_argument("--barrier", type=float, required=True)
    sp.add_argument("--tmax", type=float, default=20.0)
    sp.add_argument("--dy", type=float, default=1.0 / 200.0)
    sp.add_argument("--dtau", type=float, default=1e-3)
    sp.add_argument("--dt", type=float, default=1e-3)
    sp.add_argument("--paths", type=int, default=100_000)
    sp.add_argument("--no-bridge", action="store_true")
    common(sp)

    sp = sub.add_parser("table1", help="exact vs estimated OU decay rates")
    common(sp)

    sp = sub.add_parser("fig1", help="decay-rate sweep with asymptotes and markers")
    _add_model_args(sp)
    sp.add_argument("--sweep", default="-3:3:25")
    sp.add_argument("--rmax", type=int, default=4)
    common(sp)

    sp = sub.add_parser("validate", help="formula vs PDE validation report")
    _add_model_args(sp)
    sp.add_argument("--barriers", default="-1,1,2")
    sp.add_argument("--offsets", default="1,2,4")
    sp.add_argument("--tmax", type=float, default=None)
    sp.add_argument("--dy", type=float, default=1.0 / 200.0)
    sp.add_argument("--curve-stride", type=int, default=50)
    common(sp)

    return p


COMMANDS = {
    "pcf": cmd_pcf,
    "lambda": cmd_lambda,
    "hseries": cmd_hseries,
    "cumulants": cmd_cumulants,
    "density": cmd_density,
    "oracle": cmd_oracle,
    "table1": cmd_table1,
    "fig1": cmd_fig1,
    "validate": cmd_validate,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    cfg = RunConfig(
        command=args.command,
        model=getattr(args, "model", "ou"),
        params={k: getattr(args, k) for k in
                ("mu", "alpha", "gamma", "parameterization") if hasattr(args, k)},
        options={k: v for k, v in sorted(vars(args).items())
                 if k not in ("command", "model", "mu", "alpha", "gamma",
                              "parameterization", "out", "seed", "config")},
        out=getattr(args, "out", None),
        seed=getattr(args, "seed", 0),
        config=getattr(args, "config", None),
    )
    try:
        COMMANDS[args.command](args, cfg)
    except InputError as exc:
        print(f"fpt: bad input: {exc}", file=sys.stderr)
        return 3
    except NumericsError as exc:
        print(f"fpt: numeric failure: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
