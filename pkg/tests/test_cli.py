import json

import numpy as np
import pytest

from fpt.cli import RunConfig, main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


def test_runconfig_round_trip():
    cfg = RunConfig(command="lambda", model="tanh",
                    params={"alpha": 2.0, "gamma": 1.0},
                    options={"barrier": 0.5}, out=None, seed=3, config=None)
    assert RunConfig.from_json(cfg.to_json()) == cfg


def test_pcf_command(capsys):
    code, out = run(capsys, "pcf", "--s", "1", "--y", "0")
    assert code == 0
    val = float(out.strip().splitlines()[-1].split(",")[-1])
    assert val == pytest.approx(np.sqrt(np.pi / 2), rel=1e-12)


def test_output_is_deterministic(capsys):
    _, a = run(capsys, "lambda", "--model", "abm", "--mu", "1.0",
               "--barrier", "0.5", "--exact")
    _, b = run(capsys, "lambda", "--model", "abm", "--mu", "1.0",
               "--barrier", "0.5", "--exact")
    assert a == b
    assert a.startswith("# fpt ")


def test_csv_headers_echo_parameters(capsys):
    _, out = run(capsys, "lambda", "--model", "dry_friction", "--mu", "2.0",
                 "--barrier", "0.0")
    header = [l for l in out.splitlines() if l.startswith("# config:")][0]
    echoed = json.loads(header.split("# config:", 1)[1])
    assert echoed["params"]["mu"] == 2.0
    assert echoed["command"] == "lambda"


def test_lambda_sweep_columns(capsys):
    code, out = run(capsys, "lambda", "--model", "ou", "--sweep", "0:1:3",
                    "--exact")
    rows = [l for l in out.splitlines() if not l.startswith("#")]
    assert rows[0] == "y_plus,lambda_est,lambda_exact,lambda_asym_left,lambda_asym_right"
    assert len(rows) == 4
    first = rows[1].split(",")
    assert float(first[1]) == pytest.approx(1.0, rel=0.05)
    assert float(first[2]) == pytest.approx(1.0, abs=1e-8)


def test_hseries_csv(tmp_path, capsys):
    out = tmp_path / "table.csv"
    code, _ = run(capsys, "hseries", "--model", "abm", "--rmax", "3",
                  "--zmax", "0.5", "--out", str(out))
    assert code == 0
    lines = out.read_text().splitlines()
    header = [l for l in lines if not l.startswith("#")][0]
    assert header == "z,h_1,h_2,h_3"
    last = lines[-1].split(",")
    assert float(last[1]) == pytest.approx(1.0, rel=1e-6)
    assert float(last[3]) == pytest.approx(2.0, rel=1e-3)


def test_cumulants_command(capsys):
    code, out = run(capsys, "cumulants", "--model", "ou", "--start", "0",
                    "--barrier", "1", "--rmax", "2")
    assert code == 0
    rows = [l.split(",") for l in out.splitlines() if not l.startswith("#")]
    k1 = float(rows[1][1])
    assert k1 == pytest.approx(2.0934, abs=2e-3)


def test_density_with_validation_columns(tmp_path, capsys):
    out = tmp_path / "d.csv"
    code, _ = run(capsys, "density", "--model", "ou", "--start", "-1",
                  "--barrier", "0", "--tmax", "6", "--n", "40", "--validate",
                  "--dy", "0.02", "--dtau", "0.002", "--out", str(out))
    assert code == 0
    lines = [l for l in out.read_text().splitlines() if not l.startswith("#")]
    assert lines[0] == "tau,f_formula,f_pde,abs_err"
    errs = [float(l.split(",")[3]) for l in lines[1:]]
    assert max(errs) < 5e-3          # formula exact here; PDE error only


def test_oracle_pde_command(capsys):
    code, out = run(capsys, "oracle", "pde", "--model", "ou", "--start", "-1",
                    "--barrier", "0", "--tmax", "2", "--dy", "0.02",
                    "--dtau", "0.004")
    assert code == 0
    rows = [l for l in out.splitlines() if not l.startswith("#")]
    assert rows[0] == "tau,F,f"


def test_oracle_mc_command(tmp_path, capsys):
    out = tmp_path / "mc.csv"
    code, _ = run(capsys, "oracle", "mc", "--model", "ou", "--start", "-0.5",
                  "--barrier", "0.5", "--tmax", "8", "--paths", "4000",
                  "--dt", "0.002", "--seed", "4", "--out", str(out))
    assert code == 0
    assert out.exists() and (tmp_path / "mc_cdf.csv").exists()


def test_table1_command(capsys):
    code, out = run(capsys, "table1")
    assert code == 0
    rows = [l.split(",") for l in out.splitlines() if not l.startswith("#")]
    assert rows[0] == ["y_plus", "lambda_exact", "lambda_est"]
    data = {float(r[0]): float(r[1]) for r in rows[1:]}
    assert data[0.0] == pytest.approx(1.0, abs=1e-8)
    assert data[-1.0] == pytest.approx(2.0, abs=1e-8)
    assert data[-0.5] == pytest.approx(1.449, abs=5e-4)
    assert data[0.5] == pytest.approx(0.649, abs=5e-4)
    assert data[2.0] == pytest.approx(0.0973, abs=5e-4)


def test_fig1_markers(capsys):
    code, out = run(capsys, "fig1", "--model", "ou", "--sweep=-2:1:7")
    assert code == 0
    rows = [l.split(",") for l in out.splitlines() if not l.startswith("#")]
    markers = [r for r in rows[1:] if r[0] == "marker"]
    # Hermite zeros at 0, -1, -sqrt(3) fall inside [-2, 1]
    assert len(markers) == 3
    assert sorted(float(m[3]) for m in markers) == [1.0, 2.0, 3.0]


def test_validate_report(tmp_path, capsys):
    out = tmp_path / "report.json"
    code, _ = run(capsys, "validate", "--model", "ou", "--barriers", "0",
                  "--offsets", "1", "--tmax", "8", "--dy", "0.02",
                  "--out", str(out))
    assert code == 0
    report = json.loads(out.read_text())
    case = report["cases"][0]
    assert case["status"] == "ok"
    assert case["l1"] < 5e-3
    assert abs(case["normalization_residual"]) < 1e-8
    assert (tmp_path / "report_curves.csv").exists()


def test_exit_code_bad_input(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["lambda", "--model", "nonsense"])
    assert exc.value.code == 3


def test_exit_code_numeric_failure(capsys):
    code = main(["pcf", "--s", "1", "--y", "100"])
    assert code == 2


def test_custom_field_config(tmp_path, capsys):
    y = np.linspace(-12, 12, 49)
    spec = {"type": "table", "y": y.tolist(), "A": (-y).tolist(),
            "domain": [-12, 12]}
    path = tmp_path / "field.json"
    path.write_text(json.dumps(spec))
    code, out = run(capsys, "lambda", "--config", str(path), "--barrier", "0.0")
    assert code == 0
    est = float([l for l in out.splitlines() if not l.startswith("#")][1].split(",")[1])
    assert est == pytest.approx(0.9546, rel=5e-3)   # tabulated OU drift


def test_density_with_custom_config_field(tmp_path, capsys):
    spec = {"type": "expr", "A": "-y", "domain": [-25, 25]}
    path = tmp_path / "ou_expr.json"
    path.write_text(json.dumps(spec))
    code, out = run(capsys, "density", "--config", str(path), "--start", "-1",
                    "--barrier", "0", "--tmax", "5", "--n", "10")
    assert code == 0
    rows = [l.split(",") for l in out.splitlines() if not l.startswith("#")]
    tau = np.array([float(r[0]) for r in rows[1:]])
    f = np.array([float(r[1]) for r in rows[1:]])
    # the CLI must reproduce the library pipeline on the same field...
    import fpt
    ff, im = fpt.load_field(json.loads(path.read_text()))
    model = fpt.build_model(ff, im, -1.0, 0.0)
    assert f == pytest.approx(fpt.eval_density(model, tau), rel=1e-9)
    # ...and, with the decay rate coming from the accelerated estimate
    # (~4.5% low for this field), still track the known exact values
    # within the worst-case compounding exp(|d_lam| tau) of that rate error
    q = np.exp(-2 * tau)
    ref = (np.exp(-tau) / np.sqrt(np.pi * (1 - q) ** 3 / 2)
           * np.exp(-np.exp(-2 * tau) / (2 * (1 - q))))
    band = 0.02 + np.expm1(abs(model.lam - 1.0) * tau)
    assert np.all(np.abs(f / ref - 1.0) < band)


def test_fig1_dry_friction_plateau(capsys):
    code, out = run(capsys, "fig1", "--model", "dry_friction", "--mu", "1.0",
                    "--sweep=-1.5:0.5:5")
    assert code == 0
    rows = [l.split(",") for l in out.splitlines() if not l.startswith("#")]
    ests = [float(r[2]) for r in rows[1:] if r[0] == "sweep"]
    # boundary below the knee: the rate stays pinned at mu^2/4
    assert ests == pytest.approx([0.25] * len(ests), rel=0.09)


def test_oracle_tree_command(capsys):
    code, out = run(capsys, "oracle", "tree", "--model", "ou", "--start", "-1",
                    "--barrier", "0", "--tmax", "4", "--dtau", "0.002")
    assert code == 0
    rows = [l.split(",") for l in out.splitlines() if not l.startswith("#")]
    assert rows[0] == ["tau", "absorbed_mass", "F"]
    assert 0.0 < float(rows[-1][2]) <= 1.0
