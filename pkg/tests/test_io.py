import json

import numpy as np
import pytest

from taprcdc import io as tio
from taprcdc.cli import run_cli
from taprcdc.mechanism import grid_sweep_irreversible
from taprcdc.reactor import ReactorConfig, standard_diffusion_curve


def flux_table(cols, dt=0.01, cal=None):
    n = len(next(iter(cols.values())))
    return tio.FluxTable(np.arange(n) * dt, {g: np.asarray(v, float) for g, v in cols.items()}, cal or {})


# --- preprocessing ------------------------------------------------------------------

def test_identity_preprocessing():
    x = np.r_[np.zeros(10), np.linspace(0, 1, 90)]
    out = tio.preprocess_flux(flux_table({"Ar": x}))
    np.testing.assert_array_equal(out.flux["Ar"], x)


def test_constant_column_goes_to_zero():
    with pytest.warns(RuntimeWarning):
        out = tio.preprocess_flux(flux_table({"Ar": np.full(100, 3.5)}, cal={"Ar": tio.CalibrationSpec(mu=2.0)}))
    assert np.all(out.flux["Ar"] == 0)


def test_recovers_true_flux():
    cfg = ReactorConfig()
    t = cfg.t_grid
    true = standard_diffusion_curve(t, cfg)
    mu, b = 0.25, 0.7
    raw = true / mu + b
    # first 3 ms: the analytic flux is below 1e-14 there
    cal = {"Ar": tio.CalibrationSpec(mu=mu, baseline_window=(0.0, 0.003))}
    out = tio.preprocess_flux(tio.FluxTable(t, {"Ar": raw}, cal))
    assert np.max(np.abs(out.flux["Ar"] - true)) < 1e-10
    assert out.meta["preprocessing"]["Ar"]["mu"] == mu


def test_baseline_over_peak_warns():
    x = np.r_[np.ones(10), np.zeros(90)]
    with pytest.warns(RuntimeWarning, match="10%"):
        tio.preprocess_flux(flux_table({"Ar": x}))


def test_bad_calibration():
    with pytest.raises(ValueError):
        tio.CalibrationSpec(mu=0.0)
    with pytest.raises(ValueError):
        tio.CalibrationSpec(mu=1.0, baseline_window=(0.5, 0.1))


def test_flux_csv_with_sidecar(tmp_path):
    p = tmp_path / "flux.csv"
    p.write_text("time_s,Ar,CO\n" + "".join(f"{i * 0.01},{1 + i},{2 * i}\n" for i in range(20)))
    (tmp_path / "flux.csv.cal").write_text("Ar,mu=2.0,baseline_start=0,baseline_end=0.02\nCO,mu=0.5\n")
    table = tio.load_flux_csv(p)
    assert table.calibration["Ar"] == tio.CalibrationSpec(2.0, (0.0, 0.02))
    out = tio.preprocess_flux(table)
    # Ar baseline = mean(1, 2, 3) = 2
    assert out.flux["Ar"][0] == pytest.approx(2.0 * (1 - 2))
    bad = tmp_path / "bad.cal"
    bad.write_text("Ar,mu=abc\n")
    with pytest.raises(tio.SchemaError, match="line 1"):
        tio.load_flux_csv(p, bad)
    neg = tmp_path / "neg.cal"
    neg.write_text("Ar,mu=-1\n")
    with pytest.raises(tio.SchemaError, match="positive"):
        tio.load_flux_csv(p, neg)


# --- features files -------------------------------------------------------------------

def test_features_round_trip(tmp_path, simulate):
    feats = simulate("lh-irrev").features
    p = tmp_path / "f.csv"
    tio.save_features_csv(feats, p, {"seed": 3})
    back = tio.load_features_csv(p)
    assert list(back) == list(feats)
    for g in feats:
        for attr in ("rate", "concentration", "uptake", "t"):
            np.testing.assert_allclose(getattr(back[g], attr), getattr(feats[g], attr), rtol=1e-11, atol=1e-300)
        assert back[g].role is feats[g].role
    meta = tio.features_metadata(p)
    assert meta["seed"] == 3 and meta["tool"] == "taprcdc" and meta["roles"]["CO2"] == "product"


def _write(tmp_path, text):
    p = tmp_path / "x.csv"
    p.write_text(text)
    return p


def test_features_schema_errors(tmp_path):
    with pytest.raises(tio.SchemaError, match="empty"):
        tio.load_features_csv(_write(tmp_path, ""))
    with pytest.raises(tio.SchemaError, match="no data rows"):
        tio.load_features_csv(_write(tmp_path, "time_s,r_A,C_A,U_A\n"))
    with pytest.raises(tio.SchemaError, match="lacks columns"):
        tio.load_features_csv(_write(tmp_path, "time_s,r_A,C_A\n0,1,1\n1,1,1\n"))
    with pytest.raises(tio.SchemaError, match="row 2.*'C_A'"):
        tio.load_features_csv(_write(tmp_path, "time_s,r_A,C_A,U_A\n0,1,1,0\n1,1,x,0\n"))
    with pytest.raises(tio.SchemaError, match="time_s"):
        tio.load_features_csv(_write(tmp_path, "t,r_A,C_A,U_A\n0,1,1,0\n"))
    with pytest.raises(tio.SchemaError, match="increasing"):
        tio.load_features_csv(_write(tmp_path, "time_s,r_A,C_A,U_A\n0,1,1,0\n2,1,1,0\n1,1,1,0\n"))
    with pytest.raises(tio.SchemaError, match="uniform"):
        tio.load_features_csv(_write(tmp_path, "time_s,r_A,C_A,U_A\n0,1,1,0\n1,1,1,0\n3,1,1,0\n"))


def test_nan_runs(tmp_path):
    rows = [f"{i},{np.sin(i)},{1 + i},{i}" for i in range(30)]
    short = rows.copy()
    for i in range(10, 15):
        short[i] = f"{i},nan,{1 + i},{i}"
    f = tio.load_features_csv(_write(tmp_path, "time_s,r_A,C_A,U_A\n" + "\n".join(short) + "\n"))
    assert np.all(np.isfinite(f["A"].rate))
    long = rows.copy()
    for i in range(10, 16):
        long[i] = f"{i},nan,{1 + i},{i}"
    with pytest.raises(tio.SchemaError, match="6 consecutive NaN.*row 11"):
        tio.load_features_csv(_write(tmp_path, "time_s,r_A,C_A,U_A\n" + "\n".join(long) + "\n"))


# --- grids and reports ----------------------------------------------------------------

def test_grid_round_trip(tmp_path):
    g = grid_sweep_irreversible("er-irrev", (np.array([0.1, 0.3]), np.array([0.2, 0.4, 0.6])))
    g.cells["O2_CO2"][1, 2] = np.nan
    p = tmp_path / "g.csv"
    tio.save_grid_csv(g, p)
    text = p.read_text()
    assert "k_axis1,k_axis2,corr_O2_CO2,corr_CO_CO2,corr_O2_CO" in text and ",nan," in text
    back = tio.load_grid_csv(p)
    np.testing.assert_array_equal(back.axis1, g.axis1)
    for k in g.cells:
        np.testing.assert_allclose(back.cells[k], g.cells[k], rtol=1e-11)


def test_report_is_deterministic(tmp_path, simulate):
    from taprcdc.regress import FULL_TERMS, build_design_matrix, fit_scad

    dm = build_design_matrix(simulate("table2-case1").features["A"], FULL_TERMS)
    res = fit_scad(dm)
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    tio.write_report(res, a, {"seed": 0})
    tio.write_report(res, b, {"seed": 0})
    assert a.read_bytes() == b.read_bytes()
    data = json.loads(a.read_text())
    assert data["result"]["coefficients"]["C"] == pytest.approx(0.2)
    assert data["seed"] == 0 and "version" in data


# --- command line ------------------------------------------------------------------

def test_cli_simulate_and_fit(tmp_path):
    sim = tmp_path / "sim.csv"
    assert run_cli(["simulate", "--preset", "table2-case2a", "--out", str(sim)]) == 0
    rep = tmp_path / "fit.json"
    assert run_cli(["fit", "--features", str(sim), "--method", "scad", "--terms", "full", "--out", str(rep)]) == 0
    sel = json.loads(rep.read_text())["result"]["selected"]
    assert sel == {"C": True, "U": False, "CU": True, "CU2": False, "U2": False}


def test_cli_byte_identical(tmp_path):
    out = tmp_path / "a.csv"
    assert run_cli(["simulate", "--preset", "er-irrev", "--out", str(out)]) == 0
    first = out.read_bytes()
    out.unlink()
    assert run_cli(["simulate", "--preset", "er-irrev", "--out", str(out)]) == 0
    assert out.read_bytes() == first


def test_cli_rcdc_and_features(tmp_path, capsys):
    sim = tmp_path / "lh.csv"
    assert run_cli(["simulate", "--preset", "lh-irrev", "--out", str(sim)]) == 0
    capsys.readouterr()
    assert run_cli(["rcdc", "--features", str(sim), "--trim", "0.05"]) == 0
    assert json.loads(capsys.readouterr().out)["verdict"] == "LangmuirHinshelwood"
    rcd = tmp_path / "rcd.csv"
    assert run_cli(["features", "--features", str(sim), "--out", str(rcd)]) == 0
    assert "time_s,rcd_O2,rcd_CO,rcd_CO2" in rcd.read_text()


def test_cli_flux_preprocessing(tmp_path):
    p = tmp_path / "flux.csv"
    p.write_text("time_s,Ar\n" + "".join(f"{i * 0.01},{5 + (i > 50) * i}\n" for i in range(100)))
    out = tmp_path / "clean.csv"
    assert run_cli(["features", "--flux", str(p), "--out", str(out)]) == 0
    back = tio.load_flux_csv(out)
    assert back.flux["Ar"][0] == 0


def test_cli_grid(tmp_path):
    out = tmp_path / "g.csv"
    code = run_cli(["grid", "--sweep", "lh-irrev", "--k-min", "0.2", "--k-max", "0.4", "--k-step", "0.2", "--out", str(out)])
    assert code == 0
    g = tio.load_grid_csv(out)
    assert g.cells["O2_CO2"].shape == (2, 2)


def test_cli_config_file(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"preset": "table2-case1", "reactor": {"t_end": 1.0}}))
    out = tmp_path / "s.csv"
    assert run_cli(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
    assert tio.load_features_csv(out)["A"].t[-1] == pytest.approx(1.0)
    cfg.write_text(json.dumps({"bogus": 1}))
    assert run_cli(["simulate", "--config", str(cfg), "--out", str(out)]) == 1


def test_cli_exit_codes(tmp_path, monkeypatch):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert run_cli(["fit", "--features", str(empty), "--terms", "full", "--method", "scad"]) == 1
    assert run_cli(["fit", "--unknown-flag"]) == 1
    assert run_cli(["launch"]) == 1
    assert run_cli(["rcdc", "--preset", "lh-irrev", "--trim", "0.5"]) == 1

    from taprcdc import cli
    from taprcdc.reactor import SimulationError

    def boom(*a, **k):
        raise SimulationError("integrator gave up")

    monkeypatch.setattr(cli, "simulate_pulse", boom)
    assert run_cli(["simulate", "--preset", "table2-case1", "--out", str(tmp_path / "x.csv")]) == 2
