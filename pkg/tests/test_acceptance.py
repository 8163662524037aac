"""Acceptance checks, one per criterion; each prints a PASS/FAIL line.

Run under pytest (lines are repeated in the terminal summary) or directly:
``python3 tests/test_acceptance.py``.
"""

import functools
import time

import numpy as np

from taprcdc.features import TransientFeatures, Transform, compute_rcd, compute_uptake
from taprcdc.mechanism import (
    Verdict,
    classify_correlations,
    classify_mechanism,
    co_oxidation_rcds,
    grid_sweep_irreversible,
    grid_sweep_reversible,
    rcdc,
)
from taprcdc.reactor import PRESET_TRUTH, PRESETS, ReactorConfig, simulate_pulse, standard_diffusion_curve
from taprcdc import regress
from taprcdc.regress import (
    FULL_TERMS,
    DesignMatrix,
    PenaltySpec,
    TermDescriptor,
    TermKind,
    build_design_matrix,
    compute_selection_metrics,
    fit_lasso,
    fit_mechanism_line,
    fit_ols,
    fit_scad,
    scad_threshold,
    soft_threshold,
)

SUBGRID = np.array([0.04, 0.28, 0.52, 0.76, 1.00])
DEFECTS: list[float] = []


def run(preset_or_mech, config=None):
    mech = PRESETS[preset_or_mech] if isinstance(preset_or_mech, str) else preset_or_mech
    s = simulate_pulse(config or ReactorConfig(), mech)
    DEFECTS.append(s.mass_balance_defect)
    return s


def line(n, ok, detail):
    return f"criterion {n}: {'PASS' if ok else 'FAIL'} | {detail}"


# --- 1 ---------------------------------------------------------------------------------

def check_1():
    t0 = time.perf_counter()
    s = run("inert")
    elapsed = time.perf_counter() - t0
    ref = standard_diffusion_curve(s.t, s.config)
    flux = s.outlet_flux["Ar"]
    l2 = np.linalg.norm(flux - ref) / np.linalg.norm(ref)
    tau = s.t[np.argmax(flux)] / s.config.residence_time
    total = np.trapezoid(flux, s.t)
    ok = l2 < 0.01 and abs(tau - 1 / 6) / (1 / 6) < 0.02 and abs(total - 1) < 0.005 and elapsed < 10
    return ok, f"L2 rel err {l2:.2e}, peak tau {tau:.4f}, integral {total:.6f} mol, {elapsed:.2f} s"


# --- 2 ---------------------------------------------------------------------------------

def check_2():
    t0 = time.perf_counter()
    parts, ok = [], True
    for case, limit in (("table2-case1", 0.01), ("table2-case2a", 0.01), ("table2-case2b", 0.01), ("table2-case3", 1.0)):
        dm = build_design_matrix(run(case).features["A"], FULL_TERMS)
        truth = PRESET_TRUTH[case]
        scad = compute_selection_metrics(fit_scad(dm), truth)
        ols = compute_selection_metrics(fit_ols(dm), truth)
        good = scad.npv == 1.0 and scad.coef_rmse <= limit
        if case != "table2-case1":
            good &= ols.npv is None or ols.npv == 0
        ok &= good
        label = case.split("-")[1]
        parts.append(f"{label}: SCAD npv={scad.npv} rmse={scad.coef_rmse:.3g}, OLS npv={ols.npv}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 60
    return ok, "; ".join(parts) + f"; {elapsed:.1f} s"


# --- 3 ---------------------------------------------------------------------------------

def check_3():
    k = PRESETS["er-irrev"].k_forward
    n_sites = PRESETS["er-irrev"].n_sites
    ratio = k["CO"] / np.sqrt(k["O2"])

    def line_fit(preset):
        f = run(preset).features
        return fit_mechanism_line(compute_rcd(f["CO"]), compute_rcd(f["O2"], transform=Transform.SQRT))

    er, lh = line_fit("er-irrev"), line_fit("lh-irrev")
    er_int, er_slope = er.coef("Intercept"), er.coef("sqrt_rcd_O2")
    lh_int, lh_slope = lh.coef("Intercept"), lh.coef("sqrt_rcd_O2")
    # the ER line subtracts the slope term: y = N k_CO - (k_CO/sqrt(k_O)) x
    e1 = abs(er_int - n_sites * k["CO"]) / (n_sites * k["CO"])
    e2 = abs(-er_slope - ratio) / ratio
    e3 = abs(lh_slope - ratio) / ratio
    ok = e1 < 1e-3 and e2 < 1e-3 and er_slope < 0 and lh_int == 0.0 and e3 < 1e-3
    return ok, (
        f"ER intercept {er_int:.6f} (rel err {e1:.1e}), slope {er_slope:.6f} vs -{ratio:.6f} (rel err {e2:.1e}); "
        f"LH intercept {lh_int!r}, slope {lh_slope:.6f} (rel err {e3:.1e})"
    )


# --- 4 ---------------------------------------------------------------------------------

@functools.lru_cache(maxsize=None)
def subgrid(kind):
    g = grid_sweep_irreversible(kind, SUBGRID)
    DEFECTS.append(g.meta["max_mass_balance_defect"])
    return g


def check_4():
    t0 = time.perf_counter()
    er, lh = subgrid("er-irrev"), subgrid("lh-irrev")
    elapsed = time.perf_counter() - t0
    eo, ec = er.cells["O2_CO2"], er.cells["CO_CO2"]
    er_sign = bool(np.all(eo < 0) and np.all(ec > 0))
    er_mag = float(np.max(np.abs(np.abs(eo) - np.abs(ec))))
    lo, lc = lh.cells["O2_CO2"], lh.cells["CO_CO2"]
    lh_neg = bool(np.all(lo < 0) and np.all(lc < 0))
    diag = np.r_[np.diag(lo), np.diag(lc)]
    lh_diag = bool(np.all(np.abs(diag + 0.5) <= 0.05))
    ok = er_sign and er_mag <= 0.02 and lh_neg and lh_diag and elapsed < 300
    return ok, (
        f"ER signs (O2<0, CO>0) {'ok' if er_sign else 'violated'}: corr(O2-RCD,rCO2) in [{eo.min():.3f}, {eo.max():.3f}], "
        f"corr(CO-RCD,rCO2) in [{ec.min():.3f}, {ec.max():.3f}]; ER |magnitude| gap {er_mag:.1e}; "
        f"LH both negative {lh_neg}; LH diagonal in [{diag.min():.3f}, {diag.max():.3f}] vs -0.5+-0.05; {elapsed:.0f} s"
    )


# --- 5 ---------------------------------------------------------------------------------

def check_5():
    rev = grid_sweep_reversible(np.array([0.04, 0.52, 1.0]), np.array([0.0, 0.25, 0.5, 0.75, 1.0]))
    DEFECTS.append(rev.meta["max_mass_balance_defect"])
    mag = np.abs(rev.cells["CO_CO2"])
    ok = bool(np.all(np.isfinite(mag)) and np.all(mag[:, 1:] <= mag[:, :1] + 1e-12))
    rows = ", ".join(f"k+={k:g}: " + "/".join(f"{v:.3f}" for v in row) for k, row in zip(rev.axis1, mag))
    return ok, f"|corr(CO-RCD,rCO2)| over k-=0..1: {rows}"


# --- 6 ---------------------------------------------------------------------------------

def noisy_lh(seed=0):
    s = run("lh-irrev")
    rng = np.random.default_rng(seed)
    out = {}
    for g, f in s.features.items():
        peak = np.max(np.abs(f.rate))
        r = f.rate + rng.normal(0, 0.02 * peak, f.rate.size)
        idx = rng.choice(r.size, int(0.02 * r.size), replace=False)
        r[idx] += rng.choice([-1.0, 1.0], idx.size) * rng.uniform(5, 20, idx.size) * peak
        u = compute_uptake([r], [f.stoichiometry[0]], f.t)
        out[g] = TransientFeatures(g, f.t, r, f.concentration, u, f.stoichiometry)
    return out


def check_6():
    hits = total = 0
    for kind, want in (("er-irrev", Verdict.ELEY_RIDEAL), ("lh-irrev", Verdict.LANGMUIR_HINSHELWOOD)):
        g = subgrid(kind)
        for v in g.verdicts().ravel():
            total += 1
            hits += v is want
    rate = hits / total
    signature = classify_correlations(-0.5, -0.5) is Verdict.LANGMUIR_HINSHELWOOD
    series = co_oxidation_rcds(noisy_lh())
    robust = classify_mechanism(rcdc(series, trim=0.05))
    plain = classify_mechanism(rcdc(series))
    ok = rate >= 0.95 and signature and robust.verdict is Verdict.LANGMUIR_HINSHELWOOD
    return ok, (
        f"subgrid accuracy {hits}/{total}; (-0.5,-0.5) -> LH {signature}; noisy LH robust -> {robust.verdict.value} "
        f"({robust.evidence['O2->CO2']:.3f}, {robust.evidence['CO->CO2']:.3f}), plain Pearson -> {plain.verdict.value}"
    )


# --- 7 ---------------------------------------------------------------------------------

def _raw_dm(X, y):
    terms = tuple(TermDescriptor(TermKind.CUSTOM, name=f"x{j}", values=X[:, j]) for j in range(X.shape[1]))
    return DesignMatrix(terms, X, y, np.zeros(X.shape[1]), 0.0, centered=False)


def check_7():
    rng = np.random.default_rng(2024)
    X = rng.normal(size=(300, 5)) * np.array([1.0, 0.5, 2.0, 1.0, 0.3])
    y = X @ np.array([1.5, 0.0, -0.7, 0.0, 2.0]) + rng.normal(0, 0.2, 300)
    dm = _raw_dm(X, y)
    lam = 0.05
    las = fit_lasso(dm, PenaltySpec(method="lasso", lam=lam))
    grad = X.T @ (y - X @ las.beta) / 300
    zero = ~las.selected
    kkt = max(
        float(np.max(np.abs(grad[zero]) - lam, initial=-np.inf)),
        float(np.max(np.abs(grad[~zero] - lam * np.sign(las.beta[~zero])), initial=0.0)),
    )
    kkt_ok = kkt <= 1e-6

    q, _ = np.linalg.qr(rng.normal(size=(200, 5)))
    Q = q * np.sqrt(200)
    yq = Q @ np.array([2.0, -0.9, 0.5, 0.12, 0.0]) + rng.normal(0, 0.05, 200)
    z = Q.T @ yq / 200
    dq = _raw_dm(Q, yq)
    lam_o = 0.3
    e_l = np.max(np.abs(fit_lasso(dq, PenaltySpec(method="lasso", lam=lam_o)).beta - [soft_threshold(v, lam_o) for v in z]))
    e_s = np.max(np.abs(fit_scad(dq, PenaltySpec(method="scad", lam=lam_o)).beta - [scad_threshold(v, lam_o) for v in z]))
    ortho_ok = e_l <= 1e-10 and e_s <= 1e-10

    ols = fit_ols(dm).beta
    e0 = max(
        np.max(np.abs(fit_lasso(dm, PenaltySpec(method="lasso", lam=0.0)).beta - ols)),
        np.max(np.abs(fit_scad(dm, PenaltySpec(method="scad", lam=0.0)).beta - ols)),
    )
    zero_ok = e0 <= 1e-8

    Xb = rng.normal(size=(5000, 5))
    yb = Xb @ np.array([1.0, 0.0, -2.0, 0.0, 0.5]) + rng.normal(0, 0.5, 5000)
    big = _raw_dm(Xb - Xb.mean(0), yb - yb.mean())
    t0 = time.perf_counter()
    fit_scad(big)
    t_big = time.perf_counter() - t0
    ok = kkt_ok and ortho_ok and zero_ok and t_big < 5
    return ok, (
        f"KKT violation {kkt:.1e}; orthonormal |err| lasso {e_l:.1e} scad {e_s:.1e}; "
        f"lambda=0 vs OLS {e0:.1e}; SCAD+CV n=5000 p=5 {t_big:.2f} s"
    )


# --- 8 ---------------------------------------------------------------------------------

def check_8(tmp_dir):
    from pathlib import Path

    from taprcdc.cli import run_cli

    tmp = Path(tmp_dir)
    same = True
    for args in (["simulate", "--preset", "table2-case3"], ["grid", "--sweep", "er-irrev", "--k-min", "0.2", "--k-max", "0.4", "--k-step", "0.2"]):
        out = tmp / f"{args[0]}.csv"
        assert run_cli([*args, "--out", str(out)]) == 0
        first = out.read_bytes()
        out.unlink()
        assert run_cli([*args, "--out", str(out)]) == 0
        same &= out.read_bytes() == first
    for preset in PRESETS:
        run(preset)
    worst = max(DEFECTS)
    ok = worst <= 1e-4 and same
    return ok, f"{len(DEFECTS)} simulations/sweeps, worst mass-balance defect {worst:.1e}; repeated outputs byte-identical {same}"


# --- pytest entry points ------------------------------------------------------------

def _check(n, fn, report_line, *args):
    ok, detail = fn(*args)
    report_line(line(n, ok, detail))
    assert ok, detail


def test_criterion_1_standard_diffusion_curve(report_line):
    _check(1, check_1, report_line)


def test_criterion_2_table3_selection(report_line):
    _check(2, check_2, report_line)


def test_criterion_3_mechanism_lines(report_line):
    _check(3, check_3, report_line)


def test_criterion_4_rcdc_signatures(report_line):
    _check(4, check_4, report_line)


def test_criterion_5_reversibility_trend(report_line):
    _check(5, check_5, report_line)


def test_criterion_6_classifier(report_line):
    _check(6, check_6, report_line)


def test_criterion_7_solver_properties(report_line):
    _check(7, check_7, report_line)


def test_criterion_8_mass_balance_and_determinism(report_line, tmp_path):
    _check(8, check_8, report_line, tmp_path)


if __name__ == "__main__":
    import tempfile

    with tempfile.TemporaryDirectory() as d:
        for n, fn, args in (
            (1, check_1, ()), (2, check_2, ()), (3, check_3, ()), (4, check_4, ()),
            (5, check_5, ()), (6, check_6, ()), (7, check_7, ()), (8, check_8, (d,)),
        ):
            print(line(n, *fn(*args)), flush=True)
