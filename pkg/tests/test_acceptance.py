"""Acceptance criteria, one test each, at their stated tolerances.

Each test records a PASS/FAIL line (printed in the terminal summary) before
asserting. Criteria 1-5 and 7 share one exhaustive sweep over every ADMG with
at most 5 vertices, 8 directed and 2 bidirected edges; it takes several
minutes with numba.
"""

import itertools

import numpy as np
import pytest

from helpers import random_admg
from seldoor import sweep
from seldoor.adjust import AdjustmentQuery, identify, lemma_covariances, tilde_system_for
from seldoor.cli import main
from seldoor.montecarlo import NonlinearModelSpec, nonlinear_demo, ols, random_model, sample_data
from seldoor.sem import (
    ancestral_expansion,
    augmented_moments,
    moments,
    partial_regression,
    residual_checks,
)
from test_cli import GOLDEN, REPORT_CASES, with_data

pytestmark = pytest.mark.acceptance

TOL = 1e-9


def record(log, number, name, ok, detail):
    line = f"criterion {number:02d} {'PASS' if ok else 'FAIL'}  {name}: {detail}"
    log.append(line)
    print(line)
    return ok


@pytest.fixture(scope="session")
def full_sweep():
    return sweep.run_sweep(
        max_vertices=5, max_directed=8, max_bidirected=2, exact_draws=20, necessity_draws=200, seed=0
    )


def test_01_soundness(full_sweep, acceptance_log):
    r = full_sweep
    checked, failed = r.stat(sweep.SOUND_CHECKED), r.stat(sweep.SOUND_FAILED)
    # every criterion-true query was evaluated on all 20 draws
    ok = failed == 0 and checked == 20 * r.criterion_true and r.stat(sweep.SINGULAR) == 0
    detail = (f"{r.graphs} graphs, {r.queries} queries, {int(checked)} checks, {int(failed)} failures, "
              f"max |beta - tau|/max(1,|beta|) = {r.stat(sweep.SOUND_MAXDEV):.2e}")
    assert record(acceptance_log, 1, "soundness sweep", ok, detail), detail


def test_02_necessity(full_sweep, acceptance_log):
    r = full_sweep
    checked = r.stat(sweep.NECESSITY_CHECKED)
    agreed = int(r.stat(sweep.NECESSITY_AGREED))
    ok = (
        checked == 200 * r.criterion_false
        and r.queries_over_allowance == 0
        and r.worst_agree_fraction <= 0.01
        and len(r.agreements) == agreed
    )
    detail = (f"{r.criterion_false} criterion-false queries, {int(checked)} draws, {agreed} agreements "
              f"(all logged: {len(r.agreements) == agreed}), worst per-query fraction "
              f"{r.worst_agree_fraction:.3f}, queries over 1%: {r.queries_over_allowance}")
    assert record(acceptance_log, 2, "necessity sweep", ok, detail), detail


def test_03_bias_identity(full_sweep, worked_model, acceptance_log):
    r = full_sweep
    rep = identify(worked_model, AdjustmentQuery.create(worked_model.graph, "Y", "X", ["M2"]))
    worked_ok = rep.gamma == -0.5 and abs(rep.bias_rhs + 0.5) <= TOL
    checked, failed = r.stat(sweep.BIAS_CHECKED), r.stat(sweep.BIAS_FAILED)
    ok = failed == 0 and checked > 0 and worked_ok
    detail = (f"{int(checked)} checks, {int(failed)} failures, max rel dev {r.stat(sweep.BIAS_MAXDEV):.2e}; "
              f"worked example gamma = {rep.gamma!r}, decomposition = {rep.bias_rhs!r}")
    assert record(acceptance_log, 3, "bias identity", ok, detail), detail


def test_04_corollaries(full_sweep, acceptance_log):
    r = full_sweep
    parts, ok = [], True
    for name, c, f, d in [
        ("zero", sweep.ZERO_CHECKED, sweep.ZERO_FAILED, sweep.ZERO_MAXDEV),
        ("direct", sweep.SINGLE_CHECKED, sweep.SINGLE_FAILED, sweep.SINGLE_MAXDEV),
        ("total", sweep.BACKDOOR_CHECKED, sweep.BACKDOOR_FAILED, sweep.BACKDOOR_MAXDEV),
    ]:
        ok &= r.stat(c) > 0 and r.stat(f) == 0
        parts.append(f"{name} {int(r.stat(c))}/{int(r.stat(f))} fail, dev {r.stat(d):.1e}")
    ok &= r.backdoor_not_selective == 0
    detail = "; ".join(parts) + f"; back-door true but selective false: {r.backdoor_not_selective}"
    assert record(acceptance_log, 4, "corollaries", ok, detail), detail


def test_05_no_confounding_equivalence(full_sweep, acceptance_log):
    r = full_sweep
    ok = r.equivalence_checked > 0 and r.equivalence_mismatched == 0
    detail = f"{r.equivalence_checked} (g, S, i) triples, {r.equivalence_mismatched} mismatched verdicts"
    assert record(acceptance_log, 5, "condition equivalence", ok, detail), detail


def six_vertex_models(count, seed):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        g = random_admg(rng, 6, 0.5, 0.3)
        out.append(random_model(g, seed=[seed, len(out)]))
    return out


def test_06_appendix_lemmas(acceptance_log):
    models = six_vertex_models(100, 2024)
    rng = np.random.default_rng(7)
    worst_cov = worst_path = worst_resid = 0.0
    n_cov = n_path = n_resid = 0
    for m in models:
        n = m.graph.n
        B = moments(m).B
        # u ~ N(0, Sigma) draws, X = B u
        u = rng.multivariate_normal(np.zeros(n), m.Sigma, size=100)
        X = u @ B.T
        for i in range(n):
            others = [v for v in range(n) if v != i]
            for r in range(len(others) + 1):
                for s in itertools.combinations(others, r):
                    for v in lemma_covariances(m, tilde_system_for(m, i, s)).values():
                        worst_cov = max(worst_cov, abs(v))
                        n_cov += 1
                    on_s, on_err = ancestral_expansion(m, i, s)
                    rhs = u[:, i].copy()
                    for name, coef in on_s.items():
                        rhs += coef * X[:, m.graph.index(name)]
                    for name, coef in on_err.items():
                        rhs += coef * u[:, m.graph.index(name)]
                    rel = np.abs(rhs - X[:, i]) / np.maximum(1.0, np.abs(X[:, i]))
                    worst_path = max(worst_path, float(rel.max()))
                    n_path += len(rel)
                    rep = residual_checks(m, i, s)
                    worst_resid = max(worst_resid, rep.max_orthogonality_error)
                    n_resid += 1
    ok = worst_cov <= TOL and worst_path <= TOL and worst_resid < 1e-10
    detail = (f"100 models: {n_cov} tilde covariances max {worst_cov:.1e}; {n_path} pathwise "
              f"expansions max rel err {worst_path:.1e}; {n_resid} residual checks max {worst_resid:.1e}")
    assert record(acceptance_log, 6, "appendix lemmas", ok, detail), detail


def test_07_oracle_equivalence(full_sweep, acceptance_log):
    r = full_sweep
    # partial_regression against np.linalg.solve of the raw augmented normal equations
    worst = 0.0
    for m in six_vertex_models(20, 99):
        m = m.with_intercepts(np.random.default_rng(5).normal(size=m.graph.n))
        mom = moments(m)
        for i in range(m.graph.n):
            s = [v for v in range(m.graph.n) if v != i][: 1 + i % 5]
            reg = partial_regression(m, i, s, mom)
            idx = sorted(s)
            exx, exy = augmented_moments(mom, idx, i)
            ref = np.linalg.solve(exx, exy)
            ours = np.array([reg.intercept] + [reg.coefficients[m.graph.names[k]] for k in idx])
            worst = max(worst, float(np.max(np.abs(ours - ref) / np.maximum(1.0, np.abs(ref)))))
    ok = r.effect_mismatched == 0 and r.effect_checked == r.queries and r.regression_gap <= TOL and worst <= TOL
    detail = (f"path-product oracle {r.effect_checked} exact checks, {r.effect_mismatched} mismatches "
              f"(float gap {r.effect_float_gap:.1e}); {r.regression_checked} sweep regressions gap "
              f"{r.regression_gap:.1e}; direct augmented solve gap {worst:.1e}")
    assert record(acceptance_log, 7, "oracle equivalence", ok, detail), detail


def test_08_finite_sample_consistency(acceptance_log):
    rng = np.random.default_rng(31)
    sizes = [10**3, 10**4, 10**5, 10**6]
    errors = np.zeros((10, len(sizes)))
    for k in range(10):
        g = random_admg(rng, 5, 0.6, 0.3)
        m = random_model(g, seed=[31, k]).with_intercepts(rng.normal(size=5))
        i = 4
        s = [v for v in range(4) if rng.random() < 0.7] or [0]
        pop = partial_regression(m, i, s).coefficients
        for c, n in enumerate(sizes):
            est = ols(sample_data(m, n, seed=[31, k, c]), g.names[i], [g.names[v] for v in s])
            errors[k, c] = max(abs(est.coefficients[name] - pop[name]) for name in pop)
    medians = np.median(errors, axis=0)
    ok = bool(np.all(errors[:, -1] <= 1e-2) and np.all(np.diff(medians) < 0))
    detail = (f"max error at n=1e6 {errors[:, -1].max():.2e}; median max-error by n "
              + ", ".join(f"{v:.1e}" for v in medians))
    assert record(acceptance_log, 8, "finite-sample consistency", ok, detail), detail


def test_09_nonlinear_demo(acceptance_log):
    spec = NonlinearModelSpec()
    rep = nonlinear_demo(spec, [-2.0, -1.0, 0.0, 1.0, 2.0], 10**6, seed=2024)
    k = int(np.flatnonzero(rep.grid == 2.0)[0])
    errs = {
        "beta_MX": abs(rep.beta_MX - spec.a_MX),
        "a_YH": abs(rep.a_YH - spec.a_YH),
        "tau": abs(rep.tau - (spec.a_YX + spec.a_YM * spec.a_MX)),
    }
    z = abs(rep.delta[k] - 1.4) / rep.delta_se[k]
    ok = all(v <= 1e-2 for v in errs.values()) and z <= 3 and rep.delta_closed_form[k] == pytest.approx(1.4)
    detail = (", ".join(f"|{name} err| {v:.1e}" for name, v in errs.items())
              + f"; delta(2) = {rep.delta[k]:.4f} (se {rep.delta_se[k]:.4f}, {z:.2f} se from 1.4)")
    assert record(acceptance_log, 9, "nonlinear demo", ok, detail), detail


def test_10_cli_golden(capsys, tmp_path, acceptance_log):
    bad = []
    for golden, argv, code in REPORT_CASES:
        outs = []
        for _ in range(2):
            got = main(with_data(argv))
            outs.append(capsys.readouterr().out)
            if got != code:
                bad.append(f"{golden}: exit {got}")
        if outs[0] != outs[1] or outs[0] != (GOLDEN / golden).read_text():
            bad.append(f"{golden}: bytes differ")
    csvs = []
    for t in range(2):
        out = tmp_path / f"sim{t}.csv"
        if main(with_data(["simulate", "chain.json", "--n", "1000", "--seed", "42", "--out", str(out)])) != 0:
            bad.append("simulate exit")
        csvs.append(out.read_bytes())
    if not csvs[0] == csvs[1] == (GOLDEN / "simulate_chain.csv").read_bytes():
        bad.append("simulate csv differs")
    for argv in (["check", "unknown_key.json", "--outcome", "Y", "--treatment", "X"],
                 ["check", "worked.json", "--outcome", "Y", "--treatment", "X", "--adjust", "Y"]):
        if main(with_data(argv)) != 2:
            bad.append(f"{argv[1]}: expected exit 2")
    capsys.readouterr()
    ok = not bad
    detail = f"{len(REPORT_CASES)} reports + CSV byte-identical, exit codes 0/1/2" if ok else "; ".join(bad)
    assert record(acceptance_log, 10, "CLI golden", ok, detail), detail
