"""Acceptance criteria 1-7.

Each criterion is a function returning ``(ok, detail)``.  Under pytest every
criterion records one PASS/FAIL line, printed in the terminal summary; run
this file directly (``python tests/test_acceptance.py``) to print the lines
without pytest.
"""

from __future__ import annotations

import functools
import math
import os
import subprocess
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))

import oracles  # noqa: E402
from dichovalue.exact import (  # noqa: E402
    banzhaf_exact,
    beta_binomial_dvalue,
    dvalue_exact,
    endowment_bias,
    expected_performance,
    gamma_lambda_exact,
    marginality_profile,
    shapley_exact,
    unbiased_dvalue_exact,
    unbiased_shapley_exact,
    unbiased_shapley_weights,
)
from dichovalue.game import Game, table_game  # noqa: E402
from dichovalue.priors import Prior, eta_bounds  # noqa: E402
from dichovalue.regression import Dataset, performance_game  # noqa: E402
from dichovalue.sampling import SamplerConfig, estimate, sample_orderings, weights_for  # noqa: E402
from dichovalue.selection import subset_search_ic  # noqa: E402
from dichovalue.simulation import SimConfig, run_benchmark  # noqa: E402

TOL = 1e-9
BETA_TOL = 1e-7


# ---------------------------------------------------------------- 1: identities


def criterion_identities():
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    worst: dict[str, float] = {}

    def check(name, got, want, tol=TOL):
        err = float(np.max(np.abs(np.asarray(got, dtype=float) - np.asarray(want, dtype=float))))
        worst[name] = max(worst.get(name, 0.0), err / tol)

    for n in range(2, 11):
        lo, hi = eta_bounds("sv", n)
        blo, bhi = eta_bounds("bv", n)
        full = (1 << n) - 1
        sizes = np.bitwise_count(np.arange(1 << n))
        w = unbiased_shapley_weights(n)
        check("unbiased weight mass 2/3", sum(math.comb(n - 1, t - 1) * w[t] for t in range(1, n + 1)), 2 / 3)
        agg_coef = np.array(
            [4 * math.factorial(t) * math.factorial(n - t) * (2 * t - n) / math.factorial(n + 2) if 2 * t > n else 0.0
             for t in range(n + 1)]
        )
        for _ in range(100):
            v = rng.uniform(-1, 1, 1 << n)
            g = table_game(v)
            span = v[full] - v[0]
            sh = shapley_exact(g)
            bz = banzhaf_exact(g)
            eta_sv = rng.uniform(lo, hi)
            check("efficiency", np.sum(dvalue_exact(g, Prior.sv(n, eta_sv))), span)
            for eta in (0.0, lo, hi):
                check("SV(eta) = Shapley", dvalue_exact(g, Prior.sv(n, eta)), sh)
            for eta in (0.0, blo, bhi):
                check("BV(eta) = Banzhaf", dvalue_exact(g, Prior.bv(n, eta)), bz)
            eta = rng.uniform(0.05, 0.95)
            gam, lam = gamma_lambda_exact(g, Prior.bn(n, eta))
            psi = gam + lam
            check("BN psi = gamma/eta", gam / eta, psi)
            check("BN psi = lambda/(1-eta)", lam / (1 - eta), psi)
            kappa, alpha = endowment_bias(g, Prior.bn(n, eta))
            check("BN kappa = (2eta-1) psi", kappa, (2 * eta - 1) * psi)
            if alpha is not None:
                check("BN unbiased = 4eta(1-eta) psi", unbiased_dvalue_exact(g, Prior.bn(n, eta)), 4 * eta * (1 - eta) * psi)
            _, lam0 = gamma_lambda_exact(g, Prior.sv(n))
            check("lambda totality SV(0)", lam0.sum(), expected_performance(g, Prior.sv(n)) - v[0])
            kappa_bv, _ = endowment_bias(g, Prior.bv(n))
            check("kappa = 0 under BV(0)", kappa_bv, 0.0)
            prof = marginality_profile(g)
            check("pi_t = omega_(t+1)", prof.pi, prof.omega)
            us = unbiased_shapley_exact(g)
            check("unbiased aggregate identity", us.sum(), np.sum(agg_coef[sizes] * (v - v[full ^ np.arange(1 << n)])))
            check("BetaBN(1,1) = Shapley", beta_binomial_dvalue(g, 1, 1), sh, BETA_TOL)
            check("BetaBN(1,1) adjusted = unbiased Shapley", beta_binomial_dvalue(g, 1, 1, True), us, BETA_TOL)
    elapsed = time.perf_counter() - start
    bad = {k: r for k, r in worst.items() if r > 1.0}
    ok = not bad and elapsed < 60
    detail = f"{len(worst)} identities x 900 games; worst error/tolerance {max(worst.values()):.3g}; {elapsed:.0f} s"
    if bad:
        detail += f"; violated: {sorted(bad)}"
    return ok, detail


# ---------------------------------------------------------------- 2: sign results


def _diminishing_game(rng, n):
    w = rng.uniform(0.2, 1.0, n)
    sums = np.array([w[oracles.members(b, n)].sum() for b in range(1 << n)])
    return table_game(np.sqrt(sums) + rng.uniform(-1, 1))


def _superadditive_game(rng, n):
    # nonnegative combination of unanimity games is supermodular, hence superadditive
    v = np.zeros(1 << n)
    for _ in range(3 * n):
        carrier = int(rng.integers(1, 1 << n))
        c = rng.uniform(0, 1)
        v[(np.arange(1 << n) & carrier) == carrier] += c
    return table_game(v)


def criterion_signs():
    rng = np.random.default_rng(2)
    worst_dim, worst_sup = -math.inf, math.inf
    for n in range(2, 11):
        for _ in range(20):
            g = _diminishing_game(rng, n)
            assert marginality_profile(g).diminishing_effect
            kappa, _ = endowment_bias(g, Prior.sv(n))
            worst_dim = max(worst_dim, float(kappa.sum()))
            h = _superadditive_game(rng, n)
            vals = h.values()
            assert vals[0] == 0.0
            kappa, _ = endowment_bias(h, Prior.sv(n))
            worst_sup = min(worst_sup, float(kappa.sum()))
    ok = worst_dim <= 1e-9 and worst_sup >= -1e-9
    return ok, f"max aggregate bias (diminishing) {worst_dim:.3g} <= 1e-9; min (superadditive) {worst_sup:.3g} >= -1e-9"


# ---------------------------------------------------------------- 3: sampler calibration


def criterion_calibration():
    n = 8
    start = time.perf_counter()
    v = np.random.default_rng(3).uniform(-1, 1, 1 << n)
    g = table_game(v)
    prior = Prior.sv(n)
    gam, lam = gamma_lambda_exact(g, prior)
    targets = {
        "shapley": (weights_for("shapley", n), shapley_exact(g)),
        "unbiased_shapley": (weights_for("unbiased_shapley", n), unbiased_shapley_exact(g)),
        "psi_sv0": (weights_for("psi", n, prior), gam + lam),
        "gamma_sv0": (weights_for("gamma", n, prior), gam),
        "lambda_sv0": (weights_for("lambda", n, prior), lam),
    }
    inside = {k: np.zeros(n, dtype=int) for k in targets}
    span = v[-1] - v[0]
    max_gap = 0.0
    for seed in range(20):
        smp = sample_orderings(g, SamplerConfig(orderings=50_000, seed=seed))
        max_gap = max(max_gap, float(np.max(np.abs(np.sum(smp.increments, axis=1) - span))))
        for k, (w, exact) in targets.items():
            inside[k] += np.abs(estimate(smp, w).studentized(exact)) <= 4
    elapsed = time.perf_counter() - start
    fewest = min(int(c.min()) for c in inside.values())
    ok = fewest >= 19 and max_gap <= 1e-12 and elapsed < 120
    return ok, (
        f"fewest seeds within 4 stderr {fewest}/20 (need 19); telescoping gap max {max_gap:.2g}; {elapsed:.0f} s"
    )


# ---------------------------------------------------------------- 4 and 5: benchmark


@functools.lru_cache(maxsize=None)
def _benchmark(correlated: bool, models: int):
    cfg = SimConfig(models=models, correlated=correlated, methods=("unbiased_shapley", "shapley"), seed=2024)
    start = time.perf_counter()
    stats = run_benchmark(cfg)
    return stats, time.perf_counter() - start


def criterion_table_one():
    stats, elapsed = _benchmark(False, 100)
    ub, b = stats["unbiased_shapley"], stats["shapley"]
    checks = {
        "unbiased rate in [0.78, 0.97]": 0.78 <= ub.exact_rate <= 0.97,
        "shapley rate in [0.35, 0.65]": 0.35 <= b.exact_rate <= 0.65,
        "unbiased beats shapley": ub.exact_rate > b.exact_rate,
        "unbiased overfit <= shapley overfit / 3": 3 * ub.overfit <= b.overfit,
    }
    detail = (
        f"exact unbiased {ub.exact_match}/100, shapley {b.exact_match}/100; overfit {ub.overfit} vs {b.overfit}; "
        f"missed>=1 {ub.models - ub.missed[0]} vs {b.models - b.missed[0]}; {elapsed:.0f} s"
    )
    failed = [k for k, good in checks.items() if not good]
    if failed:
        detail += "; failed: " + ", ".join(failed)
    return not failed, detail


def criterion_correlated():
    base, _ = _benchmark(False, 100)
    corr, elapsed = _benchmark(True, 50)
    r0 = base["unbiased_shapley"].exact_rate
    r1 = corr["unbiased_shapley"].exact_rate
    return r1 >= r0 - 0.10, f"correlated exact rate {r1:.2f} vs uncorrelated {r0:.2f} (need >= {r0 - 0.10:.2f}); {elapsed:.0f} s"


# ---------------------------------------------------------------- 6: oracle equivalence


def criterion_oracle():
    rng = np.random.default_rng(6)
    worst = 0.0
    mismatched = []
    for trial in range(25):
        n = int(rng.integers(2, 9))
        if trial % 2:
            m = 40
            X = rng.standard_normal((m, n))
            y = X[:, : max(1, n // 3)] @ rng.uniform(0.3, 1.0, max(1, n // 3)) + rng.standard_normal(m)
            data = Dataset(y, X, tuple(f"x{j}" for j in range(n)))
            g = performance_game(data)
            v = g.values()
            for crit in ("aic", "bic", "hq"):
                if int(subset_search_ic(data, crit).selected) != oracles.best_subset_ic(y, X, crit):
                    mismatched.append((trial, crit))
        else:
            v = rng.uniform(-1, 1, 1 << n)
            g = table_game(v)
        eta = float(rng.uniform(0.1, 0.9))
        sv_eta = float(rng.uniform(*eta_bounds("sv", n)))
        theta, rho = float(rng.uniform(0.5, 3)), float(rng.uniform(0.5, 3))
        delta = rng.dirichlet(np.ones(n + 1))
        pairs = [
            (shapley_exact(g), oracles.shapley_by_orderings(v, n)),
            (banzhaf_exact(g), oracles.banzhaf(v, n)),
            (unbiased_shapley_exact(g), oracles.unbiased_shapley(v, n)),
            (beta_binomial_dvalue(g, theta, rho), oracles.beta_dvalue(v, n, theta, rho)),
            (beta_binomial_dvalue(g, theta, rho, True), oracles.beta_dvalue(v, n, theta, rho, True)),
        ]
        for prior, p in (
            (Prior.sv(n, sv_eta), oracles.p_sv(n, sv_eta)),
            (Prior.bv(n, 0.0), oracles.p_bv(n, 0.0)),
            (Prior.bn(n, eta), oracles.p_bn(n, eta)),
            (Prior.beta_bn(n, theta, rho), oracles.p_betabn(n, theta, rho)),
            (Prior.custom(delta), oracles.p_sizes(n, delta)),
        ):
            og, ol = oracles.gamma_lambda(v, n, p)
            gam, lam = gamma_lambda_exact(g, prior)
            kappa, _ = endowment_bias(g, prior)
            pairs += [(gam, og), (lam, ol), (dvalue_exact(g, prior), og + ol), (kappa, og - ol)]
            pairs.append((expected_performance(g, prior), oracles.expected_value(v, n, p)))
        scale = max(1.0, float(np.max(np.abs(v))))
        for got, want in pairs:
            worst = max(worst, float(np.max(np.abs(np.asarray(got) - np.asarray(want)))) / scale)
    ok = worst <= 1e-9 and not mismatched
    detail = f"max relative disagreement {worst:.2g} (need <= 1e-9); IC argmin mismatches {len(mismatched)}"
    return ok, detail


# ---------------------------------------------------------------- 7: determinism


def criterion_determinism():
    args = [
        "simulate", "--models", "4", "--n", "8", "--true-size", "3", "--m", "60", "--orderings", "40",
        "--methods", "unbiased_shapley,shapley,unbiased_dvalue_bn,bic,stepwise", "--seed", "77",
    ]
    outputs = []
    with tempfile.TemporaryDirectory() as tmp:
        for k, workers in enumerate((1, 1, 4, 4)):
            path = Path(tmp) / f"run{k}.csv"
            proc = subprocess.run(
                [sys.executable, "-m", "dichovalue", *args, "--workers", str(workers), "--output", str(path)],
                capture_output=True, text=True, env={**os.environ, "PYTHONHASHSEED": str(k)},
            )
            if proc.returncode != 0:
                return False, f"simulate exited {proc.returncode}: {proc.stderr.strip()}"
            outputs.append(path.read_bytes())
    same = all(o == outputs[0] for o in outputs)
    return same, f"4 runs (workers 1,1,4,4): {'byte-identical' if same else 'outputs differ'}, {len(outputs[0])} bytes"


CRITERIA = {
    1: ("identity suite", criterion_identities),
    2: ("sign results", criterion_signs),
    3: ("sampler calibration", criterion_calibration),
    4: ("benchmark exact identification", criterion_table_one),
    5: ("correlated robustness", criterion_correlated),
    6: ("oracle equivalence", criterion_oracle),
    7: ("determinism", criterion_determinism),
}


def _line(number: int, ok: bool, detail: str) -> str:
    return f"criterion {number} ({CRITERIA[number][0]}): {'PASS' if ok else 'FAIL'} | {detail}"


def _run(number: int, record_property):
    ok, detail = CRITERIA[number][1]()
    line = _line(number, ok, detail)
    print(line)
    record_property("acceptance", line)
    assert ok, line


def test_criterion_1_identities(record_property):
    _run(1, record_property)


def test_criterion_2_signs(record_property):
    _run(2, record_property)


def test_criterion_3_calibration(record_property):
    _run(3, record_property)


def test_criterion_4_benchmark(record_property):
    _run(4, record_property)


def test_criterion_5_correlated(record_property):
    _run(5, record_property)


def test_criterion_6_oracle(record_property):
    _run(6, record_property)


def test_criterion_7_determinism(record_property):
    _run(7, record_property)


if __name__ == "__main__":
    chosen = [int(a) for a in sys.argv[1:]] or list(CRITERIA)
    failures = 0
    for k in chosen:
        ok, detail = CRITERIA[k][1]()
        failures += not ok
        print(_line(k, ok, detail), flush=True)
    sys.exit(1 if failures else 0)
