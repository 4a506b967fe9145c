import numpy as np
import pytest

import oracles
from dichovalue.regression import Dataset
from dichovalue.sampling import SamplerConfig
from dichovalue.selection import (
    VALUE_METHODS,
    SelectionResult,
    select_bn_fixed_point,
    select_forward_by_value,
    stepwise_pvalue,
    subset_search_ic,
)

CFG = SamplerConfig(orderings=60, seed=3)


def _data(m, n, coefs, seed, noise=1.0, intercept=1.0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((m, n))
    y = intercept + X[:, : len(coefs)] @ np.asarray(coefs, dtype=float) + noise * rng.standard_normal(m)
    return Dataset(y, X, tuple(f"X{j + 1}" for j in range(n)))


@pytest.mark.parametrize("method", VALUE_METHODS)
def test_strong_single_signal_is_found(method):
    hits = 0
    for seed in range(6):
        d = _data(100, 6, [1.5], seed)
        res = select_forward_by_value(d, method, 0.05, CFG, eta=0.3)
        hits += res.selected_names == ["X1"]
        for step in res.trace:
            assert step.admitted == (step.p_value < 0.05)
    assert hits >= 4


def test_nothing_significant_gives_empty_selection():
    d = _data(100, 5, [], 1)
    res = select_forward_by_value(d, "unbiased_shapley", 1e-8, CFG)
    assert res.selected == 0
    assert len(res.trace) == 1 and not res.trace[0].admitted


def test_noise_free_pair_is_selected_first():
    d = _data(80, 6, [2.0, -1.0], 2, noise=0.0)
    res = select_forward_by_value(d, "unbiased_shapley", 0.05, CFG)
    assert {res.trace[0].name, res.trace[1].name} == {"X1", "X2"}
    assert res.trace[0].admitted and res.trace[1].admitted
    assert res.trace[0].score > 0 and res.trace[1].score > 0


def test_relabelling_columns_relabels_selection():
    d = _data(100, 6, [0.6, -0.4, 0.3], 4)
    for order in ([5, 3, 1, 0, 2, 4], [1, 0, 2, 3, 5, 4]):
        for method in ("unbiased_shapley", "shapley", "gamma_sv0"):
            a = select_forward_by_value(d, method, 0.05, CFG)
            b = select_forward_by_value(d.permuted(order), method, 0.05, CFG)
            assert sorted(a.selected_names) == sorted(b.selected_names)
            assert [s.name for s in a.trace] == [s.name for s in b.trace]


def test_trace_length_matches_selection():
    d = _data(100, 8, [1.0, 0.8, -0.7], 5)
    res = select_forward_by_value(d, "lambda_sv0", 0.05, CFG)
    assert len(res.trace) in (res.selected.size(), res.selected.size() + 1)
    assert all(s.admitted for s in res.trace[: res.selected.size()])


def test_every_fit_failing_gives_diagnostic():
    d = Dataset(np.arange(10.0), np.zeros((10, 3)), ("a", "b", "c"))
    res = select_forward_by_value(d, "shapley", 0.05, CFG)
    assert res.selected == 0 and res.diagnostics


def test_argument_validation():
    d = _data(30, 3, [1.0], 0)
    with pytest.raises(ValueError):
        select_forward_by_value(d, "nope")
    with pytest.raises(ValueError):
        select_forward_by_value(d, "shapley", alpha_sig=1.5)
    with pytest.raises(ValueError):
        select_forward_by_value(d, "dvalue_bn")
    with pytest.raises(ValueError):
        select_forward_by_value(Dataset(np.arange(2.0), np.ones((2, 1)), ("a",)), "shapley")
    with pytest.raises(ValueError):
        select_bn_fixed_point(d, eta0=1.0)
    with pytest.raises(ValueError):
        select_bn_fixed_point(d, max_iter=0)


@pytest.mark.parametrize("adjusted", [False, True])
def test_bn_single_iteration_is_one_forward_pass(adjusted):
    d = _data(100, 6, [1.0, -0.8], 6)
    res = select_bn_fixed_point(d, adjusted, 0.05, CFG, eta0=0.4, max_iter=1)
    one = select_forward_by_value(d, "unbiased_dvalue_bn" if adjusted else "dvalue_bn", 0.05, CFG, eta=0.4)
    assert res.selected == one.selected
    assert res.converged is False
    assert res.eta_path[0] == 0.4


def test_bn_fixed_point_converges_and_clamps():
    d = _data(100, 8, [1.2, -1.0, 0.9], 7)
    res = select_bn_fixed_point(d, True, 0.05, CFG, eta0=0.5)
    assert res.converged
    assert all(0 < e < 1 for e in res.eta_path)
    assert res.eta_path[-1] == pytest.approx(max(res.selected.size() / 8, 1 / 16))
    empty = select_bn_fixed_point(_data(100, 4, [], 8), False, 1e-9, CFG)
    assert empty.selected == 0 and min(empty.eta_path) == pytest.approx(1 / 8)


@pytest.mark.parametrize("criterion", ["aic", "bic", "hq"])
def test_subset_search_matches_brute_force(criterion):
    for seed in range(4):
        d = _data(40, 6, [0.6, -0.3], 10 + seed)
        assert int(subset_search_ic(d, criterion).selected) == oracles.best_subset_ic(d.y, d.X, criterion)


def test_subset_search_hand_table():
    # x1 explains y exactly up to small noise, x2 is irrelevant
    y = np.array([1.0, 2.1, 2.9, 4.2, 5.0, 5.8])
    X = np.array([[1, 0.3], [2, -0.2], [3, 0.1], [4, 0.4], [5, -0.5], [6, 0.2]], dtype=float)
    d = Dataset(y, X, ("x1", "x2"))
    ics = {}
    for bits in range(4):
        _, rss, _ = oracles.lstsq_fit(y, X, oracles.members(bits, 2))
        p = bin(bits).count("1") + 1
        ics[bits] = 6 * np.log(rss / 6) + p * np.log(6)
    assert int(subset_search_ic(d, "bic").selected) == min(ics, key=ics.get) == 0b01


def test_bic_finds_single_signal():
    hits = sum(subset_search_ic(_data(100, 6, [1.0], s), "bic").selected_names == ["X1"] for s in range(10))
    assert hits >= 7


def test_constant_response_selects_nothing():
    rng = np.random.default_rng(0)
    d = Dataset(np.full(30, 2.0), rng.standard_normal((30, 4)), ("a", "b", "c", "d"))
    assert subset_search_ic(d, "bic").selected == 0


def test_subset_search_rejects_unknown_criterion():
    with pytest.raises(ValueError):
        subset_search_ic(_data(20, 2, [], 0), "cp")


def test_stepwise_cases():
    exact = _data(60, 5, [2.0, -1.5], 1, noise=0.0)
    assert stepwise_pvalue(exact).selected_names == ["X1", "X2"]
    empties = sum(stepwise_pvalue(_data(100, 6, [], s), 0.001, 0.002).selected == 0 for s in range(10))
    assert empties >= 9
    assert stepwise_pvalue(_data(50, 5, [], 3), 1.0, 1.0).selected.size() == 5
    with pytest.raises(ValueError):
        stepwise_pvalue(exact, 0.1, 0.05)


def test_stepwise_can_drop():
    # x3 = x1 + x2 + noise enters first, then loses significance once x1 and x2 are in
    rng = np.random.default_rng(3)
    x1, x2 = rng.standard_normal(200), rng.standard_normal(200)
    x3 = x1 + x2 + 0.3 * rng.standard_normal(200)
    y = x1 + x2 + 0.5 * rng.standard_normal(200)
    res = stepwise_pvalue(Dataset(y, np.column_stack([x1, x2, x3]), ("x1", "x2", "x3")))
    assert res.selected_names == ["x1", "x2"]
    assert any(s.action == "drop" for s in res.trace)


def test_selection_result_round_trip():
    d = _data(100, 5, [1.0], 1)
    res = select_bn_fixed_point(d, True, 0.05, CFG)
    back = SelectionResult.from_dict(res.to_dict())
    assert back == res
