"""Variable selection drivers.

``select_forward_by_value`` admits one regressor per step: the remaining
candidate with the largest sampled value, provided it is significant in the
regression on the already-selected variables plus itself.  Values at a
later step come from the restricted game ``v'(T) = v(T ∪ selected)`` on the
remaining candidates.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .game import Coalition, EvaluationError, check_exact_size
from .priors import Prior
from .regression import RSS_FLOOR, Dataset, ols_fit, performance_abs_t, performance_game
from .sampling import SamplerConfig, estimate, sample_orderings, unbiased_weights_from_sample, weights_for

__all__ = [
    "VALUE_METHODS",
    "SelectionResult",
    "TraceStep",
    "select_bn_fixed_point",
    "select_forward_by_value",
    "stepwise_pvalue",
    "subset_search_ic",
]

log = logging.getLogger(__name__)

VALUE_METHODS = ("shapley", "unbiased_shapley", "gamma_sv0", "lambda_sv0", "dvalue_bn", "unbiased_dvalue_bn")


@dataclass
class TraceStep:
    step: int
    variable: int
    name: str
    score: float
    p_value: float
    admitted: bool
    action: str = "add"


@dataclass
class SelectionResult:
    selected: Coalition
    names: list[str]
    method: str
    trace: list[TraceStep] = field(default_factory=list)
    eta_path: list[float] = field(default_factory=list)
    converged: bool | None = None
    diagnostics: list[str] = field(default_factory=list)

    @property
    def selected_names(self) -> list[str]:
        return [self.names[i] for i in self.selected.players()]

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "selected": int(self.selected),
            "selected_names": self.selected_names,
            "names": list(self.names),
            "trace": [vars(s).copy() for s in self.trace],
            "eta_path": list(self.eta_path),
            "converged": self.converged,
            "diagnostics": list(self.diagnostics),
        }

    @classmethod
    def from_dict(cls, d: dict) -> SelectionResult:
        return cls(
            selected=Coalition(d["selected"]),
            names=list(d["names"]),
            method=d["method"],
            trace=[TraceStep(**s) for s in d["trace"]],
            eta_path=list(d["eta_path"]),
            converged=d["converged"],
            diagnostics=list(d["diagnostics"]),
        )


def _step_scores(sample, method: str, n: int, eta: float | None) -> np.ndarray:
    if method in ("shapley", "unbiased_shapley"):
        return estimate(sample, weights_for(method, n)).mean
    if method in ("gamma_sv0", "lambda_sv0"):
        return estimate(sample, weights_for(method.split("_")[0], n, Prior.sv(n))).mean
    prior = Prior.bn(n, eta)
    if method == "dvalue_bn":
        return estimate(sample, weights_for("psi", n, prior)).mean
    w, alpha = unbiased_weights_from_sample(sample, prior)
    if alpha is None:
        return np.zeros(n)
    return estimate(sample, w).mean


def _p_value(data: Dataset, bits: int, j: int) -> float:
    fit = ols_fit(data, bits)
    return float(fit.p_values[fit.columns.index(j)])


def select_forward_by_value(
    data: Dataset,
    method: str,
    alpha_sig: float = 0.05,
    cfg: SamplerConfig | None = None,
    eta: float | None = None,
    performance=performance_abs_t,
    game=None,
) -> SelectionResult:
    """Forward selection by sampled value with a significance cut-off.

    Parameters
    ----------
    data : Dataset
    method : str
        One of ``VALUE_METHODS``.  The two ``*_bn`` methods need ``eta``.
    alpha_sig : float
        A candidate is admitted only if its two-sided p-value is below this.
    cfg : SamplerConfig
        Orderings drawn per step; each step uses its own hash stream.
    game : Game, optional
        Performance game over ``data`` to reuse its payoff cache.
    """
    if method not in VALUE_METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {VALUE_METHODS}")
    if not 0 < alpha_sig < 1:
        raise ValueError("alpha_sig must lie in (0, 1)")
    if method.endswith("_bn") and (eta is None or not 0 < eta < 1):
        raise ValueError(f"method {method!r} needs eta in (0, 1)")
    cfg = cfg or SamplerConfig()
    if data.m <= 2:
        raise ValueError("dataset too small for any fit")
    game = game or performance_game(data, performance)
    result = SelectionResult(Coalition(0), list(data.names), method)
    if method.endswith("_bn"):
        result.eta_path.append(float(eta))
    selected = 0
    step = 0
    while True:
        remaining = [j for j in range(data.n) if not (selected >> j) & 1]
        if not remaining:
            break
        step += 1
        sub = game.restrict(remaining, selected)
        step_cfg = replace(cfg, stream=(cfg.stream, step))
        sample = sample_orderings(sub, step_cfg, [data.names[j] for j in remaining])
        scores = _step_scores(sample, method, len(remaining), eta)
        if sample.failures and not np.any(sample.increments):
            result.diagnostics.append(f"step {step}: every candidate fit failed")
            break
        # ties go to the smaller name so that relabelling columns cannot change the pick
        best_local = min(range(len(remaining)), key=lambda k: (-scores[k], data.names[remaining[k]]))
        j = remaining[best_local]
        try:
            p = _p_value(data, selected | (1 << j), j)
        except EvaluationError as exc:
            result.diagnostics.append(f"step {step}: significance fit failed ({exc})")
            p = 1.0
        admitted = p < alpha_sig
        result.trace.append(TraceStep(step, j, data.names[j], float(scores[best_local]), p, admitted))
        if not admitted:
            break
        selected |= 1 << j
    result.selected = Coalition(selected)
    return result


def select_bn_fixed_point(
    data: Dataset,
    adjusted: bool = False,
    alpha_sig: float = 0.05,
    cfg: SamplerConfig | None = None,
    eta0: float = 0.5,
    max_iter: int = 20,
    performance=performance_abs_t,
    game=None,
) -> SelectionResult:
    """Alternate BN-prior selection with ``eta <- |S_hat| / n`` until ``S_hat`` repeats.

    ``eta`` is clamped to ``[1/(2n), 1 - 1/(2n)]``.  The result carries
    ``converged=False`` when ``max_iter`` passes end without a repeat.
    """
    if not 0 < eta0 < 1:
        raise ValueError("eta0 must lie in (0, 1)")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    method = "unbiased_dvalue_bn" if adjusted else "dvalue_bn"
    game = game or performance_game(data, performance)
    lo, hi = 1 / (2 * data.n), 1 - 1 / (2 * data.n)
    eta = eta0
    path = [eta]
    prev = None
    res = None
    for _ in range(max_iter):
        res = select_forward_by_value(data, method, alpha_sig, cfg, eta=eta, performance=performance, game=game)
        if prev is not None and res.selected == prev.selected:
            res.eta_path = path
            res.converged = True
            return res
        prev = res
        eta = min(max(res.selected.size() / data.n, lo), hi)
        path.append(eta)
    res.eta_path = path
    res.converged = False
    res.diagnostics.append(f"no fixed point within {max_iter} iterations")
    return res


_IC_INDEX = {"aic": 1, "bic": 2, "hq": 3}
_CHUNK = 20000


def _penalties(m: int, p: np.ndarray, criterion: str) -> np.ndarray:
    if criterion == "aic":
        return 2.0 * p
    if criterion == "bic":
        return p * math.log(m)
    return 2.0 * p * math.log(math.log(m))


def subset_search_ic(data: Dataset, criterion: str = "bic") -> SelectionResult:
    """Exhaustive search for the subset minimising AIC, BIC or HQ.

    RSS for every subset comes from batched solves of the normal equations
    on centred, unit-norm columns.  Ties go to the smaller subset, then the
    smaller bitmask.
    """
    criterion = criterion.lower()
    if criterion not in _IC_INDEX:
        raise ValueError(f"criterion must be one of {sorted(_IC_INDEX)}")
    n, m = data.n, data.m
    check_exact_size(n)
    Xc = data.X - data.X.mean(axis=0)
    norms = np.linalg.norm(Xc, axis=0)
    norms[norms == 0] = 1.0
    Xc = Xc / norms
    yc = data.y - data.y.mean()
    G = Xc.T @ Xc
    b = Xc.T @ yc
    tss = float(yc @ yc)
    floor = max(RSS_FLOOR * tss, np.finfo(float).tiny)

    best = (math.inf, math.inf, math.inf)
    for t in range(0, n + 1):
        if m - t - 1 <= 0:
            break
        combos = np.array(list(itertools.combinations(range(n), t)), dtype=np.intp).reshape(math.comb(n, t), t)
        for start in range(0, len(combos), _CHUNK):
            c = combos[start : start + _CHUNK]
            rss = _batch_rss(G, b, tss, c)
            rss = np.maximum(rss, floor)
            loglik = -0.5 * m * (math.log(2 * math.pi) + np.log(rss / m) + 1.0)
            ic = -2 * loglik + _penalties(m, np.float64(t + 1), criterion)
            bits = (np.left_shift(1, c)).sum(axis=1) if t else np.zeros(len(c), dtype=np.intp)
            k = np.lexsort((bits, ic))[0]
            cand = (float(ic[k]), t, int(bits[k]))
            if cand < best:
                best = cand
    return SelectionResult(Coalition(best[2]), list(data.names), criterion)


def _batch_rss(G: np.ndarray, b: np.ndarray, tss: float, combos: np.ndarray) -> np.ndarray:
    if combos.shape[1] == 0:
        return np.full(len(combos), tss)
    Gs = G[combos[:, :, None], combos[:, None, :]]
    bs = b[combos]
    try:
        sol = np.linalg.solve(Gs, bs[..., None])[..., 0]
        return tss - np.einsum("ij,ij->i", bs, sol)
    except np.linalg.LinAlgError:
        out = np.empty(len(combos))
        for r in range(len(combos)):
            try:
                out[r] = tss - bs[r] @ np.linalg.solve(Gs[r], bs[r])
            except np.linalg.LinAlgError:
                out[r] = np.inf
        return out


def stepwise_pvalue(data: Dataset, alpha_in: float = 0.05, alpha_out: float = 0.10) -> SelectionResult:
    """Forward-backward stepwise regression on coefficient p-values.

    Adds the most significant excluded variable while its p-value is below
    ``alpha_in``, then drops included variables whose p-value exceeds
    ``alpha_out``, until nothing changes.  A move that would return to an
    already visited selection ends the search.
    """
    if alpha_out < alpha_in:
        raise ValueError("alpha_out must be at least alpha_in")
    result = SelectionResult(Coalition(0), list(data.names), "stepwise")
    selected = 0
    visited = {0}
    step = 0
    while True:
        changed = False
        best = None
        for j in range(data.n):
            if (selected >> j) & 1:
                continue
            try:
                p = _p_value(data, selected | (1 << j), j)
            except EvaluationError:
                continue
            if best is None or p < best[1]:
                best = (j, p)
        if best is not None and best[1] < alpha_in and (selected | (1 << best[0])) not in visited:
            step += 1
            selected |= 1 << best[0]
            visited.add(selected)
            result.trace.append(TraceStep(step, best[0], data.names[best[0]], float("nan"), best[1], True, "add"))
            changed = True
        while selected:
            try:
                fit = ols_fit(data, selected)
            except EvaluationError:
                break
            k = int(np.argmax(fit.p_values))
            if fit.p_values[k] <= alpha_out:
                break
            j = fit.columns[k]
            nxt = selected & ~(1 << j)
            if nxt in visited:
                break
            step += 1
            selected = nxt
            visited.add(selected)
            result.trace.append(TraceStep(step, j, data.names[j], float("nan"), float(fit.p_values[k]), False, "drop"))
            changed = True
        if not changed:
            break
    result.selected = Coalition(selected)
    return result
