"""Synthetic regression benchmark comparing selection methods against a known truth."""

from __future__ import annotations

import csv
import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .game import Coalition
from .regression import Dataset, performance_game
from .sampling import SamplerConfig
from .selection import VALUE_METHODS, select_bn_fixed_point, select_forward_by_value, stepwise_pvalue, subset_search_ic

__all__ = [
    "BENCHMARK_METHODS",
    "DiscrepancyStats",
    "SimConfig",
    "generate_model",
    "run_benchmark",
    "run_model",
    "stats_from_json",
    "stats_to_csv",
    "stats_to_json",
]

log = logging.getLogger(__name__)

BENCHMARK_METHODS = VALUE_METHODS + ("aic", "bic", "hq", "stepwise")


@dataclass(frozen=True)
class SimConfig:
    models: int = 100
    m: int = 100
    n: int = 20
    true_size: int = 5
    correlated: bool = False
    seed: int = 0
    methods: tuple[str, ...] = ("unbiased_shapley", "shapley")
    alpha_sig: float = 0.05
    orderings: int = 100
    noise_sd: float = 1.0
    coef_sd: float = 1.0
    eta0: float = 0.5
    bn_max_iter: int = 20
    workers: int = 1

    def __post_init__(self):
        if self.models < 1:
            raise ValueError("models must be at least 1")
        if not 1 <= self.true_size <= self.n:
            raise ValueError("true_size must lie in [1, n]")
        if not self.methods:
            raise ValueError("at least one method is required")
        bad = [mt for mt in self.methods if mt not in BENCHMARK_METHODS]
        if bad:
            raise ValueError(f"unknown methods {bad}; choose from {BENCHMARK_METHODS}")
        object.__setattr__(self, "methods", tuple(self.methods))


def _model_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def _safe_log_abs(z: np.ndarray) -> np.ndarray:
    return np.log(np.maximum(np.abs(z), 1e-12))


_TRANSFORMS = (np.exp, _safe_log_abs, np.square, lambda z: z**3)


def generate_model(seed: int, cfg: SimConfig, index: int) -> tuple[Dataset, Coalition]:
    """Draw one benchmark dataset and its true regressor set.

    Standard-normal columns (optionally mixed by a random normal matrix) are
    transformed cyclically by exp, log|.|, square and cube; the response is
    an intercept plus the first ``true_size`` columns with normal
    coefficients, plus normal noise.
    """
    rng = _model_rng(seed, index)
    Z = rng.standard_normal((cfg.m, cfg.n))
    if cfg.correlated:
        Z = Z @ rng.standard_normal((cfg.n, cfg.n))
    X = np.empty_like(Z)
    for j in range(cfg.n):
        X[:, j] = _TRANSFORMS[j % 4](Z[:, j])
    zeta = cfg.coef_sd * rng.standard_normal(cfg.true_size + 1)
    eps = cfg.noise_sd * rng.standard_normal(cfg.m)
    y = zeta[0] + X[:, : cfg.true_size] @ zeta[1:] + eps
    names = tuple(f"X{j + 1}" for j in range(cfg.n))
    return Dataset(y, X, names), Coalition((1 << cfg.true_size) - 1)


def _model_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(index), 1]).generate_state(1, np.uint64)[0])


def run_model(cfg: SimConfig, index: int) -> dict[str, int | None]:
    """Selected bitmask per method for one model; ``None`` marks a failure."""
    data, _ = generate_model(cfg.seed, cfg, index)
    game = performance_game(data)
    scfg = SamplerConfig(orderings=cfg.orderings, seed=_model_seed(cfg.seed, index))
    out: dict[str, int | None] = {}
    for method in cfg.methods:
        try:
            if method in ("dvalue_bn", "unbiased_dvalue_bn"):
                res = select_bn_fixed_point(
                    data, method.startswith("unbiased"), cfg.alpha_sig, scfg, cfg.eta0, cfg.bn_max_iter, game=game
                )
            elif method in VALUE_METHODS:
                res = select_forward_by_value(data, method, cfg.alpha_sig, scfg, game=game)
            elif method == "stepwise":
                res = stepwise_pvalue(data, cfg.alpha_sig, max(cfg.alpha_sig, 0.10))
            else:
                res = subset_search_ic(data, method)
            out[method] = int(res.selected)
        except Exception as exc:  # one failed model/method must not abort the run
            log.warning("model %d, method %s failed: %s", index, method, exc)
            out[method] = None
    return out


@dataclass
class DiscrepancyStats:
    """Counts over models of how a method's selection differs from the truth.

    ``missed[k]`` counts models missing ``k`` relevant variables (last cell
    is ``>= 3``); ``extra[k]`` counts models with ``k`` irrelevant ones (last
    cell ``>= 5``); ``size[k]`` counts selected-model sizes ``k = 0..n``.
    """

    method: str
    n: int
    models: int = 0
    exact_match: int = 0
    failures: int = 0
    missed: list[int] = field(default_factory=lambda: [0] * 4)
    extra: list[int] = field(default_factory=lambda: [0] * 6)
    size: list[int] = field(default_factory=list)

    def __post_init__(self):
        if not self.size:
            self.size = [0] * (self.n + 1)

    def add(self, selected: int | None, truth: int) -> None:
        self.models += 1
        if selected is None:
            self.failures += 1
            return
        missed = int.bit_count(truth & ~selected)
        extra = int.bit_count(selected & ~truth)
        self.exact_match += missed == 0 and extra == 0
        self.missed[min(missed, 3)] += 1
        self.extra[min(extra, 5)] += 1
        self.size[int.bit_count(selected)] += 1

    @property
    def overfit(self) -> int:
        return sum(self.extra[1:])

    @property
    def exact_rate(self) -> float:
        return self.exact_match / self.models if self.models else float("nan")

    def rows(self) -> list[tuple[str, int]]:
        out = [("exact_match", self.exact_match)]
        out += [(f"missed_{k}", c) for k, c in enumerate(self.missed[:3])] + [("missed_ge3", self.missed[3])]
        out += [(f"extra_{k}", c) for k, c in enumerate(self.extra[:5])] + [("extra_ge5", self.extra[5])]
        out += [(f"size_{k}", c) for k, c in enumerate(self.size)]
        out.append(("failures", self.failures))
        return out


def run_benchmark(cfg: SimConfig) -> dict[str, DiscrepancyStats]:
    """Run every method on ``cfg.models`` generated models and tally discrepancies.

    Models are independent and may run in worker processes; the tallies are
    accumulated in model-index order, so results do not depend on
    ``cfg.workers``.
    """
    indices = range(cfg.models)
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            per_model = list(ex.map(run_model, [cfg] * cfg.models, indices))
    else:
        per_model = [run_model(cfg, i) for i in indices]
    truth = (1 << cfg.true_size) - 1
    stats = {mt: DiscrepancyStats(mt, cfg.n) for mt in cfg.methods}
    for result in per_model:
        for mt, sel in result.items():
            stats[mt].add(sel, truth)
    return stats


def stats_to_csv(stats: dict[str, DiscrepancyStats]) -> str:
    methods = list(stats)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["row", *methods])
    columns = [dict(stats[mt].rows()) for mt in methods]
    for label, _ in stats[methods[0]].rows():
        w.writerow([label, *(col[label] for col in columns)])
    return buf.getvalue()


def stats_to_json(stats: dict[str, DiscrepancyStats], cfg: SimConfig | None = None) -> str:
    doc = {"methods": {mt: asdict(s) for mt, s in stats.items()}}
    if cfg is not None:
        doc["config"] = asdict(cfg)
    return json.dumps(doc, indent=2)


def stats_from_json(text: str) -> dict[str, DiscrepancyStats]:
    doc = json.loads(text)
    return {mt: DiscrepancyStats(**d) for mt, d in doc["methods"].items()}
