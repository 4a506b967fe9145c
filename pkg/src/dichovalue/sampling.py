"""Monte Carlo valuation from uniformly random player orderings.

Each ordering contributes one raw increment per player, the payoff change
when the player joins its predecessors.  Every estimator in this module is
the mean of that increment times a weight depending only on the number
``k`` of predecessors, so one sample of orderings serves all of them.

Orderings are reproducible and scheduling-independent: ordering ``j`` sorts
the players by a 64-bit hash of ``(seed, stream, j, player key)``.  Keys
default to player indices; the selection driver passes column names so
that relabelling columns relabels the orderings identically.
"""

from __future__ import annotations

import hashlib
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .exact import ALPHA_EPS, ValueReport
from .game import EvaluationError, Game
from .priors import Prior

__all__ = [
    "OrderingSample",
    "SampledEstimate",
    "SamplerConfig",
    "estimate",
    "gain_weight_to_position_weight",
    "generate_orderings",
    "sample_orderings",
    "sample_shapley",
    "sample_unbiased_shapley",
    "sample_values",
    "sampled_report",
    "weights_for",
]

log = logging.getLogger(__name__)

_BATCH = 256
_MIN_ADAPTIVE = 1024
_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)


@dataclass(frozen=True)
class SamplerConfig:
    """Settings for a sampling run.

    ``orderings`` is the sample size, or the cap when ``atol`` enables the
    adaptive stopping rule.  ``stream`` salts the hash so that callers can
    draw several independent samples from one seed.
    """

    orderings: int = 100
    seed: int = 0
    use_reversals: bool = False
    workers: int = 1
    atol: float | None = None
    verbose: bool = False
    stream: int | tuple = 0

    def __post_init__(self):
        if self.orderings < 1:
            raise ValueError("orderings must be at least 1")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")


@dataclass
class SampledEstimate:
    mean: np.ndarray
    stderr: np.ndarray
    count: int
    median: np.ndarray | None = None
    quantiles: dict[float, np.ndarray] = field(default_factory=dict)

    def studentized(self, exact) -> np.ndarray:
        exact = np.asarray(exact, dtype=float)
        err = self.mean - exact
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(self.stderr > 0, err / self.stderr, np.where(np.abs(err) < 1e-12, 0.0, np.inf))
        return z


@dataclass
class OrderingSample:
    """Raw increments ``phi[j, i]`` and predecessor counts ``k[j, i]`` per ordering ``j``."""

    increments: np.ndarray
    positions: np.ndarray
    failures: int = 0

    @property
    def count(self) -> int:
        return self.increments.shape[0]

    @property
    def n(self) -> int:
        return self.increments.shape[1]


def _splitmix64(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = (x + np.uint64(0x9E3779B97F4A7C15)) & _MASK64
        z = ((z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) & _MASK64
        z = ((z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) & _MASK64
        return z ^ (z >> np.uint64(31))


def _key_hash(key) -> int:
    return int.from_bytes(hashlib.blake2b(repr(key).encode(), digest_size=8).digest(), "little")


def _stream_base(seed: int, stream) -> int:
    return _key_hash(("dichovalue", int(seed), stream))


def generate_orderings(cfg: SamplerConfig, n: int, indices: np.ndarray, player_keys: Sequence | None = None) -> np.ndarray:
    """Orderings for the given ordering indices, one row per ordering."""
    keys = range(n) if player_keys is None else player_keys
    if len(keys) != n:
        raise ValueError("need one key per player")
    key_h = np.array([_key_hash(k) for k in keys], dtype=np.uint64)
    indices = np.asarray(indices, dtype=np.int64)
    draw = indices // 2 if cfg.use_reversals else indices
    base = _splitmix64(np.uint64(_stream_base(cfg.seed, cfg.stream)) ^ _splitmix64(draw.astype(np.uint64)))
    h = _splitmix64(base[:, None] ^ key_h[None, :])
    perms = np.argsort(h, axis=1, kind="stable")
    if cfg.use_reversals:
        odd = (indices % 2) == 1
        perms[odd] = perms[odd, ::-1]
    return perms


def _walk(game: Game, perm: np.ndarray, phi: np.ndarray, pos: np.ndarray) -> int:
    """Fill one ordering's increments; returns the number of failed evaluations."""
    n = game.n
    vals = [0.0] * (n + 1)
    ok = [True] * (n + 1)
    bits = 0
    for k in range(n + 1):
        if k:
            bits |= 1 << int(perm[k - 1])
        try:
            vals[k] = game.evaluate(bits)
        except EvaluationError as exc:
            log.warning("treating increments adjacent to a failed fit as 0: %s", exc)
            ok[k] = False
    failed = ok.count(False)
    for k in range(n):
        i = perm[k]
        pos[i] = k
        phi[i] = vals[k + 1] - vals[k] if ok[k] and ok[k + 1] else 0.0
    if not failed:
        total = vals[n] - vals[0]
        scale = max(1.0, max(abs(v) for v in vals))
        if abs(math.fsum(phi) - total) > 4 * n * np.finfo(float).eps * scale:
            raise RuntimeError("ordering increments do not telescope to v(N) - v(empty)")
    return failed


def _walk_chunk(game: Game, perms: np.ndarray):
    s, n = perms.shape
    phi = np.empty((s, n))
    pos = np.empty((s, n), dtype=np.intp)
    failures = 0
    for j in range(s):
        failures += _walk(game, perms[j], phi[j], pos[j])
    return phi, pos, failures


def _run_batch(game: Game, cfg: SamplerConfig, start: int, stop: int, player_keys) -> OrderingSample:
    perms = generate_orderings(cfg, game.n, np.arange(start, stop), player_keys)
    if cfg.workers == 1 or stop - start < 2 * cfg.workers:
        parts = [_walk_chunk(game, perms)]
    else:
        chunks = np.array_split(perms, cfg.workers)
        with ThreadPoolExecutor(max_workers=cfg.workers) as ex:
            parts = list(ex.map(lambda p: _walk_chunk(game, p), chunks))
    return OrderingSample(
        np.concatenate([p[0] for p in parts]),
        np.concatenate([p[1] for p in parts]),
        sum(p[2] for p in parts),
    )


def sample_orderings(
    game: Game,
    cfg: SamplerConfig,
    player_keys: Sequence | None = None,
    stop_weights: np.ndarray | None = None,
) -> OrderingSample:
    """Draw ``cfg.orderings`` orderings and record every player's increment.

    With ``cfg.atol`` set, sampling proceeds in batches of 256 and stops once
    at least 1024 orderings are in and the largest standard error of the
    estimator defined by ``stop_weights`` (raw increments by default) is at
    most ``atol``.
    """
    if cfg.atol is None:
        return _run_batch(game, cfg, 0, cfg.orderings, player_keys)
    w = np.ones(game.n) if stop_weights is None else stop_weights
    parts: list[OrderingSample] = []
    done = 0
    while done < cfg.orderings:
        stop = min(done + _BATCH, cfg.orderings)
        parts.append(_run_batch(game, cfg, done, stop, player_keys))
        done = stop
        if done >= _MIN_ADAPTIVE:
            merged = _merge(parts)
            parts = [merged]
            if np.max(estimate(merged, w).stderr) <= cfg.atol:
                break
    return _merge(parts)


def _merge(parts: list[OrderingSample]) -> OrderingSample:
    if len(parts) == 1:
        return parts[0]
    return OrderingSample(
        np.concatenate([p.increments for p in parts]),
        np.concatenate([p.positions for p in parts]),
        sum(p.failures for p in parts),
    )


def estimate(sample: OrderingSample, weights: np.ndarray, verbose: bool = False) -> SampledEstimate:
    """Mean and standard error of ``weights[k] * phi`` per player."""
    terms = np.asarray(weights)[sample.positions] * sample.increments
    s = sample.count
    mean = terms.mean(axis=0)
    stderr = terms.std(axis=0, ddof=1) / math.sqrt(s) if s > 1 else np.zeros(sample.n)
    est = SampledEstimate(mean, stderr, s)
    if verbose:
        est.median = np.median(terms, axis=0)
        est.quantiles = {q: np.quantile(terms, q, axis=0) for q in (0.025, 0.975)}
    return est


def gain_weight_to_position_weight(weight_by_size: np.ndarray) -> np.ndarray:
    """Convert a weight on gains in coalitions of size ``t`` into a per-increment weight.

    A coalition ``T ∋ i`` with ``|T| = k+1`` appears as ``i`` plus its
    predecessors with probability ``k!(n-k-1)!/n!``, so the increment weight
    is ``w(k+1) * n * C(n-1, k)``.
    """
    w = np.asarray(weight_by_size, dtype=float)
    n = w.size - 1
    k = np.arange(n)
    return w[1:] * n * np.array([math.comb(n - 1, int(j)) for j in k], dtype=float)


def weights_for(method: str, n: int, prior: Prior | None = None) -> np.ndarray:
    """Per-increment weights ``w[k]``, ``k = 0..n-1``, for a named estimator."""
    k = np.arange(n, dtype=float)
    if method == "shapley":
        return np.ones(n)
    if method == "unbiased_shapley":
        return 4.0 * (k + 1) * (n - k) / ((n + 1) * (n + 2))
    if method == "banzhaf":
        return n * np.array([math.comb(n - 1, int(j)) for j in k]) / 2.0 ** (n - 1)
    if prior is None:
        raise ValueError(f"method {method!r} needs a prior")
    if prior.n != n:
        raise ValueError(f"prior is for n={prior.n} players, game has n={n}")
    d = np.asarray(prior.delta)
    gamma_w = (k + 1) * d[1:]
    lambda_w = (n - k) * d[:-1]
    if method == "gamma":
        return gamma_w
    if method == "lambda":
        return lambda_w
    if method == "psi":
        return gamma_w + lambda_w
    raise ValueError(f"unknown sampling method {method!r}")


def sample_values(game: Game, prior: Prior, cfg: SamplerConfig, player_keys=None) -> dict[str, SampledEstimate]:
    """Estimates of gamma, lambda and psi under ``prior`` from one sample of orderings."""
    n = game.n
    sample = sample_orderings(game, cfg, player_keys, weights_for("psi", n, prior))
    return {m: estimate(sample, weights_for(m, n, prior), cfg.verbose) for m in ("gamma", "lambda", "psi")}


def sample_shapley(game: Game, cfg: SamplerConfig, player_keys=None) -> SampledEstimate:
    sample = sample_orderings(game, cfg, player_keys)
    return estimate(sample, weights_for("shapley", game.n), cfg.verbose)


def sample_unbiased_shapley(game: Game, cfg: SamplerConfig, player_keys=None) -> SampledEstimate:
    w = weights_for("unbiased_shapley", game.n)
    sample = sample_orderings(game, cfg, player_keys, w)
    return estimate(sample, w, cfg.verbose)


def unbiased_weights_from_sample(sample: OrderingSample, prior: Prior) -> tuple[np.ndarray, float | None]:
    """Weights for the unbiased D-value with the bias ratio taken from the same sample."""
    n = sample.n
    g = weights_for("gamma", n, prior)
    lam = weights_for("lambda", n, prior)
    sg = float(np.sum(estimate(sample, g).mean))
    sl = float(np.sum(estimate(sample, lam).mean))
    if abs(sg + sl) <= ALPHA_EPS:
        return np.full(n, np.nan), None
    alpha = (sg - sl) / (sg + sl)
    return (1 - alpha) * g + (1 + alpha) * lam, alpha


def sampled_report(game: Game, prior: Prior, cfg: SamplerConfig, names=None, method: str = "sampled") -> ValueReport:
    n = game.n
    sample = sample_orderings(game, cfg, names, weights_for("psi", n, prior))
    ests = {m: estimate(sample, weights_for(m, n, prior), cfg.verbose) for m in ("gamma", "lambda", "psi")}
    gamma, lam = ests["gamma"].mean, ests["lambda"].mean
    uw, alpha = unbiased_weights_from_sample(sample, prior)
    stderr = {m: e.stderr for m, e in ests.items()}
    unbiased = None
    if alpha is not None:
        ue = estimate(sample, uw)
        unbiased = ue.mean
        stderr["psi_unbiased"] = ue.stderr
    stderr["kappa"] = estimate(sample, weights_for("gamma", n, prior) - weights_for("lambda", n, prior)).stderr
    return ValueReport(
        gamma=gamma,
        lambda_=lam,
        psi=ests["psi"].mean,
        kappa=gamma - lam,
        psi_unbiased=unbiased,
        alpha=alpha,
        method=method,
        prior=prior.describe(),
        names=list(names) if names is not None else [f"x{i}" for i in range(n)],
        stderr=stderr,
    )
