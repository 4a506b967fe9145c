"""Equal-opportunity priors on the true model.

A prior in this class assigns every coalition of size ``t`` the same
probability, so it is fully described by its size distribution
``delta[t] = P(|S| = t)``.  Four named families are provided (Shapley-type,
Banzhaf-type, binomial and beta-binomial) plus arbitrary size
distributions.  :class:`SubsetPrior` covers arbitrary distributions on
``2**N`` for the cases (point masses, mixtures) that fall outside the class.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import betaln, gammaln

from .game import check_exact_size

__all__ = [
    "Prior",
    "SubsetPrior",
    "eta_bounds",
    "expected_model_size",
    "log_binom",
    "parse_prior",
    "subset_probability",
]

_SUM_TOL = 1e-9


def log_binom(n: int, t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    return gammaln(n + 1) - gammaln(t + 1) - gammaln(n - t + 1)


def _binom(n: int) -> np.ndarray:
    if n <= 20:
        return np.array([math.comb(n, t) for t in range(n + 1)], dtype=float)
    return np.exp(log_binom(n, np.arange(n + 1)))


def eta_bounds(kind: str, n: int) -> tuple[float, float]:
    """Symmetric range of ``eta`` keeping every subset probability nonnegative.

    For ``"sv"`` this is ``min_s s!(n-s)!/(n+1)!``; for ``"bv"`` it is
    ``2**-n``.
    """
    kind = kind.lower()
    if kind == "sv":
        s = (n + 1) // 2
        b = math.factorial(s) * math.factorial(n - s) / math.factorial(n + 1)
    elif kind == "bv":
        b = 2.0**-n
    else:
        raise ValueError(f"eta bounds are defined for 'sv' and 'bv' priors only, not {kind!r}")
    return -b, b


@dataclass(frozen=True)
class Prior:
    """A prior in the equal-opportunity class, stored as its size distribution.

    Use the named constructors :meth:`sv`, :meth:`bv`, :meth:`bn`,
    :meth:`beta_bn` and :meth:`custom` rather than building one directly.
    """

    n: int
    kind: str
    params: tuple[float, ...]
    delta: np.ndarray = field(repr=False, compare=False)

    def __post_init__(self):
        delta = np.asarray(self.delta, dtype=float)
        if delta.shape != (self.n + 1,):
            raise ValueError(f"size distribution must have n+1={self.n + 1} entries")
        if np.any(delta < -1e-15):
            raise ValueError("size distribution has negative entries")
        if abs(delta.sum() - 1.0) > _SUM_TOL:
            raise ValueError(f"size distribution sums to {delta.sum()!r}, not 1")
        delta = np.clip(delta, 0.0, None)
        delta.setflags(write=False)
        object.__setattr__(self, "delta", delta)

    @classmethod
    def sv(cls, n: int, eta: float = 0.0) -> Prior:
        lo, hi = eta_bounds("sv", n)
        if not lo - 1e-15 <= eta <= hi + 1e-15:
            raise ValueError(f"SV eta={eta} outside [{lo}, {hi}] for n={n}")
        t = np.arange(n + 1)
        delta = 1.0 / (n + 1) + (-1.0) ** t * eta * _binom(n)
        return cls(n, "sv", (float(eta),), delta)

    @classmethod
    def bv(cls, n: int, eta: float = 0.0) -> Prior:
        lo, hi = eta_bounds("bv", n)
        if not lo - 1e-15 <= eta <= hi + 1e-15:
            raise ValueError(f"BV eta={eta} outside [{lo}, {hi}] for n={n}")
        t = np.arange(n + 1)
        delta = (2.0**-n + (-1.0) ** t * eta) * _binom(n)
        return cls(n, "bv", (float(eta),), delta)

    @classmethod
    def bn(cls, n: int, eta: float) -> Prior:
        if not 0.0 <= eta <= 1.0:
            raise ValueError(f"BN eta must lie in [0, 1], got {eta}")
        t = np.arange(n + 1)
        if 0.0 < eta < 1.0:
            delta = np.exp(log_binom(n, t) + t * math.log(eta) + (n - t) * math.log1p(-eta))
        else:
            delta = np.zeros(n + 1)
            delta[n if eta == 1.0 else 0] = 1.0
        return cls(n, "bn", (float(eta),), delta)

    @classmethod
    def beta_bn(cls, n: int, theta: float, rho: float) -> Prior:
        if theta <= 0 or rho <= 0:
            raise ValueError("beta-binomial parameters must be positive")
        t = np.arange(n + 1)
        delta = np.exp(log_binom(n, t) + betaln(theta + t, rho + n - t) - betaln(theta, rho))
        return cls(n, "betabn", (float(theta), float(rho)), delta)

    @classmethod
    def custom(cls, delta) -> Prior:
        delta = np.asarray(delta, dtype=float)
        if delta.ndim != 1 or delta.size < 2:
            raise ValueError("custom size distribution needs at least two entries")
        if np.any(delta < 0):
            raise ValueError("custom size distribution has negative entries")
        return cls(delta.size - 1, "custom", tuple(float(d) for d in delta), delta)

    def resized(self, n: int) -> Prior:
        """Same family and parameters on a different number of players."""
        if self.kind == "sv":
            return Prior.sv(n, self.params[0])
        if self.kind == "bv":
            return Prior.bv(n, self.params[0])
        if self.kind == "bn":
            return Prior.bn(n, self.params[0])
        if self.kind == "betabn":
            return Prior.beta_bn(n, *self.params)
        if n == self.n:
            return self
        raise ValueError("a custom size distribution cannot be resized")

    def size_probabilities(self) -> np.ndarray:
        """``P_T`` for a coalition of each size ``t = 0..n``."""
        if self.kind == "sv":
            t = np.arange(self.n + 1)
            base = np.exp(gammaln(t + 1) + gammaln(self.n - t + 1) - gammaln(self.n + 2))
            return base + (-1.0) ** t * self.params[0]
        if self.kind == "bv":
            return 2.0**-self.n + (-1.0) ** np.arange(self.n + 1) * self.params[0]
        return self.delta / _binom(self.n)

    def subset_probabilities(self) -> np.ndarray:
        """``P_T`` for all ``2**n`` coalitions, indexed by bitmask."""
        check_exact_size(self.n)
        sizes = np.bitwise_count(np.arange(1 << self.n, dtype=np.uint32))
        return self.size_probabilities()[sizes]

    def describe(self) -> str:
        if self.kind == "custom":
            return f"custom(n={self.n})"
        return f"{self.kind}:" + ",".join(f"{p:g}" for p in self.params)


@dataclass(frozen=True)
class SubsetPrior:
    """An arbitrary probability distribution over the ``2**n`` coalitions."""

    n: int
    probs: np.ndarray = field(repr=False, compare=False)
    kind: str = "subset"

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.shape != (1 << self.n,):
            raise ValueError("subset probabilities must have 2**n entries")
        if np.any(p < 0) or abs(p.sum() - 1.0) > _SUM_TOL:
            raise ValueError("subset probabilities must be nonnegative and sum to 1")
        object.__setattr__(self, "probs", p)

    @classmethod
    def point_mass(cls, n: int, t: int) -> SubsetPrior:
        p = np.zeros(1 << n)
        p[int(t)] = 1.0
        return cls(n, p)

    @classmethod
    def mixture(cls, c: float, first, second) -> SubsetPrior:
        if first.n != second.n:
            raise ValueError("mixture components must have the same n")
        p = c * first.subset_probabilities() + (1 - c) * second.subset_probabilities()
        return cls(first.n, p)

    def subset_probabilities(self) -> np.ndarray:
        return self.probs

    @property
    def delta(self) -> np.ndarray:
        sizes = np.bitwise_count(np.arange(1 << self.n, dtype=np.uint32))
        return np.bincount(sizes, weights=self.probs, minlength=self.n + 1)

    def describe(self) -> str:
        return f"subset(n={self.n})"


def subset_probability(prior: Prior, size: int) -> float:
    """Probability that the true model equals one particular coalition of ``size``."""
    if not 0 <= size <= prior.n:
        raise ValueError(f"size must lie in [0, {prior.n}]")
    return float(prior.size_probabilities()[size])


def expected_model_size(prior) -> float:
    d = np.asarray(prior.delta)
    return float(np.dot(np.arange(d.size), d))


def parse_prior(spec: str, n: int, base_dir: str | Path | None = None) -> Prior:
    """Parse ``sv:<eta>``, ``bv:<eta>``, ``bn:<eta>``, ``betabn:<theta>,<rho>`` or ``custom:<file>``."""
    kind, sep, arg = spec.partition(":")
    kind = kind.strip().lower()
    if not sep:
        raise ValueError(f"prior {spec!r} is missing ':' (e.g. 'sv:0')")
    if kind == "custom":
        path = Path(arg)
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        lines = [ln.strip() for ln in path.read_text().splitlines() if ln.strip()]
        prior = Prior.custom([float(x) for x in lines])
        if prior.n != n:
            raise ValueError(f"custom prior has {prior.n + 1} entries, expected n+1={n + 1}")
        return prior
    try:
        nums = [float(x) for x in arg.split(",")]
    except ValueError:
        raise ValueError(f"cannot parse prior parameters in {spec!r}") from None
    if kind in ("sv", "bv", "bn"):
        if len(nums) != 1:
            raise ValueError(f"{kind} prior takes one parameter")
        return {"sv": Prior.sv, "bv": Prior.bv, "bn": Prior.bn}[kind](n, nums[0])
    if kind == "betabn":
        if len(nums) != 2:
            raise ValueError("betabn prior takes two parameters: theta,rho")
        return Prior.beta_bn(n, *nums)
    raise ValueError(f"unknown prior kind {kind!r}")
