"""Exact valuations by full enumeration of the ``2**n`` coalitions.

Every routine pulls the complete payoff table from the game once and then
works on numpy views.  For player ``i`` the table reshaped to
``(2**(n-1-i), 2, 2**i)`` splits into the coalitions without ``i`` (middle
index 0) and their partners with ``i`` (middle index 1), so marginal gains
are a single vectorised subtraction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import betaln, gammaln

from .game import Game, check_exact_size
from .priors import Prior, SubsetPrior

__all__ = [
    "MarginalityProfile",
    "UndefinedBiasRatio",
    "ValueReport",
    "banzhaf_exact",
    "beta_binomial_dvalue",
    "dvalue_exact",
    "endowment_bias",
    "expected_performance",
    "gamma_lambda_exact",
    "marginality_profile",
    "shapley_exact",
    "unbiased_dvalue_exact",
    "unbiased_shapley_exact",
    "value_report",
]

ALPHA_EPS = 1e-12


class UndefinedBiasRatio(ValueError):
    """The aggregate D-value is zero, so the endowment bias ratio is undefined."""


def _split(arr: np.ndarray, i: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Views of ``arr`` over coalitions lacking ``i`` and the same coalitions with ``i``."""
    r = arr.reshape(1 << (n - 1 - i), 2, 1 << i)
    return r[:, 0, :], r[:, 1, :]


def _payoffs(game: Game) -> np.ndarray:
    check_exact_size(game.n)
    return game.values()


def _sizes(n: int) -> np.ndarray:
    return np.bitwise_count(np.arange(1 << n, dtype=np.uint32)).astype(np.intp)


def _weighted_gains(vals: np.ndarray, n: int, weight_by_size: np.ndarray) -> np.ndarray:
    """``sum_{T ∋ i} w(|T|) [v(T) - v(T \\ i)]`` for every player ``i``."""
    w = weight_by_size[_sizes(n)]
    out = np.empty(n)
    for i in range(n):
        lo, hi = _split(vals, i, n)
        _, w_hi = _split(w, i, n)
        out[i] = np.sum(w_hi * (hi - lo))
    return out


def _log_factorial(k) -> np.ndarray:
    return gammaln(np.asarray(k, dtype=float) + 1)


def _subset_probs(prior, n: int) -> np.ndarray:
    if prior.n != n:
        raise ValueError(f"prior is for n={prior.n} players but the game has n={n}")
    return prior.subset_probabilities()


def gamma_lambda_exact(game: Game, prior: Prior | SubsetPrior) -> tuple[np.ndarray, np.ndarray]:
    """Expected marginal gain and expected marginal loss of every player."""
    n = game.n
    vals = _payoffs(game)
    p = _subset_probs(prior, n)
    gamma = np.empty(n)
    lam = np.empty(n)
    for i in range(n):
        lo, hi = _split(vals, i, n)
        p_lo, p_hi = _split(p, i, n)
        d = hi - lo
        gamma[i] = np.sum(p_hi * d)
        lam[i] = np.sum(p_lo * d)
    return gamma, lam


def dvalue_exact(game: Game, prior: Prior | SubsetPrior) -> np.ndarray:
    gamma, lam = gamma_lambda_exact(game, prior)
    return gamma + lam


def shapley_exact(game: Game) -> np.ndarray:
    n = game.n
    t = np.arange(n + 1)
    w = np.zeros(n + 1)
    w[1:] = np.exp(_log_factorial(t[1:] - 1) + _log_factorial(n - t[1:]) - _log_factorial(n))
    return _weighted_gains(_payoffs(game), n, w)


def banzhaf_exact(game: Game) -> np.ndarray:
    n = game.n
    w = np.full(n + 1, 2.0 ** -(n - 1))
    return _weighted_gains(_payoffs(game), n, w)


def unbiased_shapley_weights(n: int) -> np.ndarray:
    """Weight ``4 t!(n-t+1)!/(n+2)!`` on a marginal gain in a coalition of size ``t``."""
    t = np.arange(n + 1)
    w = 4.0 * np.exp(_log_factorial(t) + _log_factorial(n - t + 1) - _log_factorial(n + 2))
    w[0] = 0.0
    return w


def unbiased_shapley_exact(game: Game) -> np.ndarray:
    return _weighted_gains(_payoffs(game), game.n, unbiased_shapley_weights(game.n))


def beta_binomial_weights(n: int, theta: float, rho: float, adjusted: bool = False) -> np.ndarray:
    if theta <= 0 or rho <= 0:
        raise ValueError("theta and rho must be positive")
    t = np.arange(1, n + 1, dtype=float)
    w = np.zeros(n + 1)
    if adjusted:
        w[1:] = 4.0 * np.exp(betaln(theta + t, rho + n - t + 1) - betaln(theta, rho))
    else:
        w[1:] = np.exp(betaln(theta + t - 1, rho + n - t) - betaln(theta, rho))
    return w


def beta_binomial_dvalue(game: Game, theta: float, rho: float, adjusted: bool = False) -> np.ndarray:
    """D-value (or its unbiased version) with a beta-distributed binomial rate."""
    w = beta_binomial_weights(game.n, theta, rho, adjusted)
    return _weighted_gains(_payoffs(game), game.n, w)


def _lemma_bias(vals: np.ndarray, p: np.ndarray, n: int) -> np.ndarray:
    """Bias as a weighted sum of payoffs with weights ``2P_T - P_{T∪i} - P_{T∖i}``."""
    out = np.empty(n)
    idx = np.arange(1 << n)
    for i in range(n):
        bit = 1 << i
        weights = 2.0 * p - p[idx | bit] - p[idx & ~bit]
        out[i] = np.dot(weights, vals)
    return out


def endowment_bias(game: Game, prior: Prior | SubsetPrior) -> tuple[np.ndarray, float | None]:
    """Per-player endowment bias and the aggregate bias ratio.

    The bias is computed both from the gain/loss split and directly as a
    weighted sum of payoffs; a disagreement beyond ``1e-9`` (scaled by the
    payoff magnitude) raises ``RuntimeError``.  The ratio is ``None`` when the
    aggregate D-value vanishes.
    """
    gamma, lam = gamma_lambda_exact(game, prior)
    kappa = gamma - lam
    vals = _payoffs(game)
    direct = _lemma_bias(vals, _subset_probs(prior, game.n), game.n)
    scale = max(1.0, float(np.max(np.abs(vals))))
    if np.max(np.abs(direct - kappa)) > 1e-9 * scale:
        raise RuntimeError("endowment bias cross-check failed")
    return kappa, _bias_ratio(gamma, lam)


def _bias_ratio(gamma: np.ndarray, lam: np.ndarray) -> float | None:
    total = float(np.sum(gamma) + np.sum(lam))
    if abs(total) <= ALPHA_EPS:
        return None
    return float(np.sum(gamma) - np.sum(lam)) / total


def unbiased_dvalue_exact(game: Game, prior: Prior | SubsetPrior) -> np.ndarray:
    gamma, lam = gamma_lambda_exact(game, prior)
    alpha = _bias_ratio(gamma, lam)
    if alpha is None:
        raise UndefinedBiasRatio(
            "aggregate D-value is zero; inspect sum(psi) before asking for the unbiased D-value"
        )
    return (1 - alpha) * gamma + (1 + alpha) * lam


def expected_performance(game: Game, prior: Prior | SubsetPrior) -> float:
    """``E v(S)`` under the prior."""
    return float(np.dot(_subset_probs(prior, game.n), _payoffs(game)))


@dataclass
class MarginalityProfile:
    """Size-averaged marginal gains ``omega[t-1]`` (t=1..n) and losses ``pi[t]`` (t=0..n-1)."""

    omega: np.ndarray
    pi: np.ndarray
    diminishing_effect: bool
    diminishing_gain: bool
    diminishing_loss: bool


def marginality_profile(game: Game, tol: float = 1e-12) -> MarginalityProfile:
    n = game.n
    vals = _payoffs(game)
    sizes = _sizes(n)
    gain_tot = np.zeros(n + 1)
    loss_tot = np.zeros(n + 1)
    for i in range(n):
        lo, hi = _split(vals, i, n)
        s_lo, s_hi = _split(sizes, i, n)
        d = (hi - lo).ravel()
        gain_tot += np.bincount(s_hi.ravel(), weights=d, minlength=n + 1)
        loss_tot += np.bincount(s_lo.ravel(), weights=d, minlength=n + 1)
    t = np.arange(1, n + 1)
    omega = np.exp(_log_factorial(t - 1) + _log_factorial(n - t) - _log_factorial(n)) * gain_tot[1:]
    t = np.arange(n)
    pi = np.exp(_log_factorial(t) + _log_factorial(n - t - 1) - _log_factorial(n)) * loss_tot[:n]
    slack = tol * max(1.0, float(np.max(np.abs(omega), initial=0.0)))
    effect = bool(np.all(omega[: n - 1] >= pi[1:n] - slack))
    gain = bool(np.all(np.diff(omega) <= slack))
    loss = bool(np.all(np.diff(pi) <= slack))
    return MarginalityProfile(omega, pi, effect, gain, loss)


@dataclass
class ValueReport:
    """Per-player valuations of one game under one prior."""

    gamma: np.ndarray
    lambda_: np.ndarray
    psi: np.ndarray
    kappa: np.ndarray
    psi_unbiased: np.ndarray | None
    alpha: float | None
    method: str
    prior: str
    names: list[str] = field(default_factory=list)
    stderr: dict[str, np.ndarray] = field(default_factory=dict)

    def to_dict(self) -> dict:
        def arr(a):
            return None if a is None else [float(x) for x in a]

        return {
            "method": self.method,
            "prior": self.prior,
            "names": list(self.names),
            "alpha": self.alpha,
            "gamma": arr(self.gamma),
            "lambda": arr(self.lambda_),
            "psi": arr(self.psi),
            "kappa": arr(self.kappa),
            "psi_unbiased": arr(self.psi_unbiased),
            "stderr": {k: arr(v) for k, v in self.stderr.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> ValueReport:
        def arr(a):
            return None if a is None else np.asarray(a, dtype=float)

        return cls(
            gamma=arr(d["gamma"]),
            lambda_=arr(d["lambda"]),
            psi=arr(d["psi"]),
            kappa=arr(d["kappa"]),
            psi_unbiased=arr(d["psi_unbiased"]),
            alpha=d["alpha"],
            method=d["method"],
            prior=d["prior"],
            names=list(d.get("names", [])),
            stderr={k: arr(v) for k, v in d.get("stderr", {}).items()},
        )


def value_report(game: Game, prior: Prior | SubsetPrior, method: str = "exact", names=None) -> ValueReport:
    gamma, lam = gamma_lambda_exact(game, prior)
    alpha = _bias_ratio(gamma, lam)
    unbiased = None if alpha is None else (1 - alpha) * gamma + (1 + alpha) * lam
    return ValueReport(
        gamma=gamma,
        lambda_=lam,
        psi=gamma + lam,
        kappa=gamma - lam,
        psi_unbiased=unbiased,
        alpha=alpha,
        method=method,
        prior=prior.describe(),
        names=list(names) if names is not None else [f"x{i}" for i in range(game.n)],
    )
