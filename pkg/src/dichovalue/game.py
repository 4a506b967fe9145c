"""Coalitions as bitmasks and coalitional games with a memoized payoff oracle."""

from __future__ import annotations

import threading
from typing import Callable, Iterator, Sequence

import numpy as np

__all__ = [
    "MAX_EXACT_PLAYERS",
    "Coalition",
    "EvaluationError",
    "Game",
    "TooManyPlayersError",
    "additive_game",
    "all_coalitions",
    "table_game",
    "unanimity_game",
]

MAX_EXACT_PLAYERS = 24


class EvaluationError(RuntimeError):
    """The payoff oracle failed on a specific coalition."""

    def __init__(self, coalition: int, message: str):
        self.coalition = Coalition(coalition)
        super().__init__(f"evaluation failed for coalition {self.coalition!r}: {message}")


class TooManyPlayersError(ValueError):
    pass


class Coalition(int):
    """A subset of player indices stored as an integer bitmask.

    Player ``i`` belongs to the coalition iff bit ``i`` is set.  Being an
    ``int``, a coalition hashes and compares like its bitmask, so it can key
    dictionaries directly.
    """

    __slots__ = ()

    def __new__(cls, bits: int = 0):
        if bits < 0:
            raise ValueError("coalition bitmask must be nonnegative")
        return super().__new__(cls, bits)

    @classmethod
    def from_players(cls, players) -> Coalition:
        bits = 0
        for i in players:
            bits |= 1 << int(i)
        return cls(bits)

    @property
    def bits(self) -> int:
        return int(self)

    def size(self) -> int:
        return int.bit_count(self)

    def __contains__(self, i: int) -> bool:
        return bool((self >> i) & 1)

    def with_player(self, i: int) -> Coalition:
        return Coalition(self | (1 << i))

    def without_player(self, i: int) -> Coalition:
        return Coalition(self & ~(1 << i))

    def players(self) -> list[int]:
        out = []
        bits = int(self)
        i = 0
        while bits:
            if bits & 1:
                out.append(i)
            bits >>= 1
            i += 1
        return out

    def __iter__(self):
        return iter(self.players())

    def __repr__(self) -> str:
        return "{" + ", ".join(map(str, self.players())) + "}"


def all_coalitions(n: int) -> Iterator[Coalition]:
    """Yield every coalition of ``n`` players in ascending bitmask order."""
    if n < 1:
        raise ValueError("n must be at least 1")
    for bits in range(1 << n):
        yield Coalition(bits)


class Game:
    """A coalitional game ``(N, v)`` on players ``0..n-1``.

    Payoffs are cached by bitmask for the life of the object; repeated calls
    never re-invoke the oracle.  Concurrent access from threads is safe: a
    race can at worst evaluate the same coalition twice, and payoffs are
    deterministic, so last-writer-wins is harmless.

    Parameters
    ----------
    n : int
        Number of players.
    payoff : callable
        Maps a :class:`Coalition` to a real number.
    """

    def __init__(self, n: int, payoff: Callable[[Coalition], float], name: str | None = None):
        if n < 1:
            raise ValueError("a game needs at least one player")
        self.n = int(n)
        self.payoff = payoff
        self.name = name
        self.cache: dict[int, float] = {}
        self.oracle_calls = 0
        self._lock = threading.Lock()

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"<Game{label} n={self.n} cached={len(self.cache)}>"

    @property
    def grand(self) -> Coalition:
        return Coalition((1 << self.n) - 1)

    def evaluate(self, t: int) -> float:
        t = int(t)
        try:
            return self.cache[t]
        except KeyError:
            pass
        if t < 0 or t >> self.n:
            raise ValueError(f"coalition bitmask {t:#x} out of range for n={self.n}")
        try:
            value = float(self.payoff(Coalition(t)))
        except EvaluationError:
            raise
        except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
            raise EvaluationError(t, str(exc)) from exc
        with self._lock:
            self.oracle_calls += 1
            self.cache[t] = value
        return value

    __call__ = evaluate

    def values(self) -> np.ndarray:
        """Payoffs of all ``2**n`` coalitions, indexed by bitmask."""
        check_exact_size(self.n)
        return np.fromiter((self.evaluate(t) for t in range(1 << self.n)), dtype=float, count=1 << self.n)

    def restrict(self, players: Sequence[int], fixed: int = 0) -> Game:
        """Subgame on ``players`` with the coalition ``fixed`` always present.

        Local player ``k`` stands for global player ``players[k]``, and the
        subgame's payoff is ``v'(T) = v(T ∪ fixed)``.  The parent cache is
        shared.
        """
        players = [int(p) for p in players]
        if not players:
            raise ValueError("restriction needs at least one player")
        if fixed & Coalition.from_players(players):
            raise ValueError("fixed coalition overlaps the restricted player set")
        fixed = int(fixed)
        parent = self

        def payoff(t: Coalition) -> float:
            bits = fixed
            for k in t.players():
                bits |= 1 << players[k]
            return parent.evaluate(bits)

        return Game(len(players), payoff, name=self.name)


def check_exact_size(n: int) -> None:
    if n > MAX_EXACT_PLAYERS:
        raise TooManyPlayersError(
            f"exact enumeration is limited to n <= {MAX_EXACT_PLAYERS} players (got {n}); "
            "use the Monte Carlo sampler in dichovalue.sampling instead"
        )


def additive_game(weights, constant: float = 0.0) -> Game:
    w = np.asarray(weights, dtype=float)

    def payoff(t: Coalition) -> float:
        return constant + float(sum(w[i] for i in t.players()))

    return Game(len(w), payoff, name="additive")


def unanimity_game(n: int, carrier: int | None = None) -> Game:
    """``u_R(T) = 1`` if ``R ⊆ T`` else 0; the carrier defaults to all players."""
    carrier = (1 << n) - 1 if carrier is None else int(carrier)
    return Game(n, lambda t: 1.0 if (t & carrier) == carrier else 0.0, name="unanimity")


def table_game(values) -> Game:
    """Game defined by an explicit payoff table indexed by bitmask."""
    table = np.asarray(values, dtype=float)
    n = int(table.size).bit_length() - 1
    if table.ndim != 1 or table.size != 1 << n:
        raise ValueError("payoff table length must be a power of two")
    return Game(n, lambda t: table[t], name="table")
