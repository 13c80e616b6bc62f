"""Symmetric two-player, two-strategy games.

A :class:`PayoffMatrix2x2` maps each strategy profile to a pair
``(row payoff, column payoff)``. The helpers here check the prisoner's
dilemma ordering, enumerate pure Nash equilibria and weakly
Pareto-efficient profiles, and build the game induced by the peer-learning
score rule.

All comparisons are exact float comparisons. The inequalities involved are
strict, and an epsilon would silently change the equilibrium sets.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterator, Mapping, Tuple

from .scoring import payoff, validate_grade


class Strategy(enum.Enum):
    COOPERATE = "C"
    DEFECT = "D"

    @property
    def order(self) -> int:
        return 0 if self is Strategy.COOPERATE else 1

    def __lt__(self, other: "Strategy") -> bool:
        return self.order < other.order

    @property
    def label(self) -> str:
        return self.name.capitalize()


C = Strategy.COOPERATE
D = Strategy.DEFECT
STRATEGIES = (C, D)


@dataclass(frozen=True, order=True)
class StrategyProfile:
    row: Strategy
    col: Strategy

    def __iter__(self) -> Iterator[Strategy]:
        yield self.row
        yield self.col

    def __str__(self) -> str:
        return f"({self.row.label}, {self.col.label})"

    def deviate(self, player: int) -> "StrategyProfile":
        """Profile with ``player`` (0 = row, 1 = column) switching strategy."""
        flip = {C: D, D: C}
        if player == 0:
            return StrategyProfile(flip[self.row], self.col)
        return StrategyProfile(self.row, flip[self.col])


ALL_PROFILES = tuple(StrategyProfile(r, c) for r, c in itertools.product(STRATEGIES, STRATEGIES))


class PayoffMatrix2x2:
    """Payoffs of a 2x2 normal-form game.

    Parameters
    ----------
    payoffs : mapping
        ``{(row_strategy, col_strategy): (row_payoff, col_payoff)}``. Keys may
        be :class:`StrategyProfile` instances or plain 2-tuples of
        :class:`Strategy`. All four profiles must be present.
    """

    __slots__ = ("_payoffs",)

    def __init__(self, payoffs: Mapping) -> None:
        table: Dict[StrategyProfile, Tuple[float, float]] = {}
        for key, value in payoffs.items():
            profile = key if isinstance(key, StrategyProfile) else StrategyProfile(*key)
            row, col = value
            table[profile] = (float(row), float(col))
        missing = [str(p) for p in ALL_PROFILES if p not in table]
        if missing:
            raise ValueError(f"payoff matrix is missing profiles: {', '.join(missing)}")
        self._payoffs = table

    @classmethod
    def symmetric(cls, a: float, b: float, c: float, d: float) -> "PayoffMatrix2x2":
        """Symmetric game from the classic letters.

        ``a`` is the row payoff of Cooperate against Defect, ``b`` mutual
        defection, ``c`` mutual cooperation and ``d`` Defect against
        Cooperate.
        """
        return cls({
            (C, C): (c, c),
            (C, D): (a, d),
            (D, C): (d, a),
            (D, D): (b, b),
        })

    def __getitem__(self, profile) -> Tuple[float, float]:
        if not isinstance(profile, StrategyProfile):
            profile = StrategyProfile(*profile)
        return self._payoffs[profile]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PayoffMatrix2x2):
            return NotImplemented
        return self._payoffs == other._payoffs

    def __repr__(self) -> str:
        cells = ", ".join(f"{p}: {self._payoffs[p]}" for p in ALL_PROFILES)
        return f"PayoffMatrix2x2({cells})"

    def utility(self, player: int, profile: StrategyProfile) -> float:
        return self[profile][player]

    def is_symmetric(self) -> bool:
        return all(self[(s, t)][0] == self[(t, s)][1] for s in STRATEGIES for t in STRATEGIES)

    def letters(self) -> Tuple[float, float, float, float]:
        """Row-player payoffs ``(a, b, c, d)`` in the prisoner's dilemma naming."""
        return self[(C, D)][0], self[(D, D)][0], self[(C, C)][0], self[(D, C)][0]

    def to_dict(self) -> dict:
        return {f"{p.row.value}{p.col.value}": list(self[p]) for p in ALL_PROFILES}

    def format_table(self) -> str:
        def cell(p):
            r, c = self[p]
            return f"({r:g}, {c:g})"

        width = max(len(cell(p)) for p in ALL_PROFILES)
        head = " " * 10 + " | ".join(f"{s.label:^{width}}" for s in STRATEGIES)
        lines = [head, "-" * len(head)]
        for r in STRATEGIES:
            row = " | ".join(f"{cell(StrategyProfile(r, c)):^{width}}" for c in STRATEGIES)
            lines.append(f"{r.label:<10}{row}")
        return "\n".join(lines)


def is_prisoners_dilemma(m: PayoffMatrix2x2) -> bool:
    """True iff ``m`` is symmetric with ``a < b < c < d`` and ``(a + b) / 2 < c``.

    Asymmetric matrices return False rather than raising.
    """
    if not m.is_symmetric():
        return False
    a, b, c, d = m.letters()
    return a < b < c < d and (a + b) / 2 < c


def pure_nash_equilibria(m: PayoffMatrix2x2) -> FrozenSet[StrategyProfile]:
    """Profiles where no unilateral deviation strictly increases the deviator's payoff."""
    found = set()
    for profile in ALL_PROFILES:
        stable = all(
            m.utility(player, profile) >= m.utility(player, profile.deviate(player))
            for player in (0, 1)
        )
        if stable:
            found.add(profile)
    return frozenset(found)


def pareto_efficient_profiles(m: PayoffMatrix2x2) -> FrozenSet[StrategyProfile]:
    """Weakly Pareto-efficient profiles.

    A profile is kept unless some other profile gives *both* players a
    strictly larger payoff. This is the weak notion, so the result can be
    larger than the strongly efficient set (e.g. a constant game keeps all
    four profiles).
    """
    kept = set()
    for profile in ALL_PROFILES:
        u = m[profile]
        dominated = any(
            all(m[other][k] > u[k] for k in (0, 1))
            for other in ALL_PROFILES
            if other != profile
        )
        if not dominated:
            kept.add(profile)
    return frozenset(kept)


def induced_game(effort_low: float, effort_high: float) -> PayoffMatrix2x2:
    """Game played by two teammates under the session-score rule.

    Cooperate means handing in a sheet graded ``effort_high``, Defect one
    graded ``effort_low``. Each player's payoff is their shared session score
    minus their own grade, i.e. ``0.6 * partner - 0.4 * own``.
    """
    lo = validate_grade(effort_low, "effort_low")
    hi = validate_grade(effort_high, "effort_high")
    if not lo < hi:
        raise ValueError(f"effort_low ({lo}) must be below effort_high ({hi})")
    grade = {C: hi, D: lo}
    return PayoffMatrix2x2({
        p: (payoff(grade[p.row], grade[p.col]), payoff(grade[p.col], grade[p.row]))
        for p in ALL_PROFILES
    })


def analyze_game(m: PayoffMatrix2x2) -> dict:
    """JSON-ready summary of the equilibrium structure of ``m``."""
    return {
        "matrix": m.to_dict(),
        "is_prisoners_dilemma": is_prisoners_dilemma(m),
        "nash_equilibria": [str(p) for p in sorted(pure_nash_equilibria(m))],
        "pareto_efficient": [str(p) for p in sorted(pareto_efficient_profiles(m))],
    }
