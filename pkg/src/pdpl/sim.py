"""Agent-based simulation of repeated peer-learning sessions.

Each session runs: absentees are drawn, present students pair up (sticking
with a partner who treated them well, otherwise a uniformly random
matching), everyone takes a pre-test, writes a sheet whose grade comes from
their effort policy, the pair is scored, and a post-test follows

    post = clip(pre + beta * (g_self + g_partner) / 2 + noise, 0, 2)

The odd student out works alone: no score, and their own grade stands in
for the joint grade in the learning update.

Random streams
--------------
Every draw comes from ``numpy.random.default_rng([seed, session, purpose])``
with one purpose code per kind of draw (:data:`STREAMS`). Per-student draws
are taken as one vector in roster order, so appending students leaves the
draws of existing students unchanged and the sessions do not share state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import ValidationError
from .gradebook import Gradebook
from .scoring import MAX_GRADE, SessionRecord, score_session

STREAMS = {"absence": 0, "pairing": 1, "pretest": 2, "effort": 3, "noise": 4}

POLICY_KINDS = ("always_high", "always_low", "tit_for_tat", "random", "grim")
HIGH, LOW = MAX_GRADE, 0.0


@dataclass(frozen=True)
class EffortPolicy:
    """How a student decides the effort (sheet grade) for the next session.

    ``history`` passed to :func:`policy_step` is the list of grades this
    student's partners handed in, oldest first, across all sessions in which
    the student was paired.
    """

    kind: str
    threshold: float = 1.0
    p_high: float = 0.5

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ValidationError(f"unknown policy {self.kind!r}; choose from {POLICY_KINDS}")
        if not 0.0 <= self.threshold <= MAX_GRADE:
            raise ValidationError(f"tit_for_tat threshold must lie in [0, 2], got {self.threshold}")
        if not 0.0 <= self.p_high <= 1.0:
            raise ValidationError(f"random p_high must lie in [0, 1], got {self.p_high}")

    @classmethod
    def parse(cls, text: str) -> "EffortPolicy":
        """Parse ``"always_high"``, ``"tit_for_tat:1.5"``, ``"random:0.3"`` etc."""
        kind, _, arg = str(text).strip().partition(":")
        kind = kind.strip().lower()
        if not arg:
            return cls(kind)
        try:
            value = float(arg)
        except ValueError:
            raise ValidationError(f"bad policy parameter in {text!r}") from None
        if kind == "tit_for_tat":
            return cls(kind, threshold=value)
        if kind == "random":
            return cls(kind, p_high=value)
        raise ValidationError(f"policy {kind!r} takes no parameter")

    def __str__(self) -> str:
        if self.kind == "tit_for_tat":
            return f"tit_for_tat:{self.threshold:g}"
        if self.kind == "random":
            return f"random:{self.p_high:g}"
        return self.kind


def policy_step(policy: EffortPolicy, history: Sequence[float], rng=None) -> float:
    """Sheet grade chosen by ``policy`` given the partners' past grades.

    History-dependent policies cooperate on an empty history.
    """
    kind = policy.kind
    if kind == "always_high":
        return HIGH
    if kind == "always_low":
        return LOW
    if kind == "tit_for_tat":
        if not history or history[-1] >= policy.threshold:
            return HIGH
        return LOW
    if kind == "grim":
        return LOW if any(g < HIGH for g in history) else HIGH
    if rng is None:
        raise ValueError("random policy needs a random generator")
    return HIGH if rng.random() < policy.p_high else LOW


# Default population: a cooperative majority with some conditional cooperators
# and a few free riders, assigned by cycling through the roster.
DEFAULT_POLICY_CYCLE = (
    "always_high", "always_high", "always_high", "always_high", "always_high",
    "tit_for_tat:1", "tit_for_tat:1", "grim", "random:0.5", "always_low",
)


@dataclass(frozen=True)
class SimConfig:
    n_students: int = 30
    n_sessions: int = 7
    policies: Optional[Tuple[EffortPolicy, ...]] = None
    absence_prob: float = 0.1
    stickiness: float = 0.6
    beta: float = 0.2
    noise_sd: float = 0.05
    pre_mean: float = 1.0
    pre_sd: float = 0.4
    seed: int = 0
    course: str = "sim"

    def __post_init__(self):
        if int(self.n_students) != self.n_students or self.n_students < 2:
            raise ValidationError(f"n_students must be an integer >= 2, got {self.n_students}")
        if int(self.n_sessions) != self.n_sessions or self.n_sessions < 1:
            raise ValidationError(f"n_sessions must be an integer >= 1, got {self.n_sessions}")
        if not 0.0 <= self.absence_prob < 1.0:
            raise ValidationError(f"absence_prob must lie in [0, 1), got {self.absence_prob}")
        if not 0.0 <= self.stickiness <= 1.0:
            raise ValidationError(f"stickiness must lie in [0, 1], got {self.stickiness}")
        for name in ("beta", "noise_sd", "pre_sd"):
            if not getattr(self, name) >= 0:
                raise ValidationError(f"{name} must be >= 0, got {getattr(self, name)}")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2 ** 64:
            raise ValidationError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.policies is None:
            pol = tuple(EffortPolicy.parse(DEFAULT_POLICY_CYCLE[i % len(DEFAULT_POLICY_CYCLE)])
                        for i in range(self.n_students))
        elif isinstance(self.policies, (str, EffortPolicy)):
            one = self.policies if isinstance(self.policies, EffortPolicy) else EffortPolicy.parse(self.policies)
            pol = (one,) * self.n_students
        else:
            pol = tuple(p if isinstance(p, EffortPolicy) else EffortPolicy.parse(p) for p in self.policies)
            if len(pol) != self.n_students:
                raise ValidationError(f"got {len(pol)} policies for {self.n_students} students")
        object.__setattr__(self, "policies", pol)

    def student_ids(self) -> List[str]:
        width = max(3, len(str(self.n_students)))
        return [f"s{i + 1:0{width}d}" for i in range(self.n_students)]


Pair = Tuple[str, str]


def _stream(seed: int, session: int, purpose: str) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(session), STREAMS[purpose]])


def select_partners(prev_pairs: Sequence[Pair], prev_payoffs: Mapping[str, float],
                    present: Sequence[str], stickiness: float,
                    rng: np.random.Generator) -> Tuple[List[Pair], Optional[str]]:
    """Pair the present students for the next session.

    A previous pair survives when both members are present and each elects
    to stay, which happens with probability ``stickiness`` provided their
    last payoff was non-negative. Everyone else is matched uniformly at
    random; with an odd head count one student is left over.
    """
    if not present:
        raise ValueError("no students present")
    here = set(present)
    kept: List[Pair] = []
    for a, b in prev_pairs:
        if a not in here or b not in here:
            continue
        stay = [prev_payoffs.get(s, -math.inf) >= 0 and rng.random() < stickiness for s in (a, b)]
        if all(stay):
            kept.append((a, b))
    taken = {s for pair in kept for s in pair}
    rest = [s for s in sorted(here) if s not in taken]
    order = [rest[i] for i in rng.permutation(len(rest))]
    fresh = [tuple(sorted((order[i], order[i + 1]))) for i in range(0, len(order) - 1, 2)]
    unpaired = order[-1] if len(order) % 2 else None
    return sorted(kept + fresh), unpaired


@dataclass(frozen=True)
class SessionTrace:
    session_index: int
    present: Tuple[str, ...]
    pairs: Tuple[Pair, ...]
    unpaired: Optional[str]
    grades: Mapping[str, float]
    pre: Mapping[str, float]
    post: Mapping[str, float]
    scores: Mapping[str, float]
    payoffs: Mapping[str, float]


@dataclass(frozen=True)
class SimTrace:
    config: SimConfig
    students: Tuple[str, ...]
    sessions: Tuple[SessionTrace, ...]
    gradebook: Gradebook = field(repr=False)

    def policy_of(self, student: str) -> EffortPolicy:
        return self.config.policies[self.students.index(student)]


def simulate(config: SimConfig) -> SimTrace:
    """Run ``config.n_sessions`` sessions; deterministic for a fixed seed."""
    ids = config.student_ids()
    n = len(ids)
    policy = dict(zip(ids, config.policies))
    history: Dict[str, List[float]] = {s: [] for s in ids}
    prev_pairs: List[Pair] = []
    prev_payoffs: Dict[str, float] = {}
    traces = []

    T = config.n_sessions
    pre_m = np.full((n, T), np.nan)
    post_m = np.full((n, T), np.nan)
    sheet_m = np.full((n, T), np.nan)
    partner_m = np.full((n, T), None, dtype=object)

    for t in range(1, T + 1):
        absent = _stream(config.seed, t, "absence").random(n) < config.absence_prob
        present = [s for s, gone in zip(ids, absent) if not gone]
        pre_draw = np.clip(_stream(config.seed, t, "pretest").normal(config.pre_mean, config.pre_sd, n), 0.0, MAX_GRADE)
        noise = _stream(config.seed, t, "noise").normal(0.0, config.noise_sd, n)
        effort_rng = _stream(config.seed, t, "effort")

        if present:
            pairs, unpaired = select_partners(prev_pairs, prev_payoffs, present, config.stickiness,
                                              _stream(config.seed, t, "pairing"))
        else:
            pairs, unpaired = [], None
        grades = {s: policy_step(policy[s], history[s], effort_rng) for s in present}
        sheet = score_session(SessionRecord(t, tuple(pairs), grades, unpaired))

        partner = {}
        for a, b in pairs:
            partner[a], partner[b] = b, a
        pre, post = {}, {}
        for i, s in enumerate(ids):
            if absent[i]:
                continue
            joint = grades[s] if s not in partner else (grades[s] + grades[partner[s]]) / 2.0
            pre[s] = float(pre_draw[i])
            post[s] = float(np.clip(pre_draw[i] + config.beta * joint + noise[i], 0.0, MAX_GRADE))
            pre_m[i, t - 1], post_m[i, t - 1], sheet_m[i, t - 1] = pre[s], post[s], grades[s]
            partner_m[i, t - 1] = partner.get(s)

        for s, p in partner.items():
            history[s].append(grades[p])
        scored = sheet.scored()
        traces.append(SessionTrace(
            t, tuple(present), tuple(pairs), unpaired, grades, pre, post,
            {s: e.score for s, e in scored.items()},
            {s: e.payoff for s, e in scored.items()},
        ))
        prev_pairs = pairs
        prev_payoffs = {s: e.payoff for s, e in scored.items()}

    gb = Gradebook(
        students=list(ids), courses=[config.course] * n, sessions=list(range(1, T + 1)),
        pre=pre_m, post=post_m, sheet=sheet_m, partner=partner_m,
    )
    return SimTrace(config, tuple(ids), tuple(traces), gb)


def reformation_rates(trace: SimTrace, since: str = "any") -> List[float]:
    """Percentage of each session's pairs (sessions 2..T) that are repeats.

    ``since="any"`` counts a pair as reformed if the two students were
    teammates in any earlier session; ``since="previous"`` only looks at the
    immediately preceding session. Sessions without pairs give NaN.
    """
    sessions = trace.sessions if isinstance(trace, SimTrace) else trace
    return reformation_rates_from_pairs([s.pairs for s in sessions], since)


def reformation_rates_from_pairs(pairings: Sequence[Sequence[Pair]], since: str = "any") -> List[float]:
    if since not in ("any", "previous"):
        raise ValueError("since must be 'any' or 'previous'")
    seen = set()
    prev = set()
    rates = []
    for t, pairs in enumerate(pairings):
        current = {frozenset(p) for p in pairs}
        if t > 0:
            ref = seen if since == "any" else prev
            rates.append(100.0 * len(current & ref) / len(current) if current else math.nan)
        seen |= current
        prev = current
    return rates


def mean_payoff_by_policy(trace: SimTrace) -> Dict[str, float]:
    """Average per-session payoff of scored students, grouped by policy label."""
    sums: Dict[str, float] = {}
    counts: Dict[str, int] = {}
    label = {s: str(p) for s, p in zip(trace.students, trace.config.policies)}
    for sess in trace.sessions:
        for s, v in sess.payoffs.items():
            sums[label[s]] = sums.get(label[s], 0.0) + v
            counts[label[s]] = counts.get(label[s], 0) + 1
    return {k: sums[k] / counts[k] for k in sorted(sums)}


def summary(trace: SimTrace) -> dict:
    def clean(xs):
        return [None if math.isnan(x) else x for x in xs]

    cells = trace.gradebook.pre.size
    missing = int(np.isnan(trace.gradebook.pre).sum())
    return {
        "seed": trace.config.seed,
        "n_students": trace.config.n_students,
        "n_sessions": trace.config.n_sessions,
        "reformation_rates_any": clean(reformation_rates(trace, "any")),
        "reformation_rates_previous": clean(reformation_rates(trace, "previous")),
        "mean_payoff_by_policy": mean_payoff_by_policy(trace),
        "missing_fraction": missing / cells,
        "policies": {s: str(p) for s, p in zip(trace.students, trace.config.policies)},
    }
