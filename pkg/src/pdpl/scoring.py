"""Session scores, payoffs and cumulative standings.

Both teammates receive the same session score ``(g_self + g_partner) / 2 * 1.2``.
A student's payoff is that score minus their own sheet grade, which works
out to ``0.6 * g_partner - 0.4 * g_self``. Scores are deliberately left
uncapped (2.4 for two perfect sheets) so that mutual full effort pays 0.4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

MAX_GRADE = 2.0
SCORE_MULTIPLIER = 1.2
ORDINAL_LEVELS = ("low", "medium", "high")


def validate_grade(value, name: str = "grade") -> float:
    g = float(value)
    if math.isnan(g) or not 0.0 <= g <= MAX_GRADE:
        raise ValueError(f"{name} must lie in [0, {MAX_GRADE:g}], got {value!r}")
    return g


def session_score(g_self: float, g_partner: float) -> float:
    """Score shared by both members of a pair, in [0, 2.4].

    Evaluated as ``(g_self + g_partner) * 6 / 10`` so that grades with one
    decimal give the exact decimal result (e.g. 2.4 rather than
    2.4000000000000004).
    """
    gs = validate_grade(g_self, "g_self")
    gp = validate_grade(g_partner, "g_partner")
    return (gs + gp) * 6.0 / 10.0


def payoff(g_self: float, g_partner: float) -> float:
    """Session score minus own grade: ``0.6 * g_partner - 0.4 * g_self``.

    >>> payoff(0, 2), payoff(2, 0), payoff(2, 2)
    (1.2, -0.8, 0.4)
    """
    gs = validate_grade(g_self, "g_self")
    gp = validate_grade(g_partner, "g_partner")
    return (6.0 * gp - 4.0 * gs) / 10.0


def _check_ordinal(ratings: Optional[Mapping[str, str]], name: str) -> Dict[str, str]:
    if not ratings:
        return {}
    out = {}
    for sid, level in ratings.items():
        if level not in ORDINAL_LEVELS:
            raise ValueError(f"{name} for {sid!r} must be one of {ORDINAL_LEVELS}, got {level!r}")
        out[sid] = level
    return out


@dataclass(frozen=True)
class SessionRecord:
    """Everything handed in during one session.

    ``self_assessment``, ``peer_assessment`` and ``familiarity`` are carried
    along as metadata on the {low, medium, high} scale and never enter the
    score.
    """

    session_index: int
    pairs: Tuple[Tuple[str, str], ...] = ()
    grades: Mapping[str, float] = field(default_factory=dict)
    unpaired: Optional[str] = None
    self_assessment: Mapping[str, str] = field(default_factory=dict)
    peer_assessment: Mapping[str, str] = field(default_factory=dict)
    familiarity: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if int(self.session_index) < 1:
            raise ValueError(f"session_index must be >= 1, got {self.session_index}")
        object.__setattr__(self, "pairs", tuple((str(a), str(b)) for a, b in self.pairs))
        seen = set()
        for a, b in self.pairs:
            if a == b:
                raise ValueError(f"session {self.session_index}: student {a!r} paired with self")
            for s in (a, b):
                if s in seen:
                    raise ValueError(f"session {self.session_index}: student {s!r} appears in two pairs")
                seen.add(s)
        if self.unpaired is not None and self.unpaired in seen:
            raise ValueError(f"session {self.session_index}: unpaired student {self.unpaired!r} is also paired")
        for name in ("self_assessment", "peer_assessment", "familiarity"):
            object.__setattr__(self, name, _check_ordinal(getattr(self, name), name))

    def members(self) -> List[str]:
        out = [s for pair in self.pairs for s in pair]
        if self.unpaired is not None:
            out.append(self.unpaired)
        return out


@dataclass(frozen=True)
class ScoreEntry:
    student_id: str
    grade: Optional[float]
    partner_id: Optional[str]
    score: Optional[float]
    payoff: Optional[float]
    excluded: bool = False


@dataclass(frozen=True)
class ScoreSheet:
    session_index: int
    entries: Mapping[str, ScoreEntry]

    def __len__(self) -> int:
        return len(self.entries)

    def scored(self) -> Dict[str, ScoreEntry]:
        return {s: e for s, e in self.entries.items() if not e.excluded}


def score_session(record: SessionRecord) -> ScoreSheet:
    """Score every pair in ``record``.

    The odd student out (``record.unpaired``) keeps their raw grade but is
    flagged excluded and receives neither a score nor a payoff.
    """
    entries: Dict[str, ScoreEntry] = {}
    for a, b in record.pairs:
        for s in (a, b):
            if s not in record.grades or record.grades[s] is None:
                raise ValueError(f"session {record.session_index}: paired student {s!r} has no sheet grade")
        ga, gb = float(record.grades[a]), float(record.grades[b])
        shared = session_score(ga, gb)
        entries[a] = ScoreEntry(a, ga, b, shared, payoff(ga, gb))
        entries[b] = ScoreEntry(b, gb, a, shared, payoff(gb, ga))
    if record.unpaired is not None:
        raw = record.grades.get(record.unpaired)
        grade = None if raw is None else validate_grade(raw, f"grade of {record.unpaired!r}")
        entries[record.unpaired] = ScoreEntry(record.unpaired, grade, None, None, None, excluded=True)
    return ScoreSheet(record.session_index, entries)


@dataclass(frozen=True)
class StudentTotal:
    student_id: str
    total_score: float
    total_payoff: float
    sessions_scored: int
    sessions_attended: int
    absences: int


@dataclass(frozen=True)
class Standings:
    totals: Mapping[str, StudentTotal]
    leaderboard: Tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "leaderboard": [
                {"rank": i + 1, "student_id": s, "total_score": self.totals[s].total_score}
                for i, s in enumerate(self.leaderboard)
            ],
            "totals": {
                s: {
                    "total_score": t.total_score,
                    "total_payoff": t.total_payoff,
                    "sessions_scored": t.sessions_scored,
                    "sessions_attended": t.sessions_attended,
                    "absences": t.absences,
                }
                for s, t in sorted(self.totals.items())
            },
        }


def aggregate(sheets: Sequence[ScoreSheet], top_k: int = 3) -> Standings:
    """Cumulative totals over sessions and a top-``top_k`` leaderboard.

    A student missing from a sheet is counted as absent for that session
    and contributes nothing to the sums. Leaderboard ties go to the smaller
    student id.
    """
    if top_k < 0:
        raise ValueError("top_k must be non-negative")
    indices = [s.session_index for s in sheets]
    dupes = sorted({i for i in indices if indices.count(i) > 1})
    if dupes:
        raise ValueError(f"duplicate session index: {dupes}")

    score_sum: Dict[str, float] = {}
    payoff_sum: Dict[str, float] = {}
    scored: Dict[str, int] = {}
    attended: Dict[str, int] = {}
    # sort so floating-point sums do not depend on the order sheets arrive in
    for sheet in sorted(sheets, key=lambda s: s.session_index):
        for sid, entry in sheet.entries.items():
            attended[sid] = attended.get(sid, 0) + 1
            score_sum.setdefault(sid, 0.0)
            payoff_sum.setdefault(sid, 0.0)
            scored.setdefault(sid, 0)
            if not entry.excluded:
                score_sum[sid] += entry.score
                payoff_sum[sid] += entry.payoff
                scored[sid] += 1

    n = len(sheets)
    totals = {
        sid: StudentTotal(sid, score_sum[sid], payoff_sum[sid], scored[sid], attended[sid], n - attended[sid])
        for sid in attended
    }
    ranked = sorted(totals, key=lambda s: (-totals[s].total_score, s))
    return Standings(totals, tuple(ranked[:top_k]))


def records_from_rows(rows: Iterable[Mapping]) -> List[SessionRecord]:
    """Group gradebook rows into one :class:`SessionRecord` per session.

    Rows are mappings with keys ``student_id``, ``session``, ``sheet_grade``
    and ``partner_id`` (plus the optional assessment fields). Partner links
    must be mutual. A student with a grade and no partner is the unpaired
    student; a session may have at most one.
    """
    by_session: Dict[int, List[Mapping]] = {}
    for row in rows:
        by_session.setdefault(int(row["session"]), []).append(row)

    records = []
    for idx in sorted(by_session):
        partner = {}
        grades = {}
        meta = {"self_assessment": {}, "peer_assessment": {}, "familiarity": {}}
        for row in by_session[idx]:
            sid = str(row["student_id"])
            if row.get("sheet_grade") is not None:
                grades[sid] = row["sheet_grade"]
            if row.get("partner_id"):
                partner[sid] = str(row["partner_id"])
            for key, target in (("self_assess", "self_assessment"),
                                ("peer_assess", "peer_assessment"),
                                ("familiarity", "familiarity")):
                if row.get(key):
                    meta[target][sid] = row[key]
        pairs = []
        for a, b in partner.items():
            if partner.get(b) != a:
                raise ValueError(f"session {idx}: {a!r} lists partner {b!r} but the link is not mutual")
            if a < b:
                pairs.append((a, b))
        alone = sorted(s for s in grades if s not in partner)
        if len(alone) > 1:
            raise ValueError(f"session {idx}: more than one unpaired student: {alone}")
        records.append(SessionRecord(
            idx, tuple(pairs), grades, alone[0] if alone else None, **meta
        ))
    return records
