"""Gradebook CSV files and participation filtering.

A gradebook file has one row per (student, course, session)::

    student_id,course,session,pre,post,sheet_grade,partner_id,self_assess,peer_assess,familiarity

An empty cell means missing; there are no sentinel numbers. Scores lie in
[0, 2]. The assessment columns are optional and take ``low``, ``medium``
or ``high``; an optional free-text ``concept`` column is carried along.
In memory a :class:`Gradebook` holds students x sessions matrices with NaN
for missing scores.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ValidationError
from .impute import DataMatrix
from .scoring import MAX_GRADE, ORDINAL_LEVELS

REQUIRED_COLUMNS = ("student_id", "course", "session", "pre", "post", "sheet_grade", "partner_id")
ORDINAL_COLUMNS = ("self_assess", "peer_assess", "familiarity")
TEXT_COLUMNS = ("concept",)
COLUMNS = REQUIRED_COLUMNS + ORDINAL_COLUMNS
SCORE_COLUMNS = ("pre", "post", "sheet_grade")


def _empty_objects(shape) -> np.ndarray:
    return np.full(shape, None, dtype=object)


def _truthy(arr: np.ndarray) -> np.ndarray:
    return np.array([bool(v) for v in arr.ravel()], dtype=bool).reshape(arr.shape)


@dataclass
class Gradebook:
    """Students x sessions score matrices.

    Row ``i`` is student ``students[i]`` in course ``courses[i]``; column
    ``j`` is session number ``sessions[j]``. ``attended`` is True where the
    file had a row with at least one non-empty field. When not given it is
    derived from the score and partner matrices.
    """

    students: List[str]
    courses: List[str]
    sessions: List[int]
    pre: np.ndarray
    post: np.ndarray
    sheet: np.ndarray
    partner: np.ndarray
    meta: Dict[str, np.ndarray] = field(default_factory=dict)
    attended: Optional[np.ndarray] = None

    def __post_init__(self):
        shape = (len(self.students), len(self.sessions))
        self.pre = np.asarray(self.pre, dtype=float).reshape(shape)
        self.post = np.asarray(self.post, dtype=float).reshape(shape)
        self.sheet = np.asarray(self.sheet, dtype=float).reshape(shape)
        self.partner = np.asarray(self.partner, dtype=object).reshape(shape)
        for key in list(self.meta):
            self.meta[key] = np.asarray(self.meta[key], dtype=object).reshape(shape)
        if len(self.courses) != shape[0]:
            raise ValueError("courses must align with students")
        if self.attended is None:
            att = ~np.isnan(self.pre) | ~np.isnan(self.post) | ~np.isnan(self.sheet)
            for arr in (self.partner, *self.meta.values()):
                att |= _truthy(arr)
            self.attended = att
        else:
            self.attended = np.asarray(self.attended, dtype=bool).reshape(shape)

    @property
    def n_students(self) -> int:
        return len(self.students)

    def keys(self) -> List[Tuple[str, str]]:
        return list(zip(self.courses, self.students))

    def pre_matrix(self) -> DataMatrix:
        return DataMatrix.from_array(self.pre)

    def post_matrix(self) -> DataMatrix:
        return DataMatrix.from_array(self.post)

    def sessions_attended(self) -> np.ndarray:
        return self.attended.sum(axis=1)

    def subset(self, rows: Sequence[int]) -> "Gradebook":
        rows = list(rows)
        return Gradebook(
            students=[self.students[i] for i in rows],
            courses=[self.courses[i] for i in rows],
            sessions=list(self.sessions),
            pre=self.pre[rows], post=self.post[rows], sheet=self.sheet[rows],
            partner=self.partner[rows],
            meta={k: v[rows] for k, v in self.meta.items()},
            attended=self.attended[rows],
        )

    def course_groups(self) -> Dict[str, List[int]]:
        groups: Dict[str, List[int]] = {}
        for i, c in enumerate(self.courses):
            groups.setdefault(c, []).append(i)
        return groups

    def rows(self) -> Iterable[dict]:
        """Long-format records, one per student and session."""
        for i, (course, sid) in enumerate(self.keys()):
            for j, sess in enumerate(self.sessions):
                rec = {
                    "student_id": sid, "course": course, "session": sess,
                    "pre": _num(self.pre[i, j]), "post": _num(self.post[i, j]),
                    "sheet_grade": _num(self.sheet[i, j]),
                    "partner_id": self.partner[i, j] or None,
                }
                for key, arr in self.meta.items():
                    rec[key] = arr[i, j] or None
                yield rec


def _num(x: float) -> Optional[float]:
    return None if math.isnan(x) else float(x)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


def write_gradebook(gb: Gradebook, path) -> None:
    """Write every student x session cell, absent rows included, so loading
    the file back reproduces the matrices, masks and session columns."""
    extra = [k for k in ORDINAL_COLUMNS + TEXT_COLUMNS if k in gb.meta]
    header = list(REQUIRED_COLUMNS) + extra
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for rec in gb.rows():
            w.writerow([_fmt(rec.get(k)) for k in header])


def _parse_score(text: str, column: str, line: int) -> float:
    text = text.strip()
    if text == "":
        return math.nan
    try:
        v = float(text)
    except ValueError:
        raise ValidationError(f"line {line}: {column} value {text!r} is not a number") from None
    if not 0.0 <= v <= MAX_GRADE:
        raise ValidationError(f"line {line}: {column} value {v} outside [0, {MAX_GRADE:g}]")
    return v


def read_rows(path) -> Tuple[List[dict], List[str]]:
    """Parse and validate a gradebook CSV into typed row dicts."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in REQUIRED_COLUMNS if c not in header]
        if missing:
            raise ValidationError(f"{path}: missing column(s) {missing}")
        unknown = [c for c in header if c not in COLUMNS + TEXT_COLUMNS]
        if unknown:
            raise ValidationError(f"{path}: unknown column(s) {unknown}")
        out = []
        seen = set()
        for rec in reader:
            line = reader.line_num
            if None in rec or any(v is None for v in rec.values()):
                raise ValidationError(f"line {line}: wrong number of fields")
            sid = rec["student_id"].strip()
            if not sid:
                raise ValidationError(f"line {line}: empty student_id")
            try:
                sess = int(rec["session"])
            except ValueError:
                raise ValidationError(f"line {line}: session {rec['session']!r} is not an integer") from None
            if sess < 1:
                raise ValidationError(f"line {line}: session must be >= 1")
            course = rec["course"].strip()
            key = (sid, course, sess)
            if key in seen:
                raise ValidationError(f"line {line}: duplicate row for student {sid!r}, course {course!r}, session {sess}")
            seen.add(key)
            row = {"student_id": sid, "course": course, "session": sess, "line": line}
            for col in SCORE_COLUMNS:
                v = _parse_score(rec[col], col, line)
                row[col] = None if math.isnan(v) else v
            row["partner_id"] = rec["partner_id"].strip() or None
            for col in ORDINAL_COLUMNS:
                val = (rec.get(col) or "").strip().lower()
                if val and val not in ORDINAL_LEVELS:
                    raise ValidationError(f"line {line}: {col} must be one of {ORDINAL_LEVELS}, got {val!r}")
                row[col] = val or None
            for col in TEXT_COLUMNS:
                row[col] = (rec.get(col) or "").strip() or None
            out.append(row)
    return out, [c for c in header if c in ORDINAL_COLUMNS + TEXT_COLUMNS]


def gradebook_from_rows(rows: Sequence[dict], meta_columns: Sequence[str] = ()) -> Gradebook:
    keys: Dict[Tuple[str, str], int] = {}
    for r in rows:
        keys.setdefault((r["course"], r["student_id"]), len(keys))
    sessions = sorted({r["session"] for r in rows})
    col = {s: j for j, s in enumerate(sessions)}
    shape = (len(keys), len(sessions))
    pre, post, sheet = (np.full(shape, np.nan) for _ in range(3))
    partner = _empty_objects(shape)
    meta = {c: _empty_objects(shape) for c in meta_columns}
    attended = np.zeros(shape, dtype=bool)
    for r in rows:
        i, j = keys[(r["course"], r["student_id"])], col[r["session"]]
        for name, arr in (("pre", pre), ("post", post), ("sheet_grade", sheet)):
            if r[name] is not None:
                arr[i, j] = r[name]
        partner[i, j] = r["partner_id"]
        for c in meta_columns:
            meta[c][i, j] = r.get(c)
        attended[i, j] = any(r.get(k) is not None for k in SCORE_COLUMNS + ("partner_id",) + tuple(meta_columns))
    ordered = sorted(keys, key=keys.get)
    return Gradebook(
        students=[k[1] for k in ordered], courses=[k[0] for k in ordered], sessions=sessions,
        pre=pre, post=post, sheet=sheet, partner=partner, meta=meta, attended=attended,
    )


def load_gradebook(path) -> Gradebook:
    """Load a gradebook CSV; students keep their order of first appearance."""
    rows, meta_columns = read_rows(path)
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    return gradebook_from_rows(rows, meta_columns)


def is_gradebook_file(path) -> bool:
    with open(path, newline="") as fh:
        header = next(csv.reader(fh), [])
    return all(c in header for c in REQUIRED_COLUMNS)


def filter_participation(gb: Gradebook, min_sessions: int = 3) -> Tuple[Gradebook, List[str]]:
    """Drop students who attended fewer than ``min_sessions`` sessions.

    Returns the reduced gradebook and the excluded student ids.
    """
    if min_sessions < 0:
        raise ValidationError("min_sessions must be >= 0")
    counts = gb.sessions_attended()
    keep = [i for i in range(gb.n_students) if counts[i] >= min_sessions]
    dropped = [gb.students[i] for i in range(gb.n_students) if counts[i] < min_sessions]
    if not dropped:
        return gb, []
    return gb.subset(keep), dropped
