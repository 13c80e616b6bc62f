"""Impute-then-test analysis of pre/post gradebooks.

The pre and post matrices of a group are stacked side by side (``2p``
columns) and imputed jointly, then split again and handed to the paired
Hotelling test. Groups are the courses found in the gradebook unless
``pool=True``, in which case every retained student forms one sample.
"""

from __future__ import annotations

import csv
import fnmatch
import io
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ValidationError
from .gradebook import Gradebook, filter_participation
from .impute import METHODS, FkmParams, impute, impute_fkm_runs
from .mstats import PairedOutcome, hotelling_test

IMPROVEMENT_FORMULA = "(mean(post) - mean(pre)) / max_score * 100"

_NUM = {"type": "number"}
_NUM_LIST = {"type": "array", "items": _NUM}
_SUMMARY = {
    "type": "object",
    "required": ["count", "mean", "min", "max", "sd"],
    "properties": {
        "count": {"type": "integer", "minimum": 1},
        "mean": _NUM, "min": _NUM, "max": _NUM,
        "sd": {"type": ["number", "null"]},
    },
}
RESULT_SCHEMA = {
    "type": "object",
    "required": [
        "group", "run", "seed", "missing_cells", "t_squared", "critical_value", "f_quantile",
        "alpha_overall", "alpha_per_test", "m_tests", "reject_null", "n", "p",
        "mean_diff", "improvement_pct", "descriptives", "variables",
    ],
    "properties": {
        "group": {"type": "string"},
        "run": {"type": "integer", "minimum": 1},
        "seed": {"type": ["integer", "null"]},
        "missing_cells": {"type": "integer", "minimum": 0},
        "t_squared": {"type": "number", "minimum": 0},
        "critical_value": {"type": "number", "exclusiveMinimum": 0},
        "f_quantile": {"type": "number", "exclusiveMinimum": 0},
        "alpha_overall": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "alpha_per_test": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "m_tests": {"type": "integer", "minimum": 1},
        "reject_null": {"type": "boolean"},
        "n": {"type": "integer", "minimum": 2},
        "p": {"type": "integer", "minimum": 1},
        "mean_diff": _NUM_LIST,
        "improvement_pct": _NUM_LIST,
        "descriptives": {
            "type": "object",
            "required": ["pre", "post", "diff"],
            "additionalProperties": {"type": "array", "items": _SUMMARY},
        },
        "variables": {"type": "array", "items": {"type": "string"}},
        "dropped_sessions": {"type": "array", "items": {"type": "integer"}},
    },
}
REPORT_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "title": "analysis report",
    "type": "object",
    "required": ["method", "seed", "alpha", "m", "min_sessions", "pooled", "n_input",
                 "n_retained", "excluded", "imputation", "improvement_formula", "results"],
    "properties": {
        "method": {"enum": list(METHODS)},
        "seed": {"type": ["integer", "null"]},
        "alpha": {"type": "number"},
        "m": {"type": ["integer", "null"]},
        "min_sessions": {"type": "integer", "minimum": 0},
        "pooled": {"type": "boolean"},
        "n_input": {"type": "integer"},
        "n_retained": {"type": "integer"},
        "excluded": {"type": "array", "items": {"type": "string"}},
        "imputation": {"type": "object"},
        "improvement_formula": {"type": "string"},
        "results": {"type": "array", "minItems": 1, "items": RESULT_SCHEMA},
    },
}


def _impute_runs(combined: np.ndarray, method: str, k: int, fkm: FkmParams, runs: int):
    if method == "fkm":
        return [(s, filled) for s, _, filled in impute_fkm_runs(combined, fkm, runs)]
    return [(None, impute(combined, method, k=k))]


def analyze_matrices(pre, post, method: str = "mean", alpha: float = 0.05, m: Optional[int] = None,
                     k: int = 5, fkm: Optional[FkmParams] = None, runs: int = 1,
                     max_score: float = 2.0, variables: Optional[Sequence[str]] = None,
                     group: str = "all") -> List[dict]:
    """Impute ``[pre | post]`` and run the paired Hotelling test.

    Returns one result dict per imputation run (``runs`` applies to FKM
    only; the deterministic methods always give a single result).
    """
    if method not in METHODS:
        raise ValidationError(f"unknown imputation method {method!r}; choose from {METHODS}")
    pre = np.asarray(pre, dtype=float)
    post = np.asarray(post, dtype=float)
    if pre.shape != post.shape:
        raise ValidationError(f"pre {pre.shape} and post {post.shape} differ in shape")
    p = pre.shape[1]
    combined = np.hstack([pre, post])
    n_missing = int(np.isnan(combined).sum())
    m_tests = p if m is None else int(m)
    out = []
    for run, (seed, filled) in enumerate(_impute_runs(combined, method, k, fkm or FkmParams(), runs), 1):
        rep = hotelling_test(PairedOutcome(filled[:, :p], filled[:, p:]), alpha, m_tests,
                             max_score, list(variables) if variables else None)
        out.append({"group": group, "run": run, "seed": seed, "missing_cells": n_missing, **rep.to_dict()})
    return out


def analyze_gradebook(gb: Gradebook, method: str = "mean", alpha: float = 0.05, m: Optional[int] = None,
                      min_sessions: int = 3, pool: bool = False, k: int = 5,
                      fkm: Optional[FkmParams] = None, runs: int = 1, max_score: float = 2.0) -> dict:
    """Filter participation, then impute and test each course group.

    Sessions with no observed pre or post score inside a group are dropped
    from that group's test and listed under ``dropped_sessions``.
    """
    fkm = fkm or FkmParams()
    kept, excluded = filter_participation(gb, min_sessions)
    if kept.n_students == 0:
        raise ValidationError("no students left after the participation filter")
    groups = {"all": list(range(kept.n_students))} if pool else kept.course_groups()
    results = []
    for name, rows in groups.items():
        pre, post = kept.pre[rows], kept.post[rows]
        usable = (~np.isnan(pre)).any(axis=0) & (~np.isnan(post)).any(axis=0)
        cols = np.flatnonzero(usable)
        if cols.size == 0:
            raise ValidationError(f"group {name!r} has no session with both pre and post observations")
        labels = [f"session{kept.sessions[j]}" for j in cols]
        res = analyze_matrices(pre[:, cols], post[:, cols], method, alpha, m, k, fkm, runs,
                               max_score, labels, name)
        dropped = [kept.sessions[j] for j in np.flatnonzero(~usable)]
        for r in res:
            r["dropped_sessions"] = dropped
        results.extend(res)
    return {
        "method": method,
        "seed": fkm.seed,
        "alpha": alpha,
        "m": m,
        "min_sessions": min_sessions,
        "pooled": bool(pool),
        "n_input": gb.n_students,
        "n_retained": kept.n_students,
        "excluded": excluded,
        "imputation": _imputation_params(method, k, fkm, runs),
        "improvement_formula": IMPROVEMENT_FORMULA,
        "results": results,
    }


def _imputation_params(method: str, k: int, fkm: FkmParams, runs: int) -> dict:
    if method == "knn":
        return {"k": k}
    if method == "fkm":
        return {"n_clusters": fkm.n_clusters, "m": fkm.m, "epsilon": fkm.epsilon,
                "max_iter": fkm.max_iter, "runs": runs, "seed": fkm.seed}
    return {}


def method_comparison(gb: Gradebook, methods: Sequence[str] = METHODS, runs: int = 3, **kwargs) -> dict:
    """Run :func:`analyze_gradebook` once per imputation method.

    FKM is repeated ``runs`` times from different starts. The ``rows``
    entry lists one T^2 per (method, run, group), like a results table.
    """
    reports = []
    rows = []
    for method in methods:
        rep = analyze_gradebook(gb, method=method, runs=runs if method == "fkm" else 1, **kwargs)
        reports.append(rep)
        for r in rep["results"]:
            rows.append({
                "method": method, "run": r["run"], "group": r["group"],
                "t_squared": r["t_squared"], "critical_value": r["critical_value"],
                "reject_null": r["reject_null"],
            })
    return {"rows": rows, "reports": reports}


def format_comparison(table: dict) -> str:
    lines = [f"{'method':<14}{'group':<12}{'T^2':>14}{'critical':>12}  reject"]
    for r in table["rows"]:
        label = r["method"] if r["method"] != "fkm" else f"fkm (run {r['run']})"
        lines.append(f"{label:<14}{r['group']:<12}{r['t_squared']:>14.4f}{r['critical_value']:>12.4f}  "
                     f"{'yes' if r['reject_null'] else 'no'}")
    return "\n".join(lines)


def format_report(report: dict) -> str:
    lines = [
        f"method: {report['method']}  alpha: {report['alpha']}  retained {report['n_retained']} "
        f"of {report['n_input']} (min_sessions={report['min_sessions']})",
    ]
    for r in report["results"]:
        lines.append(
            f"[{r['group']} run {r['run']}] n={r['n']} p={r['p']} T^2={r['t_squared']:.4f} "
            f"critical={r['critical_value']:.4f} (alpha/m={r['alpha_per_test']:.6g}) "
            f"reject H0: {'yes' if r['reject_null'] else 'no'}"
        )
        pct = ", ".join(f"{v:.2f}%" for v in r["improvement_pct"])
        lines.append(f"    improvement per variable: {pct}")
    return "\n".join(lines)


# -- wide numeric CSV files -------------------------------------------------

def read_matrix_csv(path) -> Tuple[List[str], Dict[str, List[str]], np.ndarray]:
    """Read a wide CSV; empty cells are missing.

    Columns whose non-empty cells all parse as numbers form the matrix;
    any other column is returned verbatim as an identifier column.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise ValidationError(f"{path}: empty file")
        body = []
        for row in reader:
            if not row:
                continue
            if len(row) != len(header):
                raise ValidationError(f"{path}, line {reader.line_num}: expected {len(header)} fields, got {len(row)}")
            body.append(row)
    numeric, ids = [], {}
    for j, name in enumerate(header):
        cells = [r[j].strip() for r in body]
        try:
            [float(c) for c in cells if c]
        except ValueError:
            ids[name] = [r[j] for r in body]
            continue
        numeric.append(j)
    values = np.array([[float(r[j]) if r[j].strip() else math.nan for j in numeric] for r in body],
                      dtype=float).reshape(len(body), len(numeric))
    return [header[j] for j in numeric], ids, values


def matrix_csv_text(columns: Sequence[str], values: np.ndarray,
                    ids: Optional[Dict[str, List[str]]] = None) -> str:
    ids = ids or {}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(ids) + list(columns))
    for i, row in enumerate(values):
        w.writerow([ids[c][i] for c in ids] + ["" if math.isnan(v) else repr(float(v)) for v in row])
    return buf.getvalue()


def write_matrix_csv(path, columns: Sequence[str], values: np.ndarray,
                     ids: Optional[Dict[str, List[str]]] = None) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(matrix_csv_text(columns, values, ids))


def select_columns(columns: Sequence[str], spec: str) -> List[int]:
    """Indices of ``columns`` matching a comma-separated list of names or globs."""
    picked: List[int] = []
    for pattern in (s.strip() for s in spec.split(",")):
        if not pattern:
            continue
        hits = [j for j, c in enumerate(columns) if fnmatch.fnmatchcase(c, pattern)]
        if not hits:
            raise ValidationError(f"column spec {pattern!r} matches no numeric column")
        picked.extend(j for j in hits if j not in picked)
    return picked
