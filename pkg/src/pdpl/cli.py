"""Command-line entry point: ``pdpl <command> [options]``.

Exit status is 0 on success, 1 for invalid input or usage, and 2 when a
numerical routine fails (singular covariance, non-convergence).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .errors import NumericalError, ValidationError
from .game import ALL_PROFILES, analyze_game, induced_game, is_prisoners_dilemma, pareto_efficient_profiles, pure_nash_equilibria
from .gradebook import Gradebook, is_gradebook_file, load_gradebook, read_rows, write_gradebook
from .impute import METHODS, FkmParams, derived_seeds, fkm_cluster, fill_from_model, impute
from .pipeline import (
    analyze_gradebook,
    format_comparison,
    format_report,
    method_comparison,
    matrix_csv_text,
    read_matrix_csv,
    select_columns,
    write_matrix_csv,
)
from .scoring import aggregate, records_from_rows, score_session
from .sim import simulate, summary

COMMANDS = ("verify-game", "score", "simulate", "impute", "analyze", "report")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}\n\n{self.format_usage()}")


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _clean(obj):
    """Make ``obj`` strict-JSON safe: numpy scalars to Python, NaN/inf to null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, allow_nan=False)


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _csv_text(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _common(p: argparse.ArgumentParser, default_format: str) -> None:
    p.add_argument("--seed", type=_seed, default=None, help="random seed (decimal or 0x-hex)")
    p.add_argument("--out", default=None, help="output path")
    p.add_argument("--format", choices=("json", "csv", "text"), default=default_format)


# -- verify-game --------------------------------------------------------------

def cmd_verify_game(args) -> int:
    m = induced_game(args.low, args.high)
    payload = analyze_game(m)
    payload["effort_low"], payload["effort_high"] = args.low, args.high
    if args.format == "json":
        _emit(dumps(payload), args.out)
    elif args.format == "csv":
        ne, po = pure_nash_equilibria(m), pareto_efficient_profiles(m)
        rows = [(p.row.label, p.col.label, m[p][0], m[p][1], p in ne, p in po)
                for p in ALL_PROFILES]
        _emit(_csv_text(["row", "col", "row_payoff", "col_payoff", "nash", "pareto"], rows), args.out)
    else:
        text = "\n".join([
            m.format_table(),
            "",
            f"PD: {'true' if is_prisoners_dilemma(m) else 'false'}",
            "NE: {" + ", ".join(payload["nash_equilibria"]) + "}",
            "Pareto efficient: {" + ", ".join(payload["pareto_efficient"]) + "}",
            "",
            dumps(payload),
        ])
        _emit(text, args.out)
    return 0


# -- score --------------------------------------------------------------------

SHEET_HEADER = ["course", "session", "student_id", "partner_id", "grade", "score", "payoff", "excluded"]


def cmd_score(args) -> int:
    rows, _ = read_rows(args.session)
    by_course = {}
    for r in rows:
        by_course.setdefault(r["course"], []).append(r)
    sheet_rows = []
    boards = {}
    sheets_json = []
    for course, course_rows in by_course.items():
        sheets = [score_session(rec) for rec in records_from_rows(course_rows)]
        boards[course] = aggregate(sheets, args.top_k).to_dict()
        for sh in sheets:
            for sid in sorted(sh.entries):
                e = sh.entries[sid]
                sheet_rows.append([course, sh.session_index, sid, e.partner_id or "",
                                   "" if e.grade is None else e.grade,
                                   "" if e.score is None else e.score,
                                   "" if e.payoff is None else e.payoff,
                                   "true" if e.excluded else "false"])
            sheets_json.append({"course": course, "session": sh.session_index,
                                "entries": [dataclasses.asdict(sh.entries[s]) for s in sorted(sh.entries)]})
    csv_text = _csv_text(SHEET_HEADER, sheet_rows)
    board_text = dumps(boards)
    if args.out:
        out = Path(args.out)
        out.write_text(csv_text)
        out.with_name(out.stem + "_leaderboard.json").write_text(board_text + "\n")
        _emit(board_text, None)
    elif args.format == "json":
        _emit(dumps({"sheets": sheets_json, "leaderboard": boards}), None)
    elif args.format == "text":
        lines = []
        for course, board in boards.items():
            lines.append(f"{course}: top {args.top_k}")
            for entry in board["leaderboard"]:
                lines.append(f"  {entry['rank']}. {entry['student_id']}  {entry['total_score']:g}")
        _emit("\n".join(lines), None)
    else:
        _emit(csv_text + board_text, None)
    return 0


# -- simulate -----------------------------------------------------------------

def _config(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    if args.seed is not None:
        cfg = dataclasses.replace(
            cfg, seed=args.seed,
            simulation=dataclasses.replace(cfg.simulation, seed=args.seed),
            fkm=dataclasses.replace(cfg.fkm, seed=args.seed),
        )
    return cfg


def write_pairings(trace, path) -> None:
    rows = []
    for s in trace.sessions:
        for a, b in s.pairs:
            rows.append([s.session_index, a, b, s.grades[a], s.grades[b], s.scores[a], s.payoffs[a], s.payoffs[b]])
        if s.unpaired is not None:
            rows.append([s.session_index, s.unpaired, "", s.grades[s.unpaired], "", "", "", ""])
    Path(path).write_text(_csv_text(
        ["session", "student_a", "student_b", "grade_a", "grade_b", "score", "payoff_a", "payoff_b"], rows))


def cmd_simulate(args) -> int:
    cfg = _config(args)
    out = Path(args.out or cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    trace = simulate(cfg.simulation)
    write_gradebook(trace.gradebook, out / "gradebook.csv")
    write_pairings(trace, out / "pairings.csv")
    info = summary(trace)
    (out / "summary.json").write_text(dumps(info) + "\n")
    if args.format == "text":
        rates = ", ".join("n/a" if r is None else f"{r:.2f}%" for r in info["reformation_rates_any"])
        lines = [f"wrote {out}/gradebook.csv, pairings.csv, summary.json",
                 f"reformation rates (sessions 2..{cfg.simulation.n_sessions}): {rates}",
                 f"missing fraction: {info['missing_fraction']:.4f}"]
        lines += [f"mean payoff {k}: {v:.4f}" for k, v in info["mean_payoff_by_policy"].items()]
        _emit("\n".join(lines), None)
    else:
        _emit(dumps(info), None)
    return 0


# -- impute / analyze input ---------------------------------------------------

def _gradebook_wide(gb: Gradebook):
    columns = [f"pre_{s}" for s in gb.sessions] + [f"post_{s}" for s in gb.sessions]
    ids = {"student_id": list(gb.students), "course": list(gb.courses)}
    return columns, ids, np.hstack([gb.pre, gb.post])


def _fkm_params(args, cfg: RunConfig) -> FkmParams:
    base = cfg.fkm
    return FkmParams(
        n_clusters=args.clusters if args.clusters is not None else base.n_clusters,
        m=args.fuzzifier if args.fuzzifier is not None else base.m,
        epsilon=args.epsilon if args.epsilon is not None else base.epsilon,
        max_iter=args.max_iter if args.max_iter is not None else base.max_iter,
        seed=base.seed,
    )


def _add_imputation_args(p) -> None:
    p.add_argument("--k", type=int, default=None, help="neighbours for knn")
    p.add_argument("--clusters", type=int, default=None, help="FKM cluster count")
    p.add_argument("--fuzzifier", type=float, default=None, help="FKM fuzzification parameter")
    p.add_argument("--epsilon", type=float, default=None, help="FKM stopping threshold")
    p.add_argument("--max-iter", type=int, default=None, help="FKM iteration cap")
    p.add_argument("--runs", type=int, default=None, help="FKM repetitions from different starts")
    p.add_argument("--config", default=None, help="JSON run configuration")


def cmd_impute(args) -> int:
    cfg = _config(args)
    if is_gradebook_file(args.input):
        columns, ids, values = _gradebook_wide(load_gradebook(args.input))
    else:
        columns, ids, values = read_matrix_csv(args.input)
    k = args.k if args.k is not None else cfg.analysis.k
    runs = args.runs if args.runs is not None else 1
    params = _fkm_params(args, cfg)
    outputs = []
    if args.method == "fkm":
        seeds = derived_seeds(params.seed, runs) if runs > 1 else [params.seed]
        if runs > 1 and not args.out:
            raise ValidationError("--runs > 1 needs --out (one file is written per run)")
        for r, s in enumerate(seeds, 1):
            model = fkm_cluster(values, dataclasses.replace(params, seed=s))
            filled = fill_from_model(values, model)
            path = args.out
            if runs > 1:
                p = Path(args.out)
                path = str(p.with_name(f"{p.stem}_run{r}{p.suffix}"))
            outputs.append({"run": r, "seed": s, "path": path, "iterations": model.iterations_run,
                            "converged": model.converged, "filled": filled})
    else:
        outputs.append({"run": 1, "seed": None, "path": args.out, "filled": impute(values, args.method, k=k)})

    for o in outputs:
        filled = o.pop("filled")
        if o["path"]:
            write_matrix_csv(o["path"], columns, filled, ids)
        else:
            sys.stdout.write(matrix_csv_text(columns, filled, ids))
    if args.out:
        info = {"method": args.method, "input": args.input, "missing_cells": int(np.isnan(values).sum()),
                "rows": int(values.shape[0]), "columns": list(columns), "outputs": outputs}
        if args.method == "knn":
            info["k"] = k
        if args.method == "fkm":
            info["fkm"] = dataclasses.asdict(params)
        _emit(dumps(info) if args.format != "text" else
              "\n".join(f"wrote {o['path']}" for o in outputs), None)
    return 0


def _analysis_input(args) -> Gradebook:
    if is_gradebook_file(args.input):
        return load_gradebook(args.input)
    columns, ids, values = read_matrix_csv(args.input)
    if not args.pre_cols or not args.post_cols:
        raise ValidationError("wide CSV input needs --pre-cols and --post-cols")
    pre_idx = select_columns(columns, args.pre_cols)
    post_idx = select_columns(columns, args.post_cols)
    if len(pre_idx) != len(post_idx):
        raise ValidationError(f"--pre-cols selects {len(pre_idx)} columns but --post-cols selects {len(post_idx)}")
    n = values.shape[0]
    students = ids.get("student_id") or next(iter(ids.values()), None) or [f"row{i + 1}" for i in range(n)]
    courses = ids.get("course") or ["all"] * n
    pre, post = values[:, pre_idx], values[:, post_idx]
    return Gradebook(students=list(students), courses=list(courses),
                     sessions=list(range(1, len(pre_idx) + 1)), pre=pre, post=post,
                     sheet=np.full(pre.shape, np.nan), partner=np.full(pre.shape, None, dtype=object))


def _analysis_kwargs(args, cfg: RunConfig) -> dict:
    a = cfg.analysis
    return dict(
        alpha=args.alpha if args.alpha is not None else a.alpha,
        m=args.m if args.m is not None else a.m_tests,
        min_sessions=args.min_sessions if args.min_sessions is not None else a.min_sessions,
        pool=args.pool or a.pool,
        k=args.k if args.k is not None else a.k,
        fkm=_fkm_params(args, cfg),
        max_score=args.max_score if args.max_score is not None else a.max_score,
    )


def _add_analysis_args(p) -> None:
    p.add_argument("--in", dest="input", required=True, help="gradebook CSV or wide score CSV")
    p.add_argument("--pre-cols", default=None, help="wide CSV: comma-separated pre-test columns or globs")
    p.add_argument("--post-cols", default=None, help="wide CSV: comma-separated post-test columns or globs")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--m", type=int, default=None, help="Bonferroni hypothesis count (default: number of sessions)")
    p.add_argument("--min-sessions", type=int, default=None, help="participation threshold (default 3)")
    p.add_argument("--pool", action="store_true", help="pool all courses into one sample")
    p.add_argument("--max-score", type=float, default=None)
    _add_imputation_args(p)


def cmd_analyze(args) -> int:
    cfg = _config(args)
    method = args.impute or cfg.analysis.method
    runs = args.runs if args.runs is not None else (cfg.analysis.runs if method == "fkm" else 1)
    report = analyze_gradebook(_analysis_input(args), method=method, runs=runs, **_analysis_kwargs(args, cfg))
    if args.format == "text":
        text = format_report(report)
    elif args.format == "csv":
        text = _csv_text(["group", "run", "seed", "n", "p", "t_squared", "critical_value", "reject_null"],
                         [[r[k] for k in ("group", "run", "seed", "n", "p", "t_squared", "critical_value",
                                          "reject_null")] for r in report["results"]])
    else:
        text = dumps(report)
    _emit(text, args.out)
    return 0


def cmd_report(args) -> int:
    cfg = _config(args)
    runs = args.runs if args.runs is not None else cfg.analysis.runs
    table = method_comparison(_analysis_input(args), runs=runs, **_analysis_kwargs(args, cfg))
    if args.format == "json":
        text = dumps(table)
    elif args.format == "csv":
        keys = ["method", "run", "group", "t_squared", "critical_value", "reject_null"]
        text = _csv_text(keys, [[r[k] for k in keys] for r in table["rows"]])
    else:
        text = format_comparison(table)
    _emit(text, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pdpl", description="Peer-learning prisoner's dilemma toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("verify-game", help="induced 2x2 game, PD check, Nash and Pareto sets")
    p.add_argument("--low", type=float, default=0.0, help="sheet grade of a defector")
    p.add_argument("--high", type=float, default=2.0, help="sheet grade of a cooperator")
    _common(p, "text")
    p.set_defaults(func=cmd_verify_game)

    p = sub.add_parser("score", help="score sessions from a gradebook-format CSV")
    p.add_argument("--session", required=True, help="CSV with sheet_grade and partner_id columns")
    p.add_argument("--top-k", type=int, default=3)
    _common(p, "csv")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("simulate", help="simulate a cohort and write gradebook/pairings/summary")
    p.add_argument("--config", default=None, help="JSON run configuration")
    _common(p, "json")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("impute", help="fill missing cells of a score CSV")
    p.add_argument("--method", choices=METHODS, required=True)
    p.add_argument("--in", dest="input", required=True)
    _add_imputation_args(p)
    _common(p, "json")
    p.set_defaults(func=cmd_impute)

    p = sub.add_parser("analyze", help="impute then run the paired Hotelling test")
    p.add_argument("--impute", choices=METHODS, default=None, help="imputation method (default mean)")
    _add_analysis_args(p)
    _common(p, "json")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("report", help="compare all imputation methods (T^2 table)")
    _add_analysis_args(p)
    _common(p, "text")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        if not argv:
            raise UsageError(parser.format_help())
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            raise UsageError(parser.format_help())
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(str(exc))
        return 1
    except NumericalError as exc:
        sys.stderr.write(f"pdpl: numerical failure: {exc}\n")
        return 2
    except (ValidationError, ValueError, OSError) as exc:
        sys.stderr.write(f"pdpl: error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
