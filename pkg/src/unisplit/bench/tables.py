"""Benchmark tables and residual dumps."""
from __future__ import annotations

import csv
import io
from typing import Dict, List, Optional, Tuple

from ..solvers import CONVERGED, DIVERGED, MAX_ITER, STAGNATED, SolverReport, parse_algorithm
from .suite import ERROR, SuiteResult

__all__ = ["format_count", "parse_count", "column_title", "render_table", "parse_table", "dump_residuals",
           "STATUS_LETTERS"]

STATUS_LETTERS = {STAGNATED: "s", MAX_ITER: "m", DIVERGED: "d", ERROR: "e"}
_LETTER_STATUS = {v: k for k, v in STATUS_LETTERS.items()}


def format_count(n: int) -> str:
    """Counts below 1000 as is, then ``"6.0 k"`` up to 99.9 k, then ``"0.7 M"``."""
    n = int(n)
    if n < 1000:
        return str(n)
    if n < 100_000:
        return f"{n / 1e3:.1f} k"
    return f"{n / 1e6:.1f} M"


def parse_count(text: str) -> int:
    """Inverse of :func:`format_count`, up to its rounding."""
    t = text.strip()
    if t.endswith("k"):
        return int(round(float(t[:-1]) * 1e3))
    if t.endswith("M"):
        return int(round(float(t[:-1]) * 1e6))
    return int(t)


def column_title(algorithm: str) -> str:
    base, cfg = parse_algorithm(algorithm)
    if base == "gmres":
        return f"GMRES{cfg.restart}"
    if base == "bicgstab":
        return "BiCGSTAB"
    alpha = 1.0 if cfg.alpha is None else cfg.alpha
    return f"FP{round(alpha * 100)}"


def _cell(report: Optional[SolverReport], measure: str) -> str:
    if report is None:
        return ""
    if report.status != CONVERGED:
        return STATUS_LETTERS.get(report.status, "e")
    if measure == "outer":
        return format_count(report.outer_iterations if report.outer_iterations is not None else report.iterations)
    return format_count(report.operator_evals)


def _sections(result: SuiteResult) -> List[Tuple[str, str, str]]:
    """``(title, preconditioner, measure)`` for every table to render."""
    out = []
    for p in result.preconditioners:
        if p.startswith("shift"):
            out.append((f"{p} (outer iterations)", p, "outer"))
            out.append((f"{p} (total evaluations)", p, "evals"))
        else:
            out.append((p, p, "evals"))
    return out


def render_table(result: SuiteResult, fmt: str = "markdown", mark_fastest: Optional[bool] = None) -> str:
    """Tables of counts per problem and algorithm, one per preconditioner.

    Converged cells hold the number of operator evaluations (outer
    iterations in the first shift table) with ``k``/``M`` suffixes; failed
    cells a letter: ``s`` stagnated, ``m`` maximum iterations, ``d``
    diverged, ``e`` error. In markdown the converged cell with the lowest
    wall time of each row is marked ``*``; CSV omits timing so that it is
    reproducible byte for byte.
    """
    if fmt not in ("markdown", "csv"):
        raise ValueError("fmt must be 'markdown' or 'csv'")
    if mark_fastest is None:
        mark_fastest = fmt == "markdown"
    titles = [column_title(a) for a in result.algorithms]
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["preconditioner", "measure", "problem"] + titles)
        for _, precond, measure in _sections(result):
            for problem in result.problems:
                w.writerow([precond, measure, problem] +
                           [_cell(result.cells.get((problem, a, precond)), measure) for a in result.algorithms])
        return buf.getvalue()

    lines = []
    sections = _sections(result) or [("", "", "evals")]
    for title, precond, measure in sections:
        if title:
            lines.append(f"### {title}")
            lines.append("")
        lines.append("| problem | " + " | ".join(titles) + " |")
        lines.append("|---" * (len(titles) + 1) + "|")
        for problem in result.problems:
            reports = [result.cells.get((problem, a, precond)) for a in result.algorithms]
            cells = [_cell(r, measure) for r in reports]
            if mark_fastest:
                times = [(r.wall_time, i) for i, r in enumerate(reports) if r is not None and r.converged]
                if times:
                    i = min(times)[1]
                    cells[i] += "*"
            lines.append(f"| {problem} | " + " | ".join(cells) + " |")
        lines.append("")
    return "\n".join(lines)


def parse_table(text: str) -> Dict[Tuple[str, str, str], Tuple[str, Optional[int]]]:
    """Read back :func:`render_table` output (either format).

    Returns ``{(section, problem, column): (status, count)}`` where
    ``count`` is None for failures and ``section`` is the table title
    (markdown) or ``"<preconditioner> (<measure>)"`` (CSV). Empty cells
    (runs that were not part of the suite) are left out.
    """
    out = {}

    def cell(s):
        s = s.strip().rstrip("*").strip()
        if s in _LETTER_STATUS:
            return _LETTER_STATUS[s], None
        return CONVERGED, parse_count(s)

    stripped = text.lstrip()
    if stripped.startswith("preconditioner,"):
        rows = list(csv.reader(io.StringIO(stripped)))
        header = rows[0][3:]
        for row in rows[1:]:
            if not row:
                continue
            section = f"{row[0]} ({row[1]})"
            for col, value in zip(header, row[3:]):
                if value.strip():
                    out[(section, row[2], col)] = cell(value)
        return out

    section, header = "", None
    for line in text.splitlines():
        line = line.strip()
        if line.startswith("### "):
            section, header = line[4:], None
        elif line.startswith("|---"):
            continue
        elif line.startswith("|"):
            parts = [p.strip() for p in line.strip("|").split("|")]
            if header is None:
                header = parts[1:]
            else:
                for col, value in zip(header, parts[1:]):
                    if value:
                        out[(section, parts[0], col)] = cell(value)
    return out


def dump_residuals(report: SolverReport, path) -> None:
    """Write the residual history as ``iteration,relative_residual`` lines (9 significant digits)."""
    with open(path, "w") as fh:
        fh.write("iteration,relative_residual\n")
        for i, r in enumerate(report.residual_history):
            fh.write(f"{i},{float(r):.9g}\n")
