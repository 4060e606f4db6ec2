"""Benchmark harness: suites of solver runs, tables and residual dumps."""
from .suite import ERROR, SuiteResult, SuiteSpec, resolve_problem, run_suite
from .tables import dump_residuals, format_count, parse_count, parse_table, render_table
