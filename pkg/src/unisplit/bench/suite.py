"""Running a grid of problems, algorithms and preconditioners."""
from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

from ..problems.catalog import PRESETS, build_preset
from ..problems.config import ConfigError, build_from_config, load_config
from ..solvers import ShiftConfig, SolverConfig, SolverReport, parse_algorithm, solve
from ..splitting import SplitSystem, to_single_precision

log = logging.getLogger(__name__)

__all__ = ["SuiteSpec", "SuiteResult", "run_suite", "resolve_problem", "ERROR", "DEFAULT_ALGORITHMS"]

#: Status of a cell whose problem could not be built or whose solver raised.
ERROR = "error"
DEFAULT_ALGORITHMS = ("gmres20", "gmres5", "bicgstab", "fp1.0", "fp0.9", "fp0.8", "fp0.7")
_PRECONDITIONERS = ("none", "universal", "shift")

Key = Tuple[str, str, str]


def _parse_precond(label: str) -> Tuple[str, Optional[float]]:
    """``"shift"`` or ``"shift(0.5)"`` / ``"shift:0.5"`` to a kind and optional shift."""
    label = label.strip().lower()
    for sep in ("(", ":"):
        if label.startswith("shift" + sep):
            value = label[len("shift") + 1:].rstrip(")")
            try:
                return "shift", float(value)
            except ValueError:
                raise ConfigError(f"bad shift value in {label!r}") from None
    if label not in _PRECONDITIONERS:
        raise ConfigError(f"unknown preconditioner {label!r}")
    return label, None


def resolve_problem(ref: str, base_dir: str = ".", single: bool = False) -> SplitSystem:
    """Build a problem from a config path or a preset name (optionally ``preset:<name>``)."""
    name = ref[len("preset:"):] if ref.startswith("preset:") else ref
    if name in PRESETS:
        return build_preset(name, single=single)
    path = ref if os.path.isabs(ref) else os.path.join(base_dir, ref)
    split = build_from_config(load_config(path))
    return to_single_precision(split) if single else split


@dataclass
class SuiteSpec:
    """What to run: every problem with every algorithm under every preconditioner."""
    problems: List[str]
    algorithms: List[str] = field(default_factory=lambda: list(DEFAULT_ALGORITHMS))
    preconditioners: List[str] = field(default_factory=lambda: ["none", "universal"])
    tol: float = 1e-3
    max_iter: int = 30000
    shift: ShiftConfig = field(default_factory=ShiftConfig)
    single: bool = False
    base_dir: str = "."

    def __post_init__(self):
        for name in ("problems", "algorithms", "preconditioners"):
            if not getattr(self, name):
                raise ConfigError(f"suite needs a non-empty list of {name}")
        for a in self.algorithms:
            try:
                parse_algorithm(a)
            except ValueError as err:
                raise ConfigError(str(err)) from None
        for p in self.preconditioners:
            _parse_precond(p)
        for ref in self.problems:
            name = ref[len("preset:"):] if ref.startswith("preset:") else ref
            path = ref if os.path.isabs(ref) else os.path.join(self.base_dir, ref)
            if name not in PRESETS and not os.path.isfile(path):
                raise ConfigError(f"problem {ref!r} is neither a preset nor an existing file")
        self.config  # validates tol and max_iter

    @property
    def config(self) -> SolverConfig:
        try:
            return SolverConfig(tol=self.tol, max_iter=self.max_iter)
        except ValueError as err:
            raise ConfigError(str(err)) from None

    @classmethod
    def from_json(cls, path) -> "SuiteSpec":
        """Read a suite description.

        Keys: ``problems`` (list), ``algorithms``, ``preconditioners``,
        ``tol``, ``max_iter``, ``single`` and ``shift`` (an object with
        ``gamma``, ``inner_tol`` and ``inner_algorithm``).
        """
        with open(path) as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as err:
                raise ConfigError(f"{path}: {err}") from None
        if not isinstance(raw, dict) or "problems" not in raw:
            raise ConfigError(f"{path}: a suite needs a 'problems' list")
        unknown = set(raw) - {"problems", "algorithms", "preconditioners", "tol", "max_iter", "shift", "single"}
        if unknown:
            raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
        sh = raw.get("shift", {})
        shift = ShiftConfig(gamma=float(sh.get("gamma", 1.0)),
                            inner=SolverConfig(tol=float(sh.get("inner_tol", 1e-4)),
                                               max_iter=int(sh.get("inner_max_iter", 30000))),
                            inner_algorithm=sh.get("inner_algorithm", "bicgstab"))
        return cls(problems=list(raw["problems"]),
                   algorithms=list(raw.get("algorithms", DEFAULT_ALGORITHMS)),
                   preconditioners=list(raw.get("preconditioners", ["none", "universal"])),
                   tol=float(raw.get("tol", 1e-3)), max_iter=int(raw.get("max_iter", 30000)),
                   shift=shift, single=bool(raw.get("single", False)),
                   base_dir=os.path.dirname(os.path.abspath(path)))


@dataclass
class SuiteResult:
    """Reports keyed by ``(problem, algorithm, preconditioner)``, in run order."""
    problems: List[str]
    algorithms: List[str]
    preconditioners: List[str]
    cells: Dict[Key, SolverReport] = field(default_factory=dict)

    def __getitem__(self, key: Key) -> SolverReport:
        return self.cells[key]

    def row(self, problem: str, precond: str) -> List[SolverReport]:
        return [self.cells[(problem, a, precond)] for a in self.algorithms if (problem, a, precond) in self.cells]


def _error_report(algorithm: str, err: BaseException) -> SolverReport:
    return SolverReport(ERROR, 0, 0, [1.0], algorithm=algorithm, message=f"{type(err).__name__}: {err}")


def run_suite(spec: SuiteSpec, on_cell: Optional[Callable[[Key, SolverReport], None]] = None) -> SuiteResult:
    """Run every cell of the suite.

    Cells are independent: each starts from the zero vector with fresh
    counters, and a failure (a problem that cannot be built, a solver that
    raises) is stored in its cell with status ``"error"``. Shift cells keep
    outer iterations and total evaluations apart (``outer_iterations``,
    ``operator_evals``).
    """
    result = SuiteResult(list(spec.problems), list(spec.algorithms), list(spec.preconditioners))
    config = spec.config
    for problem in spec.problems:
        try:
            split = resolve_problem(problem, spec.base_dir, spec.single)
            build_error = None
        except Exception as err:  # recorded in every cell of the row
            log.warning("could not build %s: %s", problem, err)
            split, build_error = None, err
        for precond in spec.preconditioners:
            kind, gamma = _parse_precond(precond)
            shift = spec.shift if gamma is None else ShiftConfig(gamma, spec.shift.inner, spec.shift.inner_algorithm)
            for algorithm in spec.algorithms:
                key = (problem, algorithm, precond)
                if build_error is not None:
                    report = _error_report(algorithm, build_error)
                else:
                    t0 = time.perf_counter()
                    try:
                        _, report = solve(split, algorithm, precond=kind, config=config, shift=shift)
                    except Exception as err:
                        report = _error_report(algorithm, err)
                        report.wall_time = time.perf_counter() - t0
                result.cells[key] = report
                if on_cell is not None:
                    on_cell(key, report)
    return result
