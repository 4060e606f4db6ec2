"""
Iterative solvers with uniform termination and evaluation accounting.

All solvers record the relative residual after every operator application in
``SolverReport.residual_history``; ``history[0]`` belongs to the initial
guess, so ``len(history) == iterations + 1``.
"""
from __future__ import annotations

import logging
import math
import re
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .operators import ComplexVector, LinearMap, accretivity_lower_bound, norm
from .splitting import PreconditionedSystem, SplitSystem

log = logging.getLogger(__name__)

__all__ = [
    "SolverConfig",
    "SolverReport",
    "ShiftConfig",
    "CONVERGED",
    "DIVERGED",
    "STAGNATED",
    "MAX_ITER",
    "classify_termination",
    "fixed_point_solve",
    "richardson_solve",
    "gmres_solve",
    "bicgstab_solve",
    "shift_split_solve",
    "shifted_preconditioned",
    "solve",
]

CONVERGED = "converged"
DIVERGED = "diverged"
STAGNATED = "stagnated"
MAX_ITER = "max_iter"


@dataclass(frozen=True)
class SolverConfig:
    """Termination and step-size settings shared by all algorithms.

    ``stagnation_margin`` belongs to the stagnation rule: a run also counts as
    stagnated when, at its recent rate, reaching ``tol`` would take more than
    ``stagnation_margin`` times the remaining iteration budget.
    """
    tol: float = 1e-3
    max_iter: int = 30000
    alpha: Optional[float] = None
    restart: Optional[int] = None
    divergence_factor: float = 1e6
    stagnation_window: int = 200
    stagnation_eps: float = 1e-8
    stagnation_margin: float = 10.0

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.restart is not None and self.restart < 1:
            raise ValueError("restart must be at least 1")
        if self.alpha is not None and not self.alpha > 0:
            raise ValueError("alpha must be positive")


@dataclass
class SolverReport:
    status: str
    iterations: int
    operator_evals: int
    residual_history: list
    wall_time: float = 0.0
    algorithm: str = ""
    raw_residual: Optional[float] = None
    outer_iterations: Optional[int] = None
    inner_evals: Optional[int] = None
    message: str = ""

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED

    @property
    def final_residual(self) -> float:
        return self.residual_history[-1]

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "iterations": self.iterations,
            "operator_evals": self.operator_evals,
            "residual_history": [float(r) for r in self.residual_history],
            "wall_time": self.wall_time,
            "algorithm": self.algorithm,
            "raw_residual": self.raw_residual,
            "outer_iterations": self.outer_iterations,
            "inner_evals": self.inner_evals,
            "message": self.message,
        }


@dataclass(frozen=True)
class ShiftConfig:
    gamma: float = 1.0
    inner: SolverConfig = field(default_factory=lambda: SolverConfig(tol=1e-4))
    inner_algorithm: str = "bicgstab"

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")


def classify_termination(history, config: SolverConfig) -> Optional[str]:
    """Status implied by a residual history, or None to keep iterating.

    In order of precedence: a non-finite residual, or growth beyond
    ``divergence_factor`` times the first one, is divergence; a last residual
    at or below ``tol`` is convergence; ``max_iter`` iterations exhaust the
    budget. A run stagnates when, over the last ``stagnation_window`` steps,
    the best residual improved by less than ``stagnation_eps`` (relative), or
    when the rate over that window projects more than ``stagnation_margin``
    times the remaining budget to reach ``tol``.
    """
    if len(history) == 0:
        raise ValueError("history must not be empty")
    last = history[-1]
    if not math.isfinite(last):
        return DIVERGED
    if last <= config.tol:
        return CONVERGED
    if last > config.divergence_factor * history[0]:
        return DIVERGED
    iterations = len(history) - 1
    if iterations >= config.max_iter:
        return MAX_ITER
    w = config.stagnation_window
    if iterations >= w:
        best_before = min(history[:-w])
        best_now = min(best_before, min(history[-w:]))
        if best_before <= 0:
            return None
        if (best_before - best_now) / best_before < config.stagnation_eps:
            return STAGNATED
        rate = (best_now / best_before) ** (1.0 / w)
        needed = math.log(config.tol / best_now) / math.log(rate)
        if needed > config.stagnation_margin * (config.max_iter - iterations):
            return STAGNATED
    return None


def _as_array(v) -> np.ndarray:
    a = v.data if isinstance(v, ComplexVector) else np.asarray(v).reshape(-1)
    return a if a.dtype in (np.complex64, np.complex128) else a.astype(np.complex128)


def _work_dtype(b: np.ndarray):
    """Single precision when the right-hand side is single precision, else double."""
    return np.complex64 if b.dtype == np.complex64 else np.complex128


def _wrap(x, like) -> ComplexVector:
    if isinstance(like, ComplexVector):
        return ComplexVector(x, like.shape, like.spacing)
    return ComplexVector(x)


def _zero_rhs_report(n, rhs, algorithm, t0):
    return _wrap(np.zeros(n, dtype=_work_dtype(_as_array(rhs))), rhs), SolverReport(
        CONVERGED, 0, 0, [0.0], time.perf_counter() - t0, algorithm, message="zero right-hand side")


def fixed_point_solve(pre: PreconditionedSystem, config: SolverConfig = SolverConfig(),
                      x0=None, raw_forward: Optional[LinearMap] = None):
    """Preconditioned fixed-point (Richardson) iteration.

    Repeats ``x <- x + α Δ`` with ``Δ = B[(L + 1)⁻¹(B x + b) - x]`` and
    monitors ``||Δ|| / ||Δ(0)||``, the preconditioned residual relative to
    that of the zero vector, which is ``||Γ⁻¹(b - A x)|| / ||Γ⁻¹b||``. Each
    iteration costs one ``(L + 1)⁻¹`` and two ``B`` applications.

    :param raw_forward: optional canonical ``A``; when given, the final
        ``||A x - b|| / ||b||`` is stored in the report.
    :return: ``(x, report)`` with ``x`` the canonical unknown.
    """
    t0 = time.perf_counter()
    alpha = config.alpha if config.alpha is not None else pre.alpha
    split = pre.split
    n = pre.dim
    dt = _work_dtype(split.source.data)
    if x0 is None:
        x = np.zeros(n, dtype=dt)
        delta = pre.residual(x)
        reference = norm(delta)
        evals = 1
    else:
        x = _as_array(x0).astype(dt, copy=True)
        reference = norm(pre.precond_source) / pre.alpha
        delta = pre.residual(x)
        evals = 2
    if reference == 0:
        return _zero_rhs_report(n, split.source, "fp", t0)

    history = [norm(delta) / reference]
    status = classify_termination(history, config)
    while status is None:
        x += alpha * delta
        delta = pre.residual(x)
        evals += 1
        history.append(norm(delta) / reference)
        status = classify_termination(history, config)

    report = SolverReport(status, len(history) - 1, evals, history, time.perf_counter() - t0,
                          f"fp{alpha:g}")
    if raw_forward is not None:
        report.raw_residual = _raw_residual(raw_forward, x, split.source.data)
    return _wrap(x, split.source), report


def _raw_residual(op: LinearMap, x, b) -> float:
    bn = norm(b)
    return norm(op._apply(x) - b) / bn if bn > 0 else 0.0


def richardson_solve(op: LinearMap, rhs, config: SolverConfig = SolverConfig(), x0=None):
    """Plain fixed-point iteration ``x <- x + α (b - A x)`` on any operator.

    Used for unpreconditioned runs and for the outer shift-splitting loop.
    The step size is ``config.alpha`` (default 1).
    """
    t0 = time.perf_counter()
    alpha = 1.0 if config.alpha is None else config.alpha
    b = _as_array(rhs)
    dt = _work_dtype(b)
    bn = norm(b)
    if bn == 0:
        return _zero_rhs_report(op.dim, rhs, "fp", t0)
    evals = 0
    if x0 is None:
        x = np.zeros(op.dim, dtype=dt)
        r = b.copy()
    else:
        x = _as_array(x0).astype(dt, copy=True)
        r = b - op.apply(x)
        evals += 1
    history = [norm(r) / bn]
    status = classify_termination(history, config)
    while status is None:
        x += alpha * r
        r = b - op.apply(x)
        evals += 1
        history.append(norm(r) / bn)
        status = classify_termination(history, config)
    return _wrap(x, rhs), SolverReport(status, len(history) - 1, evals, history,
                                       time.perf_counter() - t0, f"fp{alpha:g}")


def gmres_solve(op: LinearMap, rhs, config: SolverConfig = SolverConfig(restart=20), x0=None):
    """Restarted GMRES(m) with Givens rotations.

    Arnoldi uses modified Gram-Schmidt, repeated once when the new vector lost
    more than 30% of its norm to cancellation. The residual recorded after
    each Arnoldi step is the least-squares residual; at every restart the true
    residual ``b - A x`` is computed (one extra operator application) and
    replaces it.
    """
    t0 = time.perf_counter()
    if config.restart is None:
        raise ValueError("gmres_solve needs config.restart")
    m = config.restart
    b = _as_array(rhs)
    dt = _work_dtype(b)
    n = op.dim
    bn = norm(b)
    if bn == 0:
        return _zero_rhs_report(n, rhs, f"gmres{m}", t0)
    evals = 0
    if x0 is None:
        x = np.zeros(n, dtype=dt)
        r = b.copy()
    else:
        x = _as_array(x0).astype(dt, copy=True)
        r = b - op.apply(x)
        evals += 1
    beta = norm(r)
    history = [beta / bn]
    status = classify_termination(history, config)
    message = ""
    V = np.empty((m + 1, n), dtype=dt)
    while status is None:
        H = np.zeros((m + 1, m), dtype=np.complex128)
        cs = np.zeros(m, dtype=np.complex128)
        sn = np.zeros(m, dtype=np.complex128)
        g = np.zeros(m + 1, dtype=np.complex128)
        g[0] = beta
        V[0] = r / beta
        breakdown = False
        k = 0
        for j in range(m):
            w = op.apply(V[j])
            evals += 1
            k = j + 1
            w_norm0 = norm(w)
            for i in range(j + 1):
                H[i, j] = np.vdot(V[i], w)
                w -= H[i, j] * V[i]
            if norm(w) < 0.7 * w_norm0:
                for i in range(j + 1):
                    t = np.vdot(V[i], w)
                    H[i, j] += t
                    w -= t * V[i]
            h_next = norm(w)
            H[j + 1, j] = h_next
            for i in range(j):
                hi, hi1 = H[i, j], H[i + 1, j]
                H[i, j] = np.conj(cs[i]) * hi + np.conj(sn[i]) * hi1
                H[i + 1, j] = -sn[i] * hi + cs[i] * hi1
            rho = math.hypot(abs(H[j, j]), abs(H[j + 1, j]))
            if rho == 0:
                cs[j], sn[j] = 1.0, 0.0
            else:
                cs[j], sn[j] = H[j, j] / rho, H[j + 1, j] / rho
            H[j, j] = rho
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = np.conj(cs[j]) * g[j]
            history.append(abs(g[j + 1]) / bn)
            status = classify_termination(history, config)
            if h_next <= 1e-14 * max(w_norm0, 1e-300):
                breakdown = True
            if status is not None or breakdown:
                break
            V[j + 1] = w / h_next
        y = _back_substitute(H[:k, :k], g[:k])
        x += V[:k].T @ y
        r = b - op.apply(x)
        evals += 1
        beta = norm(r)
        history[-1] = beta / bn
        status = classify_termination(history, config)
        if status is None and breakdown:
            status = STAGNATED
            message = "Arnoldi breakdown with nonzero residual"
    return _wrap(x, rhs), SolverReport(status, len(history) - 1, evals, history,
                                       time.perf_counter() - t0, f"gmres{m}", message=message)


def _back_substitute(R, g):
    k = len(g)
    y = np.zeros(k, dtype=np.complex128)
    for i in range(k - 1, -1, -1):
        if R[i, i] == 0:
            continue
        y[i] = (g[i] - R[i, i + 1:] @ y[i + 1:]) / R[i, i]
    return y


def bicgstab_solve(op: LinearMap, rhs, config: SolverConfig = SolverConfig(), x0=None):
    """BiCGSTAB (van der Vorst). Each half step counts as one iteration.

    The residual is recorded after both operator applications of a step.
    Breakdown of ``rho`` or ``omega`` ends the run as stagnated.
    """
    t0 = time.perf_counter()
    b = _as_array(rhs)
    dt = _work_dtype(b)
    n = op.dim
    bn = norm(b)
    if bn == 0:
        return _zero_rhs_report(n, rhs, "bicgstab", t0)
    evals = 0
    if x0 is None:
        x = np.zeros(n, dtype=dt)
        r = b.copy()
    else:
        x = _as_array(x0).astype(dt, copy=True)
        r = b - op.apply(x)
        evals += 1
    r_hat = r.copy()
    rho_old = alpha = omega = 1.0
    v = np.zeros(n, dtype=dt)
    p = np.zeros(n, dtype=dt)
    history = [norm(r) / bn]
    status = classify_termination(history, config)
    message = ""
    tiny = 1e-30
    while status is None:
        rho = np.vdot(r_hat, r)
        if abs(rho) <= tiny * norm(r_hat) * norm(r):
            status, message = STAGNATED, "rho breakdown"
            break
        beta = (rho / rho_old) * (alpha / omega)
        p = r + beta * (p - omega * v)
        v = op.apply(p)
        evals += 1
        denom = np.vdot(r_hat, v)
        if abs(denom) <= tiny * norm(r_hat) * norm(v):
            status, message = STAGNATED, "breakdown in alpha"
            break
        alpha = rho / denom
        s = r - alpha * v
        history.append(norm(s) / bn)
        status = classify_termination(history, config)
        if status is not None:
            if status == CONVERGED:
                x += alpha * p
            break
        t = op.apply(s)
        evals += 1
        tt = np.vdot(t, t).real
        omega = np.vdot(t, s) / tt if tt > 0 else 0.0
        x += alpha * p + omega * s
        r = s - omega * t
        history.append(norm(r) / bn)
        status = classify_termination(history, config)
        if status is None and omega == 0:
            status, message = STAGNATED, "omega breakdown"
        rho_old = rho
    return _wrap(x, rhs), SolverReport(status, len(history) - 1, evals, history,
                                       time.perf_counter() - t0, "bicgstab", message=message)


class InnerSolveError(RuntimeError):
    def __init__(self, report: SolverReport):
        super().__init__(f"inner solve {report.status} after {report.iterations} iterations")
        self.report = report


def shifted_preconditioned(split: SplitSystem, gamma: float, alpha: Optional[float] = None) -> PreconditionedSystem:
    """Universal-split preconditioned form of ``A + γ``.

    ``A + γ = (L + γ) + V`` keeps the discrepancy ``V`` of the canonical
    split, so only the inverse ``(L + 1 + γ)⁻¹`` changes.
    """
    if split.shifted_inverse is None:
        raise ValueError(f"split system {split.name!r} cannot provide shifted inverses")
    shifted = replace(split, inv_L_plus_I=split.shifted_inverse(gamma), L_plus_I=None,
                      source=ComplexVector(np.zeros(split.dim, dtype=split.source.data.dtype), split.source.shape),
                      name=f"{split.name}+{gamma:g}")
    return PreconditionedSystem(shifted, alpha)


def _solve_preconditioned(pre: PreconditionedSystem, algorithm: str, config: SolverConfig):
    if algorithm.startswith("fp"):
        return fixed_point_solve(pre, config)
    if algorithm.startswith("gmres"):
        return gmres_solve(pre.precond_op, pre.precond_source, config)
    if algorithm == "bicgstab":
        return bicgstab_solve(pre.precond_op, pre.precond_source, config)
    raise ValueError(f"unknown algorithm {algorithm!r}")


def _solve_plain(op: LinearMap, rhs, algorithm: str, config: SolverConfig):
    if algorithm.startswith("fp"):
        return richardson_solve(op, rhs, config)
    if algorithm.startswith("gmres"):
        return gmres_solve(op, rhs, config)
    if algorithm == "bicgstab":
        return bicgstab_solve(op, rhs, config)
    raise ValueError(f"unknown algorithm {algorithm!r}")


def shift_split_solve(rawA: LinearMap, rhs, shift: ShiftConfig, outer_algorithm: str,
                      outer: SolverConfig, inner_pre: PreconditionedSystem, check_accretive: bool = True):
    """Solve ``A x = b`` with the shift-splitting preconditioner ``½(A + γ)``.

    The outer algorithm runs on ``Γ_shift⁻¹ A x = Γ_shift⁻¹ b`` where every
    application of ``Γ_shift⁻¹ = 2 (A + γ)⁻¹`` is an inner solve of
    ``inner_pre`` (the universal-split preconditioned form of ``A + γ``, see
    :func:`shifted_preconditioned`) to ``shift.inner.tol``.

    The report's ``iterations`` are outer iterations; ``operator_evals`` is the
    total of outer applications of ``A`` and inner preconditioned-operator
    evaluations, the latter also given separately as ``inner_evals``.
    """
    t0 = time.perf_counter()
    if check_accretive and not accretivity_lower_bound(rawA, n_samples=20, seed=1) > 0:
        raise ValueError("shift splitting requires a strictly accretive operator")
    counts = {"inner": 0, "forward": 0}

    def inv_shift(r):
        z, rep = _solve_preconditioned(inner_pre.with_source(r), shift.inner_algorithm, shift.inner)
        counts["inner"] += rep.operator_evals
        if rep.status != CONVERGED:
            raise InnerSolveError(rep)
        return 2.0 * z.data

    def outer_apply(x):
        counts["forward"] += 1
        return inv_shift(rawA._apply(x))

    op = LinearMap(rawA.dim, outer_apply, name="Γshift⁻¹A")
    b = _as_array(rhs)
    try:
        outer_rhs = inv_shift(b)
        x, report = _solve_plain(op, outer_rhs, outer_algorithm, outer)
    except InnerSolveError as err:
        x = _wrap(np.zeros(rawA.dim, dtype=np.complex128), rhs)
        report = SolverReport(err.report.status, 0, 0, [1.0], algorithm=outer_algorithm,
                              message=f"inner {shift.inner_algorithm} solve failed: {err}")
    report.outer_iterations = report.iterations
    report.inner_evals = counts["inner"]
    report.operator_evals = counts["forward"] + counts["inner"]
    report.wall_time = time.perf_counter() - t0
    report.algorithm = f"shift-{report.algorithm}"
    return _wrap(x.data, rhs), report


_ALGORITHM = re.compile(r"^(fp|gmres|bicgstab)(\d+(?:\.\d*)?)?$")


def parse_algorithm(label: str, config: SolverConfig = SolverConfig()):
    """Split a label such as ``"gmres20"`` or ``"fp0.9"`` into a base name and config.

    A number after ``gmres`` is the restart length, after ``fp`` the step size.
    """
    m = _ALGORITHM.match(label.strip().lower())
    if not m:
        raise ValueError(f"unknown algorithm {label!r}")
    base, num = m.groups()
    if num is not None:
        if base == "gmres":
            config = replace(config, restart=int(float(num)))
        elif base == "fp":
            config = replace(config, alpha=float(num))
        else:
            raise ValueError(f"bicgstab takes no parameter: {label!r}")
    if base == "gmres" and config.restart is None:
        config = replace(config, restart=20)
    return base, config


def solve(split: SplitSystem, algorithm: str, precond: str = "universal",
          config: SolverConfig = SolverConfig(), shift: Optional[ShiftConfig] = None):
    """Run one algorithm on a split system.

    :param algorithm: ``"fp"``, ``"gmres"`` or ``"bicgstab"``, optionally with
        a step size or restart length appended (see :func:`parse_algorithm`).
    :param precond: ``"none"`` (iterate on the canonical ``A``),
        ``"universal"`` or ``"shift"``.
    """
    label = algorithm
    algorithm, config = parse_algorithm(algorithm, config)
    if precond == "universal":
        pre = PreconditionedSystem(split, config.alpha)
        x, report = _solve_preconditioned(pre, algorithm, config)
    elif precond == "none":
        x, report = _solve_plain(split.forward, split.source, algorithm, config)
    elif precond == "shift":
        shift = shift or ShiftConfig()
        inner = shifted_preconditioned(split, shift.gamma)
        x, report = shift_split_solve(split.forward, split.source, shift, algorithm, config, inner)
    else:
        raise ValueError(f"unknown preconditioner {precond!r}")
    report.algorithm = label if precond != "shift" else f"shift-{label}"
    if split.L_plus_I is not None and report.raw_residual is None:
        report.raw_residual = _raw_residual(split.forward, x.data, split.source.data)
    return x, report
