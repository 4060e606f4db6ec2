"""
Pantograph delay-differential equation ``-x'(t) = a(t) x(t) + b(t) x(λt)`` for ``t >= t0``,
with ``x = x0`` before ``t0``.

The unknown lives on ``t_j = t0 + j dt`` for ``j = 1..n``. The start value
enters as a source at the first node, so the time derivative (a centered
difference with zero boundary values) stays skew-Hermitian. Dilated samples
``x(λ t_j)`` are linearly interpolated; parts that fall at or before ``t0``
use the known history and move to the right-hand side.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from ..operators import ComplexVector, LinearMap
from ..splitting import (DEFAULT_ALPHA, DEFAULT_TARGET_NORM, ScaleRecord, SplitSystem, antisymmetrize,
                         smallest_enclosing_circle)

log = logging.getLogger(__name__)

__all__ = ["PantographSpec", "build_pantograph_split", "pantograph_raw", "derivative_matrix",
           "dilation_matrix", "reference_solution"]


def _as_fn(v) -> Callable:
    if callable(v):
        return v
    value = complex(v)
    return lambda t: np.full(np.shape(t), value, dtype=np.complex128)


@dataclass
class PantographSpec:
    """Coefficients, history and time grid.

    ``a``, ``b`` and ``x0`` may be constants or vectorized functions of
    time. The grid has ``round((t_end - t0)/dt)`` unknowns.
    """
    lam: float
    a: object
    b: object
    x0: object
    t0: float
    t_end: float
    dt: float
    name: str = "pantograph"

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_end > self.t0 + self.dt:
            raise ValueError("t_end must exceed t0 by more than one step")
        self.a_fn, self.b_fn, self.x0_fn = _as_fn(self.a), _as_fn(self.b), _as_fn(self.x0)

    @property
    def n(self) -> int:
        return int(round((self.t_end - self.t0) / self.dt))

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(1, self.n + 1)


def derivative_matrix(n: int, dt: float):
    """Centered difference with zero values outside the grid; exactly antisymmetric."""
    off = np.full(n - 1, 0.5 / dt)
    return scipy.sparse.diags([-off, off], [-1, 1], shape=(n, n), format="csr", dtype=np.complex128)


def dilation_matrix(spec: PantographSpec):
    """Interpolation matrix of ``x(λ t)`` and the history part it cannot see.

    Returns ``(Dil, history)`` where ``(Dil @ x)_j + history_j`` approximates
    ``x(λ t_j)``, ``history_j`` collecting samples at or before ``t0``.
    """
    t = spec.times
    n = spec.n
    s = spec.lam * t
    q = (s - spec.t0) / spec.dt
    if np.any(q > n + 1e-9):
        raise ValueError("dilated times run past the end of the grid; extend t_end or use lam <= 1")
    rows, cols, vals = [], [], []
    history = np.zeros(n, dtype=np.complex128)
    before = q <= 0
    history[before] = spec.x0_fn(s[before])
    x_start = complex(spec.x0_fn(np.array([spec.t0]))[0])
    for j in np.flatnonzero(~before):
        lo = int(math.floor(q[j] + 1e-12))
        frac = q[j] - lo
        if frac < 1e-12:
            frac = 0.0
        lo = min(lo, n)
        # node index k (k >= 1) is unknown k - 1; node 0 is the known start value
        for node, weight in ((lo, 1.0 - frac), (lo + 1, frac)):
            if weight == 0.0:
                continue
            if node == 0:
                history[j] += weight * x_start
            else:
                rows.append(j)
                cols.append(node - 1)
                vals.append(weight)
    Dil = scipy.sparse.csr_matrix((vals, (rows, cols)), shape=(n, n), dtype=np.complex128)
    return Dil, history


def _norm_bound(m) -> float:
    """``sqrt(||m||_1 ||m||_inf)``, an upper bound on the spectral norm."""
    a = abs(m)
    return float(math.sqrt(a.sum(axis=0).max() * a.sum(axis=1).max())) if m.nnz else 0.0


def pantograph_raw(spec: PantographSpec):
    """Raw pieces ``(∂t, a, b, Dil, rhs)`` with ``(∂t + a + b Dil) x = rhs``."""
    t = spec.times
    Dt = derivative_matrix(spec.n, spec.dt)
    Dil, history = dilation_matrix(spec)
    a = np.asarray(spec.a_fn(t), dtype=np.complex128)
    b = np.asarray(spec.b_fn(t), dtype=np.complex128)
    rhs = -b * history
    rhs[0] += complex(spec.x0_fn(np.array([spec.t0]))[0]) * 0.5 / spec.dt
    return Dt, a, b, Dil, rhs


def build_pantograph_split(spec: PantographSpec, target_norm: float = DEFAULT_TARGET_NORM,
                           alpha: float = DEFAULT_ALPHA, antisymmetric: bool = False) -> SplitSystem:
    """Canonical split with ``L̂ = ∂t + ā`` and ``V̂ = (a - ā) + b Dil``.

    ``ā`` is the center of the smallest circle around the samples of ``a``.
    The scale ``c = (max|a - ā| + max|b| ||Dil||) / target_norm`` bounds
    ``||V||`` by ``target_norm``, using ``||Dil|| <= sqrt(||Dil||_1 ||Dil||_inf)``.
    With ``antisymmetric`` the system is embedded in the skew-Hermitian
    block form, which converges for any coefficients.
    """
    Dt, a, b, Dil, rhs = pantograph_raw(spec)
    n = spec.n
    circle = smallest_enclosing_circle(a)
    a_bias = circle.center
    v_bound = circle.radius + float(np.abs(b).max()) * _norm_bound(Dil)
    Vraw = scipy.sparse.diags(a - a_bias) + scipy.sparse.diags(b) @ Dil
    Vraw = Vraw.tocsr()
    Vraw_h = Vraw.conj().T.tocsr()
    Lraw = (Dt + a_bias * scipy.sparse.identity(n, dtype=np.complex128, format="csr")).tocsr()
    info = dict(bias=a_bias, v_bound=v_bound, times=spec.times)
    floor = abs(a_bias) or 1.0

    if antisymmetric:
        rawL = LinearMap.from_matrix(Lraw, name="L̂")
        rawV = LinearMap(n, lambda x: Vraw @ x, lambda y: Vraw_h @ y, matrix=Vraw, name="V̂")
        split = antisymmetrize(rawL, rawV, ComplexVector(rhs), target_norm, v_norm=v_bound,
                               alpha=alpha, floor=floor, name=spec.name)
        split.info.update(info)
        return split

    degenerate = v_bound == 0
    c = (v_bound if not degenerate else floor) / target_norm
    eye = scipy.sparse.identity(n, dtype=np.complex128, format="csc")
    lpi = (Lraw / c + eye).tocsc()
    lu = scipy.sparse.linalg.splu(lpi)
    lu_h = scipy.sparse.linalg.splu(lpi.conj().T.tocsc())
    inv = LinearMap(n, lu.solve, lu_h.solve, name="(L+1)⁻¹")
    V = (Vraw / c).tocsr()
    Vh = V.conj().T.tocsr()
    B = LinearMap(n, lambda x: x - V @ x, lambda y: y - Vh @ y, matrix=(eye - V).tocsr(), name="B")

    def shifted(s):
        f = scipy.sparse.linalg.splu((lpi + s * eye).tocsc())
        return LinearMap(n, f.solve, name=f"(L+1+{s:g})⁻¹")

    return SplitSystem(inv_L_plus_I=inv, B=B, scale=ScaleRecord(scalar_scale=c, target_norm=target_norm,
                                                                degenerate=degenerate),
                       alpha=alpha, source=ComplexVector(rhs / c), certified_V_norm=v_bound / c if not degenerate else 0.0,
                       L_plus_I=LinearMap.from_matrix(lpi, name="L+1"), shifted_inverse=shifted,
                       name=spec.name, info=info)


def reference_solution(spec: PantographSpec, rtol: float = 1e-10, atol: float = 1e-12):
    """Independent solution by the method of steps with an adaptive ODE integrator.

    Only for ``lam < 1``: the dilated argument then always refers to an
    earlier time, and is taken from the dense output of the integration so
    far. Returns the solution on ``spec.times``.
    """
    from scipy.integrate import solve_ivp

    if not spec.lam < 1:
        raise ValueError("the method of steps needs lam < 1")
    t0, lam = spec.t0, spec.lam
    x_start = complex(spec.x0_fn(np.array([t0]))[0])
    pieces = []

    def past(s):
        if s < t0 or (not pieces and s <= t0 * (1 + 1e-12)):
            return complex(spec.x0_fn(np.array([min(s, t0)]))[0])
        for sol in pieces:
            if sol.t_min <= s <= sol.t_max * (1 + 1e-12):
                y = sol(min(s, sol.t_max))
                return complex(y[0] + 1j * y[1])
        raise RuntimeError("dilated time outside the integrated range")

    def rhs(t, y):
        x = y[0] + 1j * y[1]
        a = complex(spec.a_fn(np.array([t]))[0])
        b = complex(spec.b_fn(np.array([t]))[0])
        dx = -(a * x + b * past(lam * t))
        return [dx.real, dx.imag]

    t_end = spec.times[-1]
    if t0 <= 0:
        raise ValueError("the method of steps needs t0 > 0")
    # each step extends the interval by the factor 1/lam, so x(λt) is known
    start, y = t0, [x_start.real, x_start.imag]
    breaks = []
    while start < t_end:
        stop = min(start / lam, t_end)
        breaks.append((start, stop))
        sol = solve_ivp(rhs, (start, stop), y, rtol=rtol, atol=atol, dense_output=True, method="DOP853")
        pieces.append(sol.sol)
        y = sol.y[:, -1]
        start = stop
    out = np.empty(spec.n, dtype=np.complex128)
    for j, t in enumerate(spec.times):
        out[j] = past(t)
    return out
