"""
Conversion of a linear system to the canonical split form and assembly of the
preconditioned operator.

A canonical system ``A x = b`` is accretive and split as ``A = L + V`` with
``||V|| < 1``. With ``B = 1 - V`` the preconditioner is
``Γ⁻¹ = α B (L + 1)⁻¹`` and the preconditioned operator simplifies to
``Γ⁻¹A = α B [1 - (L + 1)⁻¹ B]``, so the forward operator ``A`` itself is never
evaluated.
"""
from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg
import scipy.optimize
import scipy.sparse
import scipy.sparse.linalg

from .operators import (CapabilityError, ComplexVector, DenseOperator, LinearMap,
                        operator_norm_estimate)

log = logging.getLogger(__name__)

__all__ = [
    "Circle",
    "ScaleRecord",
    "SplitSystem",
    "PreconditionedSystem",
    "DEFAULT_TARGET_NORM",
    "DEFAULT_ALPHA",
    "HELMHOLTZ_ROTATION",
    "smallest_enclosing_circle",
    "smallest_real_centered_circle",
    "compute_scalar_scale",
    "equilibrate",
    "antisymmetrize",
    "build_preconditioned",
    "split_from_dense",
    "to_single_precision",
]

DEFAULT_TARGET_NORM = 0.95
DEFAULT_ALPHA = 0.75
#: Phase of the scale factor for gain-free wave problems: the numerical range
#: lies in the upper half plane and division by ``i`` rotates it to the right.
HELMHOLTZ_ROTATION = 1j


@dataclass(frozen=True)
class Circle:
    center: complex
    radius: float

    def contains(self, z, rel_tol: float = 1e-12) -> bool:
        return bool(np.all(np.abs(np.asarray(z) - self.center) <= self.radius * (1 + rel_tol) + 1e-300))


def _circle_from_two(a: complex, b: complex) -> Circle:
    c = 0.5 * (a + b)
    return Circle(c, max(abs(a - c), abs(b - c)))


def _circle_from_three(a: complex, b: complex, c: complex) -> Optional[Circle]:
    # Circumcircle, computed relative to the bounding box center for accuracy.
    ox = (min(a.real, b.real, c.real) + max(a.real, b.real, c.real)) / 2
    oy = (min(a.imag, b.imag, c.imag) + max(a.imag, b.imag, c.imag)) / 2
    o = complex(ox, oy)
    a, b, c = a - o, b - o, c - o
    d = 2 * (a.real * (b.imag - c.imag) + b.real * (c.imag - a.imag) + c.real * (a.imag - b.imag))
    if d == 0:
        return None
    aa, bb, cc = abs(a) ** 2, abs(b) ** 2, abs(c) ** 2
    x = (aa * (b.imag - c.imag) + bb * (c.imag - a.imag) + cc * (a.imag - b.imag)) / d
    y = (aa * (c.real - b.real) + bb * (a.real - c.real) + cc * (b.real - a.real)) / d
    center = complex(x, y)
    return Circle(center + o, max(abs(center - a), abs(center - b), abs(center - c)))


def _cross(a: complex, b: complex, c: complex) -> float:
    return (b.real - a.real) * (c.imag - a.imag) - (b.imag - a.imag) * (c.real - a.real)


def _in(c: Optional[Circle], p: complex) -> bool:
    return c is not None and abs(p - c.center) <= c.radius * (1 + 1e-14) + 1e-300


def smallest_enclosing_circle(points, seed: int = 0) -> Circle:
    """Minimal disk containing all ``points`` of the complex plane.

    Welzl's randomized incremental algorithm, written iteratively; the
    shuffle is seeded so that results are reproducible. Duplicate points are
    removed first, which makes sampled media with few distinct values cheap.
    """
    pts = np.unique(np.asarray(points, dtype=np.complex128).ravel())
    if pts.size == 0:
        raise ValueError("smallest_enclosing_circle needs at least one point")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points must be finite")
    shuffled = [complex(p) for p in pts]
    random.Random(seed).shuffle(shuffled)

    c = None
    for i, p in enumerate(shuffled):
        if not _in(c, p):
            c = _circle_one_boundary(shuffled[:i + 1], p)
    return c


def _circle_one_boundary(points, p):
    c = Circle(p, 0.0)
    for i, q in enumerate(points):
        if not _in(c, q):
            if c.radius == 0.0:
                c = _circle_from_two(p, q)
            else:
                c = _circle_two_boundary(points[:i + 1], p, q)
    return c


def _circle_two_boundary(points, p, q):
    circ = _circle_from_two(p, q)
    left = right = None
    for r in points:
        if _in(circ, r):
            continue
        cross = _cross(p, q, r)
        c = _circle_from_three(p, q, r)
        if c is None:
            continue
        side = _cross(p, q, c.center)
        if cross > 0 and (left is None or side > _cross(p, q, left.center)):
            left = c
        elif cross < 0 and (right is None or side < _cross(p, q, right.center)):
            right = c
    if left is None and right is None:
        return circ
    if left is None:
        return right
    if right is None:
        return left
    return left if left.radius <= right.radius else right


def smallest_real_centered_circle(points) -> Circle:
    """Smallest disk with a real center containing all ``points``.

    This is the bias used when the approximate operator must stay real.
    """
    pts = np.unique(np.asarray(points, dtype=np.complex128).ravel())
    if pts.size == 0:
        raise ValueError("need at least one point")
    x, y2 = pts.real, pts.imag ** 2

    def radius2(beta):
        return np.max((x - beta) ** 2 + y2)

    lo, hi = float(x.min()), float(x.max())
    if hi == lo:
        beta = lo
    else:
        # the farthest-point distance is convex in beta, so a bracketed scalar
        # search finds the global minimum
        res = scipy.optimize.minimize_scalar(radius2, bounds=(lo, hi), method="bounded",
                                             options={"xatol": 1e-13 * max(abs(lo), abs(hi), 1.0)})
        beta = min((lo, hi, float(res.x)), key=radius2)
    return Circle(complex(beta, 0.0), float(np.sqrt(radius2(beta))))


@dataclass(frozen=True)
class ScaleRecord:
    """How a raw system was divided to reach the canonical form.

    Exactly one of ``scalar_scale`` (the complex divisor ``c``) and
    ``diagonal_scale`` (the positive diagonal ``Σ``) is set.
    """
    scalar_scale: Optional[complex] = None
    diagonal_scale: Optional[np.ndarray] = None
    target_norm: float = DEFAULT_TARGET_NORM
    degenerate: bool = False

    def __post_init__(self):
        if (self.scalar_scale is None) == (self.diagonal_scale is None):
            raise ValueError("exactly one of scalar_scale and diagonal_scale must be given")
        if not 0 < self.target_norm < 1:
            raise ValueError("target_norm must lie in (0, 1)")
        if self.scalar_scale is not None and abs(self.scalar_scale) == 0:
            raise ValueError("scale must be nonzero")
        if self.diagonal_scale is not None and np.any(np.asarray(self.diagonal_scale) <= 0):
            raise ValueError("diagonal scale must be positive")


def compute_scalar_scale(circle: Circle, target_norm: float = DEFAULT_TARGET_NORM,
                         accretive_rotation: complex = 1.0, floor: Optional[float] = None) -> ScaleRecord:
    """Divisor ``c = radius / target_norm * rotation``.

    Dividing the raw system by ``c`` maps a discrepancy bounded pointwise by
    ``radius`` to one bounded by ``target_norm``. For a circle of radius 0
    there is no discrepancy to normalize; ``|c|`` is then taken from ``floor``
    (default: ``|center|``, or 1) and the record is flagged degenerate.
    """
    if not 0 < target_norm < 1:
        raise ValueError("target_norm must lie in (0, 1)")
    rotation = complex(accretive_rotation)
    if not np.isclose(abs(rotation), 1.0):
        raise ValueError("accretive_rotation must be a unit phase")
    if circle.radius > 0:
        return ScaleRecord(scalar_scale=circle.radius / target_norm * rotation, target_norm=target_norm)
    magnitude = floor if floor is not None else (abs(circle.center) or 1.0)
    log.info("zero-radius circle: using degenerate scale of magnitude %g", magnitude)
    return ScaleRecord(scalar_scale=magnitude / target_norm * rotation, target_norm=target_norm,
                       degenerate=True)


def equilibrate(delta, max_sweeps: int = 50) -> np.ndarray:
    """Positive diagonal ``Σ`` balancing ``Σ^{-1/2} delta Σ^{-1/2}``.

    Symmetric Ruiz scaling in the max norm: every sweep divides index ``i``
    by the square root of the larger of its current row and column maxima.
    Iteration stops once all nonzero row and column maxima lie within a
    factor 2 of each other. Indices whose row and column are both zero keep
    ``Σ_i = 1``.
    """
    m = np.asarray(delta, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"delta must be square, got shape {m.shape}")
    if np.any(m < 0) or not np.all(np.isfinite(m)):
        raise ValueError("delta entries must be finite and non-negative")
    sigma = np.ones(m.shape[0])
    for _ in range(max_sweeps):
        s = m / np.sqrt(np.outer(sigma, sigma))
        demand = np.maximum(s.max(axis=1), s.max(axis=0))
        active = demand > 0
        if not active.any():
            break
        maxima = np.concatenate([s.max(axis=1)[active], s.max(axis=0)[active]])
        if maxima.max() <= 2 * maxima.min():
            break
        sigma[active] *= demand[active]
    return sigma


@dataclass
class SplitSystem:
    """A canonical system ready for preconditioning.

    :param inv_L_plus_I: the map ``(L + 1)⁻¹``.
    :param B: the map ``1 - V``.
    :param scale: how the raw system was normalized.
    :param alpha: fixed-point step size.
    :param source: the canonical right-hand side ``b``.
    :param certified_V_norm: an upper bound on ``||V||``.
    :param L_plus_I: optional forward map ``L + 1``; needed to evaluate ``A``
        for unpreconditioned runs and raw residuals.
    :param shifted_inverse: optional factory ``s -> (L + 1 + s)⁻¹`` used by
        the shift-splitting baseline.
    :param solution_view: maps the canonical unknown back to the physical
        field (undoing diagonal scaling or dropping auxiliary blocks).
    :param certified: False when ``certified_V_norm`` is a numerical estimate
        rather than a bound derived from the structure of ``V``.
    """
    inv_L_plus_I: LinearMap
    B: LinearMap
    scale: ScaleRecord
    alpha: float
    source: ComplexVector
    certified_V_norm: float
    L_plus_I: Optional[LinearMap] = None
    shifted_inverse: Optional[Callable[[float], LinearMap]] = None
    solution_view: Optional[Callable[[np.ndarray], ComplexVector]] = None
    certified: bool = True
    accretive: bool = True
    name: str = ""
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.certified_V_norm < 1:
            raise ValueError(f"||V|| = {self.certified_V_norm} violates ||V|| < 1")
        if not 0 < self.alpha:
            raise ValueError("alpha must be positive")
        if self.inv_L_plus_I.dim != self.B.dim or self.B.dim != len(self.source):
            raise ValueError("split operators and source have inconsistent dimensions")

    @property
    def dim(self) -> int:
        return self.B.dim

    @property
    def forward(self) -> LinearMap:
        """The canonical operator ``A = (L + 1) - B``."""
        if self.L_plus_I is None:
            raise CapabilityError(f"split system {self.name!r} has no forward operator")
        return self.L_plus_I - self.B

    @property
    def V(self) -> LinearMap:
        return LinearMap.identity(self.dim) - self.B

    def view(self, x: np.ndarray) -> ComplexVector:
        if self.solution_view is not None:
            return self.solution_view(x)
        return ComplexVector(x, self.source.shape, self.source.spacing)

    def with_alpha(self, alpha: float) -> "SplitSystem":
        return replace(self, alpha=float(alpha))

    def with_source(self, source) -> "SplitSystem":
        if not isinstance(source, ComplexVector):
            source = ComplexVector(source, self.source.shape, self.source.spacing)
        return replace(self, source=source)


class PreconditionedSystem:
    """The preconditioned problem ``Γ⁻¹A x = Γ⁻¹b``.

    :ivar precond_op: ``Γ⁻¹A = α B [1 - (L + 1)⁻¹ B]``
    :ivar M_op: ``1 - Γ⁻¹A``, the fixed-point iteration operator
    :ivar precond_source: ``Γ⁻¹b = α B (L + 1)⁻¹ b``

    Each application of ``precond_op``, ``M_op`` or :meth:`residual` costs one
    ``(L + 1)⁻¹`` and two ``B`` evaluations.
    """

    def __init__(self, split: SplitSystem, alpha: Optional[float] = None):
        self.split = split
        self.alpha = float(split.alpha if alpha is None else alpha)
        inv, B, a = split.inv_L_plus_I, split.B, self.alpha
        self.dim = split.dim

        def precond(x):
            return a * B.apply(x - inv.apply(B.apply(x)))

        def contraction(x):
            return x - precond(x)

        precond_h = contraction_h = None
        if inv.has_adjoint and B.has_adjoint:
            def precond_h(y):
                z = B.adjoint_apply(y)
                return a * (z - B.adjoint_apply(inv.adjoint_apply(z)))

            def contraction_h(y):
                return y - precond_h(y)

        self.precond_op = LinearMap(self.dim, precond, precond_h, name="Γ⁻¹A")
        self.M_op = LinearMap(self.dim, contraction, contraction_h, name="M")
        self._source_direction = None

    @property
    def precond_source(self) -> np.ndarray:
        """``Γ⁻¹b``, computed once on first use."""
        if self._source_direction is None:
            s = self.split
            self._source_direction = s.B.apply(s.inv_L_plus_I.apply(s.source.data))
        return self.alpha * self._source_direction

    def residual(self, x: np.ndarray) -> np.ndarray:
        """``Δ = B[(L + 1)⁻¹(B x + b) - x]``, so that ``αΔ = Γ⁻¹(b - A x)``."""
        s = self.split
        return s.B.apply(s.inv_L_plus_I.apply(s.B.apply(x) + s.source.data) - x)

    def with_source(self, source) -> "PreconditionedSystem":
        return PreconditionedSystem(self.split.with_source(source), self.alpha)

    def with_alpha(self, alpha: float) -> "PreconditionedSystem":
        return PreconditionedSystem(self.split, alpha)


def _single(m: Optional[LinearMap]) -> Optional[LinearMap]:
    if m is None:
        return None
    c64 = np.complex64
    adjoint = (lambda y: m._adjoint(y).astype(c64, copy=False)) if m.has_adjoint else None
    return LinearMap(m.dim, lambda x: m._apply(x).astype(c64, copy=False), adjoint, name=m.name, dtype=c64)


def to_single_precision(split: SplitSystem) -> SplitSystem:
    """A copy of ``split`` whose maps return single-precision vectors.

    Iterative solvers follow the precision of the source, so every iterate,
    residual and Krylov vector is then stored in ``complex64``.
    """
    shifted = None
    if split.shifted_inverse is not None:
        def shifted(s):
            return _single(split.shifted_inverse(s))
    return replace(split, inv_L_plus_I=_single(split.inv_L_plus_I), B=_single(split.B),
                   L_plus_I=_single(split.L_plus_I), shifted_inverse=shifted,
                   source=ComplexVector(split.source.data.astype(np.complex64), split.source.shape,
                                        split.source.spacing))


def build_preconditioned(split: SplitSystem, alpha: Optional[float] = None) -> PreconditionedSystem:
    return PreconditionedSystem(split, alpha)


def split_from_dense(A, V, b=None, alpha: float = DEFAULT_ALPHA, name: str = "dense") -> SplitSystem:
    """Canonical split of explicit matrices ``A`` and ``V`` (``L = A - V``)."""
    A = np.asarray(A, dtype=np.complex128)
    V = np.asarray(V, dtype=np.complex128)
    n = A.shape[0]
    eye = np.eye(n)
    B = eye - V
    lpi = A + B
    lu = scipy.linalg.lu_factor(lpi)
    lu_h = scipy.linalg.lu_factor(lpi.conj().T)
    inv = LinearMap(n, lambda x: scipy.linalg.lu_solve(lu, x),
                    lambda y: scipy.linalg.lu_solve(lu_h, y), name="(L+1)⁻¹")

    def shifted(s):
        m = lpi + s * eye
        f = scipy.linalg.lu_factor(m)
        return LinearMap(n, lambda x: scipy.linalg.lu_solve(f, x), name=f"(L+1+{s})⁻¹")

    b = np.zeros(n, dtype=np.complex128) if b is None else np.asarray(b, dtype=np.complex128)
    return SplitSystem(inv_L_plus_I=inv, B=DenseOperator(B, name="B"), scale=ScaleRecord(scalar_scale=1.0),
                       alpha=alpha, source=ComplexVector(b), certified_V_norm=float(np.linalg.norm(V, 2)),
                       L_plus_I=DenseOperator(lpi, name="L+1"), shifted_inverse=shifted, name=name)


def _factorize(matrix):
    """A solve callable for a dense or sparse square matrix."""
    if scipy.sparse.issparse(matrix):
        lu = scipy.sparse.linalg.splu(scipy.sparse.csc_matrix(matrix))
        return lu.solve
    lu = scipy.linalg.lu_factor(np.asarray(matrix))
    return lambda x: scipy.linalg.lu_solve(lu, x)


def antisymmetrize(rawL: LinearMap, rawV: LinearMap, raw_source, target_norm: float = DEFAULT_TARGET_NORM,
                   v_norm: Optional[float] = None, alpha: float = DEFAULT_ALPHA, floor: float = 1.0,
                   name: str = "antisymmetrized") -> SplitSystem:
    """Embed a possibly non-accretive system in a skew-Hermitian block system.

    The raw system ``(L̂ + V̂) x̂ = b̂`` becomes, with a real scale ``c``,::

        A = [[0, -Â*], [Â, 0]] / c,   x = [x̂, x̂'],   b = [0, b̂] / c

    which is accretive because it is skew-Hermitian. The auxiliary source of
    the adjoint problem is zero, so ``x̂' = 0`` at the solution and the
    physical solution is the first block.

    :param v_norm: an upper bound on ``||V̂||``. When omitted it is estimated
        by power iteration and the result is flagged as not certified.
    :raises CapabilityError: if an adjoint or the explicit matrix of ``L̂``
        needed to factorize the block ``L + 1`` is missing.
    """
    if not (rawL.has_adjoint and rawV.has_adjoint):
        raise CapabilityError("antisymmetrize needs the adjoints of both raw operators")
    if rawL.matrix is None:
        raise CapabilityError("antisymmetrize needs an explicit matrix for the raw approximate operator")
    if rawL.dim != rawV.dim:
        raise ValueError("raw operators must share a dimension")
    if not isinstance(raw_source, ComplexVector):
        raw_source = ComplexVector(raw_source)
    n = rawL.dim
    certified = v_norm is not None
    if v_norm is None:
        v_norm = operator_norm_estimate(rawV, max_iters=2000, tol=1e-10)
    degenerate = v_norm == 0
    c = (v_norm if v_norm > 0 else floor) / target_norm
    scale = ScaleRecord(scalar_scale=c, target_norm=target_norm, degenerate=degenerate)

    Lh = rawL.matrix
    sparse = scipy.sparse.issparse(Lh)

    def block(shift):
        if sparse:
            eye = scipy.sparse.identity(n, dtype=np.complex128, format="csc")
            return scipy.sparse.bmat([[(1 + shift) * eye, -Lh.conj().T / c],
                                      [Lh / c, (1 + shift) * eye]], format="csc")
        Ld = np.asarray(Lh, dtype=np.complex128)
        eye = np.eye(n)
        return np.block([[(1 + shift) * eye, -Ld.conj().T / c], [Ld / c, (1 + shift) * eye]])

    lpi = block(0.0)
    solve = _factorize(lpi)
    solve_h = _factorize(lpi.conj().T)
    inv = LinearMap(2 * n, solve, solve_h, name="(L+1)⁻¹")
    if sparse:
        L_plus_I = LinearMap.from_matrix(lpi, name="L+1")
    else:
        lpi_h = lpi.conj().T
        L_plus_I = LinearMap(2 * n, lambda x: lpi @ x, lambda y: lpi_h @ y, matrix=lpi, name="L+1")

    def apply_B(x):
        x1, x2 = x[:n], x[n:]
        return np.concatenate([x1 + rawV._adjoint(x2) / c, x2 - rawV._apply(x1) / c])

    def apply_Bh(y):
        y1, y2 = y[:n], y[n:]
        return np.concatenate([y1 - rawV._adjoint(y2) / c, y2 + rawV._apply(y1) / c])

    B = LinearMap(2 * n, apply_B, apply_Bh, name="B")
    source = ComplexVector(np.concatenate([np.zeros(n, dtype=np.complex128), raw_source.data / c]),
                           (2, *raw_source.shape))

    def view(x):
        return ComplexVector(x[:n], raw_source.shape, raw_source.spacing)

    def shifted(s):
        return LinearMap(2 * n, _factorize(block(s)), name=f"(L+1+{s})⁻¹")

    return SplitSystem(inv_L_plus_I=inv, B=B, scale=scale, alpha=alpha, source=source,
                       certified_V_norm=v_norm / c if v_norm > 0 else 0.0, L_plus_I=L_plus_I,
                       shifted_inverse=shifted, solution_view=view, certified=certified, accretive=True,
                       name=name)
