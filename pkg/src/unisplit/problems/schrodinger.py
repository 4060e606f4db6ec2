"""Shifted time-independent Schrödinger operator ``-½∇² + V_s + Ā`` (unit mass, ħ = 1)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..operators import ComplexVector, LinearMap
from ..splitting import DEFAULT_ALPHA, DEFAULT_TARGET_NORM, ScaleRecord, SplitSystem, smallest_enclosing_circle
from .spectral import fourier_multiplier, squared_frequency

__all__ = ["SchrodingerSpec", "build_schrodinger_split", "condition_study", "double_ring_potential", "schrodinger_raw"]


@dataclass
class SchrodingerSpec:
    """Real potential on a periodic grid and the constant shift ``Ā``."""
    potential: np.ndarray
    spacing: tuple
    shift: float = 0.0
    name: str = "schrodinger"

    def __post_init__(self):
        pot = np.atleast_1d(np.asarray(self.potential))
        if np.iscomplexobj(pot):
            if np.any(pot.imag != 0):
                raise ValueError("the potential must be real")
            pot = pot.real
        if not np.all(np.isfinite(pot)):
            raise ValueError("the potential must be bounded (finite at every grid point)")
        self.potential = pot.astype(float)
        if np.isscalar(self.spacing):
            self.spacing = (float(self.spacing),) * pot.ndim
        self.spacing = tuple(float(h) for h in self.spacing)
        if len(self.spacing) != pot.ndim:
            raise ValueError("spacing needs one entry per grid axis")

    @property
    def shape(self):
        return self.potential.shape


def double_ring_potential(n: int = 128, extent: float = 6.0, depth: float = 10.0, radius: float = 1.0,
                          width: float = 0.2, separation: float = 2.2):
    """Two ring-shaped channels of zero potential in a plateau of height ``depth``.

    Returns ``(potential, spacing)`` on an ``n x n`` grid covering
    ``[-extent/2, extent/2)²``; ring centers are ``(±separation/2, 0)``.
    """
    h = extent / n
    x = (np.arange(n) - n / 2) * h
    X, Y = np.meshgrid(x, x, indexing="ij")
    inside = np.zeros_like(X, dtype=bool)
    for cx in (-separation / 2, separation / 2):
        r = np.hypot(X - cx, Y)
        inside |= np.abs(r - radius) <= width / 2
    return np.where(inside, 0.0, depth), (h, h)


def schrodinger_raw(spec: SchrodingerSpec) -> LinearMap:
    """The unscaled Hermitian operator ``-½∇² + V_s + Ā`` as a matrix-free map."""
    shape = spec.shape
    kinetic = fourier_multiplier(shape, 0.5 * squared_frequency(shape, spec.spacing), "-½∇²")
    pot = (spec.potential + spec.shift).reshape(-1)
    return LinearMap(kinetic.dim, lambda x: kinetic._apply(x) + pot * x,
                     lambda y: kinetic._apply(y) + pot * y, name="H")


def build_schrodinger_split(spec: SchrodingerSpec, target_norm: float = DEFAULT_TARGET_NORM,
                            alpha: float = DEFAULT_ALPHA, dtype=np.complex128) -> SplitSystem:
    """Canonical split of the shifted Schrödinger operator.

    The bias is the midpoint of the (real) range of ``V_s + Ā`` and the
    scale ``c = half-width / target_norm`` is real, so ``L`` and ``V`` stay
    Hermitian. A constant potential gives ``V = 0`` with ``c`` set from the
    bias (or 1).
    """
    shape = spec.shape
    values = (spec.potential + spec.shift).reshape(-1)
    circle = smallest_enclosing_circle(values)
    bias = float(np.real(circle.center))
    radius = float(circle.radius)
    degenerate = radius == 0
    c = (radius if not degenerate else (abs(bias) or 1.0)) / target_norm
    p2 = squared_frequency(shape, spec.spacing)
    denom = 0.5 * p2 + bias + c
    if np.any(denom == 0):
        raise ValueError("L + 1 is singular on this grid")
    v = ((values - bias) / c).astype(dtype)
    B = LinearMap.diagonal(1 - v, name="B", dtype=dtype)

    def shifted(s):
        return fourier_multiplier(shape, c / (denom + s * c), f"(L+1+{s:g})⁻¹", dtype)

    return SplitSystem(inv_L_plus_I=fourier_multiplier(shape, c / denom, "(L+1)⁻¹", dtype), B=B,
                       scale=ScaleRecord(scalar_scale=c, target_norm=target_norm, degenerate=degenerate),
                       alpha=alpha, source=ComplexVector(np.zeros(int(np.prod(shape)), dtype=dtype), shape,
                                                         spec.spacing),
                       certified_V_norm=float(np.abs(v).max()),
                       L_plus_I=fourier_multiplier(shape, denom / c, "L+1", dtype), shifted_inverse=shifted,
                       solution_view=lambda x: ComplexVector(np.asarray(x).reshape(shape), shape, spec.spacing),
                       name=spec.name, info=dict(bias=bias, c=c))


def condition_study(spec: SchrodingerSpec, alpha: float = DEFAULT_ALPHA, solver: str = "gmres20",
                    seed: int = 0) -> dict:
    """Condition numbers of the raw operator and of its preconditioned form.

    ``S = ||A⁻¹|| ||V||`` does not depend on the scale, and is fixed by the
    range of the potential and the lowest eigenvalue of the raw operator,
    which Lanczos finds on the inverse realized by preconditioned solves. The
    system is then rebuilt with ``||V||`` at the value minimizing the
    condition-number bound, and ``κ(Γ⁻¹A)`` measured.
    """
    from ..analysis import condition_number_bound
    from ..splitting import PreconditionedSystem
    from .conditioning import extreme_singular_values, split_inverse

    raw = schrodinger_raw(spec)
    first = build_schrodinger_split(spec, alpha=alpha)
    hi, lo = extreme_singular_values(raw, hermitian=True, inverse=split_inverse(first, solver), seed=seed)
    radius = first.certified_V_norm * first.scale.scalar_scale
    S = radius / lo
    bound, v_opt = condition_number_bound(S)
    tuned = build_schrodinger_split(spec, target_norm=v_opt, alpha=alpha)
    op = PreconditionedSystem(tuned, alpha).precond_op
    p_hi, p_lo = extreme_singular_values(op, seed=seed)
    return dict(kappa_raw=hi / lo, lambda_min=lo, lambda_max=hi, S=S, v_opt=v_opt,
                kappa_preconditioned=p_hi / p_lo, kappa_bound=bound, improvement=(hi / lo) / (p_hi / p_lo))
