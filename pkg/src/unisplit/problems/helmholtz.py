"""
Scalar Helmholtz equation ``∇²ψ + k²(r) ψ = -S(r)`` on a regular grid.

The medium is padded with an absorbing frame (a linear ramp of ``Im[k²]``)
so that the periodic FFT inverse of the homogeneous operator can be used.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..operators import ComplexVector, LinearMap
from ..splitting import (DEFAULT_ALPHA, DEFAULT_TARGET_NORM, HELMHOLTZ_ROTATION, SplitSystem,
                         compute_scalar_scale, smallest_enclosing_circle, smallest_real_centered_circle)
from .spectral import boundary_ramp, crop, fourier_multiplier, pad_edges, squared_frequency

log = logging.getLogger(__name__)

__all__ = ["HelmholtzSpec", "build_helmholtz_split", "point_source_green_1d"]


@dataclass
class HelmholtzSpec:
    """Medium, source and boundary layer of a Helmholtz problem.

    :param k2: squared wavenumber per grid point; ``Im[k2] >= 0`` (no gain).
    :param source: source density ``S`` per grid point.
    :param spacing: grid step per axis.
    :param absorber_width: cells of absorbing frame added on each side.
    :param absorber_strength: ``Im[k²]`` reached at the outer edge of the
        frame. Defaults to the largest ``|Re k²|`` of the medium.
    :param bias: ``"complex"`` for the smallest enclosing circle of all
        ``k²`` values, ``"real"`` to restrict its center to the real axis.
    """
    k2: np.ndarray
    source: np.ndarray
    spacing: tuple
    absorber_width: int = 16
    absorber_strength: Optional[float] = None
    bias: str = "complex"
    name: str = "helmholtz"

    def __post_init__(self):
        self.k2 = np.atleast_1d(np.asarray(self.k2, dtype=np.complex128))
        self.source = np.asarray(self.source, dtype=np.complex128).reshape(self.k2.shape)
        if np.isscalar(self.spacing):
            self.spacing = (float(self.spacing),) * self.k2.ndim
        self.spacing = tuple(float(h) for h in self.spacing)
        if len(self.spacing) != self.k2.ndim:
            raise ValueError("spacing needs one entry per grid axis")
        if np.any(self.k2.imag < -1e-12 * np.abs(self.k2).max()):
            raise ValueError("k2 must have a non-negative imaginary part (gain-free medium)")
        if not (np.all(np.isfinite(self.k2)) and np.all(np.isfinite(self.source))):
            raise ValueError("k2 and source must be finite")
        if self.absorber_width < 0:
            raise ValueError("absorber_width must be non-negative")
        if self.bias not in ("complex", "real"):
            raise ValueError("bias must be 'complex' or 'real'")

    @property
    def shape(self):
        return self.k2.shape


def build_helmholtz_split(spec: HelmholtzSpec, target_norm: float = DEFAULT_TARGET_NORM,
                          alpha: float = DEFAULT_ALPHA, dtype=np.complex128) -> SplitSystem:
    """Canonical split of a Helmholtz problem.

    The system is divided by ``c = i r / target_norm`` where ``r`` is the
    radius of the smallest circle enclosing the ``k²`` values (absorber
    included) and ``k̄²`` its center. Then ``V = (k² - k̄²)/c`` is a
    multiplication operator with ``max |V| = target_norm`` and
    ``(L + 1)⁻¹ = F⁻¹ c / (-|p|² + k̄² + c) F``.
    """
    w = spec.absorber_width
    k2 = pad_edges(spec.k2, w)
    if w:
        strength = spec.absorber_strength
        if strength is None:
            strength = float(np.abs(spec.k2.real).max()) or 1.0
        k2 = k2 + 1j * strength * boundary_ramp(k2.shape, w)
    shape = k2.shape
    src = np.zeros(shape, dtype=np.complex128)
    src[crop(w, spec.shape)] = spec.source

    circle = (smallest_enclosing_circle(k2) if spec.bias == "complex"
              else smallest_real_centered_circle(k2))
    scale = compute_scalar_scale(circle, target_norm, HELMHOLTZ_ROTATION)
    c = scale.scalar_scale
    k2_bias = circle.center
    p2 = squared_frequency(shape, spec.spacing)
    denom = -p2 + k2_bias + c
    if np.any(np.abs(denom) == 0):
        raise ValueError("L + 1 is singular on this grid")

    inv = fourier_multiplier(shape, c / denom, "(L+1)⁻¹", dtype)
    lpi = fourier_multiplier(shape, denom / c, "L+1", dtype)
    v = ((k2 - k2_bias) / c).reshape(-1).astype(dtype)
    B = LinearMap.diagonal(1 - v, name="B", dtype=dtype)

    def shifted(s):
        return fourier_multiplier(shape, c / (denom + s * c), f"(L+1+{s:g})⁻¹", dtype)

    interior = crop(w, spec.shape)

    def view(x):
        return ComplexVector(np.asarray(x).reshape(shape)[interior], spec.shape, spec.spacing)

    source = ComplexVector((-src / c).reshape(-1).astype(dtype), shape, spec.spacing)
    return SplitSystem(inv_L_plus_I=inv, B=B, scale=scale, alpha=alpha, source=source,
                       certified_V_norm=float(np.abs(v).max()), L_plus_I=lpi, shifted_inverse=shifted,
                       solution_view=view, name=spec.name,
                       info=dict(bias=k2_bias, radius=circle.radius, c=c, padded_shape=shape))


def point_source_green_1d(x, x_source, k):
    """Outgoing solution of ``ψ'' + k²ψ = δ(x - x_source)``: ``e^{ik|x-x'|} / (2ik)``."""
    return np.exp(1j * k * np.abs(np.asarray(x) - x_source)) / (2j * k)
