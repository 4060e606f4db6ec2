"""
Stationary diffusion ``-∇·(D ∇u) + a u = S`` in first-order (density, flux) form.

With the flux ``F = -D ∇u`` the problem becomes the block system::

    [[a,    div ],   [u]   [S]
     [grad, D⁻¹ ]] · [F] = [0]

whose off-diagonal part is skew-Hermitian, so it is accretive whenever ``a``
and ``D⁻¹`` are. Gradient and divergence are spectral. Spatial variation of
``a`` and ``D⁻¹`` forms the discrepancy ``V``; a positive diagonal ``Σ``
(one entry per block component) balances the variation of the different
components before the overall scale is fixed.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.fft

from ..operators import ComplexVector, LinearMap
from ..splitting import (DEFAULT_ALPHA, DEFAULT_TARGET_NORM, ScaleRecord, SplitSystem, equilibrate,
                         smallest_enclosing_circle)
from .spectral import boundary_ramp, crop, pad_edges, wavevectors

log = logging.getLogger(__name__)

__all__ = ["DiffusionSpec", "build_diffusion_split", "slab_profile", "anisotropic_tensor"]


@dataclass
class DiffusionSpec:
    """Coefficients and source of a stationary diffusion problem.

    :param D: diffusion coefficient, either a scalar field of the grid shape
        (isotropic) or a field of ``d x d`` tensors with shape
        ``grid + (d, d)``. Must be accretive and invertible everywhere.
    :param a: absorption rate per grid point, ``Re[a] >= 0``.
    :param source: source density per grid point.
    :param spacing: grid step per axis.
    :param absorber_width: optional frame of cells, on every side, in which
        ``a`` ramps linearly up to ``absorber_strength``.
    """
    D: np.ndarray
    a: np.ndarray
    source: np.ndarray
    spacing: tuple
    absorber_width: int = 0
    absorber_strength: float = 0.0
    name: str = "diffusion"
    stationary: bool = True

    def __post_init__(self):
        self.a = np.atleast_1d(np.asarray(self.a, dtype=np.complex128))
        grid = self.a.shape
        d = len(grid)
        D = np.asarray(self.D, dtype=np.complex128)
        if D.shape == grid:
            D = D[..., None, None] * np.eye(d)
        elif D.shape != grid + (d, d):
            raise ValueError(f"D must have shape {grid} or {grid + (d, d)}, got {D.shape}")
        self.D = D
        self.source = np.asarray(self.source, dtype=np.complex128).reshape(grid)
        if np.isscalar(self.spacing):
            self.spacing = (float(self.spacing),) * d
        self.spacing = tuple(float(h) for h in self.spacing)
        if len(self.spacing) != d:
            raise ValueError("spacing needs one entry per grid axis")
        if not self.stationary:
            raise NotImplementedError("only the stationary problem is supported")
        if np.any(self.a.real < 0):
            raise ValueError("absorption must have a non-negative real part")
        herm = 0.5 * (self.D + np.conj(np.swapaxes(self.D, -1, -2)))
        if np.any(np.linalg.eigvalsh(herm)[..., 0] < -1e-12 * np.abs(self.D).max()):
            raise ValueError("D must be accretive at every grid point")
        if np.any(np.abs(np.linalg.det(self.D)) == 0):
            raise ValueError("D must be invertible at every grid point")

    @property
    def shape(self):
        return self.a.shape


def anisotropic_tensor(direction: np.ndarray, d_parallel, d_perpendicular) -> np.ndarray:
    """2-D tensors ``d_par t tᵀ + d_perp n nᵀ`` for unit vectors ``t`` (last axis of ``direction``)."""
    t = np.asarray(direction, dtype=float)
    t = t / np.linalg.norm(t, axis=-1, keepdims=True)
    n = np.stack([-t[..., 1], t[..., 0]], axis=-1)
    dp = np.asarray(d_parallel)[..., None, None]
    dn = np.asarray(d_perpendicular)[..., None, None]
    return dp * t[..., :, None] * t[..., None, :] + dn * n[..., :, None] * n[..., None, :]


def _balance_inactive(sigma, delta, bias_diag):
    """Fill in ``Σ`` for components without any variation.

    Equilibration leaves them at 1, which ignores the units of the
    component. They are instead scaled so that their bias diagonal matches
    the (geometric mean) scaled bias diagonal of the varying components.
    """
    sigma = sigma.copy()
    active = (delta.max(axis=0) > 0) | (delta.max(axis=1) > 0)
    mag = np.abs(bias_diag)
    ref_set = active & (mag > 0)
    reference = float(np.exp(np.mean(np.log(mag[ref_set] / sigma[ref_set])))) if ref_set.any() else 1.0
    for i in np.flatnonzero(~active):
        sigma[i] = mag[i] / reference if mag[i] > 0 else 1.0
    return sigma


def build_diffusion_split(spec: DiffusionSpec, target_norm: float = DEFAULT_TARGET_NORM,
                          alpha: float = DEFAULT_ALPHA, dtype=np.complex128) -> SplitSystem:
    """Canonical split of a stationary diffusion problem.

    The unknown is ``Σ^{1/2} [u, F]``; the solution view returns ``u``.
    """
    w = spec.absorber_width
    a = pad_edges(spec.a, w)
    if w:
        a = a + spec.absorber_strength * boundary_ramp(a.shape, w)
    d = spec.a.ndim
    D = spec.D
    if w:
        D = np.pad(D, [(w, w)] * d + [(0, 0), (0, 0)], mode="edge")
    shape = a.shape
    n = int(np.prod(shape))
    m = d + 1
    src = np.zeros(shape, dtype=np.complex128)
    src[crop(w, spec.shape)] = spec.source

    Dinv = np.linalg.inv(D)
    coef = np.zeros(shape + (m, m), dtype=np.complex128)
    coef[..., 0, 0] = a
    coef[..., 1:, 1:] = Dinv
    bias = np.zeros((m, m), dtype=np.complex128)
    delta = np.zeros((m, m))
    for i, j in [(0, 0)] + [(1 + i, 1 + j) for i in range(d) for j in range(d)]:
        circle = smallest_enclosing_circle(coef[..., i, j])
        bias[i, j], delta[i, j] = circle.center, circle.radius
    sigma = _balance_inactive(equilibrate(delta), delta, np.diag(bias))
    s = 1 / np.sqrt(sigma)
    scaled_bias = s[:, None] * bias * s[None, :]
    dv = s[:, None] * (coef - bias) * s[None, :]
    local_norm = np.linalg.norm(dv.reshape(-1, m, m), ord=2, axis=(1, 2))
    v_raw = float(local_norm.max())
    degenerate = v_raw == 0
    if degenerate:
        c = float(np.abs(scaled_bias).max() or 1.0) / target_norm
    else:
        c = v_raw / target_norm
    scale = ScaleRecord(diagonal_scale=sigma * c, target_norm=target_norm, degenerate=degenerate)

    vblocks = (dv / c).reshape(n, m, m).astype(dtype)
    vblocks_h = np.conj(np.swapaxes(vblocks, 1, 2))

    p = wavevectors(shape, spec.spacing)
    symbol = np.zeros(shape + (m, m), dtype=np.complex128)
    symbol[...] = scaled_bias
    for k in range(d):
        ip = 1j * np.broadcast_to(p[k], shape) * s[0] * s[k + 1]
        symbol[..., 0, k + 1] += ip
        symbol[..., k + 1, 0] += ip
    symbol = symbol / c + np.eye(m)
    symbol = symbol.reshape(n, m, m)

    def block_multiplier(mats, name):
        mats = mats.astype(dtype)
        mats_h = np.conj(np.swapaxes(mats, 1, 2))

        def run(x, which):
            xf = scipy.fft.fftn(x.reshape((m,) + shape), axes=range(1, d + 1)).reshape(m, n)
            yf = np.einsum("nij,jn->in", which, xf)
            return scipy.fft.ifftn(yf.reshape((m,) + shape), axes=range(1, d + 1)).reshape(-1)

        return LinearMap(m * n, lambda x: run(x, mats), lambda y: run(y, mats_h), name=name, dtype=dtype)

    def pointwise(mats):
        def run(x):
            return np.einsum("nij,jn->in", mats, x.reshape(m, n)).reshape(-1)
        return run

    apply_v, apply_vh = pointwise(vblocks), pointwise(vblocks_h)
    B = LinearMap(m * n, lambda x: x - apply_v(x), lambda y: y - apply_vh(y), name="B", dtype=dtype)
    inv = block_multiplier(np.linalg.inv(symbol), "(L+1)⁻¹")
    lpi = block_multiplier(symbol, "L+1")

    def shifted(shift):
        return block_multiplier(np.linalg.inv(symbol + shift * np.eye(m)), f"(L+1+{shift:g})⁻¹")

    rhs = np.zeros((m, n), dtype=np.complex128)
    rhs[0] = src.reshape(-1) * s[0] / c
    interior = crop(w, spec.shape)

    def view(x):
        u = np.asarray(x)[:n].reshape(shape) * s[0]
        return ComplexVector(u[interior], spec.shape, spec.spacing)

    return SplitSystem(inv_L_plus_I=inv, B=B, scale=scale, alpha=alpha,
                       source=ComplexVector(rhs.reshape(-1).astype(dtype), (m,) + shape),
                       certified_V_norm=float(np.linalg.norm(vblocks, ord=2, axis=(1, 2)).max()),
                       L_plus_I=lpi, shifted_inverse=shifted, solution_view=view, name=spec.name,
                       info=dict(sigma=sigma, c=c, bias=bias, delta=delta, padded_shape=shape))


def slab_profile(z, z_source, thickness, extrapolation_length, D, strength=1.0):
    """Steady density in a non-absorbing slab ``0 <= z <= thickness`` with a point source.

    The density is linear on both sides of the source and vanishes at the
    extrapolated boundaries ``-z_e`` and ``thickness + z_e``; the flux
    ``-D u'`` jumps by ``strength`` at the source.
    """
    z = np.asarray(z, dtype=float)
    ze = extrapolation_length
    left = z_source + ze
    right = thickness + ze - z_source
    # u = A1 (z + ze) left of the source, A2 (thickness + ze - z) right of it
    a1 = strength * right / (D * (left + right))
    a2 = strength * left / (D * (left + right))
    return np.where(z <= z_source, a1 * (z + ze), a2 * (thickness + ze - z))
