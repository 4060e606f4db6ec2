"""FFT helpers shared by the grid-based problem builders."""
from __future__ import annotations

import numpy as np
import scipy.fft

from ..operators import LinearMap


def wavevectors(shape, spacing):
    """Per-axis angular spatial frequencies, broadcastable over ``shape``."""
    axes = []
    for ax, (n, h) in enumerate(zip(shape, spacing)):
        p = 2 * np.pi * scipy.fft.fftfreq(n, d=h)
        view = [1] * len(shape)
        view[ax] = n
        axes.append(p.reshape(view))
    return axes


def squared_frequency(shape, spacing) -> np.ndarray:
    """``||p||²`` on the FFT grid."""
    out = np.zeros(shape)
    for p in wavevectors(shape, spacing):
        out = out + p ** 2
    return out


def fourier_multiplier(shape, symbol, name: str = "", dtype=np.complex128) -> LinearMap:
    """The map ``F⁻¹ symbol F`` on fields of ``shape`` (flattened row-major).

    The adjoint multiplies by the conjugate symbol.
    """
    symbol = np.broadcast_to(np.asarray(symbol, dtype=dtype), shape).copy()
    conj = symbol.conj()
    n = int(np.prod(shape))

    def apply(x):
        y = scipy.fft.ifftn(symbol * scipy.fft.fftn(x.reshape(shape).astype(dtype, copy=False)))
        return y.reshape(n)

    def adjoint(x):
        y = scipy.fft.ifftn(conj * scipy.fft.fftn(x.reshape(shape).astype(dtype, copy=False)))
        return y.reshape(n)

    return LinearMap(n, apply, adjoint, name=name, dtype=dtype)


def pad_edges(field: np.ndarray, width: int) -> np.ndarray:
    """Extend ``field`` by ``width`` cells on both sides of every axis, repeating edge values."""
    if width == 0:
        return np.array(field)
    return np.pad(field, width, mode="edge")


def boundary_ramp(shape, width: int) -> np.ndarray:
    """Linear ramp from 0 at the inner edge of a ``width``-cell frame to 1 at the outer edge.

    In corners the larger of the per-axis ramps is used.
    """
    ramp = np.zeros(shape)
    if width == 0:
        return ramp
    for ax, n in enumerate(shape):
        i = np.arange(n)
        depth = np.maximum(width - i, i - (n - 1 - width)).clip(0, None) / width
        view = [1] * len(shape)
        view[ax] = n
        ramp = np.maximum(ramp, depth.reshape(view))
    return ramp


def crop(width: int, shape):
    """Slices selecting the interior of a field padded by ``width``."""
    return tuple(slice(width, width + n) for n in shape)
