"""Desk-scale benchmark problems.

Parametric stand-ins for the media of the benchmark table: a diffusion slab,
an anisotropic diffusion ring, a 1-D glass plate, a 2-D cavity with iron or
dielectric walls (real or complex bias) and the pantograph row. Each preset
is a function returning a ready :class:`SplitSystem`.
"""
from __future__ import annotations

from typing import Callable, Dict

import numpy as np

from ..splitting import DEFAULT_ALPHA, DEFAULT_TARGET_NORM, SplitSystem, to_single_precision
from .diffusion import DiffusionSpec, anisotropic_tensor, build_diffusion_split
from .helmholtz import HelmholtzSpec, build_helmholtz_split
from .pantograph import PantographSpec, build_pantograph_split

__all__ = ["PRESETS", "TABLE_PROBLEMS", "build_preset", "cavity_index", "slab_spec", "glass_plate_spec",
           "cavity_spec", "ring_diffusion_spec", "pantograph_row_spec", "nonaccretive_pantograph_spec"]

IRON_INDEX = 2.8954 + 2.9179j
WATER_INDEX = 1.33
TISSUE_INDEX = 1.46


def slab_spec(n: int = 256, dx: float = 0.1, thickness_cells: int = 128, D: float = 1.0,
              extrapolation_length: float = 1.0, source_cell: int = None) -> DiffusionSpec:
    """Homogeneous non-absorbing slab between layers with ``a = D / z_e²``.

    The slab occupies the central ``thickness_cells``; a unit point source
    sits a quarter of the way in.
    """
    start = (n - thickness_cells) // 2
    a = np.full(n, D / extrapolation_length ** 2)
    a[start:start + thickness_cells] = 0.0
    src = np.zeros(n)
    js = start + thickness_cells // 4 if source_cell is None else source_cell
    src[js] = 1.0 / dx
    return DiffusionSpec(D=np.full(n, D), a=a, source=src, spacing=(dx,), name="diffusion slab")


def ring_diffusion_spec(n: int = 64, extent: float = 40.0, radius: float = 10.0, width: float = 4.0,
                        d_radial: float = 1.0, d_tangential: float = 25.0, d_background: float = 2.0,
                        absorption: float = 0.01) -> DiffusionSpec:
    """Anisotropic ring in an isotropic background, with a source on top and a sink below.

    Inside the ring the tensor is ``d_radial`` across and ``d_tangential``
    along the ring.
    """
    h = extent / n
    x = (np.arange(n) - n / 2 + 0.5) * h
    X, Y = np.meshgrid(x, x, indexing="ij")
    r = np.hypot(X, Y)
    ring = np.abs(r - radius) <= width / 2
    tangent = np.stack([-Y, X], axis=-1) / np.maximum(r, 1e-12)[..., None]
    D = anisotropic_tensor(tangent, d_tangential, d_radial)
    D[~ring] = d_background * np.eye(2)
    src = np.zeros((n, n))
    top = np.argmin(np.abs(x - 0.0)), np.argmin(np.abs(x - radius))
    bottom = np.argmin(np.abs(x - 0.0)), np.argmin(np.abs(x + radius))
    src[top] = 1.0 / h ** 2
    src[bottom] = -1.0 / h ** 2
    return DiffusionSpec(D=D, a=np.full((n, n), absorption), source=src, spacing=(h, h),
                         absorber_width=8, absorber_strength=1.0, name="diffusion anisotropic ring")


def glass_plate_spec(n: int = 256, points_per_wavelength: float = 8.0, index: float = 1.5,
                     plate_cells: int = 64, absorber_width: int = 64) -> HelmholtzSpec:
    """Point source in vacuum in front of a dielectric plate (wavelength 1)."""
    dx = 1.0 / (points_per_wavelength * index)
    k0 = 2 * np.pi
    nfield = np.ones(n, dtype=complex)
    start = n // 2
    nfield[start:start + plate_cells] = index
    src = np.zeros(n, dtype=complex)
    src[n // 4] = 1.0 / dx
    return HelmholtzSpec(k2=(k0 * nfield) ** 2, source=src, spacing=(dx,), absorber_width=absorber_width,
                         name="helmholtz 1-D glass plate")


def cavity_index(n: int, extent: float, wall_index: complex, radius: float = None, wall: float = None):
    """Refractive index of a square-ish cavity: an annular wall plus three rectangular inclusions."""
    h = extent / n
    x = (np.arange(n) - n / 2 + 0.5) * h
    X, Y = np.meshgrid(x, x, indexing="ij")
    radius = 0.38 * extent if radius is None else radius
    wall = 0.06 * extent if wall is None else wall
    r = np.hypot(X, Y)
    solid = np.abs(r - radius) <= wall / 2
    # three blocks standing in for the letters inside the cavity
    for cx in (-0.18, 0.0, 0.18):
        solid |= (np.abs(X - cx * extent) <= 0.04 * extent) & (np.abs(Y) <= 0.1 * extent)
    index = np.where(solid, wall_index, 1.0 + 0j)
    source = np.zeros((n, n), dtype=complex)
    ring = np.abs(r - (radius - wall)) <= h / 2 + 1e-12
    source[ring] = 1.0 / h ** 2
    return index, source, h


def cavity_spec(material: str = "iron", bias: str = "complex", n: int = 64,
                points_per_wavelength: float = None, absorber_width: int = 16) -> HelmholtzSpec:
    """2-D cavity with iron walls, or dielectric walls with water and tissue parts.

    The grid is sized so that the shortest wavelength in the medium is
    sampled by ``points_per_wavelength`` points (wavelength 1 in vacuum).
    The default is 4, or 8 for iron, whose skin depth (about 0.055
    wavelengths) would otherwise be shorter than a grid step.
    """
    if points_per_wavelength is None:
        points_per_wavelength = 8.0 if material == "iron" else 4.0
    if material == "iron":
        nmax = abs(IRON_INDEX.real)
        wall = IRON_INDEX
    elif material == "dielectric":
        nmax = TISSUE_INDEX
        wall = TISSUE_INDEX
    else:
        raise ValueError(f"unknown material {material!r}")
    extent = n / (points_per_wavelength * nmax)
    index, source, h = cavity_index(n, extent, wall)
    if material == "dielectric":
        inner = np.hypot(*np.meshgrid(*(2 * [(np.arange(n) - n / 2 + 0.5) * h]), indexing="ij"))
        index = np.where((index == 1.0) & (inner < 0.25 * extent), WATER_INDEX, index)
    k2 = (2 * np.pi * index) ** 2
    return HelmholtzSpec(k2=k2, source=source, spacing=(h, h), absorber_width=absorber_width, bias=bias,
                         name=f"helmholtz 2-D {material} {'C' if bias == 'complex' else 'R'} bias")


def pantograph_row_spec(b_sign: float = 1.0, t_end: float = 11.0, dt: float = 0.01) -> PantographSpec:
    """λ = 0.5, Gaussian history, ``a`` switching to ``5 - 10i`` at t = 6, ``b`` off on [3, 5]."""
    return PantographSpec(
        lam=0.5,
        a=lambda t: np.where(np.asarray(t) < 6.0, 5.0 + 0j, 5.0 - 10j),
        b=lambda t: np.where((np.asarray(t) >= 3.0) & (np.asarray(t) <= 5.0), 0.0, 5.0 * b_sign) + 0j,
        x0=lambda t: np.exp(-50.0 * (np.asarray(t) - 1.0) ** 2) + 0j,
        t0=1.0, t_end=t_end, dt=dt, name="pantograph")


def nonaccretive_pantograph_spec(t_end: float = 11.0, dt: float = 0.01) -> PantographSpec:
    """λ = 0.9, a = 0.1, b = -5 on the same grid as the benchmark row."""
    return PantographSpec(lam=0.9, a=0.1, b=-5.0, x0=lambda t: np.exp(-50.0 * (np.asarray(t) - 1.0) ** 2) + 0j,
                          t0=1.0, t_end=t_end, dt=dt, name="pantograph non-accretive")


PRESETS: Dict[str, Callable[..., SplitSystem]] = {
    "diffusion_slab": lambda **kw: build_diffusion_split(slab_spec(), **kw),
    "diffusion_ring": lambda **kw: build_diffusion_split(ring_diffusion_spec(), **kw),
    "helmholtz_glass_plate": lambda **kw: build_helmholtz_split(glass_plate_spec(), **kw),
    "helmholtz_iron_real": lambda **kw: build_helmholtz_split(cavity_spec("iron", "real"), **kw),
    "helmholtz_iron_complex": lambda **kw: build_helmholtz_split(cavity_spec("iron", "complex"), **kw),
    "helmholtz_dielectric_real": lambda **kw: build_helmholtz_split(cavity_spec("dielectric", "real"), **kw),
    "helmholtz_dielectric_complex": lambda **kw: build_helmholtz_split(cavity_spec("dielectric", "complex"), **kw),
    "pantograph": lambda **kw: build_pantograph_split(pantograph_row_spec(), **kw),
    "pantograph_nonaccretive": lambda **kw: build_pantograph_split(nonaccretive_pantograph_spec(), **kw),
    "pantograph_antisymmetric": lambda **kw: build_pantograph_split(nonaccretive_pantograph_spec(),
                                                                    antisymmetric=True, **kw),
}

#: The eight rows of the benchmark table, in order.
TABLE_PROBLEMS = ["diffusion_slab", "diffusion_ring", "helmholtz_glass_plate", "helmholtz_iron_real",
                  "helmholtz_iron_complex", "helmholtz_dielectric_real", "helmholtz_dielectric_complex",
                  "pantograph"]


def build_preset(name: str, target_norm: float = DEFAULT_TARGET_NORM, alpha: float = DEFAULT_ALPHA,
                 single: bool = False) -> SplitSystem:
    """Build a named preset; ``single`` switches to single-precision arithmetic."""
    try:
        factory = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    split = factory(target_norm=target_norm, alpha=alpha)
    split.name = name
    return to_single_precision(split) if single else split
