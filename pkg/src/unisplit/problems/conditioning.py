"""Condition numbers of matrix-free operators."""
from __future__ import annotations

import logging
from typing import Optional

import numpy as np
import scipy.sparse.linalg as spla

from ..operators import DENSE_LIMIT, DenseOperator, LinearMap
from ..solvers import CONVERGED, SolverConfig, parse_algorithm

log = logging.getLogger(__name__)

__all__ = ["estimate_condition_number", "extreme_singular_values", "solver_inverse", "split_inverse"]


def _as_scipy(op: LinearMap, apply) -> spla.LinearOperator:
    return spla.LinearOperator((op.dim, op.dim), matvec=apply, dtype=np.complex128)


def _start(dim: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.standard_normal(dim) + 1j * rng.standard_normal(dim)


def solver_inverse(op: LinearMap, algorithm: str = "gmres20", config: Optional[SolverConfig] = None,
                   adjoint: bool = False) -> LinearMap:
    """``op⁻¹`` (or ``op⁻ᴴ``) realized by iterative solves.

    :raises RuntimeError: when a solve does not converge.
    """
    from ..solvers import bicgstab_solve, gmres_solve, richardson_solve

    config = config or SolverConfig(tol=1e-11, max_iter=20000)
    base, config = parse_algorithm(algorithm, config)
    runner = {"gmres": gmres_solve, "bicgstab": bicgstab_solve, "fp": richardson_solve}[base]
    target = op.H if adjoint else op

    def apply(y):
        x, rep = runner(target, np.asarray(y, dtype=np.complex128), config)
        if rep.status != CONVERGED:
            raise RuntimeError(f"inverse solve {rep.status} after {rep.iterations} iterations "
                               f"(residual {rep.final_residual:.2e})")
        return x.data

    return LinearMap(op.dim, apply, name=f"{op.name}⁻¹")


def extreme_singular_values(op: LinearMap, hermitian: bool = False, inverse: Optional[LinearMap] = None,
                            inverse_adjoint: Optional[LinearMap] = None, tol: float = 1e-8, seed: int = 0):
    """Largest and smallest singular values of ``op`` by Lanczos iteration.

    For a Hermitian ``op`` the iteration runs on ``op`` itself (the values
    returned are then the extreme eigenvalue magnitudes); otherwise on
    ``opᴴ op``. The smallest value comes from the dominant eigenvalue of the
    inverse when ``inverse`` is given, from the low end of the spectrum
    otherwise.
    """
    v0 = _start(op.dim, seed)
    if hermitian:
        fwd = _as_scipy(op, op.apply)
    else:
        fwd = _as_scipy(op, lambda x: op.adjoint_apply(op.apply(x)))
    top = spla.eigsh(fwd, k=1, which="LM", v0=v0, tol=tol, return_eigenvectors=False)[0]
    if inverse is not None:
        if hermitian:
            inv = _as_scipy(op, inverse.apply)
        else:
            if inverse_adjoint is None:
                raise ValueError("a non-Hermitian operator needs the inverse adjoint as well")
            inv = _as_scipy(op, lambda y: inverse.apply(inverse_adjoint.apply(y)))
        low = 1.0 / spla.eigsh(inv, k=1, which="LM", v0=v0, tol=tol, return_eigenvectors=False)[0]
    else:
        low = spla.eigsh(fwd, k=1, which="SA" if not hermitian else "SM", v0=v0, tol=tol,
                         return_eigenvectors=False)[0]
    if hermitian:
        return abs(float(np.real(top))), abs(float(np.real(low)))
    return float(np.sqrt(abs(np.real(top)))), float(np.sqrt(abs(np.real(low))))


def estimate_condition_number(op, solver: Optional[str] = None, config: Optional[SolverConfig] = None,
                              hermitian: bool = False, seed: int = 0) -> float:
    """Ratio of the largest to the smallest singular value.

    Dense operators (and maps of dimension up to the dense limit with an
    explicit matrix) are handled exactly by an SVD. Otherwise Lanczos
    estimates the largest value on ``op`` and, when ``solver`` names an
    algorithm (``"gmres20"``, ``"bicgstab"``, ...), the smallest value on the
    inverse realized by that solver.

    Examples
    --------
    >>> import numpy as np
    >>> from unisplit.operators import DenseOperator
    >>> round(estimate_condition_number(DenseOperator(np.diag(np.arange(1.0, 11.0)))), 12)
    10.0
    """
    if isinstance(op, DenseOperator):
        return float(op.cond())
    if isinstance(op, np.ndarray):
        return float(np.linalg.cond(op))
    if op.dim <= DENSE_LIMIT:
        return float(np.linalg.cond(op.to_dense()))
    inverse = inverse_h = None
    if solver is not None:
        inverse = solver_inverse(op, solver, config)
        if not hermitian:
            inverse_h = solver_inverse(op, solver, config, adjoint=True)
    hi, lo = extreme_singular_values(op, hermitian=hermitian, inverse=inverse, inverse_adjoint=inverse_h,
                                     seed=seed)
    log.debug("singular value range of %s: [%g, %g]", op.name, lo, hi)
    return hi / lo


def split_inverse(split, algorithm: str = "gmres20", config: Optional[SolverConfig] = None,
                  raw: bool = True) -> LinearMap:
    """Inverse of a split system's operator, applied by preconditioned solves.

    With ``raw`` the inverse of the unscaled operator ``c A`` is returned
    (scalar scales only), otherwise that of the canonical ``A``.
    """
    from ..solvers import solve
    from ..operators import ComplexVector

    config = config or SolverConfig(tol=1e-11, max_iter=20000)
    scale = split.scale.scalar_scale if raw else 1.0
    if scale is None:
        raise ValueError("raw inverses need a scalar scale")

    def apply(y):
        x, rep = solve(split.with_source(ComplexVector(np.asarray(y) / scale, split.source.shape)),
                       algorithm, config=config)
        if rep.status != CONVERGED:
            raise RuntimeError(f"inverse solve {rep.status} after {rep.iterations} iterations")
        return x.data

    return LinearMap(split.dim, apply, name="A⁻¹")
