"""
Vector-space primitives and the matrix-free operator abstraction.

Every operator in the package is a :class:`LinearMap` acting on flat complex
numpy arrays. Grid-shaped fields are carried around as :class:`ComplexVector`
so that solutions can be reshaped and plotted after an iterative solve.

Inner products are conjugate-linear in the first argument, ``inner(x, y) =
sum(conj(x) * y)``, which is the convention of :func:`numpy.vdot`.
"""
from __future__ import annotations

import threading
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg

__all__ = [
    "ComplexVector",
    "LinearMap",
    "DenseOperator",
    "NormEstimateWarning",
    "SingularOperatorError",
    "CapabilityError",
    "DENSE_LIMIT",
    "inner",
    "norm",
    "operator_norm_estimate",
    "accretivity_lower_bound",
    "dense_inverse",
    "random_unit_vectors",
]

#: Dimension up to which dense oracles are used in place of probing.
DENSE_LIMIT = 64


class NormEstimateWarning(RuntimeWarning):
    """Raised (as a warning) when a power iteration did not reach its tolerance."""


class SingularOperatorError(np.linalg.LinAlgError):
    pass


class CapabilityError(TypeError):
    """An operation needs a capability (adjoint, explicit matrix) the operator lacks."""


def inner(x: np.ndarray, y: np.ndarray) -> complex:
    """Inner product, conjugating the first argument."""
    return complex(np.vdot(x, y))


def norm(x: np.ndarray) -> float:
    # np.linalg.norm reduces in a fixed order, so histories are reproducible.
    return float(np.linalg.norm(x))


@dataclass
class ComplexVector:
    """A flat complex state vector with the grid it lives on.

    :param data: the samples, flattened in row-major order.
    :param shape: the grid extents, ``prod(shape) == len(data)``.
    :param spacing: optional grid step per axis.
    """
    data: np.ndarray
    shape: tuple = None
    spacing: Optional[tuple] = None

    def __post_init__(self):
        data = np.asarray(self.data)
        if not np.iscomplexobj(data):
            data = data.astype(np.complex128)
        if self.shape is None:
            self.shape = data.shape
        self.shape = tuple(int(s) for s in self.shape)
        if any(s <= 0 for s in self.shape):
            raise ValueError(f"shape extents must be positive, got {self.shape}")
        self.data = data.reshape(-1)
        if int(np.prod(self.shape)) != self.data.size:
            raise ValueError(f"shape {self.shape} does not match {self.data.size} samples")
        if self.spacing is not None:
            self.spacing = tuple(float(s) for s in self.spacing)
            if len(self.spacing) != len(self.shape) or any(s <= 0 for s in self.spacing):
                raise ValueError("spacing needs one positive step per axis")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("ComplexVector data must be finite")

    @classmethod
    def zeros(cls, shape, spacing=None, dtype=np.complex128) -> "ComplexVector":
        return cls(np.zeros(int(np.prod(shape)), dtype=dtype), shape, spacing)

    @property
    def grid(self) -> np.ndarray:
        """The samples as an array of ``shape``."""
        return self.data.reshape(self.shape)

    def __len__(self):
        return self.data.size

    def norm(self) -> float:
        return norm(self.data)


class LinearMap:
    """A square matrix-free linear operator on ``C^dim``.

    :param dim: the dimension of the domain and range.
    :param apply: callable mapping a flat array of length ``dim`` to another.
    :param adjoint: optional callable applying the Hermitian adjoint.
    :param matrix: optional explicit representation (dense ndarray or scipy
        sparse matrix). Operations that need a factorization use it.
    :param name: label used in error messages and reports.

    Every call of :meth:`apply` increments :attr:`evals`; the counter is
    protected by a lock so that shared operators can be applied from several
    threads.
    """

    def __init__(self, dim: int, apply: Callable[[np.ndarray], np.ndarray],
                 adjoint: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                 matrix=None, name: str = "", dtype=np.complex128):
        if int(dim) < 1:
            raise ValueError("dim must be a positive integer")
        self.dim = int(dim)
        self._apply = apply
        self._adjoint = adjoint
        self.matrix = matrix
        self.name = name
        self.dtype = np.dtype(dtype)
        self._evals = 0
        self._lock = threading.Lock()

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim}, name={self.name!r})"

    @property
    def evals(self) -> int:
        return self._evals

    def reset_counter(self):
        with self._lock:
            self._evals = 0

    def _count(self):
        with self._lock:
            self._evals += 1

    @property
    def has_adjoint(self) -> bool:
        return self._adjoint is not None

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        if x.shape != (self.dim,):
            raise ValueError(f"{self!r} expects a vector of length {self.dim}, got shape {x.shape}")
        self._count()
        return self._apply(x)

    __call__ = apply

    def __matmul__(self, x):
        if isinstance(x, LinearMap):
            return compose(self, x)
        return self.apply(x)

    def adjoint_apply(self, y: np.ndarray) -> np.ndarray:
        if self._adjoint is None:
            raise CapabilityError(f"{self!r} has no adjoint")
        y = np.asarray(y)
        if y.shape != (self.dim,):
            raise ValueError(f"{self!r} expects a vector of length {self.dim}, got shape {y.shape}")
        self._count()
        return self._adjoint(y)

    @property
    def H(self) -> "LinearMap":
        """The adjoint as a map of its own."""
        if self._adjoint is None:
            raise CapabilityError(f"{self!r} has no adjoint")
        matrix = None
        if self.matrix is not None:
            matrix = self.matrix.conj().T
        return LinearMap(self.dim, self._adjoint, self._apply, matrix=matrix,
                         name=f"{self.name}*", dtype=self.dtype)

    def to_dense(self) -> np.ndarray:
        """Realize the operator column by column (uncounted)."""
        if self.matrix is not None:
            m = self.matrix
            return np.asarray(m.toarray() if hasattr(m, "toarray") else m, dtype=np.complex128)
        eye = np.eye(self.dim, dtype=np.complex128)
        return np.stack([self._apply(eye[:, j]) for j in range(self.dim)], axis=1)

    def __add__(self, other: "LinearMap") -> "LinearMap":
        return lincomb((1.0, self), (1.0, other))

    def __sub__(self, other: "LinearMap") -> "LinearMap":
        return lincomb((1.0, self), (-1.0, other))

    def __rmul__(self, scalar) -> "LinearMap":
        return lincomb((scalar, self))

    @classmethod
    def identity(cls, dim: int) -> "LinearMap":
        def ident(x):
            return x.copy()
        return cls(dim, ident, ident, name="1")

    @classmethod
    def diagonal(cls, values, name="diag", dtype=np.complex128) -> "LinearMap":
        """Pointwise multiplication by ``values``."""
        values = np.asarray(values, dtype=dtype).reshape(-1)
        conj_values = values.conj()
        import scipy.sparse
        return cls(values.size, lambda x: values * x, lambda y: conj_values * y,
                   matrix=scipy.sparse.diags(values, format="csr"), name=name, dtype=dtype)

    @classmethod
    def from_matrix(cls, m, name="") -> "LinearMap":
        """Wrap a dense ndarray or scipy sparse matrix."""
        if hasattr(m, "toarray"):
            mh = m.conj().T.tocsr()
            m = m.tocsr()
            return cls(m.shape[0], lambda x: m @ x, lambda y: mh @ y, matrix=m, name=name)
        return DenseOperator(m, name=name)


def compose(*maps: LinearMap) -> LinearMap:
    """The product ``maps[0] @ maps[1] @ ...``."""
    dim = maps[0].dim
    if any(m.dim != dim for m in maps):
        raise ValueError("cannot compose maps of different dimensions")

    def apply(x):
        for m in reversed(maps):
            x = m._apply(x)
        return x

    adjoint = None
    if all(m.has_adjoint for m in maps):
        def adjoint(y):
            for m in maps:
                y = m._adjoint(y)
            return y
    return LinearMap(dim, apply, adjoint, name="·".join(m.name for m in maps))


def lincomb(*terms) -> LinearMap:
    """``sum(c * m for c, m in terms)`` as a single map."""
    dim = terms[0][1].dim
    if any(m.dim != dim for _, m in terms):
        raise ValueError("cannot combine maps of different dimensions")

    def apply(x):
        out = terms[0][0] * terms[0][1]._apply(x)
        for c, m in terms[1:]:
            out = out + c * m._apply(x)
        return out

    adjoint = None
    if all(m.has_adjoint for _, m in terms):
        def adjoint(y):
            out = np.conj(terms[0][0]) * terms[0][1]._adjoint(y)
            for c, m in terms[1:]:
                out = out + np.conj(c) * m._adjoint(y)
            return out
    matrix = None
    if all(m.matrix is not None for _, m in terms):
        matrix = sum(c * m.matrix for c, m in terms)
    return LinearMap(dim, apply, adjoint, matrix=matrix, name="+".join(m.name for _, m in terms))


class DenseOperator(LinearMap):
    """A small explicit matrix, used as an oracle for the matrix-free code."""

    def __init__(self, entries, name=""):
        entries = np.array(entries, dtype=np.complex128)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {entries.shape}")
        if entries.shape[0] > DENSE_LIMIT:
            raise ValueError(f"dense operators are limited to dimension {DENSE_LIMIT}")
        self.entries = entries
        eh = entries.conj().T
        super().__init__(entries.shape[0], lambda x: entries @ x, lambda y: eh @ y,
                         matrix=entries, name=name)

    def cond(self) -> float:
        s = np.linalg.svd(self.entries, compute_uv=False)
        return float(s[0] / s[-1]) if s[-1] > 0 else np.inf

    def to_map(self) -> LinearMap:
        return LinearMap(self.dim, self._apply, self._adjoint, matrix=self.entries, name=self.name)

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)


def random_unit_vectors(dim: int, count: int, seed=0) -> np.ndarray:
    """``count`` complex Gaussian unit vectors as the rows of an array."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((count, dim)) + 1j * rng.standard_normal((count, dim))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def operator_norm_estimate(op: LinearMap, max_iters: int = 500, tol: float = 1e-8, seed=0) -> float:
    """Largest singular value of ``op``.

    Power iteration on ``op* op`` when an adjoint is available. Operators
    without an adjoint are realized densely, which is only allowed up to
    :data:`DENSE_LIMIT`. If the iteration does not settle to ``tol`` within
    ``max_iters`` steps, the last estimate is returned and a
    :class:`NormEstimateWarning` is issued.
    """
    if not op.has_adjoint:
        if op.dim > DENSE_LIMIT:
            raise CapabilityError(f"{op!r} has no adjoint and is too large to realize densely")
        return float(np.linalg.norm(op.to_dense(), 2))
    x = random_unit_vectors(op.dim, 1, seed)[0].astype(op.dtype)
    sigma = 0.0
    for _ in range(max_iters):
        y = op._apply(x)
        new_sigma = norm(y)
        if new_sigma == 0.0:
            return 0.0
        z = op._adjoint(y)
        x = z / norm(z)
        # Rayleigh quotient of op* op; the change per step understates the error
        # when the top singular values cluster, hence the extra factor.
        if abs(new_sigma - sigma) <= 1e-3 * tol * new_sigma:
            return float(new_sigma)
        sigma = new_sigma
    warnings.warn(f"operator norm of {op!r} not converged to {tol} in {max_iters} iterations",
                  NormEstimateWarning, stacklevel=2)
    return float(sigma)


def accretivity_lower_bound(op: LinearMap, n_samples: int = 100, seed=0) -> float:
    """Estimate ``Re[op] = inf Re<x, op x>`` over unit vectors.

    For ``dim <= DENSE_LIMIT`` the exact infimum, the smallest eigenvalue of
    the Hermitian part, is returned. Larger maps are probed with ``n_samples``
    random unit vectors; the result is then an upper bound on the infimum.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    if op.dim <= DENSE_LIMIT:
        a = op.to_dense()
        return float(np.linalg.eigvalsh(0.5 * (a + a.conj().T))[0])
    probes = random_unit_vectors(op.dim, n_samples, seed)
    return min(inner(x, op._apply(x)).real for x in probes)


def dense_inverse(op: DenseOperator, max_cond: float = 1e12) -> DenseOperator:
    """Explicit inverse of a small matrix, refusing near-singular input."""
    a = np.asarray(op.entries if isinstance(op, DenseOperator) else op, dtype=np.complex128)
    s = np.linalg.svd(a, compute_uv=False)
    if s[-1] == 0 or s[0] / s[-1] >= max_cond:
        raise SingularOperatorError(f"matrix is singular to tolerance (condition {s[0] / max(s[-1], 1e-300):.3g})")
    return DenseOperator(scipy.linalg.inv(a), name=f"{getattr(op, 'name', '')}⁻¹")
