"""Dense small-scale checks of the contraction theory.

Everything here works on explicit matrices of dimension at most
:data:`~unisplit.operators.DENSE_LIMIT` and uses the conventions of
:mod:`unisplit.splitting`: ``B = 1 - V``, ``Γ⁻¹ = α B (A + B)⁻¹`` and
``M = 1 - Γ⁻¹A``. For an invertible ``B`` one has ``(Γ⁻¹A)⁻¹ = (A⁻¹ + B⁻¹) / α``.

The real part of an operator, ``Re[X]``, is the infimum of ``Re<x, X x>``
over unit vectors, i.e. the smallest eigenvalue of ``(X + X*) / 2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from .operators import SingularOperatorError

__all__ = [
    "BoundReport",
    "CandidatePreconditioner",
    "Counterexample",
    "LemmaMismatchError",
    "real_part",
    "contraction_norm_dense",
    "contraction_norm_rayleigh",
    "alpha_max_dense",
    "condition_number_bound",
    "convergence_rate_bound",
    "hermitian_rate_profile",
    "bound_report_dense",
    "uniqueness_counterexample",
    "random_accretive",
    "random_discrepancy",
    "random_hermitian_psd",
]


class LemmaMismatchError(AssertionError):
    """The singular-value and Rayleigh-quotient evaluations of ``||M||`` disagree."""


def _mat(x) -> np.ndarray:
    a = np.asarray(x, dtype=np.complex128)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    return a


def _inv(a: np.ndarray, what: str, max_cond: float = 1e12) -> np.ndarray:
    s = np.linalg.svd(a, compute_uv=False)
    if s[-1] == 0 or s[0] / s[-1] >= max_cond:
        raise SingularOperatorError(f"{what} is singular to working precision")
    return scipy.linalg.inv(a)


def real_part(x) -> float:
    """``Re[X]``, the smallest eigenvalue of the Hermitian part."""
    a = _mat(x)
    return float(np.linalg.eigvalsh(0.5 * (a + a.conj().T))[0])


def _preconditioned(A, B, alpha):
    return alpha * B @ np.linalg.solve(A + B, A)


def contraction_norm_rayleigh(A, B, alpha: float) -> float:
    """``||1 - Γ⁻¹A||`` from the Rayleigh-quotient identity.

    With ``W = (Γ⁻¹A)⁻¹ = (A⁻¹ + B⁻¹)/α``::

        ||1 - Γ⁻¹A||² = 1 + sup_y (||y||² - 2 Re<y, W y>) / ||W y||²

    The supremum is the top eigenvalue of the Hermitian pencil
    ``(1 - W - W*, W* W)``. Needs invertible ``A`` and ``B`` and ``α > 0``.
    """
    A, B = _mat(A), _mat(B)
    if not alpha > 0:
        raise ValueError("the Rayleigh form needs alpha > 0")
    W = (_inv(A, "A") + _inv(B, "B")) / alpha
    n = A.shape[0]
    num = np.eye(n) - W - W.conj().T
    den = W.conj().T @ W
    top = scipy.linalg.eigh(0.5 * (num + num.conj().T), 0.5 * (den + den.conj().T), eigvals_only=True)[-1]
    return math.sqrt(max(1.0 + float(top), 0.0))


def contraction_norm_dense(A, B, alpha: float, check: bool = True, rtol: float = 1e-8) -> float:
    """Spectral norm of ``M = 1 - α B (A + B)⁻¹ A``.

    Parameters
    ----------
    A, B : array_like or DenseOperator
        Square matrices with ``A + B`` invertible.
    alpha : float
        Step size.
    check : bool
        Also evaluate :func:`contraction_norm_rayleigh` and raise
        :class:`LemmaMismatchError` if the two differ by more than ``rtol``
        (relative). Skipped when ``α = 0`` or ``A``/``B`` is singular.

    Raises
    ------
    SingularOperatorError
        If ``A + B`` is singular.
    """
    A, B = _mat(A), _mat(B)
    _inv(A + B, "A + B")
    M = np.eye(A.shape[0]) - _preconditioned(A, B, alpha)
    value = float(np.linalg.norm(M, 2))
    if check and alpha > 0:
        try:
            other = contraction_norm_rayleigh(A, B, alpha)
        except SingularOperatorError:
            return value
        if abs(other - value) > rtol * max(value, 1.0):
            raise LemmaMismatchError(f"SVD norm {value!r} != Rayleigh form {other!r}")
    return value


def alpha_max_dense(A, B) -> float:
    """Largest step size with a contracting iteration: ``2 Re[A⁻¹ + B⁻¹]``."""
    A, B = _mat(A), _mat(B)
    return 2.0 * real_part(_inv(A, "A") + _inv(B, "B"))


def condition_number_bound(S: float):
    """``((1 + sqrt(2S))², sqrt(S) / (sqrt(S) + sqrt(2)))``.

    The condition number of the preconditioned system is bounded by
    ``(S/v + 1/(1 - v)) (1 + v)`` for ``v = ||V||``; the pair returned is
    the minimum of that bound and the ``v`` at which it is attained.
    """
    if not S > 0:
        raise ValueError("S must be positive")
    r = math.sqrt(S)
    return (1.0 + math.sqrt(2.0 * S)) ** 2, r / (r + math.sqrt(2.0))


def convergence_rate_bound(S: float, hermitian: bool = False) -> float:
    """Worst-case ``||M||`` at the optimal scaling and step size.

    ``sqrt(1 - (1 + sqrt(2S))⁻⁴)`` in general (step ``Re[B⁻¹]``) and
    ``1 - 1/(1 + sqrt(2S) + S)`` when ``A`` and ``B`` are Hermitian (step
    ``2/(λmin + λmax)``).
    """
    if not S > 0:
        raise ValueError("S must be positive")
    q = 1.0 + math.sqrt(2.0 * S)
    if hermitian:
        return 1.0 - 1.0 / (q + S)
    return math.sqrt(-math.expm1(-4.0 * math.log(q)))


def hermitian_rate_profile(S: float, v: float) -> float:
    """Hermitian-case bound on ``||M||`` as a function of ``v = ||V||``."""
    return (S + 2 * v * v - S * v * v) / (S + 2 * v - S * v * v)


@dataclass
class BoundReport:
    """Measured quantities of one dense instance next to their bounds."""
    S: float
    v_norm: float
    alpha: float
    kappa_measured: float
    kappa_bound: float
    m_norm_measured: float
    m_norm_bound: float
    hermitian: bool = False
    lambda_min: Optional[float] = None
    lambda_max: Optional[float] = None

    @property
    def holds(self) -> bool:
        return (self.kappa_measured <= self.kappa_bound * (1 + 1e-9)
                and self.m_norm_measured <= self.m_norm_bound + 1e-9)


def bound_report_dense(A, V, hermitian: bool = False, rescale: bool = True) -> BoundReport:
    """Check the condition-number and rate bounds on one dense system.

    The system ``(A, V)`` is first divided by the real scale that sets
    ``||V||`` to its optimal value for ``S = ||A⁻¹|| ||V||`` (which is
    invariant under that scaling), unless ``rescale`` is False. The step size
    is ``Re[B⁻¹]`` in general, or ``2/(λmin + λmax)`` over the spectrum of
    ``(A⁻¹ + B⁻¹)⁻¹`` when ``hermitian`` is set.
    """
    A, V = _mat(A), _mat(V)
    if hermitian and not (np.allclose(A, A.conj().T) and np.allclose(V, V.conj().T)):
        raise ValueError("hermitian bounds need Hermitian A and V")
    v = float(np.linalg.norm(V, 2))
    if v == 0:
        raise ValueError("V must be nonzero")
    inv_A_norm = float(np.linalg.norm(_inv(A, "A"), 2))
    S = inv_A_norm * v
    kappa_bound, v_opt = condition_number_bound(S)
    m_bound = convergence_rate_bound(S, hermitian)
    if rescale:
        c = v / v_opt
        A, V, v = A / c, V / c, v_opt
    else:
        if not v < 1:
            raise ValueError("||V|| must be below 1 without rescaling")
        kappa_bound = (S / v + 1 / (1 - v)) * (1 + v)
        m_bound = hermitian_rate_profile(S, v) if hermitian else math.sqrt(1 - kappa_bound ** -2)
    n = A.shape[0]
    B = np.eye(n) - V
    W = _inv(A, "A") + _inv(B, "B")
    lam_min = lam_max = None
    if hermitian:
        lam = 1.0 / np.linalg.eigvalsh(0.5 * (W + W.conj().T))
        lam_min, lam_max = float(lam.min()), float(lam.max())
        alpha = 2.0 / (lam_min + lam_max)
    else:
        alpha = real_part(_inv(B, "B"))
    P = _preconditioned(A, B, alpha)
    s = np.linalg.svd(P, compute_uv=False)
    m_norm = contraction_norm_dense(A, B, alpha, check=False)
    return BoundReport(S=S, v_norm=v, alpha=alpha, kappa_measured=float(s[0] / s[-1]),
                       kappa_bound=kappa_bound, m_norm_measured=m_norm,
                       m_norm_bound=m_bound, hermitian=hermitian,
                       lambda_min=lam_min, lambda_max=lam_max)


# ---------------------------------------------------------------------------
# counterexamples to alternative preconditioners

@dataclass
class CandidatePreconditioner:
    """``Γ⁻¹ = β (A + B)⁻¹ α + γ``, or ``β (A* + B*)⁻¹ α + γ`` if ``adjoint``.

    ``beta``, ``alpha`` and ``gamma`` are matrices derived from ``B`` alone.
    """
    B: np.ndarray
    beta: np.ndarray
    alpha: np.ndarray
    gamma: np.ndarray
    adjoint: bool = False

    def __post_init__(self):
        self.B = _mat(self.B)
        n = self.B.shape[0]
        for name in ("beta", "alpha", "gamma"):
            m = np.asarray(getattr(self, name), dtype=np.complex128)
            if m.ndim == 0:
                m = m * np.eye(n)
            setattr(self, name, _mat(m))
            if m.shape != (n, n):
                raise ValueError(f"{name} must be {n}x{n}")

    @classmethod
    def universal(cls, B, step: float = 0.75) -> "CandidatePreconditioner":
        B = _mat(B)
        return cls(B, B, step * np.eye(B.shape[0]), np.zeros_like(B))

    @property
    def is_universal(self) -> bool:
        """True for ``β = B``, ``α`` a positive real scalar below 1, ``γ = 0``."""
        n = self.B.shape[0]
        a = self.alpha[0, 0]
        return (not self.adjoint and np.allclose(self.gamma, 0) and np.allclose(self.beta, self.B)
                and np.allclose(self.alpha, a * np.eye(n)) and abs(a.imag) < 1e-14 and 0 < a.real < 1)

    def preconditioned(self, A) -> np.ndarray:
        """``Γ⁻¹A`` for a dense ``A``."""
        A = _mat(A)
        core = (A.conj().T + self.B.conj().T) if self.adjoint else (A + self.B)
        return self.beta @ np.linalg.solve(core, self.alpha @ A) + self.gamma @ A


@dataclass
class Counterexample:
    """An operator ``A`` and a vector ``w`` with ``||M w|| > ||w||``, if found.

    ``violation = ||(1 - Γ⁻¹A) w|| / ||w|| - 1``; positive means the candidate
    fails to contract on ``A``.
    """
    condition: str
    A: np.ndarray
    witness: np.ndarray
    violation: float
    params: dict = field(default_factory=dict)

    @property
    def violates(self) -> bool:
        return self.violation > 0


def _violation(P: np.ndarray, w: np.ndarray) -> float:
    return float(np.linalg.norm(w - P @ w) / np.linalg.norm(w) - 1.0)


def _rayleigh_witness(P: np.ndarray, x: np.ndarray) -> np.ndarray:
    # Re<x, P⁻¹x> < 1/2 for unit x means w = P⁻¹x is stretched by 1 - P.
    return np.linalg.solve(P, x)


def _givens(n: int, i: int, j: int, theta: float) -> np.ndarray:
    R = np.eye(n, dtype=np.complex128)
    c, s = math.cos(theta), math.sin(theta)
    R[i, i], R[i, j], R[j, i], R[j, j] = c, -s, s, c
    return R


def _off_diagonal_probe(candidate, k_values, phis, thetas, condition):
    """Family used for conditions 2-4: identity with one tiny diagonal entry.

    ``A = R diag(1, .., k⁻², .., 1) R*`` with a Givens rotation ``R`` and test
    vector ``R (k e_i + e^{iφ} e_j) / sqrt(1 + k²)``.
    """
    n = candidate.B.shape[0]
    best = None
    for k in k_values:
        for theta in thetas:
            for i in range(n):
                for j in range(n):
                    if i == j:
                        continue
                    R = _givens(n, i, j, theta)
                    D = np.eye(n, dtype=np.complex128)
                    D[j, j] = k ** -2
                    A = R @ D @ R.conj().T
                    P = candidate.preconditioned(A)
                    for phi in phis:
                        x0 = np.zeros(n, dtype=np.complex128)
                        x0[i], x0[j] = k, np.exp(1j * phi)
                        x = R @ (x0 / math.sqrt(1 + k * k))
                        w = _rayleigh_witness(P, x)
                        v = _violation(P, w)
                        if best is None or v > best.violation:
                            best = Counterexample(condition, A, w, v,
                                                  dict(k=k, theta=theta, i=i, j=j, phi=phi))
    return best


def uniqueness_counterexample(condition, candidate: CandidatePreconditioner,
                              k_values=(1e1, 1e2, 1e3, 1e-3), n_phi: int = 16, n_theta: int = 8) -> Counterexample:
    """Search the operator family that defeats a given kind of deviation.

    Parameters
    ----------
    condition : int or "adjoint"
        Which deviation to target: ``1`` nonzero ``γ``; ``2`` non-diagonal
        ``α``; ``3`` unequal diagonal ``α`` (probed in Givens-rotated
        bases); ``4`` ``β`` not proportional to ``B``; ``5`` non-real scalar
        ``α``; ``"adjoint"`` the inverse ``(A* + B*)⁻¹``.
    candidate : CandidatePreconditioner
    k_values : sequence of float
        Magnitudes of the large/small parameter ``k``.
    n_phi, n_theta : int
        Number of phases and rotation angles scanned.

    Returns
    -------
    Counterexample
        The instance with the largest violation. For the universal
        preconditioner every violation is ``<= 0``.
    """
    n = candidate.B.shape[0]
    phis = np.linspace(-np.pi, np.pi, n_phi, endpoint=False)
    if condition == 1:
        best = None
        _, _, vh = np.linalg.svd(candidate.gamma)
        w = vh[0].conj() if np.linalg.norm(candidate.gamma) > 0 else np.eye(n, dtype=np.complex128)[0]
        for k in k_values:
            A = k * np.eye(n, dtype=np.complex128)
            v = _violation(candidate.preconditioned(A), w)
            if best is None or v > best.violation:
                best = Counterexample("1", A, w, v, dict(k=k))
        return best
    if condition == 2:
        return _off_diagonal_probe(candidate, k_values, phis, [0.0], "2")
    if condition in (3, 4):
        thetas = np.linspace(0, np.pi, n_theta + 1)[:-1]
        return _off_diagonal_probe(candidate, k_values, phis, thetas, str(condition))
    if condition in (5, "adjoint"):
        best = None
        half = np.linspace(-np.pi / 2, np.pi / 2, n_phi)
        for k in k_values:
            for phi in half:
                z = np.exp(1j * phi)
                A = (z / k if condition == 5 else k * z) * np.eye(n, dtype=np.complex128)
                P = candidate.preconditioned(A)
                for x in np.eye(n, dtype=np.complex128):
                    w = _rayleigh_witness(P, x)
                    v = _violation(P, w)
                    if best is None or v > best.violation:
                        best = Counterexample(str(condition), A, w, v, dict(k=k, phi=phi))
        return best
    raise ValueError(f"unknown condition {condition!r}")


# ---------------------------------------------------------------------------
# random instances

def _complex_gaussian(rng, n):
    return (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2 * n)


def random_accretive(n: int, rng, margin: float = 0.0) -> np.ndarray:
    """Random complex matrix with ``Re[A] = margin`` exactly."""
    G = _complex_gaussian(rng, n) * (1 + 4 * rng.random())
    return G + (margin - real_part(G)) * np.eye(n)


def random_hermitian_psd(n: int, rng, margin: float = 0.05) -> np.ndarray:
    G = _complex_gaussian(rng, n)
    H = G @ G.conj().T
    return H + (margin - np.linalg.eigvalsh(H)[0]) * np.eye(n)


def random_discrepancy(n: int, rng, v_norm: float = 0.95, hermitian: bool = False) -> np.ndarray:
    """Random ``V`` with ``||V|| = v_norm``."""
    G = _complex_gaussian(rng, n)
    if hermitian:
        G = 0.5 * (G + G.conj().T)
    return G * (v_norm / np.linalg.norm(G, 2))
