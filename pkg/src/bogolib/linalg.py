"""Symplectic and positive-semidefinite linear algebra.

Quadratures are always ordered ``(rho_1, ..., rho_N, phi_1, ..., phi_N)``, so the
symplectic form is ``[[0, I], [-I, 0]]``. Covariance matrices carry a scale
``eta``: the smallest symplectic eigenvalue a physical state may have. For the
lattice model the commutator is ``i/Delta`` and second moments are symmetrized
with a factor 1/2, which puts the vacuum at ``eta = 1/(2 Delta)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
import scipy.linalg as sla

from .errors import (
    DimensionMismatchError,
    NonSymmetricError,
    NotHurwitzError,
    NotPositiveDefiniteError,
    OverflowMatrixError,
    UnphysicalInputError,
)

SYMMETRY_RTOL = 1e-12
PSD_RTOL = 1e-9
PAIR_RTOL = 1e-9


def omega(n_modes: int) -> np.ndarray:
    """Canonical symplectic form of ``n_modes`` modes in block ordering."""
    eye = np.eye(n_modes)
    zero = np.zeros((n_modes, n_modes))
    return np.block([[zero, eye], [-eye, zero]])


@dataclass(frozen=True)
class SymplecticForm:
    n_modes: int
    eta: float = 1.0

    def __post_init__(self):
        if self.n_modes < 1:
            raise ValueError("n_modes must be positive")
        if not self.eta > 0:
            raise ValueError("eta must be positive")

    @property
    def matrix(self) -> np.ndarray:
        return omega(self.n_modes)


def max_norm(a: np.ndarray) -> float:
    return float(np.max(np.abs(a))) if a.size else 0.0


def _check_symmetric(a: np.ndarray) -> None:
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatchError(f"expected a square matrix, got shape {a.shape}")
    scale = max_norm(a)
    if max_norm(a - a.T) > SYMMETRY_RTOL * max(scale, np.finfo(float).tiny):
        raise NonSymmetricError("matrix is not symmetric")


def direct_sum_orthogonal(o: np.ndarray) -> np.ndarray:
    """``O (+) O``: the symplectic lift of an orthogonal mode transform."""
    n = o.shape[0]
    s = np.zeros((2 * n, 2 * n))
    s[:n, :n] = o
    s[n:, n:] = o
    return s


class CovarianceMatrix:
    """Real symmetric 2N x 2N second-moment matrix with its physicality scale.

    The stored array is read-only; transformations return new instances.
    """

    def __init__(self, matrix, eta: float, *, check_physical: bool = True,
                 tol: Optional[float] = None):
        m = np.array(matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] % 2:
            raise DimensionMismatchError(f"covariance must be 2N x 2N, got {m.shape}")
        _check_symmetric(m)
        if not eta > 0:
            raise ValueError("eta must be positive")
        m = 0.5 * (m + m.T)
        m.setflags(write=False)
        self.matrix = m
        self.eta = float(eta)
        if check_physical and not check_uncertainty(m, eta, tol):
            raise UnphysicalInputError("covariance matrix violates the uncertainty relation")

    @property
    def n_modes(self) -> int:
        return self.matrix.shape[0] // 2

    @property
    def rho_block(self) -> np.ndarray:
        n = self.n_modes
        return self.matrix[:n, :n]

    @property
    def phi_block(self) -> np.ndarray:
        n = self.n_modes
        return self.matrix[n:, n:]

    @property
    def cross_block(self) -> np.ndarray:
        n = self.n_modes
        return self.matrix[:n, n:]

    def congruence(self, s: np.ndarray, eta: Optional[float] = None,
                   check_physical: bool = False) -> "CovarianceMatrix":
        """Return ``S Gamma S^T`` (optionally with a new scale)."""
        out = s @ self.matrix @ s.T
        return CovarianceMatrix(0.5 * (out + out.T), self.eta if eta is None else eta,
                                check_physical=check_physical)

    def __repr__(self):
        return f"CovarianceMatrix(n_modes={self.n_modes}, eta={self.eta:g})"


ArrayOrCov = Union[np.ndarray, CovarianceMatrix]


def _as_array(gamma: ArrayOrCov) -> np.ndarray:
    if isinstance(gamma, CovarianceMatrix):
        return gamma.matrix
    return np.asarray(gamma, dtype=float)


@dataclass
class SymplecticEigen:
    values: np.ndarray
    transform: Optional[np.ndarray] = None


def symplectic_eigenvalues(gamma: ArrayOrCov, with_transform: bool = False) -> SymplecticEigen:
    """Symplectic spectrum (Williamson normal form) of a positive-definite matrix.

    Factor ``Gamma = L L^T`` and bring the antisymmetric ``L^-1 Omega L^-T`` to
    real Schur form; its 2x2 blocks carry ``1/nu_j``. With ``with_transform`` the
    symplectic ``S`` with ``Gamma = S diag(nu, nu) S^T`` is returned as well.
    """
    g = _as_array(gamma)
    _check_symmetric(g)
    if g.shape[0] % 2:
        raise DimensionMismatchError("covariance dimension must be even")
    n = g.shape[0] // 2
    g = 0.5 * (g + g.T)
    try:
        chol = np.linalg.cholesky(g)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError("matrix is not positive definite") from exc

    om = omega(n)
    tmp = sla.solve_triangular(chol, om, lower=True)
    b = sla.solve_triangular(chol, tmp.T, lower=True).T
    b = 0.5 * (b - b.T)
    t, q = sla.schur(b, output="real")

    moduli = np.empty(n)
    cols_x = np.empty(n, dtype=int)
    cols_p = np.empty(n, dtype=int)
    for j in range(n):
        upper = t[2 * j, 2 * j + 1]
        lower = t[2 * j + 1, 2 * j]
        mod = np.sqrt(abs(upper * lower))
        if abs(abs(upper) - abs(lower)) > PAIR_RTOL * max(abs(upper), abs(lower), 1e-300):
            # degenerate blocks are not always standardized; fall back below
            mod = np.nan
        moduli[j] = mod
        if upper > 0:
            cols_x[j], cols_p[j] = 2 * j, 2 * j + 1
        else:
            cols_x[j], cols_p[j] = 2 * j + 1, 2 * j

    if np.any(~np.isfinite(moduli)) or np.any(moduli <= 0):
        # Hermitian route: eigenvalues of i*B come in +-1/nu pairs.
        ev = np.linalg.eigvalsh(1j * b)
        pos = np.sort(ev[ev > 0])
        if pos.size != n:
            raise NotPositiveDefiniteError("could not pair symplectic eigenvalues")
        values = np.sort(1.0 / pos)
        if with_transform:
            raise NotPositiveDefiniteError("Williamson transform unavailable for this input")
        return SymplecticEigen(values)

    values = 1.0 / moduli
    order = np.argsort(values, kind="stable")
    values = values[order]
    if not with_transform:
        return SymplecticEigen(values)

    perm = np.concatenate([cols_x[order], cols_p[order]])
    qp = q[:, perm]
    half = np.concatenate([np.sqrt(moduli[order])] * 2)
    s = chol @ qp * half[None, :]
    return SymplecticEigen(values, s)


def is_symplectic(s: np.ndarray, tol: float = 1e-10) -> bool:
    n = s.shape[0] // 2
    om = omega(n)
    return max_norm(s @ om @ s.T - om) <= tol


def default_tolerance(gamma: np.ndarray, eta: float) -> float:
    return PSD_RTOL * max(max_norm(gamma), eta)


def check_uncertainty(gamma: ArrayOrCov, eta: Optional[float] = None,
                      tol: Optional[float] = None) -> bool:
    """True iff ``Gamma + i eta Omega >= 0``, i.e. every ``nu_j >= eta - tol``."""
    g = _as_array(gamma)
    if eta is None:
        if not isinstance(gamma, CovarianceMatrix):
            raise TypeError("eta is required for a bare array")
        eta = gamma.eta
    _check_symmetric(g)
    if tol is None:
        tol = default_tolerance(g, eta)
    try:
        nu = symplectic_eigenvalues(g).values
    except NotPositiveDefiniteError:
        return False
    return bool(nu[0] >= eta - tol)


def uncertainty_embedding(gamma: ArrayOrCov, eta: float) -> np.ndarray:
    """Real embedding of ``Gamma + i eta Omega``."""
    g = _as_array(gamma)
    return hermitian_psd_embed(g, eta * omega(g.shape[0] // 2))


def hermitian_psd_embed(real_part: np.ndarray, imag_part: np.ndarray) -> np.ndarray:
    """``[[A, -B], [B, A]]``, which is PSD iff ``A + iB`` is."""
    a = np.asarray(real_part, dtype=float)
    b = np.asarray(imag_part, dtype=float)
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatchError(f"shapes {a.shape} and {b.shape} do not match")
    return np.block([[a, -b], [b, a]])


def matrix_exponential(a: np.ndarray, t: float = 1.0) -> np.ndarray:
    """``exp(a t)`` by scaling and squaring with a degree-13 Pade approximant."""
    a = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(a)) or not np.isfinite(t):
        raise OverflowMatrixError("non-finite input to matrix_exponential")
    out = sla.expm(a * t)
    if not np.all(np.isfinite(out)):
        raise OverflowMatrixError("matrix exponential overflowed")
    return out


def solve_lyapunov_steady(g_drift: np.ndarray, d_diss: np.ndarray) -> np.ndarray:
    """Stationary solution of ``G X + X G^T + D = 0`` for Hurwitz ``G``.

    Uses the real-Schur (Bartels-Stewart) solver from LAPACK.
    """
    g = np.asarray(g_drift, dtype=float)
    d = np.asarray(d_diss, dtype=float)
    if g.shape != d.shape or g.shape[0] != g.shape[1]:
        raise DimensionMismatchError(f"shapes {g.shape} and {d.shape} do not match")
    ev = np.linalg.eigvals(g)
    if np.max(ev.real) >= -1e-12 * max(max_norm(g), 1.0):
        raise NotHurwitzError("drift matrix is not Hurwitz; no stationary state")
    x = sla.solve_continuous_lyapunov(g, -d)
    return 0.5 * (x + x.T)
