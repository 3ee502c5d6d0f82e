"""Unitary compression dynamics in the co-compressing frame.

The box length follows ``L_{n+1} = (1 + eps) L_n``; with ``lambda = L(0)/L(t)``
the co-compressing Hamiltonian of step ``n`` has density block ``g*lambda_n``
and phase block ``kappa*lambda_n^2*Lap + mu``. The pixel size and the
commutator stay fixed at their initial values, so the mode transform ``O`` does
not depend on ``lambda`` and every step acts as an independent 2x2 rotation on
each normal mode.
"""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass
from typing import List, NamedTuple, Optional

import numpy as np

from .errors import (
    FrameMismatchError,
    IndexOutOfRangeError,
    NonPositiveInputError,
    NonPositiveTemperatureError,
    UnphysicalInputError,
    ZeroModeError,
)
from .lattice import (
    NormalModeBasis,
    PhysicalParams,
    QuadraticHamiltonian,
    build_laplacian,
    mode_diagonal_covariance,
    thermal_mode_variances,
)
from .linalg import (
    CovarianceMatrix,
    check_uncertainty,
    direct_sum_orthogonal,
    matrix_exponential,
    max_norm,
)

EPSILON_WARN = 1e-2


@dataclass(frozen=True)
class CompressionProtocol:
    """Geometric length schedule of ``n_steps`` equal time steps.

    ``lambda_start`` is ``L(0)/L`` at the start of the stroke (1 for a
    compression from rest, ``1/ratio`` for the matching expansion).
    """

    length_ratio_final: float
    total_time: float
    n_steps: int
    lambda_start: float = 1.0

    def __post_init__(self):
        if not (self.length_ratio_final > 0 and self.total_time > 0 and self.lambda_start > 0):
            raise NonPositiveInputError("ratio, total_time and lambda_start must be positive")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise NonPositiveInputError("n_steps must be a positive integer")
        if abs(self.epsilon) > EPSILON_WARN:
            warnings.warn(f"per-step length change eps = {self.epsilon:.3g} is not small",
                          RuntimeWarning, stacklevel=3)

    @property
    def epsilon(self) -> float:
        return float(np.expm1(np.log(self.length_ratio_final) / self.n_steps))

    @property
    def dt(self) -> float:
        return self.total_time / self.n_steps

    @property
    def lambda_final(self) -> float:
        return self.lambda_start / self.length_ratio_final

    def lambda_at(self, n) -> np.ndarray:
        """``lambda_n = lambda_start * (1+eps)^-n`` (exact at ``n = n_steps``)."""
        n = np.asarray(n, dtype=float)
        return self.lambda_start * self.length_ratio_final ** (-n / self.n_steps)

    def inverse(self, total_time: Optional[float] = None,
                n_steps: Optional[int] = None) -> "CompressionProtocol":
        """The stroke that returns the box to its starting length."""
        return CompressionProtocol(1.0 / self.length_ratio_final,
                                   self.total_time if total_time is None else total_time,
                                   self.n_steps if n_steps is None else n_steps,
                                   lambda_start=self.lambda_final)


class Frame(str, enum.Enum):
    LATTICE = "lattice"
    CO_COMPRESSING = "co_compressing"
    INSTANTANEOUS_MODES = "instantaneous_modes"


@dataclass(frozen=True)
class FrameTag:
    frame: Frame
    lambda_now: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "frame", Frame(self.frame))
        if not self.lambda_now > 0:
            raise NonPositiveInputError("lambda_now must be positive")


def hamiltonian_at(params: PhysicalParams, lam: float) -> QuadraticHamiltonian:
    """Co-compressing Hamiltonian at compression factor ``lam``."""
    n = params.n_pixels
    lap = build_laplacian(n, params.boundary)
    return QuadraticHamiltonian(
        block_rho=params.coupling_g * lam * np.eye(n),
        block_phi=params.phi_scale * lam ** 2 * lap + params.zero_mode_mu * np.eye(n),
        pixel_size=params.pixel_size,
        boundary=params.boundary,
    )


def step_hamiltonian(params: PhysicalParams, protocol: CompressionProtocol,
                     n: int) -> QuadraticHamiltonian:
    """Hamiltonian held constant during step ``n`` (1-based, ``1 <= n <= n_steps``).

    Uses ``lambda_n = lambda_{n-1}/(1+eps)``, so the last step sits at the final
    compression.
    """
    if int(n) != n or not 1 <= n <= protocol.n_steps:
        raise IndexOutOfRangeError(f"step {n} outside 1..{protocol.n_steps}")
    return hamiltonian_at(params, float(protocol.lambda_at(n)))


def step_propagator(h: QuadraticHamiltonian, dt: float) -> np.ndarray:
    return matrix_exponential(h.generator(), dt)


def propagate_step(gamma: CovarianceMatrix, h: QuadraticHamiltonian,
                   dt: float) -> CovarianceMatrix:
    """``Gamma -> S Gamma S^T`` with ``S = exp(Omega H dt)``."""
    if not dt > 0:
        raise NonPositiveInputError("dt must be positive")
    if not check_uncertainty(gamma):
        raise UnphysicalInputError("input covariance is unphysical")
    s = step_propagator(h, dt)
    return gamma.congruence(s)


def mode_rotation(density_coupling, laplacian_eigs, dt):
    """Entries ``(a, b, c, d)`` of the per-mode map ``[[a, b], [c, d]]``.

    Mode ``k`` evolves under ``d rho/dt = nu_k phi``, ``d phi/dt = -g' rho``.
    """
    g = np.asarray(density_coupling, dtype=float)
    nu = np.asarray(laplacian_eigs, dtype=float)
    w = np.sqrt(g * np.clip(nu, 0.0, None))
    cos = np.cos(w * dt)
    sinc_dt = dt * np.sinc(w * dt / np.pi)
    return cos, nu * sinc_dt, -g * sinc_dt, cos


class Snapshot(NamedTuple):
    time: float
    gamma: CovarianceMatrix
    step: int
    lambda_now: float


def _snapshot_steps(n_steps: int, snapshot_every: Optional[int]) -> set:
    if snapshot_every is None or snapshot_every <= 0:
        return {0, n_steps}
    return set(range(0, n_steps + 1, snapshot_every)) | {n_steps}


def _mode_propagator_matrix(a, b, c, d) -> np.ndarray:
    n = a.size
    p = np.zeros((2 * n, 2 * n))
    idx = np.arange(n)
    p[idx, idx] = a
    p[idx, n + idx] = b
    p[n + idx, idx] = c
    p[n + idx, n + idx] = d
    return p


def run_compression(gamma0: CovarianceMatrix, params: PhysicalParams,
                    protocol: CompressionProtocol, *, basis: Optional[NormalModeBasis] = None,
                    snapshot_every: Optional[int] = 1, method: str = "modes",
                    t0: float = 0.0) -> List[Snapshot]:
    """Trotterized compression; snapshots are in the co-compressing frame.

    ``method="modes"`` composes the exact per-mode 2x2 step maps and applies the
    accumulated map at each snapshot; ``method="dense"`` exponentiates the full
    generator every step (slow, used as a cross-check).
    """
    from .lattice import build_hamiltonian, normal_modes

    if gamma0.n_modes != params.n_pixels:
        raise FrameMismatchError("covariance size does not match the lattice")
    if not check_uncertainty(gamma0):
        raise UnphysicalInputError("initial covariance is unphysical")
    dt = protocol.dt
    wanted = _snapshot_steps(protocol.n_steps, snapshot_every)
    lam0 = float(protocol.lambda_at(0))
    out = [Snapshot(t0, gamma0, 0, lam0)]

    lam_max = max(lam0, protocol.lambda_final)
    w_max = np.sqrt(params.coupling_g * lam_max *
                    (4 * params.phi_scale * lam_max ** 2 + params.zero_mode_mu))
    if w_max * dt > 1:
        warnings.warn("time step exceeds the fastest mode period / 2pi; Trotter error may grow",
                      RuntimeWarning, stacklevel=2)

    if method == "dense":
        gamma = gamma0
        for n in range(1, protocol.n_steps + 1):
            s = step_propagator(step_hamiltonian(params, protocol, n), dt)
            gamma = gamma.congruence(s)
            if n in wanted:
                out.append(Snapshot(t0 + n * dt, gamma, n, float(protocol.lambda_at(n))))
        return out
    if method != "modes":
        raise ValueError(f"unknown method {method!r}")

    if basis is None:
        basis = normal_modes(build_hamiltonian(params))
    o = basis.diagonalizer_O
    s_modes = direct_sum_orthogonal(o)
    lap = build_laplacian(params.n_pixels, params.boundary)
    lap_eigs = np.einsum("ik,ij,jk->k", o, lap, o)
    gamma_modes = s_modes.T @ gamma0.matrix @ s_modes

    n_modes = params.n_pixels
    acc = [np.ones(n_modes), np.zeros(n_modes), np.zeros(n_modes), np.ones(n_modes)]
    for n in range(1, protocol.n_steps + 1):
        lam = float(protocol.lambda_at(n))
        nu = params.phi_scale * lam ** 2 * lap_eigs + params.zero_mode_mu
        a, b, c, d = mode_rotation(params.coupling_g * lam, nu, dt)
        pa, pb, pc, pd = acc
        acc = [a * pa + b * pc, a * pb + b * pd, c * pa + d * pc, c * pb + d * pd]
        if n in wanted:
            p = s_modes @ _mode_propagator_matrix(*acc)
            g = p @ gamma_modes @ p.T
            out.append(Snapshot(t0 + n * dt,
                                CovarianceMatrix(0.5 * (g + g.T), gamma0.eta, check_physical=False),
                                n, lam))
    return out


def to_frame(gamma: CovarianceMatrix, src: FrameTag, dst: FrameTag,
             basis: NormalModeBasis) -> CovarianceMatrix:
    """Change coordinates between lattice, co-compressing and mode frames.

    Lattice to co-compressing is the local squeeze ``R = (I/lambda) (+) I``
    (``eta`` shrinks by ``lambda``); co-compressing to modes is ``O^T (+) O^T``.
    """
    if gamma.n_modes != basis.n_modes:
        raise FrameMismatchError("covariance and basis sizes differ")
    if not np.isclose(src.lambda_now, dst.lambda_now, rtol=1e-12, atol=0):
        raise FrameMismatchError("frames refer to different compression factors")
    lam = src.lambda_now
    eta_co = basis.eta
    expected = eta_co * lam if src.frame is Frame.LATTICE else eta_co
    if not np.isclose(gamma.eta, expected, rtol=1e-10, atol=0):
        raise FrameMismatchError(
            f"eta {gamma.eta:g} inconsistent with frame {src.frame.value} (expected {expected:g})")
    if src.frame is dst.frame:
        return gamma
    n = gamma.n_modes
    s_modes = direct_sum_orthogonal(basis.diagonalizer_O)
    r = np.diag(np.concatenate([np.full(n, 1.0 / lam), np.ones(n)]))
    r_inv = np.diag(np.concatenate([np.full(n, lam), np.ones(n)]))

    # express everything as a map from src into the co-compressing frame and back
    to_co = {Frame.LATTICE: r, Frame.CO_COMPRESSING: np.eye(2 * n),
             Frame.INSTANTANEOUS_MODES: s_modes}
    from_co = {Frame.LATTICE: r_inv, Frame.CO_COMPRESSING: np.eye(2 * n),
               Frame.INSTANTANEOUS_MODES: s_modes.T}
    total = from_co[dst.frame] @ to_co[src.frame]
    eta = eta_co * lam if dst.frame is Frame.LATTICE else eta_co
    return gamma.congruence(total, eta=eta)


def instantaneous_basis(params: PhysicalParams, basis0: NormalModeBasis,
                        lam: float) -> NormalModeBasis:
    """Normal modes of the co-compressing Hamiltonian at ``lam``.

    Reuses the columns of ``basis0`` (they do not depend on ``lam``) and keeps
    its mode labels, so modes are tracked adiabatically.
    """
    o = basis0.diagonalizer_O
    lap = build_laplacian(params.n_pixels, params.boundary)
    lap_eigs = np.einsum("ik,ij,jk->k", o, lap, o)
    nu = params.phi_scale * lam ** 2 * lap_eigs + params.zero_mode_mu
    nu = np.where(np.abs(nu) <= 1e-14 * max(np.max(np.abs(nu)), 1e-300), 0.0, nu)
    g_eff = params.coupling_g * lam
    return NormalModeBasis(o, np.sqrt(g_eff * np.clip(nu, 0.0, None)), nu, g_eff,
                           params.pixel_size, params.boundary)


def adiabatic_mode_variances(params: PhysicalParams, basis0: NormalModeBasis,
                             temperature: float, lam: float):
    if not temperature > 0:
        raise NonPositiveTemperatureError("temperature must be positive")
    if not lam > 0:
        raise NonPositiveInputError("lambda must be positive")
    if basis0.frequencies[0] <= 0:
        raise ZeroModeError("zero mode present; regularize before adiabatic evolution")
    basis_t = instantaneous_basis(params, basis0, lam)
    alpha, beta = thermal_mode_variances(basis_t.frequencies, basis_t.density_coupling,
                                         params.pixel_size, temperature,
                                         occupation_frequencies=basis0.frequencies)
    return alpha, beta, basis_t


def adiabatic_reference(params: PhysicalParams, basis0: NormalModeBasis,
                        temperature: float, lam: float) -> CovarianceMatrix:
    """Infinitely slow compression of a thermal state, co-compressing frame.

    Occupations are frozen at ``coth(omega_k(0)/2T)`` while the variances follow
    the instantaneous frequencies and density coupling ``g*lam``.
    """
    alpha, beta, basis_t = adiabatic_mode_variances(params, basis0, temperature, lam)
    return mode_diagonal_covariance(basis_t, alpha, beta)


@dataclass(frozen=True)
class StructureReport:
    """Per-mode 2x2 decomposition of a covariance in a normal-mode basis."""

    rho_rho: np.ndarray
    phi_phi: np.ndarray
    rho_phi: np.ndarray
    off_pattern_residual: float
    scale: float

    @property
    def relative_residual(self) -> float:
        return self.off_pattern_residual / self.scale if self.scale else 0.0


def mode_basis_structure(gamma: CovarianceMatrix, basis: NormalModeBasis) -> StructureReport:
    s = direct_sum_orthogonal(basis.diagonalizer_O)
    g = s.T @ gamma.matrix @ s
    n = basis.n_modes
    idx = np.arange(n)
    a = g[idx, idx].copy()
    b = g[n + idx, n + idx].copy()
    c = g[idx, n + idx].copy()
    rest = g.copy()
    rest[idx, idx] = 0
    rest[n + idx, n + idx] = 0
    rest[idx, n + idx] = 0
    rest[n + idx, idx] = 0
    return StructureReport(a, b, c, max_norm(rest), max_norm(g))


def mode_occupations(gamma: CovarianceMatrix, basis: NormalModeBasis) -> np.ndarray:
    """Energy-based occupations ``n_k = E_k/omega_k - 1/2`` in the given basis.

    ``E_k = (Delta/2)(g' a_k + nu_k b_k)``; this is the adiabatic invariant of
    each mode (a local determinant would be conserved exactly by any unitary
    step and so cannot detect non-adiabaticity).
    """
    if np.any(basis.frequencies <= 0):
        raise ZeroModeError("occupation undefined for a zero-frequency mode")
    rep = mode_basis_structure(gamma, basis)
    energy = 0.5 * basis.pixel_size * (basis.density_coupling * rep.rho_rho
                                       + basis.laplacian_eigs * rep.phi_phi)
    return energy / basis.frequencies - 0.5


def mode_symplectic_occupations(gamma: CovarianceMatrix, basis: NormalModeBasis) -> np.ndarray:
    """``n_k = (nu_k/eta - 1)/2`` with ``nu_k = sqrt(a_k b_k - c_k^2)`` per mode."""
    rep = mode_basis_structure(gamma, basis)
    nu = np.sqrt(np.clip(rep.rho_rho * rep.phi_phi - rep.rho_phi ** 2, 0.0, None))
    return 0.5 * (nu / basis.eta - 1.0)
