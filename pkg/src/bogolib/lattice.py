"""Discretized phonon Hamiltonian, its normal modes and thermal states.

Internal units: hbar = k_B = 1, lengths in micrometres and masses in units of
the atomic mass, so energies are measured in ``hbar^2 / (m * um^2)``.
"""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import constants

from .errors import (
    NonPositiveInputError,
    NonPositiveTemperatureError,
    NonSymmetricError,
    ZeroModeError,
)
from .linalg import CovarianceMatrix, direct_sum_orthogonal, max_norm, omega

COTH_SWITCH = 1e-3
DEFAULT_MU_RELATIVE = 1e-6
RB87_MASS_KG = 1.44316e-25


class Boundary(str, enum.Enum):
    NEUMANN = "neumann"
    DIRICHLET = "dirichlet"


def coth(x):
    """Hyperbolic cotangent, using ``1 + 2/expm1(2x)`` for small arguments."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < COTH_SWITCH
    with np.errstate(divide="ignore", over="ignore"):
        out = np.where(small, 1.0 + 2.0 / np.expm1(2.0 * np.where(small, x, 1.0)),
                       1.0 / np.tanh(np.where(small, 1.0, x)))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class PhysicalParams:
    mass: float
    coupling_g: float
    mean_density: float
    box_length: float
    n_pixels: int
    zero_mode_mu: float = 0.0
    boundary: Boundary = Boundary.NEUMANN

    def __post_init__(self):
        for name in ("mass", "coupling_g", "mean_density", "box_length"):
            if not getattr(self, name) > 0:
                raise NonPositiveInputError(f"{name} must be positive")
        if int(self.n_pixels) != self.n_pixels or self.n_pixels < 1:
            raise NonPositiveInputError("n_pixels must be a positive integer")
        if self.zero_mode_mu < 0:
            raise NonPositiveInputError("zero_mode_mu must be non-negative")
        object.__setattr__(self, "boundary", Boundary(self.boundary))
        if self.lieb_liniger_gamma > 1:
            warnings.warn(
                f"gamma_LL = {self.lieb_liniger_gamma:.3g} > 1: outside the weakly "
                "interacting regime where the phonon model applies",
                RuntimeWarning, stacklevel=3)

    @property
    def pixel_size(self) -> float:
        return self.box_length / self.n_pixels

    @property
    def lieb_liniger_gamma(self) -> float:
        return self.mass * self.coupling_g / self.mean_density

    @property
    def phi_scale(self) -> float:
        """Prefactor ``rho / (m Delta^2)`` of the Laplacian in the phase block."""
        return self.mean_density / (self.mass * self.pixel_size ** 2)

    @property
    def sound_velocity(self) -> float:
        return np.sqrt(self.coupling_g * self.mean_density / self.mass)

    @property
    def eta(self) -> float:
        return 0.5 / self.pixel_size

    def with_mu_relative(self, mu_relative: float) -> "PhysicalParams":
        return self.replace(zero_mode_mu=mu_relative * self.phi_scale)

    def replace(self, **changes) -> "PhysicalParams":
        values = {f: getattr(self, f) for f in self.__dataclass_fields__}
        values.update(changes)
        return PhysicalParams(**values)


def build_laplacian(n_pixels: int, boundary: Boundary) -> np.ndarray:
    """Tridiagonal lattice Laplacian with Neumann or Dirichlet ends."""
    boundary = Boundary(boundary)
    n = int(n_pixels)
    lap = 2.0 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)
    if boundary is Boundary.NEUMANN:
        lap[0, 0] = 1.0
        lap[-1, -1] = 1.0
        if n == 1:
            lap[0, 0] = 0.0
    return lap


def laplacian_eigenvalues(n_pixels: int, boundary: Boundary) -> np.ndarray:
    k = np.arange(1, n_pixels + 1)
    if Boundary(boundary) is Boundary.NEUMANN:
        return 4.0 * np.sin(np.pi * (k - 1) / (2 * n_pixels)) ** 2
    return 4.0 * np.sin(np.pi * k / (2 * (n_pixels + 1))) ** 2


def closed_form_diagonalizer(n_pixels: int, boundary: Boundary) -> np.ndarray:
    """DCT (Neumann) or DST (Dirichlet) matrix; column k is the k-th mode."""
    n = int(n_pixels)
    j = np.arange(1, n + 1)[:, None]
    k = np.arange(1, n + 1)[None, :]
    if Boundary(boundary) is Boundary.NEUMANN:
        norm = np.sqrt(np.where(k == 1, 1.0, 2.0) / n)
        return norm * np.cos(np.pi * (k - 1) / n * (j - 0.5))
    return np.sqrt(2.0 / (n + 1)) * np.sin(np.pi * j * k / (n + 1))


@dataclass(frozen=True)
class QuadraticHamiltonian:
    """``H = (Delta/2) X^T [[H_rho, C], [C^T, H_phi]] X``."""

    block_rho: np.ndarray
    block_phi: np.ndarray
    pixel_size: float
    cross_block: Optional[np.ndarray] = None
    boundary: Optional[Boundary] = None

    def __post_init__(self):
        if self.cross_block is None:
            object.__setattr__(self, "cross_block", np.zeros_like(self.block_rho))

    @property
    def n_modes(self) -> int:
        return self.block_rho.shape[0]

    @property
    def eta(self) -> float:
        return 0.5 / self.pixel_size

    def matrix(self) -> np.ndarray:
        return np.block([[self.block_rho, self.cross_block],
                         [self.cross_block.T, self.block_phi]])

    def generator(self) -> np.ndarray:
        """Heisenberg generator: ``dX/dt = Omega (H_rho (+) H_phi) X``.

        The ``Delta`` in front of the quadratic form cancels the ``1/Delta`` of
        the rescaled commutator.
        """
        return omega(self.n_modes) @ self.matrix()


def build_hamiltonian(params: PhysicalParams) -> QuadraticHamiltonian:
    n = params.n_pixels
    lap = build_laplacian(n, params.boundary)
    return QuadraticHamiltonian(
        block_rho=params.coupling_g * np.eye(n),
        block_phi=params.phi_scale * lap + params.zero_mode_mu * np.eye(n),
        pixel_size=params.pixel_size,
        boundary=params.boundary,
    )


@dataclass(frozen=True)
class NormalModeBasis:
    """Orthogonal diagonalizer of the phase block and the mode frequencies.

    ``density_coupling`` is the scalar density block (``g`` at rest, ``g*lambda``
    during compression); ``frequencies = sqrt(density_coupling * laplacian_eigs)``.
    """

    diagonalizer_O: np.ndarray
    frequencies: np.ndarray
    laplacian_eigs: np.ndarray
    density_coupling: float
    pixel_size: float
    boundary: Optional[Boundary] = None

    @property
    def n_modes(self) -> int:
        return self.frequencies.size

    @property
    def eta(self) -> float:
        return 0.5 / self.pixel_size

    def symplectic(self) -> np.ndarray:
        return direct_sum_orthogonal(self.diagonalizer_O)


def _scalar_block(block: np.ndarray, what: str) -> float:
    val = float(block[0, 0])
    if max_norm(block - val * np.eye(block.shape[0])) > 1e-12 * max(abs(val), 1e-300):
        raise ValueError(f"{what} must be a multiple of the identity")
    return val


def normal_modes(h: QuadraticHamiltonian, method: str = "auto") -> NormalModeBasis:
    """Diagonalize the phase block; frequencies ascending, columns permuted to match.

    ``method`` is ``"closed_form"`` (DCT/DST), ``"numerical"`` (eigh) or
    ``"auto"`` (closed form when the boundary is known and fits).
    """
    hphi = np.asarray(h.block_phi, dtype=float)
    scale = max(max_norm(hphi), 1e-300)
    if max_norm(hphi - hphi.T) > 1e-12 * scale:
        raise NonSymmetricError("phase block is not symmetric")
    if max_norm(h.cross_block) > 0:
        raise ValueError("normal_modes requires a vanishing density-phase cross block")
    g_eff = _scalar_block(np.asarray(h.block_rho, dtype=float), "density block")
    n = hphi.shape[0]

    o = None
    if method in ("auto", "closed_form") and h.boundary is not None:
        cand = closed_form_diagonalizer(n, h.boundary)
        rot = cand.T @ hphi @ cand
        nu = np.diag(rot).copy()
        if max_norm(rot - np.diag(nu)) <= 1e-10 * scale:
            o = cand
        elif method == "closed_form":
            raise ValueError("phase block is not diagonalized by the closed-form transform")
    elif method == "closed_form":
        raise ValueError("closed-form diagonalizer needs a known boundary")
    if o is None:
        nu, o = np.linalg.eigh(0.5 * (hphi + hphi.T))

    order = np.argsort(nu, kind="stable")
    nu = nu[order]
    o = o[:, order]
    nu = np.where(np.abs(nu) <= 1e-14 * scale, 0.0, nu)
    freqs = np.sqrt(g_eff * np.clip(nu, 0.0, None))
    return NormalModeBasis(o, freqs, nu, g_eff, h.pixel_size, h.boundary)


def thermal_mode_variances(frequencies, density_coupling: float, pixel_size: float,
                           temperature: float, occupation_frequencies=None):
    """Mode variances ``(alpha_k, beta_k)`` of density and phase quadratures.

    ``occupation_frequencies`` fixes the ``coth`` factors separately from the
    instantaneous frequencies (adiabatic states); by default they coincide.
    """
    w = np.asarray(frequencies, dtype=float)
    w0 = w if occupation_frequencies is None else np.asarray(occupation_frequencies, float)
    if not temperature > 0:
        raise NonPositiveTemperatureError("temperature must be positive")
    if np.any(w <= 0) or np.any(w0 <= 0):
        raise ZeroModeError("a normal-mode frequency vanishes; regularize the zero mode")
    c = coth(w0 / (2.0 * temperature))
    alpha = w / (2.0 * density_coupling * pixel_size) * c
    beta = density_coupling / (2.0 * w * pixel_size) * c
    return alpha, beta


def mode_diagonal_covariance(basis: NormalModeBasis, alpha, beta) -> CovarianceMatrix:
    o = basis.diagonalizer_O
    g_rho = (o * alpha) @ o.T
    g_phi = (o * beta) @ o.T
    n = o.shape[0]
    m = np.zeros((2 * n, 2 * n))
    m[:n, :n] = 0.5 * (g_rho + g_rho.T)
    m[n:, n:] = 0.5 * (g_phi + g_phi.T)
    return CovarianceMatrix(m, basis.eta)


def thermal_covariance(h: QuadraticHamiltonian, basis: NormalModeBasis,
                       temperature: float) -> CovarianceMatrix:
    """Gibbs-state covariance of ``h`` in the lattice basis (cross block exactly 0)."""
    if not temperature > 0:
        raise NonPositiveTemperatureError("temperature must be positive")
    if basis.frequencies[0] <= 0:
        raise ZeroModeError("zero mode present; set zero_mode_mu > 0")
    alpha, beta = thermal_mode_variances(basis.frequencies, basis.density_coupling,
                                         h.pixel_size, temperature)
    return mode_diagonal_covariance(basis, alpha, beta)


def healing_length(params: PhysicalParams) -> float:
    return 1.0 / np.sqrt(params.mass * params.coupling_g * params.mean_density)


def coupling_from_healing_length(xi: float, mass: float, mean_density: float) -> float:
    """Inverse of :func:`healing_length` for ``g``."""
    if not (xi > 0 and mass > 0 and mean_density > 0):
        raise NonPositiveInputError("all inputs must be positive")
    return 1.0 / (mass * mean_density * xi ** 2)


def bogoliubov_dispersion(params: PhysicalParams, k):
    kin = np.asarray(k, dtype=float) ** 2 / (2.0 * params.mass)
    return np.sqrt(kin * (kin + 2.0 * params.coupling_g * params.mean_density))


@dataclass(frozen=True)
class UnitSystem:
    """hbar = k_B = 1, length unit 1 um, mass unit = one atom."""

    mass_kg: float = RB87_MASS_KG
    length_m: float = field(default=1e-6)

    @property
    def energy_J(self) -> float:
        return constants.hbar ** 2 / (self.mass_kg * self.length_m ** 2)

    @property
    def time_s(self) -> float:
        return constants.hbar / self.energy_J

    @property
    def temperature_K(self) -> float:
        return self.energy_J / constants.k

    @property
    def coupling_J_m(self) -> float:
        return self.energy_J * self.length_m

    def temperature_from_nK(self, t_nK: float) -> float:
        return t_nK * 1e-9 / self.temperature_K

    def temperature_to_nK(self, t: float) -> float:
        return t * self.temperature_K * 1e9

    def time_from_s(self, t_s: float) -> float:
        return t_s / self.time_s

    def time_to_s(self, t: float) -> float:
        return t * self.time_s

    def rate_from_per_s(self, rate: float) -> float:
        return rate * self.time_s

    def length_from_m(self, x_m: float) -> float:
        return x_m / self.length_m

    def length_to_m(self, x: float) -> float:
        return x * self.length_m

    def coupling_from_si(self, g_si: float) -> float:
        return g_si / self.coupling_J_m

    def coupling_to_si(self, g: float) -> float:
        return g * self.coupling_J_m

    def density_from_per_m(self, rho: float) -> float:
        return rho * self.length_m

    def density_to_per_m(self, rho: float) -> float:
        return rho / self.length_m


def convert_units(mass_kg: float, g_si: float, density_per_m: float, length_m: float,
                  temperature_nK: float, *, n_pixels: int = 1,
                  boundary: Boundary = Boundary.NEUMANN, zero_mode_mu: float = 0.0):
    """SI inputs to internal :class:`PhysicalParams` plus a dimensionless temperature."""
    for name, val in (("mass_kg", mass_kg), ("g_si", g_si),
                      ("density_per_m", density_per_m), ("length_m", length_m)):
        if not val > 0:
            raise NonPositiveInputError(f"{name} must be positive")
    if temperature_nK < 0:
        raise NonPositiveInputError("temperature_nK must be non-negative")
    units = UnitSystem(mass_kg)
    params = PhysicalParams(
        mass=1.0,
        coupling_g=units.coupling_from_si(g_si),
        mean_density=units.density_from_per_m(density_per_m),
        box_length=units.length_from_m(length_m),
        n_pixels=n_pixels,
        zero_mode_mu=zero_mode_mu,
        boundary=boundary,
    )
    return params, units.temperature_from_nK(temperature_nK)


def params_to_si(params: PhysicalParams, temperature: float, mass_kg: float):
    """Inverse of :func:`convert_units` (mass unit must be one atom)."""
    units = UnitSystem(mass_kg)
    return (mass_kg * params.mass,
            units.coupling_to_si(params.coupling_g),
            units.density_to_per_m(params.mean_density),
            units.length_to_m(params.box_length),
            units.temperature_to_nK(temperature))
