"""Closed-form entanglement quantifiers for lattice Gaussian states.

Witness values use the sign convention ``W > 0`` for entangled states; every
separable state has ``W <= 0``.
"""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from .errors import (
    DimensionMismatchError,
    InvalidPartitionError,
    MonotonicityViolatedError,
    NonPositiveInputError,
    NonPositiveTemperatureError,
    TooManyModesForExhaustiveError,
    UnphysicalInputError,
    ZeroModeError,
)
from .lattice import NormalModeBasis, coth
from .linalg import CovarianceMatrix, check_uncertainty, max_norm, symplectic_eigenvalues

EXHAUSTIVE_MAX_MODES = 22


class WitnessKind(str, enum.Enum):
    ANALYTIC_THERMAL = "analytic_thermal"
    ANALYTIC_ADIABATIC = "analytic_adiabatic"
    SDP_DUAL = "sdp_dual"


@dataclass(frozen=True)
class WitnessValue:
    value: float
    kind: WitnessKind


@dataclass(frozen=True)
class Bipartition:
    """Split of modes ``0..n_modes-1`` into two nonempty parts."""

    part_a: Tuple[int, ...]
    n_modes: int

    def __post_init__(self):
        a = tuple(sorted(set(int(i) for i in self.part_a)))
        if not a or len(a) >= self.n_modes:
            raise InvalidPartitionError("both parts must be nonempty")
        if a[0] < 0 or a[-1] >= self.n_modes:
            raise InvalidPartitionError("mode index out of range")
        object.__setattr__(self, "part_a", a)

    @property
    def part_b(self) -> Tuple[int, ...]:
        a = set(self.part_a)
        return tuple(i for i in range(self.n_modes) if i not in a)

    def canonical(self) -> "Bipartition":
        """Same cut with mode 0 on side A."""
        return self if 0 in self.part_a else Bipartition(self.part_b, self.n_modes)

    @property
    def label(self) -> str:
        return ",".join(map(str, self.part_a)) + "|" + ",".join(map(str, self.part_b))

    @classmethod
    def zigzag(cls, n_modes: int) -> "Bipartition":
        return cls(tuple(range(0, n_modes, 2)), n_modes)

    @classmethod
    def halves(cls, n_modes: int) -> "Bipartition":
        return cls(tuple(range(n_modes // 2)), n_modes)


def all_bipartitions(n_modes: int) -> Iterable[Bipartition]:
    """Every cut once, mode 0 always in A, ordered lexicographically by A."""
    rest = range(1, n_modes)
    cuts = []
    for r in range(0, n_modes - 1):
        for extra in itertools.combinations(rest, r):
            cuts.append((0,) + extra)
    for a in sorted(cuts):
        yield Bipartition(a, n_modes)


def named_bipartitions(n_modes: int) -> List[Bipartition]:
    """Heuristic family for large systems: halves, zig-zag and single sites."""
    cuts = {Bipartition.halves(n_modes).canonical(), Bipartition.zigzag(n_modes).canonical()}
    for j in range(n_modes):
        cuts.add(Bipartition((j,), n_modes).canonical())
    return sorted(cuts, key=lambda c: c.part_a)


def _partial_transpose_signs(cut: Bipartition) -> np.ndarray:
    signs = np.ones(2 * cut.n_modes)
    signs[cut.n_modes + np.asarray(cut.part_b)] = -1.0
    return signs


def partially_transposed_eigenvalues(gamma: CovarianceMatrix, cut: Bipartition,
                                     method: str = "auto") -> np.ndarray:
    """Symplectic spectrum after flipping the phase quadratures of part B.

    ``method="block"`` uses ``eig(Gamma_rho P Gamma_phi P) = nu~^2`` and needs a
    vanishing density-phase block; ``"general"`` works for any input.
    """
    if cut.n_modes != gamma.n_modes:
        raise DimensionMismatchError("cut and covariance sizes differ")
    block_ok = max_norm(gamma.cross_block) == 0.0
    if method == "auto":
        method = "block" if block_ok else "general"
    if method == "block":
        if not block_ok:
            raise ValueError("block shortcut needs a vanishing cross block")
        p = _partial_transpose_signs(cut)[gamma.n_modes:]
        prod = gamma.rho_block @ (p[:, None] * gamma.phi_block * p[None, :])
        ev = np.linalg.eigvals(prod).real
        return np.sort(np.sqrt(np.clip(ev, 0.0, None)))
    if method != "general":
        raise ValueError(f"unknown method {method!r}")
    s = _partial_transpose_signs(cut)
    return symplectic_eigenvalues(gamma.matrix * s[:, None] * s[None, :]).values


def log_negativity(gamma: CovarianceMatrix, cut: Bipartition, *, natural_log: bool = False,
                   method: str = "auto", check: bool = True) -> float:
    """``E_N = sum_j max(0, -log2(nu~_j/eta))`` across ``cut``."""
    if check and not check_uncertainty(gamma):
        raise UnphysicalInputError("covariance violates the uncertainty relation")
    nu = partially_transposed_eigenvalues(gamma, cut, method)
    logs = -np.log(nu / gamma.eta)
    if not natural_log:
        logs = logs / np.log(2.0)
    return float(np.sum(np.clip(logs, 0.0, None)))


class Quantifier(str, enum.Enum):
    LOG_NEG = "logneg"
    SDP_WITNESS = "sdp"


def _quantifier_fn(gamma: CovarianceMatrix, quantifier: Quantifier,
                   **sdp_options) -> Callable[[Bipartition], float]:
    if quantifier is Quantifier.LOG_NEG:
        return lambda cut: log_negativity(gamma, cut, check=False)
    from .sdp.cmc import PartitionSpec, witness_for_partition

    return lambda cut: witness_for_partition(
        gamma, PartitionSpec([cut.part_a, cut.part_b]), **sdp_options).witness_value


def bipartition_scan(gamma: CovarianceMatrix, quantifier="logneg", *,
                     exhaustive: Optional[bool] = None,
                     **sdp_options) -> List[Tuple[Bipartition, float]]:
    """Evaluate the quantifier on every cut (or on the named family above 22 modes)."""
    quantifier = Quantifier(quantifier)
    if not check_uncertainty(gamma):
        raise UnphysicalInputError("covariance violates the uncertainty relation")
    n = gamma.n_modes
    if n < 2:
        raise InvalidPartitionError("need at least two modes")
    if exhaustive is None:
        exhaustive = n <= EXHAUSTIVE_MAX_MODES
    if exhaustive and n > EXHAUSTIVE_MAX_MODES:
        raise TooManyModesForExhaustiveError(
            f"{n} modes: exhaustive scan limited to {EXHAUSTIVE_MAX_MODES}")
    cuts = list(all_bipartitions(n)) if exhaustive else named_bipartitions(n)
    fn = _quantifier_fn(gamma, quantifier, **sdp_options)
    return [(cut, float(fn(cut))) for cut in cuts]


def best_bipartition(gamma: CovarianceMatrix, quantifier="logneg", *,
                     exhaustive: Optional[bool] = None,
                     **sdp_options) -> Tuple[Bipartition, float]:
    """Maximizing cut; ties go to the lexicographically smallest part A."""
    scan = bipartition_scan(gamma, quantifier, exhaustive=exhaustive, **sdp_options)
    best_cut, best_val = scan[0]
    for cut, val in scan[1:]:
        if val > best_val:
            best_cut, best_val = cut, val
    return best_cut, best_val


def _extremal_witness(w_low, w_high, occ_low, occ_high, temperature) -> float:
    if not temperature > 0:
        raise NonPositiveTemperatureError("temperature must be positive")
    if min(w_low, w_high, occ_low, occ_high) <= 0:
        raise ZeroModeError("extremal mode frequency must be positive")
    t2 = 2.0 * temperature
    return float(1.0 - np.sqrt(w_low / w_high * coth(occ_high / t2) * coth(occ_low / t2)))


def witness_thermal_analytic(basis: NormalModeBasis, temperature: float) -> WitnessValue:
    """``1 - sqrt((w_1/w_N) coth(w_N/2T) coth(w_1/2T))`` from the extremal modes."""
    w = basis.frequencies
    return WitnessValue(_extremal_witness(w[0], w[-1], w[0], w[-1], temperature),
                        WitnessKind.ANALYTIC_THERMAL)


def witness_adiabatic_analytic(basis0: NormalModeBasis, basis_t: NormalModeBasis,
                               temperature: float) -> WitnessValue:
    """Extremal-mode witness with current frequencies and frozen occupations."""
    w0, wt = basis0.frequencies, basis_t.frequencies
    if np.any(w0 <= 0) or np.any(wt <= 0):
        raise ZeroModeError("all frequencies must be positive")
    return WitnessValue(_extremal_witness(wt[0], wt[-1], w0[0], w0[-1], temperature),
                        WitnessKind.ANALYTIC_ADIABATIC)


def critical_temperature(witness: Callable[[float], float], t_low: float,
                         t_high: Optional[float] = None, *, rtol: float = 1e-12) -> float:
    """Root of a witness that decreases with temperature (bracket grown upward)."""
    if not t_low > 0:
        raise NonPositiveTemperatureError("temperatures must be positive")
    f_low = witness(t_low)
    if f_low <= 0:
        raise ValueError("witness is not positive at the lower bracket")
    t_high = 2.0 * t_low if t_high is None else t_high
    while witness(t_high) > 0:
        t_low, t_high = t_high, 2.0 * t_high
        if t_high > 1e300:
            raise ValueError("no sign change found")
    return float(brentq(witness, t_low, t_high, xtol=1e-300, rtol=rtol, maxiter=500))


def thermal_critical_temperature(basis: NormalModeBasis) -> float:
    return critical_temperature(lambda t: witness_thermal_analytic(basis, t).value,
                                1e-3 * basis.frequencies[0])


@dataclass(frozen=True)
class SeparableAnsatz:
    feasible: bool
    a_star: Optional[float]
    product: float
    threshold: float


def separable_ansatz_feasible(alpha: Sequence[float], beta: Sequence[float],
                              delta: float, *, rtol: float = 1e-12) -> SeparableAnsatz:
    """Product-state test ``alpha_1 * beta_N >= 1/(4 Delta^2)`` on mode variances.

    If feasible, ``a_star`` is the midpoint of the admissible local squeezing
    window ``[1/(2 Delta alpha_1), 2 Delta beta_N]``.
    """
    a = np.asarray(alpha, dtype=float)
    b = np.asarray(beta, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or a.size == 0:
        raise DimensionMismatchError("alpha and beta must be equal-length vectors")
    if not delta > 0 or np.any(a <= 0) or np.any(b <= 0):
        raise NonPositiveInputError("variances and delta must be positive")
    if np.any(np.diff(a) < -rtol * a[1:]) or np.any(np.diff(b) > rtol * b[:-1]):
        raise MonotonicityViolatedError("need alpha ascending and beta descending")
    product = float(a[0] * b[-1])
    threshold = 1.0 / (4.0 * delta ** 2)
    if product >= threshold:
        lo, hi = 1.0 / (2.0 * delta * a[0]), 2.0 * delta * b[-1]
        return SeparableAnsatz(True, 0.5 * (lo + hi), product, threshold)
    return SeparableAnsatz(False, None, product, threshold)


def bsa_lower_bound(witness) -> float:
    """Weight of the entangled part in any best separable approximation, bounded below."""
    value = witness.value if isinstance(witness, WitnessValue) else float(witness)
    return float(min(max(value, 0.0), 1.0))


class AsymptoticRegime(str, enum.Enum):
    FIXED_SPACING = "fixed_spacing"
    CONTINUUM_FIXED_L = "continuum_fixed_l"
    SMALL_L = "small_l"
    LARGE_L = "large_l"


def witness_asymptotics(regime, *, temperature: float, mass: float, coupling_g: float,
                        mean_density: float, pixel_size: float,
                        box_length: Optional[float] = None) -> float:
    """Large-chain limits of the Dirichlet thermal witness."""
    regime = AsymptoticRegime(regime)
    for name, val in (("temperature", temperature), ("mass", mass), ("coupling_g", coupling_g),
                      ("mean_density", mean_density), ("pixel_size", pixel_size)):
        if not val > 0:
            raise NonPositiveInputError(f"{name} must be positive")
    sound = np.sqrt(coupling_g * mean_density / mass)
    if regime is AsymptoticRegime.FIXED_SPACING:
        amp = sound / pixel_size
        return float(1.0 - np.sqrt(temperature / amp * coth(amp / temperature)))
    if regime is AsymptoticRegime.LARGE_L:
        return float(1.0 - np.sqrt(temperature * pixel_size / sound))
    if box_length is None or not box_length > 0:
        raise NonPositiveInputError("box_length must be positive for this regime")
    ratio = np.pi * pixel_size / (2.0 * box_length)
    if regime is AsymptoticRegime.SMALL_L:
        return float(1.0 - np.sqrt(ratio))
    xi_l = np.pi * sound / (2.0 * box_length * temperature)
    return float(1.0 - np.sqrt(ratio * coth(xi_l)))
