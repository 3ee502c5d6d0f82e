"""Dissipative bath strokes and four-stroke Otto cycles.

A bath stroke obeys ``dGamma/dt = G Gamma + Gamma G^T + D`` with
``G = Omega H - (gamma/2) I`` and ``D = gamma * Gamma_th(H, T_bath)``, whose
fixed point is exactly the Gibbs state of ``H`` at the bath temperature.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .dynamics import (
    CompressionProtocol,
    hamiltonian_at,
    instantaneous_basis,
    mode_rotation,
    run_compression,
)
from .entanglement import Bipartition, log_negativity
from .errors import DimensionMismatchError, NonPositiveInputError, UnphysicalInputError
from .lattice import (
    NormalModeBasis,
    PhysicalParams,
    QuadraticHamiltonian,
    build_hamiltonian,
    build_laplacian,
    normal_modes,
    thermal_covariance,
)
from .linalg import (
    CovarianceMatrix,
    check_uncertainty,
    direct_sum_orthogonal,
    matrix_exponential,
    solve_lyapunov_steady,
    symplectic_eigenvalues,
)


@dataclass(frozen=True)
class BathSpec:
    temperature: float
    coupling_gamma: float

    def __post_init__(self):
        for name in ("temperature", "coupling_gamma"):
            val = getattr(self, name)
            if not (np.isfinite(val) and val > 0):
                raise NonPositiveInputError(f"{name} must be finite and positive")


@dataclass(frozen=True)
class OttoCycleSpec:
    compression: CompressionProtocol
    hot_bath: BathSpec
    expansion: CompressionProtocol
    cold_bath: BathSpec
    bath_stroke_time: float
    bath_substeps: int = 50

    def __post_init__(self):
        if not self.bath_stroke_time > 0:
            raise NonPositiveInputError("bath_stroke_time must be positive")
        if self.bath_substeps < 1:
            raise NonPositiveInputError("bath_substeps must be positive")
        ratio = self.compression.length_ratio_final * self.expansion.length_ratio_final
        if not np.isclose(ratio, 1.0, rtol=1e-12, atol=0):
            raise ValueError("expansion ratio must be the reciprocal of the compression ratio")
        if not np.isclose(self.expansion.lambda_start, self.compression.lambda_final,
                          rtol=1e-12, atol=0):
            raise ValueError("expansion must start where the compression ends")

    @classmethod
    def symmetric(cls, ratio: float, stroke_time: float, n_steps: int, hot: BathSpec,
                  cold: BathSpec, bath_stroke_time: float, bath_substeps: int = 50):
        comp = CompressionProtocol(ratio, stroke_time, n_steps)
        return cls(comp, hot, comp.inverse(), cold, bath_stroke_time, bath_substeps)


def build_drift_dissipation(h: QuadraticHamiltonian, basis: NormalModeBasis,
                            bath: BathSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Drift ``Omega H - (gamma/2) I`` and diffusion ``gamma * Gamma_th``."""
    n2 = 2 * h.n_modes
    g_drift = h.generator() - 0.5 * bath.coupling_gamma * np.eye(n2)
    d_diss = bath.coupling_gamma * thermal_covariance(h, basis, bath.temperature).matrix
    return g_drift, d_diss


def thermalize(gamma0: CovarianceMatrix, g_drift: np.ndarray, d_diss: np.ndarray,
               duration: float, n_substeps: int, *, t0: float = 0.0,
               check: bool = True) -> List[Tuple[float, CovarianceMatrix]]:
    """Exact relaxation towards the Lyapunov fixed point, ``n_substeps + 1`` snapshots."""
    if g_drift.shape != gamma0.matrix.shape:
        raise DimensionMismatchError("drift and covariance sizes differ")
    if not duration >= 0 or n_substeps < 1:
        raise NonPositiveInputError("need duration >= 0 and n_substeps >= 1")
    if check and not check_uncertainty(gamma0):
        raise UnphysicalInputError("initial covariance is unphysical")
    steady = solve_lyapunov_steady(g_drift, d_diss)
    dt = duration / n_substeps
    prop = matrix_exponential(g_drift, dt)
    out = [(t0, gamma0)]
    dev = gamma0.matrix - steady
    for k in range(1, n_substeps + 1):
        dev = prop @ dev @ prop.T
        g = steady + 0.5 * (dev + dev.T)
        out.append((t0 + k * dt, CovarianceMatrix(g, gamma0.eta, check_physical=False)))
    return out


def mean_energy(gamma: CovarianceMatrix, h: QuadraticHamiltonian) -> float:
    """``<H> = (Delta/2) tr(H Gamma)`` for a zero-mean state."""
    hm = h.matrix()
    if hm.shape != gamma.matrix.shape:
        raise DimensionMismatchError("Hamiltonian and covariance sizes differ")
    return float(0.5 * h.pixel_size * np.sum(hm * gamma.matrix))


def compression_work(gamma0: CovarianceMatrix, params: PhysicalParams,
                     protocol: CompressionProtocol, basis0: NormalModeBasis) -> float:
    """Work of a Trotterized stroke summed from the energy jump at every step.

    Energy is conserved inside a step, so only the switch ``H_{n-1} -> H_n``
    does work, ``(Delta/2) tr((H_n - H_{n-1}) Gamma_{n-1})``. The Hamiltonian
    change is diagonal in the (lambda independent) mode basis, so only the
    per-mode 2x2 covariances have to be tracked.
    """
    o = basis0.diagonalizer_O
    s = direct_sum_orthogonal(o)
    g = s.T @ gamma0.matrix @ s
    n = params.n_pixels
    idx = np.arange(n)
    a, b, c = g[idx, idx].copy(), g[n + idx, n + idx].copy(), g[idx, n + idx].copy()
    lap_eigs = np.einsum("ik,ij,jk->k", o, build_laplacian(n, params.boundary), o)
    kappa, g0, mu = params.phi_scale, params.coupling_g, params.zero_mode_mu
    dt = protocol.dt
    lam_prev = float(protocol.lambda_at(0))
    work = 0.0
    for step in range(1, protocol.n_steps + 1):
        lam = float(protocol.lambda_at(step))
        work += 0.5 * params.pixel_size * float(np.sum(
            g0 * (lam - lam_prev) * a + kappa * (lam ** 2 - lam_prev ** 2) * lap_eigs * b))
        m11, m12, m21, m22 = mode_rotation(g0 * lam, kappa * lam ** 2 * lap_eigs + mu, dt)
        a, b, c = (m11 * m11 * a + 2 * m11 * m12 * c + m12 * m12 * b,
                   m21 * m21 * a + 2 * m21 * m22 * c + m22 * m22 * b,
                   m11 * m21 * a + (m11 * m22 + m12 * m21) * c + m12 * m22 * b)
        lam_prev = lam
    return work


def bath_heat(gamma0: CovarianceMatrix, h: QuadraticHamiltonian, basis: NormalModeBasis,
              bath: BathSpec, duration: float) -> float:
    """Closed-form heat of a bath stroke.

    The unitary part of the drift conserves ``<H>``, so the energy relaxes as
    ``E(t) = E_th + (E_0 - E_th) exp(-gamma t)``.
    """
    e_th = mean_energy(thermal_covariance(h, basis, bath.temperature), h)
    return float(-np.expm1(-bath.coupling_gamma * duration) * (e_th - mean_energy(gamma0, h)))


@dataclass(frozen=True)
class StrokeEnergy:
    """Energies at both ends of a stroke plus the independently computed transfer."""

    name: str
    kind: str
    energy_start: float
    energy_end: float
    transfer: Optional[float] = None

    @property
    def delta(self) -> float:
        return self.energy_end - self.energy_start

    @property
    def amount(self) -> float:
        return self.delta if self.transfer is None else self.transfer


@dataclass
class EnergyLedger:
    strokes: List[StrokeEnergy] = field(default_factory=list)
    initial_energy: float = 0.0
    final_energy: float = 0.0

    @property
    def work(self) -> float:
        return sum(s.amount for s in self.strokes if s.kind == "work")

    @property
    def heat(self) -> float:
        return sum(s.amount for s in self.strokes if s.kind == "heat")

    @property
    def delta_cycle(self) -> float:
        return self.final_energy - self.initial_energy

    @property
    def first_law_residual(self) -> float:
        return abs(self.delta_cycle - (self.work + self.heat))

    @property
    def scale(self) -> float:
        return max([abs(s.energy_start) for s in self.strokes]
                   + [abs(s.energy_end) for s in self.strokes] + [1e-300])

    def as_dict(self) -> Dict[str, float]:
        out = {f"{s.name}_{'W' if s.kind == 'work' else 'Q'}": s.amount for s in self.strokes}
        out.update(work_total=self.work, heat_total=self.heat, delta_cycle=self.delta_cycle,
                   first_law_residual=self.first_law_residual)
        return out


@dataclass(frozen=True)
class TraceRow:
    stroke: str
    time: float
    lambda_now: float
    energy: float
    min_symplectic: float
    log_negativity: float
    witness: Optional[float]


@dataclass
class OttoResult:
    strokes: Dict[str, List[Tuple[float, CovarianceMatrix]]]
    ledger: EnergyLedger
    trace: List[TraceRow]

    @property
    def final_state(self) -> CovarianceMatrix:
        return self.strokes["cold_bath"][-1][1]


STROKES = ("compression", "hot_bath", "expansion", "cold_bath")


def run_otto_cycle(params: PhysicalParams, spec: OttoCycleSpec, initial_T: float, *,
                   snapshot_every: Optional[int] = None,
                   witness_fn: Optional[Callable[[CovarianceMatrix], float]] = None,
                   trace_every: int = 1,
                   gamma_initial: Optional[CovarianceMatrix] = None) -> OttoResult:
    """Compression, hot bath, expansion, cold bath (all in the co-compressing frame).

    ``witness_fn`` (for example a full-separability SDP witness) is evaluated on
    every ``trace_every``-th snapshot; zig-zag log-negativity is always traced.
    """
    basis0 = normal_modes(build_hamiltonian(params))
    lam0 = spec.compression.lambda_start
    lam_f = spec.compression.lambda_final
    h0 = hamiltonian_at(params, lam0)
    hf = hamiltonian_at(params, lam_f)
    basis_0 = instantaneous_basis(params, basis0, lam0)
    basis_f = instantaneous_basis(params, basis0, lam_f)
    if gamma_initial is None:
        gamma_initial = thermal_covariance(h0, basis_0, initial_T)

    strokes: Dict[str, List[Tuple[float, CovarianceMatrix]]] = {}
    lambdas: Dict[str, List[float]] = {}
    comp = run_compression(gamma_initial, params, spec.compression, basis=basis0,
                           snapshot_every=snapshot_every)
    strokes["compression"] = [(s.time, s.gamma) for s in comp]
    lambdas["compression"] = [s.lambda_now for s in comp]
    t = comp[-1].time

    g_hot, d_hot = build_drift_dissipation(hf, basis_f, spec.hot_bath)
    hot = thermalize(comp[-1].gamma, g_hot, d_hot, spec.bath_stroke_time, spec.bath_substeps,
                     t0=t)
    strokes["hot_bath"] = hot
    lambdas["hot_bath"] = [lam_f] * len(hot)
    t = hot[-1][0]

    exp = run_compression(hot[-1][1], params, spec.expansion, basis=basis0,
                          snapshot_every=snapshot_every, t0=t)
    strokes["expansion"] = [(s.time, s.gamma) for s in exp]
    lambdas["expansion"] = [s.lambda_now for s in exp]
    t = exp[-1].time

    g_cold, d_cold = build_drift_dissipation(h0, basis_0, spec.cold_bath)
    cold = thermalize(exp[-1].gamma, g_cold, d_cold, spec.bath_stroke_time,
                      spec.bath_substeps, t0=t)
    strokes["cold_bath"] = cold
    lambdas["cold_bath"] = [float(lam0)] * len(cold)

    e = {
        "A": mean_energy(gamma_initial, h0),
        "B": mean_energy(comp[-1].gamma, hf),
        "C": mean_energy(hot[-1][1], hf),
        "D": mean_energy(exp[-1].gamma, h0),
        "A2": mean_energy(cold[-1][1], h0),
    }
    # transfers from routes independent of the stroke end-point energies
    ledger = EnergyLedger([
        StrokeEnergy("compression", "work", e["A"], e["B"],
                     compression_work(gamma_initial, params, spec.compression, basis0)),
        StrokeEnergy("hot_bath", "heat", e["B"], e["C"],
                     bath_heat(comp[-1].gamma, hf, basis_f, spec.hot_bath,
                               spec.bath_stroke_time)),
        StrokeEnergy("expansion", "work", e["C"], e["D"],
                     compression_work(hot[-1][1], params, spec.expansion, basis0)),
        StrokeEnergy("cold_bath", "heat", e["D"], e["A2"],
                     bath_heat(exp[-1].gamma, h0, basis_0, spec.cold_bath,
                               spec.bath_stroke_time)),
    ], initial_energy=e["A"], final_energy=e["A2"])

    cut = Bipartition.zigzag(params.n_pixels) if params.n_pixels > 1 else None
    trace: List[TraceRow] = []
    for name in STROKES:
        for k, ((time, g), lam) in enumerate(zip(strokes[name], lambdas[name])):
            if k % max(trace_every, 1) and k != len(strokes[name]) - 1:
                continue
            h = hamiltonian_at(params, lam)
            nu_min = float(symplectic_eigenvalues(g).values[0])
            en = log_negativity(g, cut, check=False) if cut is not None else 0.0
            w = witness_fn(g) if witness_fn is not None else None
            trace.append(TraceRow(name, time, lam, mean_energy(g, h), nu_min, en, w))
    return OttoResult(strokes, ledger, trace)
