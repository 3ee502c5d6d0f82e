"""Optimal covariance-matrix-criterion witnesses for k-partitions.

For a partition of the modes into groups, the primal problem maximizes
``x_e`` such that ``Gamma >= (+)_a gamma_a`` and every local block satisfies
``gamma_a + (1 + x_e) i eta Omega_a >= 0``. A separable ``Gamma`` admits
``x_e >= 0``. The dual matrix ``Z`` of the first constraint gives the witness
``W = 1 - tr(Z Gamma)``, which is ``<= 0`` on every state separable with
respect to the partition.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..entanglement import WitnessKind, WitnessValue
from ..errors import CertificateInvalidError, DimensionMismatchError, InvalidPartitionError
from ..lattice import NormalModeBasis
from ..linalg import CovarianceMatrix, direct_sum_orthogonal, max_norm, omega
from .problem import LmiBlock, SdpProblem
from .solver import SdpSolution, SdpStatus, solve


@dataclass(frozen=True)
class PartitionSpec:
    """Disjoint groups of 0-based mode indices covering ``0..n-1``."""

    groups: Tuple[Tuple[int, ...], ...]

    def __init__(self, groups: Sequence[Sequence[int]]):
        norm = tuple(tuple(sorted(int(i) for i in g)) for g in groups)
        object.__setattr__(self, "groups", norm)
        flat = [i for g in norm for i in g]
        if any(len(g) == 0 for g in norm):
            raise InvalidPartitionError("empty group")
        if len(set(flat)) != len(flat):
            raise InvalidPartitionError("groups overlap")
        if sorted(flat) != list(range(len(flat))):
            raise InvalidPartitionError("groups must cover 0..n-1 exactly")
        if len(norm) < 2:
            raise InvalidPartitionError("a partition needs at least two groups")

    @property
    def n_modes(self) -> int:
        return sum(len(g) for g in self.groups)

    @property
    def k(self) -> int:
        return len(self.groups)

    @classmethod
    def full(cls, n_modes: int) -> "PartitionSpec":
        return cls([(j,) for j in range(n_modes)])

    def quadratures(self, group: int) -> np.ndarray:
        g = np.asarray(self.groups[group])
        return np.concatenate([g, self.n_modes + g])


@dataclass
class CmcProblem(SdpProblem):
    """CMC primal in scaled units (``Gamma / scale``, ``eta / scale``)."""

    scale: float = 1.0
    eta_scaled: float = 1.0
    balance: float = 1.0
    partition: Optional[PartitionSpec] = None
    local_vars: List[List[Tuple[int, int, int]]] = field(default_factory=list)

    def squeeze_vector(self) -> np.ndarray:
        n = self.partition.n_modes
        return np.concatenate([np.full(n, self.balance), np.full(n, 1.0 / self.balance)])

    def starting_point(self) -> np.ndarray:
        """``x_e = -1`` and ``gamma = eps I``: strictly feasible for both blocks."""
        eps = 0.5 * float(np.linalg.eigvalsh(self.blocks[0].f0).min())
        x0 = np.zeros(self.variable_dim)
        x0[0] = -1.0
        for group in self.local_vars:
            for var, a, b in group:
                if a == b:
                    x0[var] = eps
        return x0


def build_cmc_primal(gamma: CovarianceMatrix, partition: PartitionSpec, *,
                     rescale: bool = True) -> CmcProblem:
    """Variables ``[x_e, upper-triangular entries of each gamma_a]``; objective ``-x_e``."""
    if not isinstance(partition, PartitionSpec):
        partition = PartitionSpec(partition)
    n = gamma.n_modes
    if partition.n_modes != n:
        raise InvalidPartitionError("partition does not match the covariance size")
    # a uniform local squeeze diag(s, 1/s) on every mode evens out the density
    # and phase scales without touching the separability structure
    balance = 1.0
    if rescale:
        d = np.diag(gamma.matrix)
        balance = float((np.max(d[n:]) / np.max(d[:n])) ** 0.25)
    squeeze = np.concatenate([np.full(n, balance), np.full(n, 1.0 / balance)])
    g_bal = gamma.matrix * squeeze[:, None] * squeeze[None, :]
    scale = max_norm(g_bal) if rescale else 1.0
    g_scaled = g_bal / scale
    eta = gamma.eta / scale

    local_vars: List[List[Tuple[int, int, int]]] = []
    nxt = 1
    main = dict(var=[], row=[], col=[], val=[])
    blocks: List[LmiBlock] = []
    for gi, grp in enumerate(partition.groups):
        m = len(grp)
        quad = partition.quadratures(gi)
        lv = []
        loc = dict(var=[], row=[], col=[], val=[])
        om = eta * omega(m)
        f0 = np.block([[np.zeros((2 * m, 2 * m)), -om], [om, np.zeros((2 * m, 2 * m))]])
        r, c = np.nonzero(np.triu(f0))
        loc["var"] += [0] * r.size
        loc["row"] += r.tolist()
        loc["col"] += c.tolist()
        loc["val"] += f0[r, c].tolist()
        for a in range(2 * m):
            for b in range(a, 2 * m):
                lv.append((nxt, a, b))
                main["var"].append(nxt)
                main["row"].append(int(quad[a]))
                main["col"].append(int(quad[b]))
                main["val"].append(-1.0)
                loc["var"] += [nxt, nxt]
                loc["row"] += [a, 2 * m + a]
                loc["col"] += [b, 2 * m + b]
                loc["val"] += [1.0, 1.0]
                nxt += 1
        local_vars.append(lv)
        blocks.append(LmiBlock(f0, **loc))
    blocks.insert(0, LmiBlock(g_scaled, **main))
    objective = np.zeros(nxt)
    objective[0] = -1.0
    return CmcProblem(objective, blocks, scale=scale, eta_scaled=eta, balance=balance,
                      partition=partition, local_vars=local_vars)


def symplectic_trace_bound(z: np.ndarray, eta: float) -> float:
    """``min tr(Z gamma)`` over physical ``gamma``: ``2 eta sum_j nu_j(Z)``.

    Valid for singular PSD ``Z`` (uses ``Z^1/2 Omega Z^1/2``).
    """
    w, v = np.linalg.eigh(0.5 * (z + z.T))
    root = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T
    anti = root @ omega(z.shape[0] // 2) @ root
    ev = np.linalg.eigvalsh(1j * anti)
    return float(eta * np.sum(np.abs(ev)))


@dataclass
class WitnessCertificate:
    x_e: float
    Z_real: np.ndarray
    witness_value: float
    local_blocks: List[np.ndarray]
    status: SdpStatus
    separable_bound: float
    normalization_residual: float
    pinch_residual: float
    min_eigenvalue: float
    gamma: np.ndarray
    partition: PartitionSpec
    solution: Optional[SdpSolution] = None

    @property
    def safe_value(self) -> float:
        """``1 - tr(Z Gamma)/b`` with ``b`` the verified separable minimum of ``tr(Z .)``."""
        return 1.0 - float(np.sum(self.Z_real * self.gamma)) / self.separable_bound

    def as_witness(self) -> WitnessValue:
        return WitnessValue(self.witness_value, WitnessKind.SDP_DUAL)


def extract_witness(solution: SdpSolution, gamma: CovarianceMatrix, problem: CmcProblem,
                    feas_tol: float = 1e-8) -> WitnessCertificate:
    """Turn a dual solution into a witness and validate it without solver internals."""
    if solution.status not in (SdpStatus.OPTIMAL, SdpStatus.MAX_ITER,
                               SdpStatus.NUMERICAL_TROUBLE):
        raise CertificateInvalidError(f"solver status {solution.status.value}")
    part = problem.partition
    scale = problem.scale
    z1 = solution.Z_blocks[0]
    sq = problem.squeeze_vector()
    z_real = z1 * sq[:, None] * sq[None, :] / scale
    g = gamma.matrix
    witness = 1.0 - float(np.sum(z_real * g))

    zmax = max(max_norm(z1), 1.0)
    min_eig = float(np.linalg.eigvalsh(z1).min())
    norm_sum = 0.0
    pinch = 0.0
    bound = 0.0
    local_blocks = []
    for gi, zg in enumerate(solution.Z_blocks[1:]):
        m2 = zg.shape[0] // 2
        f = problem.blocks[gi + 1].f0
        norm_sum += float(np.sum(f * zg))
        quad = part.quadratures(gi)
        z_local = z1[np.ix_(quad, quad)]
        pinch = max(pinch, max_norm(z_local - (zg[:m2, :m2] + zg[m2:, m2:])))
        bound += symplectic_trace_bound(z_real[np.ix_(quad, quad)], gamma.eta)
        blk = np.zeros((m2, m2))
        for var, a, b in problem.local_vars[gi]:
            blk[a, b] = blk[b, a] = solution.x[var] * scale
        local_blocks.append(blk / np.outer(sq[quad], sq[quad]))
    norm_res = abs(norm_sum + 1.0)

    if min_eig < -feas_tol * zmax:
        raise CertificateInvalidError(f"Z is not PSD (min eigenvalue {min_eig:.3e})")
    if bound < 1.0 - max(feas_tol, 1e-12) * 10:
        raise CertificateInvalidError(
            f"separable states reach tr(Z gamma) = {bound:.12g} < 1")
    if norm_res > 10 * feas_tol * zmax or pinch > 10 * feas_tol * zmax:
        raise CertificateInvalidError(
            f"dual equality residuals too large ({norm_res:.2e}, {pinch:.2e})")
    return WitnessCertificate(float(solution.x[0]), z_real, witness, local_blocks,
                              solution.status, bound, norm_res, pinch, min_eig, g.copy(),
                              part, solution)


def witness_for_partition(gamma: CovarianceMatrix, partition: PartitionSpec, *,
                          gap_tol: float = 1e-8, feas_tol: float = 1e-8,
                          max_iter: int = 200) -> WitnessCertificate:
    """Build, solve and certify the optimal witness for one partition."""
    problem = build_cmc_primal(gamma, partition)
    x0 = problem.starting_point()
    sol = solve(problem, gap_tol=gap_tol, feas_tol=feas_tol, max_iter=max_iter, x0=x0)
    return extract_witness(sol, gamma, problem, feas_tol)


def optimal_witness(gamma: CovarianceMatrix, **options) -> WitnessCertificate:
    """Full-separability witness (every mode its own group)."""
    return witness_for_partition(gamma, PartitionSpec.full(gamma.n_modes), **options)


@dataclass(frozen=True)
class ModeProfile:
    rho_weights: np.ndarray
    phi_weights: np.ndarray

    @property
    def total(self) -> float:
        return float(self.rho_weights.sum() + self.phi_weights.sum())

    def dominant(self, fraction: float = 0.01) -> List[Tuple[str, int]]:
        tot = abs(self.total)
        out = [("rho", k) for k in np.nonzero(np.abs(self.rho_weights) > fraction * tot)[0]]
        out += [("phi", k) for k in np.nonzero(np.abs(self.phi_weights) > fraction * tot)[0]]
        return [(s, int(k)) for s, k in out]


def witness_mode_profile(cert: WitnessCertificate, basis: NormalModeBasis,
                         gamma: Optional[np.ndarray] = None) -> ModeProfile:
    """Per-mode split of ``tr(Z Gamma)``: the diagonal of ``S^T Z Gamma S``, ``S = O (+) O``."""
    g = cert.gamma if gamma is None else np.asarray(gamma)
    s = direct_sum_orthogonal(basis.diagonalizer_O)
    if s.shape[0] != g.shape[0]:
        raise DimensionMismatchError("basis does not match the certificate")
    diag = np.einsum("ij,jk,ki->i", s.T, cert.Z_real @ g, s)
    n = basis.n_modes
    return ModeProfile(diag[:n].copy(), diag[n:].copy())


def witness_band_profile(cert: WitnessCertificate, basis: NormalModeBasis) -> Dict[str, np.ndarray]:
    """Largest ``|Z|`` entry on each off-diagonal of the mode-basis blocks."""
    s = direct_sum_orthogonal(basis.diagonalizer_O)
    zm = s.T @ cert.Z_real @ s
    n = basis.n_modes
    blocks = {"rho_rho": zm[:n, :n], "phi_phi": zm[n:, n:], "rho_phi": zm[:n, n:]}
    return {name: np.array([max_norm(np.diagonal(b, offset=d)) for d in range(n)])
            for name, b in blocks.items()}
