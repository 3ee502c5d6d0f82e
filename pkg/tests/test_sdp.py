import dataclasses

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bogolib.dynamics import CompressionProtocol, instantaneous_basis, run_compression
from bogolib.entanglement import thermal_critical_temperature, witness_thermal_analytic
from bogolib.errors import CertificateInvalidError, InvalidPartitionError
from bogolib.lattice import PhysicalParams, build_hamiltonian, normal_modes, thermal_covariance
from bogolib.linalg import CovarianceMatrix, max_norm
from bogolib.sdp import LmiBlock, SdpProblem, SdpStatus, solve
from bogolib.sdp.cmc import (
    PartitionSpec,
    build_cmc_primal,
    extract_witness,
    optimal_witness,
    symplectic_trace_bound,
    witness_band_profile,
    witness_for_partition,
    witness_mode_profile,
)
from bogolib.sdp.io import dump_matrix, dump_problem, load_matrix, load_problem

from conftest import random_separable_covariance


def dense_block(f0, coeffs):
    """LmiBlock from dense coefficient matrices ``{var: F_var}``."""
    var, row, col, val = [], [], [], []
    for i, f in coeffs.items():
        r, c = np.nonzero(np.triu(f))
        var += [i] * r.size
        row += r.tolist()
        col += c.tolist()
        val += f[r, c].tolist()
    return LmiBlock(f0, var, row, col, val)


def random_sdp(rng, n_vars=4, sizes=(3, 5)):
    """Strictly primal and dual feasible instance built around known interior points."""
    x_int = rng.normal(size=n_vars)
    z_int = []
    blocks = []
    c = np.zeros(n_vars)
    for d in sizes:
        fs = {}
        for i in range(n_vars):
            a = rng.normal(size=(d, d))
            fs[i] = (a + a.T) / 2
        b = rng.normal(size=(d, d))
        s_int = b @ b.T + d * np.eye(d)
        f0 = s_int - sum(x_int[i] * fs[i] for i in range(n_vars))
        e = rng.normal(size=(d, d))
        z = e @ e.T + np.eye(d)
        z_int.append(z)
        c += np.array([np.sum(fs[i] * z) for i in range(n_vars)])
        blocks.append(dense_block(0.5 * (f0 + f0.T), fs))
    return SdpProblem(c, blocks)


def chain(n, boundary="dirichlet", mu=0.0):
    return PhysicalParams(1.0, 1.0, 1.0, float(n), n, mu, boundary)


def thermal(params, temp):
    h = build_hamiltonian(params)
    basis = normal_modes(h)
    return thermal_covariance(h, basis, temp), basis


def test_toy_sdp():
    prob = SdpProblem([1.0], [LmiBlock([[-1.0]], [0], [0], [0], [1.0])])
    sol = solve(prob)
    assert sol.status is SdpStatus.OPTIMAL
    assert sol.x[0] == pytest.approx(1.0, abs=1e-8)
    assert sol.gap <= 1e-8


@given(seed=st.integers(0, 10**6))
def test_random_sdp_weak_duality_and_optimality(seed):
    rng = np.random.default_rng(seed)
    prob = random_sdp(rng)
    sol = solve(prob)
    assert sol.status is SdpStatus.OPTIMAL
    # recompute residuals from scratch rather than trusting the solver
    s_blocks = prob.evaluate(sol.x)
    assert all(np.linalg.eigvalsh(s).min() >= -1e-8 * max(1, max_norm(s)) for s in s_blocks)
    assert all(np.linalg.eigvalsh(z).min() >= -1e-8 * max(1, max_norm(z)) for z in sol.Z_blocks)
    np.testing.assert_allclose(prob.adjoint(sol.Z_blocks), prob.objective,
                               atol=1e-7 * (1 + np.abs(prob.objective).max()))
    p, d = prob.primal_objective(sol.x), prob.dual_objective(sol.Z_blocks)
    assert p - d >= -1e-7 * (1 + abs(p))
    assert abs(p - d) <= 1e-6 * (1 + abs(p))
    comp = sum(np.sum(z * s) for z, s in zip(sol.Z_blocks, s_blocks))
    assert abs(comp) <= 1e-6 * (1 + abs(p))


@pytest.mark.filterwarnings("ignore:Solution may be inaccurate")
def test_random_sdp_matches_external_solver():
    cp = pytest.importorskip("cvxpy")
    rng = np.random.default_rng(7)
    for _ in range(3):
        prob = random_sdp(rng, n_vars=5, sizes=(4, 3, 6))
        ours = solve(prob)
        x = cp.Variable(prob.variable_dim)
        cons = []
        for b in prob.blocks:
            expr = b.f0 + sum(x[i] * b.coefficient(i) for i in range(prob.variable_dim))
            cons.append(0.5 * (expr + expr.T) >> 0)
        ref = cp.Problem(cp.Minimize(prob.objective @ x), cons)
        if "CLARABEL" in cp.installed_solvers():
            ref.solve(solver="CLARABEL", tol_gap_abs=1e-11, tol_gap_rel=1e-11, tol_feas=1e-11)
        else:
            ref.solve()
        assert ours.status is SdpStatus.OPTIMAL
        assert ours.primal_obj == pytest.approx(ref.value, rel=1e-7)


def test_unbounded_problem_is_flagged():
    # min -x s.t. x >= 0 has no finite optimum
    prob = SdpProblem([-1.0], [LmiBlock([[0.0]], [0], [0], [0], [1.0])])
    sol = solve(prob, max_iter=100)
    assert sol.status is not SdpStatus.OPTIMAL


def test_problem_io_round_trip(tmp_path, rng):
    prob = random_sdp(rng)
    path = tmp_path / "p.sdp"
    dump_problem(prob, path)
    back = load_problem(path)
    np.testing.assert_array_equal(back.objective, prob.objective)
    for a, b in zip(prob.blocks, back.blocks):
        np.testing.assert_array_equal(a.f0, b.f0)
        for i in range(prob.variable_dim):
            np.testing.assert_array_equal(a.coefficient(i), b.coefficient(i))
    m = rng.normal(size=(3, 4))
    dump_matrix(m, tmp_path / "m.txt")
    np.testing.assert_array_equal(load_matrix(tmp_path / "m.txt"), m)


def test_partition_validation_and_counting():
    with pytest.raises(InvalidPartitionError):
        PartitionSpec([(0,)])
    with pytest.raises(InvalidPartitionError):
        PartitionSpec([(0, 1), (1,)])
    with pytest.raises(InvalidPartitionError):
        PartitionSpec([(0,), (2,)])
    gamma, _ = thermal(chain(2), 0.5)
    prob = build_cmc_primal(gamma, PartitionSpec.full(2))
    assert prob.variable_dim == 1 + 2 * 3
    assert prob.block_sizes == [4, 4, 4]


def test_comfortably_thermal_state_is_separable():
    eta = 0.5
    gamma = CovarianceMatrix(2 * eta * np.eye(6), eta)
    cert = optimal_witness(gamma)
    assert cert.x_e >= -1e-8
    assert cert.witness_value <= 1e-8


def test_thermal_sign_matches_analytic():
    params = chain(4)
    _, basis = thermal(params, 1.0)
    t_star = thermal_critical_temperature(basis)
    for factor in (0.3, 0.8, 1.2, 2.0):
        gamma, _ = thermal(params, factor * t_star)
        cert = optimal_witness(gamma)
        w_an = witness_thermal_analytic(basis, factor * t_star).value
        assert np.sign(cert.x_e) == -np.sign(w_an)
        if w_an > 0:
            assert cert.witness_value == pytest.approx(w_an, abs=1e-6)
            assert cert.x_e < 0


def test_certificate_validation():
    gamma, _ = thermal(chain(4), 0.05)
    prob = build_cmc_primal(gamma, PartitionSpec.full(4))
    sol = solve(prob, x0=prob.starting_point())
    cert = extract_witness(sol, gamma, prob)
    assert cert.separable_bound >= 1 - 1e-7
    assert cert.safe_value == pytest.approx(cert.witness_value, abs=1e-7)
    broken = dataclasses.replace(sol, Z_blocks=[0.5 * z for z in sol.Z_blocks])
    with pytest.raises(CertificateInvalidError):
        extract_witness(broken, gamma, prob)
    bad = dataclasses.replace(sol, status=SdpStatus.INFEASIBLE)
    with pytest.raises(CertificateInvalidError):
        extract_witness(bad, gamma, prob)


def test_symplectic_trace_bound_identity():
    eta = 0.7
    assert symplectic_trace_bound(np.eye(4), eta) == pytest.approx(4 * eta)


def test_random_separable_states_never_detected(rng):
    for i in range(100):
        n = int(rng.integers(2, 5))
        eta = float(rng.uniform(0.2, 2.0))
        gamma = CovarianceMatrix(random_separable_covariance(rng, n, eta), eta)
        cert = optimal_witness(gamma)
        assert cert.witness_value <= 1e-8, i
        assert cert.solution.primal_obj - cert.solution.dual_obj >= -1e-8


def test_detection_consistency_fifty_instances(rng):
    agree = 0
    for _ in range(50):
        n = int(rng.integers(2, 7))
        params = chain(n)
        _, basis = thermal(params, 1.0)
        t_star = thermal_critical_temperature(basis)
        factor = rng.choice([rng.uniform(0.2, 0.95), rng.uniform(1.05, 3.0)])
        gamma, _ = thermal(params, factor * t_star)
        cert = optimal_witness(gamma)
        w_an = witness_thermal_analytic(basis, factor * t_star).value
        sol = cert.solution
        assert sol.primal_obj - sol.dual_obj >= -1e-8 * (1 + abs(sol.primal_obj))
        detected = cert.witness_value > 1e-8
        if detected:
            assert cert.x_e < 1e-8
        agree += detected == (w_an > 0)
    assert agree == 50


def test_bipartite_witness_is_weaker_than_full():
    gamma, _ = thermal(chain(6), 0.05)
    full = optimal_witness(gamma).witness_value
    zig = witness_for_partition(gamma, PartitionSpec([(0, 2, 4), (1, 3, 5)])).witness_value
    assert zig <= full + 1e-7
    assert zig > 0


def test_thermal_witness_lives_on_extremal_modes():
    params = chain(8)
    gamma, basis = thermal(params, 0.05)
    cert = optimal_witness(gamma)
    prof = witness_mode_profile(cert, basis)
    tot = prof.total
    assert prof.rho_weights[0] / tot > 0.4 and prof.phi_weights[-1] / tot > 0.4
    rest = np.abs(np.concatenate([prof.rho_weights[1:], prof.phi_weights[:-1]]))
    assert rest.max() < 1e-6 * tot
    assert prof.dominant() == [("rho", 0), ("phi", 7)]
    z_modes = witness_band_profile(cert, basis)
    assert set(z_modes) == {"rho_rho", "phi_phi", "rho_phi"}


def test_identity_profile_gives_mode_variances():
    params = chain(5)
    gamma, basis = thermal(params, 0.3)
    cert = dataclasses.replace(optimal_witness(gamma), Z_real=np.eye(10))
    prof = witness_mode_profile(cert, basis)
    o = basis.diagonalizer_O
    np.testing.assert_allclose(prof.rho_weights, np.diag(o.T @ gamma.matrix[:5, :5] @ o))
    np.testing.assert_allclose(prof.phi_weights, np.diag(o.T @ gamma.matrix[5:, 5:] @ o))


def test_quasi_adiabatic_witness_has_two_dominant_directions():
    params = chain(6)
    gamma, basis = thermal(params, 0.05)
    proto = CompressionProtocol(0.9, 2000.0, 20000)
    final = run_compression(gamma, params, proto, basis=basis, snapshot_every=None)[-1]
    cert = optimal_witness(final.gamma)
    ev = np.sort(np.linalg.eigvalsh(cert.Z_real))[::-1]
    assert ev[2] < 1e-3 * ev[1]


def test_fast_compression_spreads_witness_support():
    params = chain(8)
    gamma, basis = thermal(params, 0.05)
    proto = CompressionProtocol(0.3, 0.5, 2000)
    final = run_compression(gamma, params, proto, basis=basis, snapshot_every=None)[-1]
    cert = optimal_witness(final.gamma)
    prof = witness_mode_profile(cert, instantaneous_basis(params, basis, proto.lambda_final))
    assert len(prof.dominant(0.01)) > 2
