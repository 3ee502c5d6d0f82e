import numpy as np
import pytest
from hypothesis import given, strategies as st

from bogolib.bath import (
    BathSpec,
    OttoCycleSpec,
    build_drift_dissipation,
    mean_energy,
    run_otto_cycle,
    thermalize,
)
from bogolib.dynamics import CompressionProtocol, hamiltonian_at, instantaneous_basis, run_compression
from bogolib.entanglement import thermal_critical_temperature
from bogolib.errors import NonPositiveInputError
from bogolib.lattice import PhysicalParams, QuadraticHamiltonian, build_hamiltonian, coth, normal_modes, thermal_covariance
from bogolib.linalg import CovarianceMatrix, check_uncertainty, max_norm, solve_lyapunov_steady
from bogolib.sdp.cmc import optimal_witness


def chain(n, boundary="dirichlet", mu_rel=0.0):
    params = PhysicalParams(1.0, 1.0, 1.0, float(n), n, 0.0, boundary)
    return params.with_mu_relative(mu_rel)


def thermal(params, temp, lam=1.0):
    basis0 = normal_modes(build_hamiltonian(params))
    basis = instantaneous_basis(params, basis0, lam)
    h = hamiltonian_at(params, lam)
    return thermal_covariance(h, basis, temp), h, basis


def test_bath_spec_validation():
    with pytest.raises(NonPositiveInputError):
        BathSpec(0.0, 1.0)
    with pytest.raises(NonPositiveInputError):
        BathSpec(1.0, -1.0)
    comp = CompressionProtocol(0.9, 1.0, 100)
    with pytest.raises(ValueError):
        OttoCycleSpec(comp, BathSpec(1, 1), comp, BathSpec(1, 1), 1.0)
    with pytest.raises(ValueError):
        OttoCycleSpec(comp, BathSpec(1, 1), CompressionProtocol(1 / 0.9, 1.0, 100),
                      BathSpec(1, 1), 1.0)


def test_drift_spectrum_is_shifted():
    _, h, basis = thermal(chain(5), 0.3)
    g, _ = build_drift_dissipation(h, basis, BathSpec(0.7, 0.4))
    np.testing.assert_allclose(np.linalg.eigvals(g).real, -0.2, atol=1e-12)


def test_zero_hamiltonian_limit():
    d = np.diag([2.0, 3.0])
    g = -0.5 * 0.8 * np.eye(2)
    np.testing.assert_allclose(solve_lyapunov_steady(g, 0.8 * d), d, rtol=1e-12)


@given(temp=st.floats(0.01, 10.0), rate=st.floats(0.01, 10.0), lam=st.floats(0.8, 1.5),
       neumann=st.booleans())
def test_steady_state_is_thermal(temp, rate, lam, neumann):
    params = chain(6, "neumann" if neumann else "dirichlet", mu_rel=0.01)
    gamma_th, h, basis = thermal(params, temp, lam)
    g, d = build_drift_dissipation(h, basis, BathSpec(temp, rate))
    steady = solve_lyapunov_steady(g, d)
    assert max_norm(steady - gamma_th.matrix) <= 1e-8 * max_norm(gamma_th.matrix)


def test_fixed_point_trajectory_is_constant():
    gamma, h, basis = thermal(chain(4), 0.5)
    g, d = build_drift_dissipation(h, basis, BathSpec(0.5, 1.0))
    for _, snap in thermalize(gamma, g, d, 3.0, 10):
        assert max_norm(snap.matrix - gamma.matrix) <= 1e-12 * max_norm(gamma.matrix)


def test_relaxation_reaches_steady_state():
    params = chain(5, "neumann", mu_rel=0.01)
    gamma, h, basis = thermal(params, 0.1)
    rate = 0.5
    g, d = build_drift_dissipation(h, basis, BathSpec(2.0, rate))
    steady = solve_lyapunov_steady(g, d)
    traj = thermalize(gamma, g, d, 20 / rate, 40)
    assert len(traj) == 41
    assert all(check_uncertainty(s) for _, s in traj)
    assert max_norm(traj[-1][1].matrix - steady) <= 1e-7 * max_norm(steady)
    long = thermalize(gamma, g, d, 80 / rate, 40)[-1][1]
    assert max_norm(long.matrix - steady) <= 1e-10 * max_norm(steady)


def test_mean_energy_examples():
    _, h, basis = thermal(chain(3), 0.2)
    assert mean_energy(CovarianceMatrix(np.zeros((6, 6)), 0.5, check_physical=False), h) == 0.0
    params = PhysicalParams(1.0, 0.8, 2.0, 0.5, 1, 0.9, "neumann")
    gamma, h, basis = thermal(params, 0.7)
    w = basis.frequencies[0]
    assert mean_energy(gamma, h) == pytest.approx(0.5 * w * coth(w / 1.4), rel=1e-12)


def test_slow_compression_raises_energy():
    params = chain(6)
    gamma, h0, basis = thermal(params, 0.3)
    proto = CompressionProtocol(0.9, 500.0, 5000)
    end = run_compression(gamma, params, proto, basis=basis, snapshot_every=None)[-1]
    assert mean_energy(end.gamma, hamiltonian_at(params, proto.lambda_final)) > mean_energy(gamma, h0)


def test_trivial_cycle():
    params = chain(5, "neumann", mu_rel=0.01)
    spec = OttoCycleSpec.symmetric(1.0, 5.0, 50, BathSpec(0.4, 1.0), BathSpec(0.4, 1.0), 5.0, 10)
    res = run_otto_cycle(params, spec, 0.4)
    start = res.strokes["compression"][0][1].matrix
    for name, traj in res.strokes.items():
        for _, g in traj:
            assert max_norm(g.matrix - start) <= 1e-10 * max_norm(start), name
    for val in res.ledger.as_dict().values():
        assert abs(val) <= 1e-10 * res.ledger.scale


def test_long_bath_strokes_close_the_cycle():
    params = chain(6)
    t_cold, t_hot = 0.2, 0.6
    spec = OttoCycleSpec.symmetric(0.9, 20.0, 400, BathSpec(t_hot, 2.0), BathSpec(t_cold, 2.0),
                                   40.0, 20)
    res = run_otto_cycle(params, spec, t_cold)
    thermal_cold, _, _ = thermal(params, t_cold)
    assert max_norm(res.final_state.matrix - thermal_cold.matrix) <= 1e-6 * max_norm(
        thermal_cold.matrix)
    led = res.ledger
    assert led.first_law_residual <= 1e-9 * led.scale
    assert led.work + led.heat == pytest.approx(led.delta_cycle, abs=1e-9 * led.scale)
    # the engine takes heat from the hot bath and the two work strokes have opposite signs
    d = led.as_dict()
    assert d["hot_bath_Q"] > 0 and d["cold_bath_Q"] < 0
    assert d["compression_W"] > 0 > d["expansion_W"]
    assert {r.stroke for r in res.trace} == {"compression", "hot_bath", "expansion", "cold_bath"}


@given(seed=st.integers(0, 10**6))
def test_first_law_on_random_cycles(seed):
    rng = np.random.default_rng(seed)
    params = chain(4, "neumann", mu_rel=0.05)
    ratio = rng.uniform(0.8, 1.0)
    spec = OttoCycleSpec.symmetric(ratio, rng.uniform(1, 20), 200,
                                   BathSpec(rng.uniform(0.1, 2), rng.uniform(0.1, 3)),
                                   BathSpec(rng.uniform(0.1, 2), rng.uniform(0.1, 3)),
                                   rng.uniform(0.5, 10), 5)
    led = run_otto_cycle(params, spec, rng.uniform(0.1, 2), trace_every=1000).ledger
    assert led.first_law_residual <= 1e-9 * led.scale


def test_hot_bath_does_not_create_entanglement():
    # separable start, bath above the critical temperature
    params = chain(5)
    _, _, basis = thermal(params, 1.0)
    t_star = thermal_critical_temperature(basis)
    gamma, h, basis = thermal(params, 1.5 * t_star)
    g, d = build_drift_dissipation(h, basis, BathSpec(1.2 * t_star, 1.0))
    for _, snap in thermalize(gamma, g, d, 10.0, 10):
        assert optimal_witness(snap).witness_value <= 1e-8


def test_hot_bath_destroys_compression_entanglement():
    params = chain(6, "neumann", mu_rel=0.01)
    _, _, basis0 = thermal(params, 1.0)
    temp = 1.02 * thermal_critical_temperature(basis0)
    spec = OttoCycleSpec.symmetric(0.8, 2000.0, 20000, BathSpec(3 * temp, 1.0),
                                   BathSpec(temp, 1.0), 30.0, 15)
    res = run_otto_cycle(params, spec, temp,
                         witness_fn=lambda g: optimal_witness(g).witness_value,
                         trace_every=5)
    comp = [r.witness for r in res.trace if r.stroke == "compression"]
    hot = [r.witness for r in res.trace if r.stroke == "hot_bath"]
    assert comp[0] <= 1e-8 and comp[-1] > 0
    assert hot[-1] <= 1e-8
