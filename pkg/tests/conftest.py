import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import HealthCheck, settings

from bogolib.linalg import omega

settings.register_profile(
    "default", max_examples=25, deadline=None,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_symplectic(rng, n_modes, strength=0.6):
    """exp(Omega H) for a random symmetric H is symplectic."""
    a = rng.normal(size=(2 * n_modes, 2 * n_modes))
    h = strength * (a + a.T) / 2
    return sla.expm(omega(n_modes) @ h)


def random_gaussian_covariance(rng, n_modes, eta=1.0, low=1.0, high=3.0):
    nu = eta * rng.uniform(low, high, size=n_modes)
    s = random_symplectic(rng, n_modes)
    return s @ np.diag(np.concatenate([nu, nu])) @ s.T, np.sort(nu)


def random_separable_covariance(rng, n_modes, eta=1.0):
    """Direct sum of single-mode squeezed thermal states, block ordering."""
    g = np.zeros((2 * n_modes, 2 * n_modes))
    for j in range(n_modes):
        nu = eta * rng.uniform(1.0, 2.5)
        r = rng.uniform(-1.2, 1.2)
        th = rng.uniform(0, np.pi)
        rot = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
        sq = np.diag([np.exp(r), np.exp(-r)])
        s = rot @ sq
        local = nu * s @ s.T
        idx = [j, n_modes + j]
        g[np.ix_(idx, idx)] = local
    return g


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES = []


def record_criterion(label, ok, detail):
    """Store one pass/fail line for the end-of-run acceptance summary."""
    line = f"{'PASS' if ok else 'FAIL'} {label}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
