"""Shared fixtures: golden-frequency Diophantine data and seeded candidates."""

import numpy as np
import pytest
from hypothesis import settings

from kamtorus.cohomology import DiophantineParams, estimate_gamma

settings.register_profile("deterministic", derandomize=True, deadline=None)
settings.load_profile("deterministic")
from kamtorus.fourier import FourierMap
from kamtorus.frames import TorusCandidate
from kamtorus.hamiltonian import builtin_system

GOLDEN = (1.0 + np.sqrt(5.0)) / 2.0


@pytest.fixture(scope="session")
def golden_omega():
    return np.array([1.0, GOLDEN])


@pytest.fixture(scope="session")
def golden_dio(golden_omega):
    gamma = estimate_gamma(golden_omega, 1.0, 1000)
    return DiophantineParams(golden_omega, gamma, 1.0, 1000)


def seed_candidate(system_name, epsilon, omega, bands=(16, 16), rho=0.03,
                   tau=1.0, scan_limit=1000, dio=None):
    """Integrable-limit candidate K = (theta, 0, omega, 0) for a builtin system."""
    n = 2 if system_name == "lagrangian_rotors" else 3
    y_center = np.zeros(n)
    y_center[: len(omega)] = omega
    sys_obj = builtin_system(system_name, epsilon=epsilon, y_center=y_center,
                             y_radius=0.5, imag_width=0.2)
    grid = tuple(2 * b + 1 for b in bands)
    k_per = FourierMap.zeros(bands, grid, (2 * n, 1))
    k_per.coeffs[tuple(bands) + (slice(n, None), 0)] = y_center
    if dio is None:
        dio = DiophantineParams(omega, estimate_gamma(omega, tau, scan_limit), tau, scan_limit)
    return TorusCandidate(k_per, np.asarray(omega, float), dio, rho=rho, system=sys_obj)


@pytest.fixture(scope="session")
def exact_torus_b(golden_omega):
    """System B at epsilon = 0 with the exactly invariant flat torus."""
    return seed_candidate("symmetric_rotors", 0.0, golden_omega, bands=(8, 8), rho=0.05)


@pytest.fixture(scope="session")
def perturbed_candidate_a(golden_omega):
    """System A at epsilon = 1e-3 with the integrable guess (order-epsilon error)."""
    return seed_candidate("lagrangian_rotors", 1e-3, golden_omega, bands=(16, 16), rho=0.03)
