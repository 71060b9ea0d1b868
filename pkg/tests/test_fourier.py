"""Spectral core: synthesis/analysis, calculus, strip majorants, Cauchy rules."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kamtorus.fourier import (
    FourierMap,
    FourierShapeError,
    StripOverflowError,
    cauchy_bound,
    matmul,
    random_map,
)

RNG = np.random.default_rng(20240817)


def cos_map(bands=(4,), grid=(9,), axis_k=1):
    f = FourierMap.zeros(bands, grid, (1, 1))
    c = bands[0]
    f.coeffs[c + axis_k, 0, 0] = 0.5
    f.coeffs[c - axis_k, 0, 0] = 0.5
    return f


def sin_map(bands=(4,), grid=(9,)):
    f = FourierMap.zeros(bands, grid, (1, 1))
    c = bands[0]
    f.coeffs[c + 1, 0, 0] = -0.5j
    f.coeffs[c - 1, 0, 0] = 0.5j
    return f


# ---------------------------------------------------------------- eval_grid


def test_eval_grid_constant():
    f = FourierMap.constant(np.array([[3.0]]), (4, 4), (9, 9))
    samples = f.eval_grid()
    assert np.allclose(samples, 3.0, atol=1e-14)


def test_eval_grid_cosine_quarter_points():
    f = cos_map(bands=(1,), grid=(4,))
    samples = f.eval_grid()[..., 0, 0].real
    assert np.allclose(samples, [1.0, 0.0, -1.0, 0.0], atol=1e-15)


def test_eval_grid_matches_direct_summation():
    f = random_map((8,), (32,), (2, 2), RNG, decay=0.1)
    theta = (np.arange(32) / 32.0)[:, None]
    direct = f.eval_at(theta)
    fast = f.eval_grid()
    assert np.max(np.abs(direct - fast)) < 1e-13 * max(1, np.max(np.abs(direct)))


# ------------------------------------------------------------- from_samples


def test_from_samples_constant():
    samples = np.full((9, 9, 1, 1), 2.5 + 0j)
    f = FourierMap.from_samples(samples, (4, 4))
    assert abs(f.average()[0, 0] - 2.5) < 1e-15
    off = f.coeffs.copy()
    off[4, 4] = 0
    assert np.max(np.abs(off)) < 1e-15


def test_from_samples_sine_euler_coefficients():
    theta = np.arange(8) / 8.0
    samples = np.sin(2 * np.pi * theta)[:, None, None].astype(complex)
    f = FourierMap.from_samples(samples, (3,))
    assert abs(f.coeffs[3 + 1, 0, 0] - (-0.5j)) < 1e-15
    assert abs(f.coeffs[3 - 1, 0, 0] - (0.5j)) < 1e-15


def test_round_trip_from_samples_of_eval():
    f = random_map((6, 6), (13, 13), (3, 2), RNG, decay=0.2)
    g = FourierMap.from_samples(f.eval_grid(), f.bands, f.grid)
    rel = np.max(np.abs(g.coeffs - f.coeffs)) / np.max(np.abs(f.coeffs))
    assert rel < 1e-13


def test_round_trip_eval_of_from_samples_on_random_samples():
    samples = (RNG.standard_normal((9, 9, 2, 2)) + 0j)
    samples = 0.5 * (samples + np.conj(samples[::-1, ::-1]))  # representable input
    f = FourierMap.from_samples(samples, (4, 4))
    back = f.eval_grid()
    assert np.max(np.abs(back - samples)) < 1e-13


def test_from_samples_dimension_mismatch():
    with pytest.raises(FourierShapeError):
        FourierMap.from_samples(np.zeros((5, 5, 1, 1), dtype=complex), (4, 4))


def test_real_symmetry_enforced():
    samples = RNG.standard_normal((9, 9, 1, 1)) + 1j * RNG.standard_normal((9, 9, 1, 1))
    f = FourierMap.from_samples(samples, (4, 4))
    assert f.real_symmetry_defect() < 1e-12


# ------------------------------------------------------------------ calculus


def test_partial_derivative_constant_is_zero():
    f = FourierMap.constant(np.array([[7.0]]), (4,), (9,))
    assert np.max(np.abs(f.deriv(0).coeffs)) == 0.0


def test_partial_derivative_sine():
    f = sin_map()
    df = f.deriv(0)
    expected = cos_map()
    assert np.max(np.abs(df.coeffs - 2 * np.pi * expected.coeffs)) < 1e-15


def test_partial_derivative_finite_difference_oracle():
    f = random_map((8, 8), (17, 17), (1, 1), RNG, decay=0.4)
    theta = RNG.uniform(0, 1, size=(40, 2))
    h = 1e-5
    for axis in range(2):
        e = np.zeros(2)
        e[axis] = h
        fd = (f.eval_at(theta + e) - f.eval_at(theta - e)) / (2 * h)
        exact = f.deriv(axis).eval_at(theta)
        # |FD - f'| <= h^2/6 max|f'''| plus roundoff
        third = f.deriv(axis).deriv(axis).deriv(axis)
        bound = h**2 / 6.0 * np.max(np.abs(third.eval_grid())) * 1.05 + 1e-9
        assert np.max(np.abs(fd - exact)) <= bound


def test_lie_derivative_solves_cosine():
    omega = np.array([0.7])
    u = sin_map()
    u = u * (-1.0 / (2 * np.pi * omega[0]))
    lied = u.lie(omega)
    assert np.max(np.abs(lied.coeffs - cos_map().coeffs)) < 1e-14


def test_lie_derivative_zero_average():
    f = random_map((5, 5), (11, 11), (2, 1), RNG)
    lied = f.lie(np.array([0.9, 1.3]))
    assert np.max(np.abs(lied.average())) < 1e-16


def test_lie_equals_weighted_partials_exactly():
    f = random_map((5, 5), (11, 11), (2, 2), RNG)
    omega = np.array([1.1, -0.4])
    combo = f.deriv(0) * (-omega[0]) + f.deriv(1) * (-omega[1])
    assert np.max(np.abs(f.lie(omega).coeffs - combo.coeffs)) == 0.0


def test_linearity_of_operators():
    a = random_map((5, 5), (11, 11), (2, 2), RNG)
    b = random_map((5, 5), (11, 11), (2, 2), RNG)
    omega = np.array([0.3, 0.8])
    lhs = (a * 2.0 + b * (-0.5)).lie(omega)
    rhs = a.lie(omega) * 2.0 + b.lie(omega) * (-0.5)
    assert np.max(np.abs(lhs.coeffs - rhs.coeffs)) < 1e-12
    lhs = (a * 2.0 + b * (-0.5)).deriv(1)
    rhs = a.deriv(1) * 2.0 + b.deriv(1) * (-0.5)
    assert np.max(np.abs(lhs.coeffs - rhs.coeffs)) < 1e-12


# -------------------------------------------------------------------- average


def test_average_trivial_cases():
    assert abs(sin_map().average()[0, 0]) == 0.0
    f = cos_map(bands=(4,), grid=(9,))
    f = f.add_constant(np.array([[5.0]]))
    assert abs(f.average()[0, 0] - 5.0) < 1e-15


def test_average_equals_grid_mean():
    f = random_map((6, 6), (13, 13), (2, 3), RNG, decay=0.1)
    mean = f.eval_grid().mean(axis=(0, 1))
    assert np.max(np.abs(mean - f.average())) < 1e-13


# ----------------------------------------------------------------- strip norm


def test_strip_norm_constant():
    f = FourierMap.constant(np.array([[-2.0]]), (3, 3), (7, 7))
    for rho in (0.0, 0.1, 1.0):
        assert abs(f.norm(rho).value - 2.0) < 1e-15


def test_strip_norm_cosine_dominates_true_sup():
    f = cos_map()
    rho = 0.23
    value = f.norm(rho).value
    assert abs(value - np.exp(2 * np.pi * rho)) < 1e-13
    assert value >= np.cosh(2 * np.pi * rho)


def test_strip_norm_at_zero_dominates_grid_max():
    f = random_map((6, 6), (16, 16), (2, 2), RNG, decay=0.3)
    grid_max = np.max(np.abs(f.eval_grid()).sum(axis=-1))
    assert f.norm(0.0).value >= grid_max - 1e-12


def test_strip_norm_transpose_is_column_sums():
    f = FourierMap.constant(np.array([[1.0, 2.0], [0.5, 0.25]]), (2,), (5,))
    assert abs(f.norm(0.0).value - 3.0) < 1e-15          # max row sum
    assert abs(f.norm(0.0, transpose=True).value - 2.25) < 1e-15


def test_strip_norm_monotone_in_rho():
    f = random_map((5, 5), (11, 11), (2, 2), RNG)
    values = [f.norm(r).value for r in (0.0, 0.05, 0.1, 0.2)]
    assert all(a <= b + 1e-15 for a, b in zip(values, values[1:]))


def test_strip_norm_overflow_flagged():
    f = random_map((40, 40), (81, 81), (1, 1), RNG)
    with pytest.raises(StripOverflowError):
        f.norm(2.0)


def test_strip_norm_submultiplicative():
    a = random_map((5, 5), (11, 11), (2, 3), RNG, decay=0.2)
    b = random_map((5, 5), (11, 11), (3, 2), RNG, decay=0.2)
    prod = matmul(a, b)  # full product band: no truncation slack
    rho = 0.07
    lhs = prod.norm(rho).value
    rhs = a.norm(rho).value * b.norm(rho).value
    assert lhs <= rhs * (1 + 1e-10)


# -------------------------------------------------------------- Cauchy bounds


def test_cauchy_bound_matrix_rule():
    from kamtorus.fourier import StripNorm

    out = cauchy_bound(StripNorm(rho=0.5, value=1.0), 0.1, "D", dim=2)
    assert abs(out.value - 20.0) < 1e-13
    assert abs(out.rho - 0.4) < 1e-15


def test_cauchy_bound_transpose_scalar_rule():
    from kamtorus.fourier import StripNorm

    out = cauchy_bound(StripNorm(rho=0.5, value=3.0), 0.25, "D-transpose")
    assert abs(out.value - 12.0) < 1e-13


def test_cauchy_bound_vector_rule():
    from kamtorus.fourier import StripNorm

    out = cauchy_bound(StripNorm(rho=0.5, value=2.0), 0.1, "vector", dim=4)
    assert abs(out.value - 80.0) < 1e-13


def test_cauchy_bound_rejects_bad_delta():
    from kamtorus.fourier import StripNorm

    with pytest.raises(ValueError):
        cauchy_bound(StripNorm(rho=0.1, value=1.0), 0.2, "D", dim=2)


def test_cauchy_dominates_measured_derivative():
    f = random_map((6, 6), (13, 13), (1, 1), RNG, decay=0.3)
    rho, delta = 0.1, 0.04
    base = f.norm(rho)
    bound = cauchy_bound(base, delta, "D", dim=2)
    measured = sum(f.deriv(i).norm(rho - delta).value for i in range(2))
    assert measured <= bound.value * (1 + 1e-12)


# -------------------------------------------------------------- serialization


def test_json_round_trip():
    f = random_map((3, 2), (7, 5), (2, 1), RNG)
    doc = json.loads(f.to_json())
    assert doc["dims"] == [2, 2, 1]
    assert doc["bands"] == [3, 2]
    assert len(doc["coeffs"]) == 2 * f.coeffs.size
    g = FourierMap.from_json(f.to_json(), grid=f.grid)
    assert np.max(np.abs(g.coeffs - f.coeffs)) == 0.0


# ---------------------------------------------------------- property sampling


@settings(max_examples=25, deadline=None)
@given(st.floats(min_value=0.0, max_value=0.15), st.floats(min_value=0.0, max_value=0.15))
def test_strip_norm_monotone_property(r1, r2):
    f = random_map((4, 4), (9, 9), (1, 1), np.random.default_rng(7), decay=0.2)
    lo, hi = min(r1, r2), max(r1, r2)
    assert f.norm(lo).value <= f.norm(hi).value + 1e-12
