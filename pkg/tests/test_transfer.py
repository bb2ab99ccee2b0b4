import math
from fractions import Fraction

import numpy as np
import pytest

from pseudoaffine.errors import CapacityError, DomainError
from pseudoaffine.transfer import (Potential, build_system, conjugating_map, parse_potential,
                                   periodic_sum_check, ternary_digits, transfer_matrix,
                                   tripling, verify_derivative_identity)

ONE_DIGIT = (0.1, 0.0, -0.1)


def test_tripling():
    y, d = tripling(0.2)
    assert y == pytest.approx(0.6, abs=1e-15) and d == 0
    assert tripling(0.5) == (0.5, 1)
    assert tripling(Fraction(7, 9)) == (Fraction(1, 3), 2)
    with pytest.raises(DomainError):
        tripling(1.0)
    assert ternary_digits(Fraction(5, 9), 3) == [1, 2, 0]


def test_matrix_structure():
    M = transfer_matrix(Potential.digits(ONE_DIGIT), 4).toarray()
    assert M.shape == (81, 81)
    assert ((M > 0).sum(axis=0) == 3).all()  # T(y) covers three depth-n cells
    assert ((M > 0).sum(axis=1) == 3).all()  # three preimage branches per x


def _dense_oracle(values, n):
    """Transfer matrix built cell by cell from digit strings."""
    N = 3 ** n
    m = round(math.log(len(values), 3)) if len(values) > 1 else 0
    M = np.zeros((N, N))
    for y in range(N):
        digits = [(y // 3 ** (n - 1 - k)) % 3 for k in range(n)]
        x = 0
        for dgt in digits[1:]:
            x = 3 * x + dgt
        for last in range(3):
            xx = 3 * x + last
            idx = 0
            for dgt in digits[:m]:
                idx = 3 * idx + dgt
            M[xx, y] = math.exp(values[idx])
    return M


@pytest.mark.parametrize("n", [1, 2, 3])
def test_matrix_against_dense_oracle(n):
    phi = Potential.digits(ONE_DIGIT)
    assert np.allclose(transfer_matrix(phi, n).toarray(), _dense_oracle(ONE_DIGIT, n), rtol=0,
                       atol=1e-15)


@pytest.mark.parametrize("n", [1, 4, 7])
def test_zero_potential(n):
    s = build_system(Potential.constant(0.0), n)
    assert s.pressure == pytest.approx(math.log(3), abs=1e-12)
    assert np.allclose(s.eigmeasure, 3.0 ** -n, rtol=1e-12)
    assert np.ptp(s.right_eig) <= 1e-12
    h_inv, h = conjugating_map(s)
    assert np.allclose(h(s.knots), s.knots, atol=1e-14)


@pytest.mark.parametrize("c", [-0.2, 0.1, 0.25])
def test_constant_shift(c):
    phi = Potential.constant(c)
    s = build_system(phi, 5)
    assert s.pressure == pytest.approx(math.log(3) + c, abs=1e-12)
    h_inv, _ = conjugating_map(s)
    assert np.allclose(h_inv(s.knots), s.knots, atol=1e-14)
    assert verify_derivative_identity(s, phi, 500)["max_rel_dev"] <= 1e-9


def test_coboundary_pressure_against_eigenvalue():
    u = (0.2, -0.1, 0.05)
    phi = Potential.coboundary(u)
    s = build_system(phi, 2)
    M = np.zeros((9, 9))
    for y in range(9):
        d1, d2 = divmod(y, 3)
        for last in range(3):
            M[3 * d2 + last, y] = math.exp(u[d1] - u[d2])
    rho = max(abs(np.linalg.eigvals(M)))
    assert s.pressure == pytest.approx(math.log(rho), abs=1e-10)
    assert s.pressure == pytest.approx(math.log(3), abs=1e-10)


def test_one_digit_first_cylinder_mass():
    s = build_system(Potential.digits(ONE_DIGIT), 1)
    e = np.exp(ONE_DIGIT)
    assert s.eigmeasure[0] == pytest.approx(e[0] / e.sum(), rel=1e-12)
    assert s.h_inverse[1] == pytest.approx(e[0] / e.sum(), rel=1e-12)


def test_one_digit_measure_is_bernoulli():
    n = 5
    s = build_system(Potential.digits(ONE_DIGIT), n)
    p = np.exp(ONE_DIGIT) / np.exp(ONE_DIGIT).sum()
    for x in range(3 ** n):
        digits = [(x // 3 ** (n - 1 - k)) % 3 for k in range(n)]
        assert s.eigmeasure[x] == pytest.approx(math.prod(p[d] for d in digits), rel=1e-10)


@pytest.mark.parametrize("phi", [Potential.digits(ONE_DIGIT), Potential.coboundary((0.2, -0.1, 0.05)),
                                 Potential.digits(np.linspace(-0.2, 0.2, 9))])
def test_system_invariants(phi):
    n = 5
    s = build_system(phi, n)
    M = s.matrix
    assert s.residual <= 1e-10
    assert np.abs(M @ s.right_eig - math.exp(s.pressure) * s.right_eig).max() \
        <= 1e-10 * np.abs(s.right_eig).max()
    assert (s.right_eig > 0).all() and s.eigmeasure.sum() == pytest.approx(1.0, abs=1e-14)
    assert s.h_inverse[0] == 0.0 and s.h_inverse[-1] == 1.0
    assert (np.diff(s.h_inverse) > 0).all()
    h_inv, h = conjugating_map(s)
    assert np.allclose(h(h_inv(s.knots)), s.knots, atol=1e-12)
    # transfer law: mu(d x) = exp(phi(d x) - P) mu(x) on depth n-1 cylinders
    vals = phi.on_cylinders(n)
    mu_prev = s.eigmeasure.reshape(3 ** (n - 1), 3).sum(axis=1)
    for d in range(3):
        block = s.eigmeasure[d * 3 ** (n - 1):(d + 1) * 3 ** (n - 1)]
        expected = np.exp(vals[d * 3 ** (n - 1):(d + 1) * 3 ** (n - 1)] - s.pressure) * mu_prev
        assert np.allclose(block, expected, rtol=1e-10, atol=0)


def test_pressure_monotone_random_pairs():
    rng = np.random.default_rng(3)
    for _ in range(20):
        a = rng.uniform(-0.25, 0.25, 3)
        b = a + rng.uniform(0, 0.1, 3)
        assert build_system(Potential.digits(a), 3).pressure <= \
            build_system(Potential.digits(b), 3).pressure + 1e-14


def test_derivative_identity_shrinks_with_depth():
    phi = Potential.digits(ONE_DIGIT)
    devs = [verify_derivative_identity(build_system(phi, n), phi, 1000)["max_rel_dev"]
            for n in (6, 8, 10)]
    assert devs[1] <= 1e-2
    assert devs[0] > devs[1] > devs[2]


def test_verify_rejects_samples_at_cuts():
    phi = Potential.constant(0.0)
    s = build_system(phi, 4)
    with pytest.raises(DomainError):
        verify_derivative_identity(s, phi, [1 / 3])
    assert verify_derivative_identity(s, phi, [0.2, 0.5])["n_samples"] == 2


def _orbit_sums_oracle(values, m, n):
    """Exact periodic sums by iterating tripling on p / (3^n - 1)."""
    q = 3 ** n - 1
    best = 0.0
    for p in range(3 ** n):
        x = Fraction(p, q) if p < q else Fraction(0)
        total = 0.0
        for _ in range(n):
            idx = 0
            for dgt in ternary_digits(x, m):
                idx = 3 * idx + dgt
            total += values[idx]
            x, _ = tripling(x)
        best = max(best, abs(total))
    return best


def test_periodic_sums():
    assert periodic_sum_check(Potential.constant(0.0), 6)["max_abs_sum"] == 0.0
    rep = periodic_sum_check(Potential.constant(0.1), 7)
    assert rep["max_abs_sum"] == pytest.approx(0.7, abs=1e-14) and rep["worst_orbit"]["period"] == 7
    phi = Potential.coboundary((0.2, -0.1, 0.05))
    assert periodic_sum_check(phi, 8)["max_abs_sum"] <= 1e-12
    one = Potential.digits(ONE_DIGIT)
    for n in range(1, 6):
        assert periodic_sum_check(one, n)["max_abs_sum"] == pytest.approx(
            max(_orbit_sums_oracle(ONE_DIGIT, 1, k) for k in range(1, n + 1)), abs=1e-14)
    two = Potential.digits(np.linspace(-0.2, 0.2, 9))
    assert periodic_sum_check(two, 4)["max_abs_sum"] == pytest.approx(
        max(_orbit_sums_oracle(two.values, 2, k) for k in range(1, 5)), abs=1e-14)
    with pytest.raises(CapacityError):
        periodic_sum_check(phi, 13)


def test_infinite_range_potential():
    f = lambda x: 0.1 * np.cos(2 * np.pi * x)
    phi = Potential.from_function(f, lambda d: 0.2 * np.pi * d)
    s = build_system(phi, 6)
    assert s.approximate and s.discretization_error == pytest.approx(0.1 * np.pi / 3 ** 6)
    assert abs(s.pressure - math.log(3)) < 0.02
    assert periodic_sum_check(phi, 1)["max_abs_sum"] == pytest.approx(0.1, abs=1e-12)


def test_parse_potential_and_errors():
    assert parse_potential("const:0.1").values[0] == 0.1
    assert parse_potential("digits:0.1,0,-0.1").range_depth == 1
    assert parse_potential("cobound:0.2,-0.1,0.05").range_depth == 2
    for bad in ("digits:1,2", "nope:1", "const:x"):
        with pytest.raises(DomainError):
            parse_potential(bad)
    with pytest.raises(DomainError):
        build_system(Potential.coboundary((0.1, 0, 0)), 1)
    with pytest.raises(CapacityError):
        build_system(Potential.constant(0.0), 13)
    assert Potential.digits(ONE_DIGIT).small and not Potential.constant(0.3).small
