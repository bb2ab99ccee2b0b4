import itertools
import math

import mpmath
import numpy as np
import pytest

from pseudoaffine.errors import DomainError
from pseudoaffine.families import example
from pseudoaffine.ifs import build_branches, default_profile, regularity_report
from pseudoaffine.proportions import ProportionPair
from pseudoaffine.words import Coding

EXAMPLES = [("zero", 2), ("a", 1), ("a", 2), ("a", "inf"), ("b", 2), ("b", "inf")]


@pytest.fixture(scope="module")
def branches():
    return {k: build_branches(example(k[0], s=k[1]), 8, tol=1e-10) for k in EXAMPLES}


def words_of(n):
    return ["".join(t) for t in itertools.product("01", repeat=n)]


def _mp_bump(t):
    return mpmath.exp(-1 / (t * (1 - t))) if 0 < t < 1 else mpmath.mpf(0)


def test_profile_against_mpmath():
    mpmath.mp.dps = 30
    prof = default_profile()
    Z = mpmath.quad(_mp_bump, [0, 0.5, 1])
    assert prof.norm == pytest.approx(float(Z), rel=1e-14)
    for u in (0.01, 0.3, 0.5, 0.77, 0.999):
        ref = mpmath.quad(_mp_bump, [0, u]) / Z
        assert float(prof.cumulative(u)) == pytest.approx(float(ref), abs=2e-14)
        assert float(prof.profile(u)) == pytest.approx(float(_mp_bump(u) / Z), rel=1e-13)


def test_profile_shape():
    prof = default_profile()
    assert float(prof.cumulative(0.0)) == 0.0
    assert float(prof.cumulative(1.0)) == pytest.approx(1.0, abs=1e-15)
    grid = np.linspace(0, 1, 5001)
    R = prof.cumulative(grid)
    assert (np.diff(R) >= 0).all()
    assert (prof.profile(grid) >= 0).all()
    norms = prof.sup_norms
    assert norms[0] >= prof.sup and norms[0] == pytest.approx(prof.sup, rel=2e-3)
    assert all(v > 0 for v in norms)


@pytest.mark.parametrize("lam", [0.3, 1 / 3])
def test_affine_branches(lam):
    B = build_branches(ProportionPair.constant(lam), 6)
    t = np.linspace(0, 1, 257)
    assert np.allclose(B.eval(0, t), lam * t, atol=1e-13, rtol=0)
    assert np.allclose(B.eval(1, t), 1 - lam + lam * t, atol=1e-13, rtol=0)
    assert B.tau == pytest.approx(1 - lam, abs=1e-14)
    assert np.allclose(B.eval_derivative(1, t), lam, atol=0, rtol=0)


@pytest.mark.parametrize("key", EXAMPLES)
def test_anchors(branches, key):
    B = branches[key]
    assert B.eval(0, 0.0) == 0.0
    assert B.eval(1, 1.0) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("key", EXAMPLES)
def test_monotone_and_contracting(branches, key):
    B = branches[key]
    grid = np.linspace(0, 1, 10001)
    for i in (0, 1):
        f = B.eval(i, grid)
        assert (np.diff(f) > 0).all()
        d = B.eval_derivative(i, grid)
        bound = B.lam + B.theta.envelope(-1) * B.profile.sup
        assert (d > 0).all() and d.max() <= bound + 1e-12
        if bound < 1:
            assert (d < 1).all()


def test_case_a_derivative_exceeds_one_in_first_gaps(branches):
    # eps_1 = lam leaves no contraction margin: the bump on I_0 peaks above 1
    B = branches[("a", 2)]
    lo, hi, _ = B.table.row("0")
    peak = B.eval_derivative(0, 0.5 * (lo + hi))
    assert peak == pytest.approx(0.3 + 0.3 * B.profile.sup, rel=1e-13)
    assert peak > 1


@pytest.mark.parametrize("key", EXAMPLES)
def test_derivative_is_lam_at_endpoints(branches, key):
    B = branches[key]
    T = B.table
    for n in range(B.depth + 1):
        pts = np.concatenate([T.a[n], T.b[n]])
        for i in (0, 1):
            assert np.abs(B.eval_derivative(i, pts) - B.lam).max() <= 1e-15


@pytest.mark.parametrize("key", EXAMPLES)
def test_gap_integral(branches, key):
    B = branches[key]
    T = B.table
    p = example(key[0], s=key[1])
    for n in range(7):
        for j, w in enumerate(words_of(n)):
            a, b, ln = T.row(w)
            for i in (0, 1):
                rise = B.eval(i, b) - B.eval(i, a)
                assert rise == pytest.approx(p.proportion(i, w) * ln, abs=2e-14)


@pytest.mark.parametrize("key", [("a", 2), ("b", 2), ("a", "inf")])
def test_finite_differences(branches, key):
    B = branches[key]
    T = B.table
    h = 1e-5
    for n in range(4):
        for w in words_of(n):
            a, b, ln = T.row(w)
            for u in (0.2, 0.5, 0.8):
                t = a + u * ln
                if t - h < a or t + h > b:
                    continue
                for i in (0, 1):
                    fd = (B.eval(i, t + h) - B.eval(i, t - h)) / (2 * h)
                    d = B.eval_derivative(i, t)
                    assert fd == pytest.approx(d, rel=1e-6)


def test_midpoint_derivatives(branches):
    mpmath.mp.dps = 30
    Z = mpmath.quad(_mp_bump, [0, 0.5, 1])
    rho_half = float(mpmath.exp(-4) / Z)
    a = branches[("a", 2)]
    lo, hi, _ = a.table.row("")
    assert a.eval_derivative(1, 0.5 * (lo + hi)) == pytest.approx(0.3, abs=1e-15)
    b = branches[("b", 2)]
    lo, hi, _ = b.table.row("")
    assert b.eval_derivative(1, 0.5 * (lo + hi)) == pytest.approx(0.3 + 0.2 * rho_half, rel=1e-13)
    assert b.eval_derivative(0, 0.5 * (lo + hi)) == pytest.approx(0.3, abs=1e-15)


def test_case_a_tau():
    p = example("a", s=2)
    B = build_branches(p, 10)
    T = B.table
    closed = 1 - 0.3 - math.fsum(p.eps[n] * float(np.sum(T.psi[n])) * T.L for n in range(11))
    assert B.tau_truncated == pytest.approx(closed, abs=1e-15)
    assert abs(B.tau - closed) <= B.tau_tail_bound
    # quadrature of f1' on a fine grid
    x, w = np.polynomial.legendre.leggauss(6)
    edges = np.linspace(0, 1, 2 ** 15 + 1)
    half = 0.5 * np.diff(edges)
    pts = (0.5 * (edges[1:] + edges[:-1]))[:, None] + half[:, None] * x
    vals = B.eval_derivative(1, pts.ravel(), tol=1e-12).reshape(pts.shape)
    integral = float(np.sum(half * (vals @ w)))
    assert B.tau == pytest.approx(1 - integral, abs=1e-6)


@pytest.mark.parametrize("key", EXAMPLES)
def test_invariance_sample(branches, key):
    B = branches[key]
    rng = np.random.default_rng(7)
    tol = 1e-10
    for _ in range(30):
        pre = "".join(rng.choice(["0", "1"], size=int(rng.integers(0, 7))))
        block = "".join(rng.choice(["0", "1"], size=int(rng.integers(1, 5))))
        a = Coding(pre, block)
        x = B.embed(a, tol)
        for i in (0, 1):
            assert abs(B.eval(i, x, tol) - B.embed(a.prepend(str(i)), tol)) <= 3 * tol


def test_invariance_spec_point(branches):
    B = branches[("a", 2)]
    x = B.embed("1(0)^inf")
    assert B.eval(0, x) == pytest.approx(B.embed("01(0)^inf"), abs=3e-10)


def test_regularity_report():
    z = build_branches(ProportionPair.constant(0.3), 6)
    assert regularity_report(z, 1, 1.0)["ratio_sup"] == 0.0
    p = example("a", s=2)
    B = build_branches(p, 10)
    rep = regularity_report(B, 1, 1.0)
    assert rep["ratio_sup"] == pytest.approx(1 / B.table.L, rel=1e-10)
    probes = [regularity_report(build_branches(p, n), 2, 0.5)["ratio_sup"] for n in range(4, 11)]
    assert all(b > a for a, b in zip(probes, probes[1:]))


def test_errors_and_csv(branches):
    B = branches[("zero", 2)]
    with pytest.raises(DomainError):
        B.eval(2, 0.5)
    with pytest.raises(DomainError):
        B.eval(0, 1.5)
    text = B.sample_csv(np.linspace(0, 1, 3))
    assert text.splitlines()[0] == "t,f0,f1,df0,df1"
    assert len(text.splitlines()) == 4
