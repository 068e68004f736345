import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from scipy import stats

from sizebias import bounds as bd
from sizebias.bounds import BoundParams
from sizebias.errors import DomainError

P = BoundParams
pos = st.floats(0.1, 50.0)
cs = st.floats(0.1, 10.0)


def lin(lp):
    return math.exp(lp.log_p)


# -- parameters and k -----------------------------------------------------------


@pytest.mark.parametrize("a, c", [(0, 1), (1, 0), (-1, 1), (math.inf, 1), (1, math.nan)])
def test_params_reject_bad(a, c):
    with pytest.raises(DomainError):
        P(a, c)


@pytest.mark.parametrize("x, a, c, k", [(2, 2, 1, 0), (7.5, 2, 1, 5), (0.5, 2, 1, 1)])
def test_floor_k(x, a, c, k):
    assert bd.floor_k(x, P(a, c)) == k


# -- hand-evaluated examples -------------------------------------------------


def test_product_upper_examples():
    assert lin(bd.product_upper(3, P(2, 2))) == pytest.approx(2 / 3, rel=1e-14)
    assert lin(bd.product_upper(3, P(0.5, 1))) == pytest.approx(0.125 / 6, rel=1e-14)
    assert bd.product_upper(2, P(2, 1)).log == 0.0


@given(st.floats(0.01, 1.0), st.integers(1, 30))
def test_product_upper_poisson_power_over_factorial(a, n):
    # u(n, a, 1) = a^n / n! when a <= 1
    expected = n * math.log(a) - math.lgamma(n + 1)
    assert bd.product_upper(n, P(a, 1)).log_p == pytest.approx(expected, abs=1e-11 * max(1, abs(expected)))


def test_product_lower_examples():
    assert lin(bd.product_lower(2.5, P(5, 1))) == pytest.approx(0.63, rel=1e-14)
    assert bd.product_lower(4.5, P(5, 1)).log == 0.0
    assert bd.product_lower(5, P(5, 1)).log == 0.0


def test_gamma_examples():
    assert lin(bd.gamma_upper(4, P(2, 1))) == pytest.approx(1 / 3, rel=1e-13)
    ref = float(mpmath.sqrt(2) * mpmath.gamma(3) / mpmath.gamma(3.5))
    assert lin(bd.gamma_upper(2.5, P(2, 1))) == pytest.approx(ref, rel=1e-13)
    assert lin(bd.gamma_upper(2.5, P(2, 1))) >= 0.8
    assert lin(bd.gamma_lower(3, P(5, 1))) == pytest.approx(0.8, rel=1e-13)
    assert lin(bd.gamma_lower(0, P(2, 1))) == pytest.approx(0.5, rel=1e-13)
    assert bd.gamma_upper(2, P(2, 1)).log == pytest.approx(0.0, abs=1e-15)


def test_mgf_examples():
    assert lin(bd.mgf_upper(2, P(1, 1))) == pytest.approx(math.e / 4, rel=1e-14)
    assert lin(bd.mgf_lower(0, P(3, 2))) == pytest.approx(math.exp(-1.5), rel=1e-14)
    assert bd.mgf_upper(3, P(3, 1)).log == 0.0


def test_gg_examples():
    assert lin(bd.gg_upper(2, P(1, 1))) == pytest.approx(math.exp(-1 / 3), rel=1e-14)
    assert lin(bd.gg_upper(2, P(1, 1))) > math.e / 4
    assert lin(bd.gg_lower(0, P(2, 1))) == pytest.approx(math.exp(-1), rel=1e-14)
    assert lin(bd.gg_lower(0, P(2, 1))) > math.exp(-2)


def test_chebyshev_examples():
    assert bd.chebyshev_lower_j(5, 0, P(5, 1)).log == 0.0
    assert lin(bd.chebyshev_lower_j(2, 0, P(5, 1))) == pytest.approx(5 / 14, rel=1e-14)
    assert lin(bd.chebyshev_lower_j(2, 1, P(5, 1))) == pytest.approx(1 / 3, rel=1e-14)
    with pytest.raises(DomainError):
        bd.chebyshev_lower_j(2, 4, P(5, 1))


def test_chebyshev_all_matches_single():
    p = P(7.3, 0.6)
    arr = bd.chebyshev_lower_all(2.2, p)
    assert arr.size == bd.floor_k(2.2, p) + 1
    for j, v in enumerate(arr):
        assert v == pytest.approx(bd.chebyshev_lower_j(2.2, j, p).log_p, abs=1e-12)


def test_mgf_log_bound_examples():
    assert bd.mgf_log_bound(0.0, P(3, 2)) == 0.0
    assert bd.mgf_log_bound(1.0, P(1, 1)) == pytest.approx(math.e - 1, rel=1e-15)


def test_hoeffding_examples():
    assert bd.hoeffding_classical_upper(2, 2, 4).log == 0.0
    assert lin(bd.hoeffding_classical_upper(3, 2, 4)) == pytest.approx(16 / 27, rel=1e-14)
    assert bd.hoeffding_classical_upper(4.5, 2, 4).value == 0.0
    with pytest.raises(DomainError):
        bd.hoeffding_classical_upper(1, 2, 4)


@pytest.mark.parametrize("fn, x", [(bd.product_upper, 1.0), (bd.gamma_upper, 1.0), (bd.mgf_upper, 1.0),
                                   (bd.gg_upper, 1.0), (bd.product_lower, 3.0), (bd.gamma_lower, 3.0),
                                   (bd.mgf_lower, 3.0), (bd.gg_lower, -0.5)])
def test_wrong_side_raises(fn, x):
    with pytest.raises(DomainError):
        fn(x, P(2, 1))


def test_best_report_examples():
    rep = bd.best_report(2, P(5, 1))
    assert rep.best_lower_name == "mgf"
    assert rep.best_lower.value == pytest.approx(6.25 * math.exp(-3), rel=1e-13)
    rep = bd.best_report(4, P(2, 1))
    assert rep.best_upper_name == "product"
    assert rep.best_upper.value == pytest.approx(1 / 3, rel=1e-13)
    assert lin(rep.upper["mgf"]) == pytest.approx(math.exp(2) / 16, rel=1e-13)
    rep = bd.best_report(5, P(5, 1))
    assert rep.best_upper.log == 0.0 and rep.best_lower.log == 0.0
    assert all(v.log == 0.0 for v in {**rep.upper, **rep.lower}.values())


@given(pos, cs, st.floats(0.0, 200.0), st.one_of(st.none(), st.integers(60, 300)))
def test_best_is_min(a, c, x, n):
    rep = bd.best_report(x, P(a, c), n=n)
    if rep.upper:
        assert rep.best_upper.log == pytest.approx(min(0.0, min(v.log_p for v in rep.upper.values())), abs=1e-12)
    if rep.lower:
        cands = [v.log_p for v in rep.lower.values()] + list(rep.chebyshev)
        assert rep.best_lower.log == pytest.approx(min(0.0, min(cands)), abs=1e-12)


def test_best_report_side_tolerance():
    a = 3.0
    rep = bd.best_report(a * (1 - 1e-14), P(a, 1))
    assert rep.upper and rep.lower


# -- structural identities ---------------------------------------------------


@given(pos, cs, st.floats(0.0, 100.0))
def test_scaling_identity(a, c, d):
    x = a + d
    assert bd.product_upper(x, P(a, c)).log_p == pytest.approx(
        bd.product_upper(x / c, P(a / c, 1)).log_p, abs=1e-10)
    xl = a * d / 100
    assert bd.product_lower(xl, P(a, c)).log_p == pytest.approx(
        bd.product_lower(xl / c, P(a / c, 1)).log_p, abs=1e-10)


@given(pos, cs, st.integers(1, 40))
def test_product_continuity_at_breakpoints(a, c, m):
    p = P(a, c)
    x = a + m * c
    left = bd.product_upper(math.nextafter(x, -math.inf), p).log_p
    right = bd.product_upper(x, p).log_p
    assert left == pytest.approx(right, abs=1e-8)
    xl = a - m * c
    assume(xl > 0)
    left = bd.product_lower(xl, p).log_p
    right = bd.product_lower(math.nextafter(xl, math.inf), p).log_p
    assert left == pytest.approx(right, abs=1e-8)


def _sqrt_factor(x, a, c):
    return 0.5 * math.log((a + c / 2) / (x + c / 2))


@given(pos, cs, st.floats(0.0, 200.0))
def test_upper_ordering_chain(a, c, d):
    x = a + d
    p = P(a, c)
    tol = 1e-9
    prod = bd.product_upper(x, p).log_p
    gam = bd.gamma_upper(x, p).log_p
    mgf = bd.mgf_upper(x, p).log_p
    gg = bd.gg_upper(x, p).log_p
    f = bd.gamma_vs_mgf_log_factor(x, p)
    assert f == pytest.approx(_sqrt_factor(x, a, c), abs=1e-14)
    assert prod <= gam + tol
    assert gam <= f + mgf + tol
    assert f + mgf <= mgf + tol
    assert mgf <= gg + tol


@given(pos, cs, st.floats(1e-6, 1.0))
def test_lower_ordering(a, c, frac):
    x = a * (1 - frac)
    p = P(a, c)
    tol = 1e-9
    prod = bd.product_lower(x, p).log_p
    gam = bd.gamma_lower(x, p).log_p
    mgf = bd.mgf_lower(x, p).log_p
    assert prod <= gam + tol
    assert gam >= _sqrt_factor(x, a, c) + mgf - tol
    assert mgf <= bd.gg_lower(x, p).log_p + tol


@given(pos, cs, st.integers(0, 60))
def test_gamma_equals_product_on_lattice(a, c, m):
    p = P(a, c)
    x = a + m * c
    assert bd.gamma_upper(x, p).log_p == pytest.approx(bd.product_upper(x, p).log_p,
                                                       abs=1e-10 * max(1, m))
    xh = a + (m + 0.5) * c
    assert bd.gamma_upper(xh, p).log_p > bd.product_upper(xh, p).log_p


@given(pos, cs, st.floats(0.0, 1.0))
def test_gamma_lower_equals_product_on_lattice(a, c, frac):
    p = P(a, c)
    m = int(frac * a / c)
    x = a - m * c
    assume(x >= 0)
    assert bd.gamma_lower(x, p).log_p == pytest.approx(bd.product_lower(x, p).log_p, abs=1e-9 * max(1, m))


@given(st.floats(0.1, 50.0), st.integers(1, 200), st.floats(0.0, 1.0))
def test_hoeffding_below_mgf(a, extra, t):
    n = a + extra
    x = a + t * (n - a) * 0.999
    assert bd.hoeffding_classical_upper(x, a, n).log_p <= bd.mgf_upper(x, P(a, 1)).log_p + 1e-12


def test_hoeffding_is_tight_for_binomial_extreme():
    # P(Bin(n, p) = n) = p^n, exactly the boundary value
    n, p = 12, 0.3
    assert bd.hoeffding_classical_upper(n, n * p, n).log_p == pytest.approx(n * math.log(p), rel=1e-13)


def test_long_product_accuracy():
    # 10^6 factors: compare with the Gamma closed form on the lattice
    p = P(3.0, 1.0)
    x = 3.0 + 1_000_000
    assert bd.product_upper(x, p).log_p == pytest.approx(bd.gamma_upper(x, p).log_p, rel=1e-12)


def test_too_many_factors():
    with pytest.raises(DomainError):
        bd.product_upper(1e9, P(1.0, 1.0))


# -- exact laws as oracles ---------------------------------------------------


@pytest.mark.parametrize("a", [0.5, 1.0, 2.0, 5.0, 10.0])
def test_poisson_one_step_and_bounds(a):
    p = P(a, 1.0)
    top = int(a + 12 * math.sqrt(a))
    for x in range(0, top + 1):
        G = stats.poisson.sf(x - 1, a)
        F = stats.poisson.cdf(x, a)
        if x > 0:
            assert G <= a / x * stats.poisson.sf(x - 2, a) * (1 + 1e-12)
        rep = bd.best_report(x, p)
        for v in rep.upper.values():
            assert math.log(G) <= v.log_p + 1e-9
        for v in list(rep.lower.values()):
            assert math.log(F) <= v.log_p + 1e-9
        for v in rep.chebyshev:
            assert math.log(F) <= v + 1e-9


def test_bernoulli_brute_force_lower():
    # p = (1/2, 1/3, 1/4): enumerate all 8 outcomes exactly
    ps = [Fraction(1, 2), Fraction(1, 3), Fraction(1, 4)]
    law = {}
    for bits in range(8):
        pr, s = Fraction(1), 0
        for i, q in enumerate(ps):
            on = bits >> i & 1
            pr *= q if on else 1 - q
            s += on
        law[s] = law.get(s, 0) + pr
    a = float(sum(ps))
    for x in (0, 0.5, 1):
        F = float(sum(v for k, v in law.items() if k <= x))
        assert F <= lin(bd.mgf_lower(x, P(a, 1)))
        assert F <= lin(bd.product_lower(x, P(a, 1)))


def test_report_to_dict_roundtrip():
    d = bd.best_report(3.5, P(2, 1), n=10).to_dict()
    assert d["best_upper_name"] in d["upper"]
    assert "hoeffding" in d["upper"]
