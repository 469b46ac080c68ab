import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phigamma.errors import (DomainError, InsufficientPrecision, NotAUnit)
from phigamma.series import (INF, OESeries, ball_index, in_ball, oe_arith, oe_inv,
                             onepx_power, parse_series, phi_subst, psi_components,
                             psi_op, render_series)

from conftest import P, N, doubled_precision_check, random_series

X = OESeries(P, N, {1: 1})
ONE = OESeries.one(P, N)


def series(terms, hi=INF):
    return OESeries(P, N, terms, hi=hi)


sparse_terms = st.dictionaries(st.integers(-8, 10), st.integers(1, 8),
                               min_size=1, max_size=5)


class TestArith:
    def test_x_times_x_inverse(self):
        out = oe_arith(X, series({-1: 1}), "mul")
        assert out.agrees(ONE)

    def test_one_plus_x_squared(self):
        out = (ONE + X) * (ONE + X)
        assert out.agrees(series({0: 1, 1: 2, 2: 1}))

    def test_carry_cancellation_mod_nine(self):
        # (1 + 3X)(1 + 6X) = 1 + 9X + 18X^2 ≡ 1 mod 9
        out = series({0: 1, 1: 3}) * series({0: 1, 1: 6})
        assert out.agrees(ONE)
        assert out.terms == {0: 1}

    def test_mul_window_rule(self):
        f = series({-2: 1}, hi=5)
        g = series({1: 1}, hi=7)
        out = f * g
        assert out.hi == min(-2 + 7, 1 + 5)

    def test_add_window_intersection(self):
        out = series({0: 1}, hi=4) + series({1: 1}, hi=9)
        assert out.hi == 4


class TestInv:
    def test_geometric_series(self):
        out = oe_inv(ONE + X, hi_cap=10)
        expect = series({k: (-1) ** k for k in range(10)}, hi=10)
        assert out.agrees(expect)

    def test_x_inverse(self):
        assert oe_inv(X).agrees(series({-1: 1}))

    def test_phi_of_x_leading_term(self):
        y = phi_subst(P, X)  # (1+X)^3 - 1
        z = oe_inv(y)
        assert z.reduce_precision(1).lo == -3
        assert (y * z).agrees(ONE)

    def test_not_a_unit(self):
        with pytest.raises(NotAUnit):
            oe_inv(series({0: 3, 2: 6}))

    def test_inverse_of_truncated(self):
        f = series({0: 1, 1: 1, 5: 2}, hi=9)
        g = oe_inv(f)
        assert (f * g).agrees(ONE)


class TestPhi:
    def test_phi_p_of_x(self):
        assert phi_subst(P, X).agrees(series({1: 3, 2: 3, 3: 1}))

    def test_phi_of_one(self):
        assert phi_subst(P, ONE).agrees(ONE)

    def test_frobenius_congruence_mod_p(self):
        # (1+X)^p - 1 ≡ X^p mod p
        assert phi_subst(P, X).reduce_precision(1).agrees(OESeries(P, 1, {P: 1}))

    def test_unit_substitution_preserves_window(self):
        f = series({0: 2, 3: 1}, hi=12)
        out = phi_subst(2, f, hi_cap=12)
        assert out.hi == 12

    def test_negative_exponent_valuation(self):
        out = phi_subst(P, series({-2: 1}))
        assert out.reduce_precision(1).lo == -2 * P


class TestPsi:
    def test_left_inverse(self, rng):
        for _ in range(25):
            f = random_series(rng)
            assert psi_op(P, phi_subst(P, f)).agrees(f)

    def test_kills_middle_summands(self):
        for i in range(1, P):
            assert psi_op(P, onepx_power(P, N, i)).is_certified_zero

    def test_psi_of_onepx_p(self):
        assert psi_op(P, onepx_power(P, N, P)).agrees(ONE + X)

    def test_composite_parameter(self, rng):
        for _ in range(10):
            f = random_series(rng, nterms=3)
            assert psi_op(6, phi_subst(6, f, hi_cap=40)).agrees(f)


class TestProduitLemma:
    def test_projection_formulas(self, rng):
        for _ in range(40):
            x, m = random_series(rng), random_series(rng)
            assert psi_op(P, phi_subst(P, x) * m).agrees(x * psi_op(P, m))
            assert psi_op(P, x * phi_subst(P, m)).agrees(psi_op(P, x) * m)

    def test_decomposition_identity(self, rng):
        for _ in range(25):
            f = random_series(rng)
            comps = psi_components(f)
            rec = OESeries.zero(P, N)
            for i, ci in enumerate(comps):
                rec = rec + onepx_power(P, N, i) * phi_subst(P, ci)
            assert rec.agrees(f)


@given(t1=sparse_terms, t2=sparse_terms)
@settings(max_examples=60, deadline=None)
def test_phi_multiplicative(t1, t2):
    f, g = series(t1), series(t2)
    assert phi_subst(P, f * g).agrees(phi_subst(P, f) * phi_subst(P, g))


@given(t=sparse_terms)
@settings(max_examples=40, deadline=None)
def test_phi_composition(t):
    f = series(t)
    assert phi_subst(P * P, f).agrees(phi_subst(P, phi_subst(P, f)))


@given(t1=sparse_terms, t2=sparse_terms)
@settings(max_examples=50, deadline=None)
def test_doubled_precision_oracle_mul(t1, t2):
    doubled_precision_check(lambda a, b: a * b, series(t1), series(t2))


@given(t=sparse_terms)
@settings(max_examples=40, deadline=None)
def test_doubled_precision_oracle_psi(t):
    doubled_precision_check(lambda f: psi_op(P, f), series(t))


@given(t=sparse_terms)
@settings(max_examples=40, deadline=None)
def test_doubled_precision_oracle_phi(t):
    doubled_precision_check(lambda f: phi_subst(P, f), series(t))


@given(t=sparse_terms)
@settings(max_examples=30, deadline=None)
def test_doubled_precision_oracle_inv(t):
    f = series(t)
    if f.unit_val() is None:
        return
    doubled_precision_check(lambda g: oe_inv(g, hi_cap=12), f)


class TestBall:
    def test_shifted_lattice_element(self):
        assert in_ball(series({5: 2, 7: 1}), 5)

    def test_one_not_in_positive_ball(self):
        assert not in_ball(ONE, 1)

    def test_pn_multiple_is_zero(self):
        assert in_ball(series({0: 9, 2: 18}), 4)

    def test_window_requirement(self):
        with pytest.raises(InsufficientPrecision):
            in_ball(series({0: 1}, hi=3), 5)

    def test_ball_index(self):
        assert ball_index(series({4: 1, 6: 2})) == 4
        assert ball_index(series({}, hi=9)) == 9


class TestTextFormat:
    def test_render_parse_roundtrip(self, rng):
        for _ in range(50):
            f = random_series(rng)
            assert parse_series(render_series(f), P, N).agrees(f)

    def test_parse_basic(self):
        f = parse_series("2*X^-3 + 1 + X^2", P, N)
        assert f.terms == {-3: 2, 0: 1, 2: 1}

    def test_parse_negative_coeff(self):
        f = parse_series("-2*X + 5", P, N)
        assert f.terms == {1: 7, 0: 5}
