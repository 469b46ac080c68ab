from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phigamma.errors import DivisionByZero, DomainError
from phigamma.padics import (PAdicNum, UnitChar, char_eval, padic_arith,
                             teichmuller, zp_power)

P, N = 3, 2


def num(x, p=P, n=N):
    return PAdicNum(p, n, x)


class TestArith:
    def test_inv_of_two(self):
        assert num(2).inv() == num(5)
        assert (num(2) * num(2).inv()) == num(1)

    def test_inv_identity(self):
        assert num(1).inv() == num(1)

    def test_valuation_factoring(self):
        x = num(6)
        assert x.val == 1 and x.unit == 2

    def test_inv_zero_raises(self):
        with pytest.raises(DivisionByZero):
            num(0).inv()

    def test_dispatch(self):
        assert padic_arith(num(2), num(5), "add") == num(7)
        assert padic_arith(num(2), num(5), "mul") == num(1)
        assert padic_arith(num(2), None, "neg") == num(-2)
        assert padic_arith(num(2), None, "inv") == num(5)

    def test_negative_valuation(self):
        x = num(Fraction(1, 3))
        assert x.val == -1 and x.unit == 1
        assert (x * num(3)) == num(1)

    def test_p_equals_two_rejected(self):
        with pytest.raises(DomainError):
            PAdicNum(2, 2, 1)


@given(a=st.integers(0, 8), b=st.integers(0, 8), c=st.integers(0, 8))
def test_field_axioms_mod_pn(a, b, c):
    x, y, z = num(a), num(b), num(c)
    assert ((x + y) + z) == (x + (y + z))
    assert (x * y) * z == x * (y * z)
    assert x * (y + z) == x * y + x * z
    assert x + y == y + x


@given(u=st.integers(0, 2), z1=st.integers(-20, 20), z2=st.integers(-20, 20))
def test_zp_power_additive_in_exponent(u, z1, z2):
    base = num(1 + 3 * u)
    lhs = zp_power(base, z1 + z2)
    rhs = zp_power(base, z1) * zp_power(base, z2)
    assert lhs == rhs


class TestZpPower:
    def test_integer_power(self):
        assert zp_power(num(4), 2) == num(7)

    def test_zero_exponent(self):
        assert zp_power(num(4), 0) == num(1)

    def test_exponent_mod_stabilization(self):
        # frozen by direct computation: 4^(5+9m) mod 9 == 7 for m = 0..3
        expected = [pow(4, 5 + 9 * m, 9) for m in range(4)]
        assert expected == [7, 7, 7, 7]
        assert zp_power(num(4), 5) == num(7)

    def test_domain_check(self):
        with pytest.raises(DomainError):
            zp_power(num(2), 3)


class TestCharEval:
    def test_trivial(self):
        w = UnitChar.trivial(P, N)
        for x in [1, 2, 3, 4, Fraction(1, 3)]:
            assert char_eval(w, x) == num(1)

    def test_identity_character_on_units(self):
        # value_at_p = 1, j = 1 and torsion value = generator: omega(u) = u
        g = teichmuller(2, P, N)
        w = UnitChar(P, N, value_at_p=1, exponent_j=1, torsion_value=g)
        assert char_eval(w, 4) == num(4)
        assert char_eval(w, 2) == num(2)

    def test_multiplicativity_spot(self):
        w = UnitChar(P, N, value_at_p=4, exponent_j=1,
                     torsion_value=teichmuller(2, P, N))
        assert char_eval(w, 2) * char_eval(w, 3) == char_eval(w, 6)

    def test_zero_rejected(self):
        with pytest.raises(DomainError):
            char_eval(UnitChar.trivial(P, N), 0)


@settings(max_examples=120)
@given(a=st.integers(-40, 40), b=st.integers(-40, 40),
       vp=st.sampled_from([1, 2, 4, 5, 7, 8]), j=st.integers(0, 2),
       t=st.integers(0, 1))
def test_char_eval_multiplicative(a, b, vp, j, t):
    if a == 0 or b == 0:
        return
    tor = teichmuller(2, P, N) if t else 1
    w = UnitChar(P, N, value_at_p=vp, exponent_j=j, torsion_value=tor)
    assert char_eval(w, a) * char_eval(w, b) == char_eval(w, a * b)
