"""Exact arithmetic in Z/p^n viewed as p-adic numbers at finite precision.

A value is stored as p^val * unit with the unit part kept modulo p^n, so
elements of Q_p with negative valuation (matrix entries like 1/(cx+d)) are
representable.  All operations are pure; instances are immutable.
"""

from fractions import Fraction

from .errors import DivisionByZero, DomainError, PrecisionLoss

VAL_INF = float("inf")


def check_odd_prime(p):
    if p == 2:
        raise DomainError("p = 2 is not supported (torsion of Z_2^* is not cyclic)")
    if p < 2 or any(p % q == 0 for q in range(2, min(p, 1000)) if q * q <= p):
        raise DomainError(f"p = {p} is not prime")


def int_val(m, p):
    """p-adic valuation of a nonzero integer."""
    v = 0
    while m % p == 0:
        m //= p
        v += 1
    return v


def frac_val(x, p):
    """p-adic valuation of a rational; VAL_INF for zero."""
    x = Fraction(x)
    if x == 0:
        return VAL_INF
    return int_val(x.numerator, p) - int_val(x.denominator, p)


def frac_residue(x, p, modulus):
    """Residue of a rational with val >= 0 modulo ``modulus`` (a power of p)."""
    x = Fraction(x)
    den = x.denominator
    if den % p == 0:
        raise DomainError(f"{x} has negative {p}-adic valuation")
    return x.numerator * pow(den, -1, modulus) % modulus


def teichmuller(u, p, m):
    """Teichmuller representative of the unit u modulo p^m."""
    q = p ** m
    t = u % q
    if t % p == 0:
        raise DomainError("Teichmuller lift needs a unit")
    # x -> x^p is idempotent on residues after m-1 steps
    for _ in range(m - 1):
        t = pow(t, p, q)
    return t


def smallest_primitive_root(p):
    for g in range(2, p):
        seen, x = set(), 1
        for _ in range(p - 1):
            x = x * g % p
            seen.add(x)
        if len(seen) == p - 1:
            return g
    raise DomainError(f"no primitive root mod {p}")


def torsion_dlog(u, p):
    """i with u = g^i mod p for the smallest primitive root g."""
    g = smallest_primitive_root(p)
    x = 1
    for i in range(p - 1):
        if x == u % p:
            return i
        x = x * g % p
    raise DomainError(f"{u} is not a unit mod {p}")


def principal_dlog(u, base, p, m):
    """z mod p^m with base^z = u mod p^(m+1), for u, base in 1 + pZ_p.

    Computed by digit peeling in the cyclic group (1+pZ)/(1+p^{m+1}Z) of
    order p^m.
    """
    q = p ** (m + 1)
    u %= q
    base %= q
    if u % p != 1 % p or base % p != 1 % p:
        raise DomainError("principal_dlog needs arguments in 1 + pZ_p")
    if m == 0:
        return 0
    z = 0
    cur = u
    for j in range(m):
        # cur = base^(digit * p^j) * (1 + higher); read the digit off at level j+2
        step = pow(base, p ** j, q)
        d = 0
        while pow(step, d, q) % p ** (j + 2) != cur % p ** (j + 2):
            d += 1
            if d >= p:
                raise DomainError("dlog digit not found; base is not a generator")
        z += d * p ** j
        cur = cur * pow(step, -d, q) % q
    return z


class PAdicNum:
    """Element p^val * unit of Q_p at precision n.

    ``prec`` records how many base-p digits of the unit part are actually
    known (= n for exactly constructed values; cancellation in addition can
    lower it).  The represented class is p^val * unit modulo p^(val + prec).
    """

    __slots__ = ("p", "n", "val", "unit", "prec")

    def __init__(self, p, n, value=None, *, val=None, unit=None, prec=None):
        check_odd_prime(p)
        if n < 1:
            raise DomainError("precision n must be >= 1")
        self.p = p
        self.n = n
        if value is not None:
            x = Fraction(value)
            if x == 0:
                self.val, self.unit, self.prec = VAL_INF, 0, n
            else:
                v = frac_val(x, p)
                self.val = v
                self.prec = n
                self.unit = frac_residue(x / Fraction(p) ** v, p, p ** n)
        else:
            if unit == 0 or val == VAL_INF:
                self.val, self.unit, self.prec = VAL_INF, 0, n
            else:
                self.prec = n if prec is None else prec
                if self.prec < 1:
                    raise PrecisionLoss("no unit digits left after cancellation")
                u = unit % p ** self.prec
                if u % p == 0:
                    raise DomainError("unit part must be coprime to p")
                self.val, self.unit = val, u

    @property
    def abs_prec(self):
        """Exponent a such that the value is known modulo p^a."""
        return VAL_INF if self.is_zero else self.val + self.prec

    @classmethod
    def zero(cls, p, n):
        return cls(p, n, 0)

    @classmethod
    def one(cls, p, n):
        return cls(p, n, 1)

    @property
    def is_zero(self):
        return self.unit == 0

    @property
    def num(self):
        """Residue in Z/p^n (requires val >= 0 and full knowledge mod p^n)."""
        if self.is_zero:
            return 0
        if self.val < 0:
            raise PrecisionLoss(f"valuation {self.val} < 0 has no residue in Z/p^{self.n}")
        if self.abs_prec < self.n:
            raise PrecisionLoss("value only known modulo a smaller power of p")
        return self.unit * self.p ** min(self.val, self.n) % self.p ** self.n

    def _check_compat(self, other):
        if not isinstance(other, PAdicNum):
            other = PAdicNum(self.p, self.n, other)
        if (other.p, other.n) != (self.p, self.n):
            raise DomainError("mixed (p, n) arithmetic")
        return other

    def __add__(self, other):
        other = self._check_compat(other)
        if self.is_zero:
            return other
        if other.is_zero:
            return self
        v = min(self.val, other.val)
        rel = min(self.abs_prec, other.abs_prec) - v
        q = self.p ** rel
        b = (self.unit * self.p ** (self.val - v) + other.unit * self.p ** (other.val - v)) % q
        if b == 0:
            return PAdicNum.zero(self.p, self.n)
        shift = int_val(b, self.p)
        return PAdicNum(self.p, self.n, val=v + shift, unit=b // self.p ** shift,
                        prec=rel - shift)

    __radd__ = __add__

    def __neg__(self):
        if self.is_zero:
            return self
        return PAdicNum(self.p, self.n, val=self.val, unit=-self.unit, prec=self.prec)

    def __sub__(self, other):
        return self + (-self._check_compat(other))

    def __mul__(self, other):
        other = self._check_compat(other)
        if self.is_zero or other.is_zero:
            return PAdicNum.zero(self.p, self.n)
        return PAdicNum(self.p, self.n, val=self.val + other.val,
                        unit=self.unit * other.unit,
                        prec=min(self.prec, other.prec))

    __rmul__ = __mul__

    def inv(self):
        if self.is_zero:
            raise DivisionByZero("inverting a value indistinguishable from 0")
        if -self.val < -self.n:
            raise PrecisionLoss("inverse valuation underflows the representable range")
        return PAdicNum(self.p, self.n, val=-self.val,
                        unit=pow(self.unit, -1, self.p ** self.prec), prec=self.prec)

    def __truediv__(self, other):
        return self * self._check_compat(other).inv()

    def __pow__(self, k):
        if not isinstance(k, int):
            raise DomainError("integer exponents only; use zp_power for Z_p exponents")
        if k < 0:
            return self.inv() ** (-k)
        out = PAdicNum.one(self.p, self.n)
        for _ in range(k):
            out = out * self
        return out

    def __eq__(self, other):
        """Equality of the represented classes at the common known precision."""
        try:
            other = self._check_compat(other)
        except (DomainError, ValueError, TypeError):
            return NotImplemented
        if self.is_zero or other.is_zero:
            return self.is_zero and other.is_zero
        common = min(self.abs_prec, other.abs_prec)
        v = min(self.val, other.val)
        q = self.p ** max(common - v, 0)
        a = self.unit * self.p ** (self.val - v)
        b = other.unit * self.p ** (other.val - v)
        return (a - b) % q == 0

    def __hash__(self):
        return hash((self.p, self.n, self.val, self.unit, self.prec))

    def __repr__(self):
        if self.is_zero:
            return f"O({self.p}^{self.n})"
        tail = "" if self.prec == self.n else f"+O({self.p}^{self.abs_prec})"
        return f"{self.unit}*{self.p}^{self.val}{tail}"


def padic_arith(a, b, op):
    """Dispatch used by the CLI layer: op in {add, mul, inv, neg}."""
    if op == "add":
        return a + b
    if op == "mul":
        return a * b
    if op == "neg":
        return -a
    if op == "inv":
        return a.inv()
    raise DomainError(f"unknown op {op!r}")


def zp_power(u, z):
    """u^z for a principal unit u (val(u-1) >= 1) and exponent z in Z_p.

    Equals the binomial series sum_k C(z,k)(u-1)^k; since 1+pZ_p has order
    p^(n-1) mod p^n, only z mod p^(n-1) matters and integer exponentiation
    gives the exact truncated value.
    """
    p, n = u.p, u.n
    if (u - PAdicNum.one(p, n)).is_zero:
        pass
    elif (u - PAdicNum.one(p, n)).val < 1:
        raise DomainError("zp_power needs val(u - 1) >= 1")
    if isinstance(z, PAdicNum):
        if z.is_zero:
            zres = 0
        elif z.val < 0:
            raise DomainError("exponent must lie in Z_p")
        else:
            zres = z.num
    else:
        zf = Fraction(z)
        if frac_val(zf, p) != VAL_INF and frac_val(zf, p) < 0:
            raise DomainError("exponent must lie in Z_p")
        zres = frac_residue(zf, p, p ** n)
    e = zres % p ** max(n - 1, 1)
    return PAdicNum(p, n, pow(u.num, e, p ** n))


class UnitChar:
    """Continuous character of Q_p^* with values in (Z/p^n)^*.

    Determined by its value at p, the exponent j of the principal-unit part
    (u -> <u>^j), and its value on the fixed torsion generator (the
    Teichmuller lift of the smallest primitive root mod p).
    """

    __slots__ = ("p", "n", "value_at_p", "exponent_j", "torsion_value")

    def __init__(self, p, n, value_at_p=1, exponent_j=0, torsion_value=1):
        check_odd_prime(p)
        self.p = p
        self.n = n
        q = p ** n
        self.value_at_p = value_at_p % q
        if self.value_at_p % p == 0:
            raise DomainError("value_at_p must be a unit")
        self.exponent_j = exponent_j % p ** max(n - 1, 1)
        self.torsion_value = torsion_value % q
        if pow(self.torsion_value, p - 1, q) != 1:
            raise DomainError("torsion value must have order dividing p - 1")

    @classmethod
    def trivial(cls, p, n):
        return cls(p, n)

    @property
    def is_trivial(self):
        return self.value_at_p == 1 and self.exponent_j == 0 and self.torsion_value == 1

    def __eq__(self, other):
        if not isinstance(other, UnitChar):
            return NotImplemented
        return (self.p, self.n, self.value_at_p, self.exponent_j, self.torsion_value) == \
            (other.p, other.n, other.value_at_p, other.exponent_j, other.torsion_value)

    def __repr__(self):
        return (f"UnitChar(p={self.p}, n={self.n}, value_at_p={self.value_at_p}, "
                f"exponent_j={self.exponent_j}, torsion_value={self.torsion_value})")


def char_eval(omega, x):
    """omega(x) for x != 0 in Q_p, evaluated in Z/p^n.

    Splits x = p^v * tau * <u> into the p-power, torsion and principal-unit
    parts and applies the stored data multiplicatively.
    """
    p, n = omega.p, omega.n
    q = p ** n
    if isinstance(x, PAdicNum):
        if x.is_zero:
            raise DomainError("character undefined at 0")
        v, u = x.val, x.unit
    else:
        xf = Fraction(x)
        if xf == 0:
            raise DomainError("character undefined at 0")
        v = frac_val(xf, p)
        u = frac_residue(xf / Fraction(p) ** v, p, q)
    tau = teichmuller(u, p, n)
    i = torsion_dlog(tau % p, p)
    principal = u * pow(tau, -1, q) % q
    out = pow(omega.value_at_p, v, q) if v >= 0 else pow(pow(omega.value_at_p, -1, q), -v, q)
    out = out * pow(omega.torsion_value, i, q) % q
    out = out * pow(principal, omega.exponent_j, q) % q
    return PAdicNum(p, n, out)
