"""Arithmetic in the Fontaine ring O_E at finite precision.

An element is a Laurent series over Z/p^n known exactly below a cutoff:
``OESeries`` stores sparse terms together with a half-open certification
window [lo, hi).  Semantics: the element equals the stored terms modulo
(p^n, X^hi * Lambda) and has no nonzero coefficient below lo.  ``hi`` may be
``INF``, meaning the element is a fully known Laurent polynomial mod p^n.

Window bookkeeping is conservative: every operation returns a window on
which its output is certified, possibly smaller than what is mathematically
attainable.  The doubled-precision oracle in the test-suite guards against
over-claiming.

Substitution parameters are carried as exact rationals: the coefficient
C(a, k) mod p^n depends on a modulo p^(n + v_p(k!)), so a residue mod p^n
would not determine (1+X)^a on any useful window.
"""

import re
from dataclasses import dataclass
from fractions import Fraction

from .errors import (DomainError, EmptyWindow, FormatError, InsufficientPrecision,
                     NotAUnit, PrecisionLoss)
from .padics import PAdicNum, frac_residue, frac_val, int_val

INF = float("inf")


def fdiv(a, b):
    """Floor division that passes +/-INF through."""
    if a == INF or a == -INF:
        return a
    return a // b


class OESeries:
    """Sparse Laurent series over Z/p^n with a certified window."""

    __slots__ = ("p", "n", "terms", "lo", "hi")

    def __init__(self, p, n, terms=None, hi=INF):
        q = p ** n
        kept = {}
        for e, c in (terms or {}).items():
            c %= q
            if c and e < hi:
                kept[e] = c
        self.p = p
        self.n = n
        self.terms = kept
        self.hi = hi
        self.lo = min(kept) if kept else hi

    @classmethod
    def zero(cls, p, n):
        return cls(p, n, {})

    @classmethod
    def const(cls, p, n, c):
        if isinstance(c, PAdicNum):
            c = c.num
        elif isinstance(c, Fraction):
            c = frac_residue(c, p, p ** n)
        return cls(p, n, {0: c})

    @classmethod
    def one(cls, p, n):
        return cls(p, n, {0: 1})

    @classmethod
    def x_power(cls, p, n, e, c=1):
        return cls(p, n, {e: c})

    @property
    def is_exact(self):
        return self.hi == INF

    @property
    def is_certified_zero(self):
        return not self.terms

    def _compat(self, other):
        if not isinstance(other, OESeries):
            raise DomainError(f"cannot combine OESeries with {type(other).__name__}")
        if (other.p, other.n) != (self.p, self.n):
            raise DomainError("mixed (p, n) arithmetic")
        return other

    def __add__(self, other):
        other = self._compat(other)
        hi = min(self.hi, other.hi)
        out = dict(self.terms)
        for e, c in other.terms.items():
            out[e] = out.get(e, 0) + c
        return OESeries(self.p, self.n, out, hi=hi)

    def __neg__(self):
        return OESeries(self.p, self.n, {e: -c for e, c in self.terms.items()}, hi=self.hi)

    def __sub__(self, other):
        return self + (-self._compat(other))

    def __mul__(self, other):
        other = self._compat(other)
        hi = min(self.lo + other.hi, other.lo + self.hi)
        out = {}
        if len(self.terms) > len(other.terms):
            big, small = self.terms, other.terms
        else:
            big, small = other.terms, self.terms
        big_exps = sorted(big)
        for e1, c1 in small.items():
            bound = hi - e1
            for e2 in big_exps:
                if e2 >= bound:
                    break
                e = e1 + e2
                out[e] = out.get(e, 0) + c1 * big[e2]
        return OESeries(self.p, self.n, out, hi=hi)

    def scale(self, c):
        """Multiply by an exact scalar (int, Fraction with val >= 0, or PAdicNum)."""
        if isinstance(c, PAdicNum):
            c = c.num
        elif isinstance(c, Fraction):
            c = frac_residue(c, self.p, self.p ** self.n)
        return OESeries(self.p, self.n, {e: co * c for e, co in self.terms.items()}, hi=self.hi)

    def shift(self, k):
        """Multiply by X^k."""
        hi = self.hi if self.hi == INF else self.hi + k
        return OESeries(self.p, self.n, {e + k: c for e, c in self.terms.items()}, hi=hi)

    def truncate(self, hi):
        if hi >= self.hi:
            return self
        return OESeries(self.p, self.n, self.terms, hi=hi)

    def coeff(self, e):
        if e >= self.hi:
            raise InsufficientPrecision(f"coefficient at X^{e} not certified (window ends at {self.hi})")
        return self.terms.get(e, 0)

    def agrees(self, other, span=None):
        """True iff the two series coincide on the overlap of their windows.

        With ``span=(a, b)`` both windows must cover [a, b) and agreement is
        required there.
        """
        other = self._compat(other)
        hi = min(self.hi, other.hi)
        if span is not None:
            a, b = span
            if hi < b:
                raise InsufficientPrecision(f"windows end at {hi} < {b}")
            hi = b
            for e in range(a, b):
                if self.terms.get(e, 0) != other.terms.get(e, 0):
                    return False
            return True
        for e in set(self.terms) | set(other.terms):
            if e < hi and self.terms.get(e, 0) != other.terms.get(e, 0):
                return False
        return True

    def unit_val(self):
        """Smallest exponent whose coefficient is a unit mod p, or None."""
        hits = [e for e, c in self.terms.items() if c % self.p]
        return min(hits) if hits else None

    def reduce_precision(self, m):
        return OESeries(self.p, m, self.terms, hi=self.hi)

    def lift_precision(self, m):
        """A lift to precision m >= n (one representative of the class)."""
        return OESeries(self.p, m, self.terms, hi=self.hi)

    def _exact_div_p(self, d=1):
        # internal: divides an element known to be ≡ 0 mod p^d
        q = self.p ** d
        for e, c in self.terms.items():
            if c % q:
                raise PrecisionLoss(f"coefficient at X^{e} not divisible by p^{d}")
        return OESeries(self.p, self.n,
                        {e: c // q for e, c in self.terms.items()}, hi=self.hi)

    def __eq__(self, other):
        if not isinstance(other, OESeries):
            return NotImplemented
        return (self.p, self.n, self.terms, self.lo, self.hi) == \
            (other.p, other.n, other.terms, other.lo, other.hi)

    def __hash__(self):
        return hash((self.p, self.n, tuple(sorted(self.terms.items())), self.hi))

    def __repr__(self):
        win = "exact" if self.hi == INF else f"[{self.lo},{self.hi})"
        return f"OESeries({render_series(self)!r}, p={self.p}, n={self.n}, {win})"


@dataclass(frozen=True)
class SubstParam:
    """Parameter a of the substitution X -> (1+X)^a - 1, kept exact."""

    a: Fraction

    def __init__(self, a):
        a = Fraction(a)
        if a == 0:
            raise DomainError("substitution parameter must be nonzero")
        object.__setattr__(self, "a", a)

    def val(self, p):
        return int(frac_val(self.a, p))


_EXACT_DEGREE_LIMIT = 4096
_ONEPX_CACHE = {}


def onepx_power(p, n, a, hi_cap=None):
    """(1+X)^a for a in Z_p given exactly as a rational.

    Exact Laurent polynomial when a is a small nonnegative integer; otherwise
    the series is returned on the window [0, hi_cap).  Results are memoized
    (hi_cap bucketed upward) since the same substitution parameters recur.
    """
    a = Fraction(a)
    if a != 0 and frac_val(a, p) < 0:
        raise DomainError("exponent must lie in Z_p")
    exact = a.denominator == 1 and 0 <= a <= _EXACT_DEGREE_LIMIT
    if exact:
        stop, hi = int(a) + 1, INF
    else:
        if hi_cap is None or hi_cap == INF:
            raise DomainError("window cap required for a non-polynomial (1+X)^a")
        hi_cap = 32 * ((int(hi_cap) + 31) // 32)
        stop, hi = max(int(hi_cap), 0), hi_cap
    key = (p, n, a, None if exact else hi)
    if key in _ONEPX_CACHE:
        return _ONEPX_CACHE[key]
    # c_k = C(a, k) tracked as p^e * u with u invertible mod p^(n+2);
    # integer-only update with a = A/B keeps the loop cheap
    modulus = p ** (n + 2)
    q = p ** n
    big_a, big_b = a.numerator, a.denominator
    b_inv = pow(big_b, -1, modulus)
    terms = {}
    e_val, u = 0, 1
    for k in range(stop):
        if e_val < n:
            c = u * p ** e_val % q
            if c:
                terms[k] = c
        numi = big_a - k * big_b
        if numi == 0:
            break
        v = int_val(numi, p)
        den = k + 1
        vd = int_val(den, p)
        e_val += v - vd
        u = (u * ((numi // p ** v) % modulus) % modulus
             * b_inv % modulus
             * pow(den // p ** vd, -1, modulus) % modulus)
    out = OESeries(p, n, terms, hi=hi)
    _ONEPX_CACHE[key] = out
    return out


def oe_inv(f, hi_cap=None):
    """Inverse of a unit of O_E.

    Inverts the reduction mod p in k((X)) by back-substitution from the
    lowest unit-valuation term, then lifts through the p-digits by Newton
    correction.  The certified window of the result is re-derived from the
    residual 1 - f*g at the end.
    """
    p, n = f.p, f.n
    q = p ** n
    v = f.unit_val()
    if v is None:
        raise NotAUnit("series is ≡ 0 mod p on its certified window")
    lead = f.terms[v]
    lead_inv = pow(lead, -1, q)

    if f.is_exact and all(c % p == 0 for e, c in f.terms.items() if e != v):
        # f = lead * X^v * (1 + w) with w nilpotent mod p^n: finite exact
        # inverse (hi_cap is a bound on work, never a reason to forget terms)
        w = OESeries(p, n, {e - v: c * lead_inv for e, c in f.terms.items() if e != v})
        acc = OESeries.one(p, n)
        pw = OESeries.one(p, n)
        for _ in range(n - 1):
            pw = pw * (-w)
            acc = acc + pw
        return acc.shift(-v).scale(lead_inv)

    if hi_cap is None:
        if f.hi == INF:
            raise DomainError("window cap required to invert a series with infinite tail")
        hi_cap = f.hi - 2 * v

    # back-substitution mod p: g_j depends on f-coefficients up to v + j
    length = min(hi_cap + v, f.hi - v)
    if length <= 0:
        raise EmptyWindow("certified window of the inverse is empty")
    fbar = {e - v: c % p for e, c in f.terms.items() if c % p}
    g_terms = {}
    lead_inv_p = pow(lead, -1, p)
    for j in range(int(length)):
        s = sum(fbar.get(t, 0) * g_terms.get(j - t, 0) for t in range(1, j + 1))
        g_terms[j] = (0 if j else 1) - s
        g_terms[j] = g_terms[j] * lead_inv_p % p
    g = OESeries(p, n, {j - v: c for j, c in g_terms.items()},
                 hi=-v + length)

    one = OESeries.one(p, n)
    correct = 1  # f*g ≡ 1 mod p^correct
    while correct < n:
        r = one - f * g
        g = g + (g * r._exact_div_p(correct)).scale(p ** correct)
        correct *= 2
    r = one - f * g
    if not r.is_certified_zero:
        raise PrecisionLoss("inverse residual does not vanish on its certified window")
    hi = min(r.hi - v, hi_cap)
    if hi <= -v:
        raise EmptyWindow("certified window of the inverse is empty")
    return g.truncate(hi)


def _phi_tail_floor(f, p, n, v):
    """Exponent below which phi_a(unknown tail of f) cannot contribute mod p^n."""
    if f.hi == INF:
        return INF
    return p ** v * f.hi - (n - 1) * (p ** v - 1)


def phi_subst(t, f, hi_cap=None):
    """f((1+X)^a - 1) for the substitution parameter a (val(a) = v >= 0).

    Negative exponents of f are mapped through the inverse of (1+X)^a - 1,
    with certified valuation -j*p^v for the X^(-j) term.
    """
    a = t.a if isinstance(t, SubstParam) else Fraction(t)
    p, n = f.p, f.n
    if a == 0 or frac_val(a, p) < 0:
        raise DomainError("substitution parameter must be nonzero with val >= 0")
    v = int(frac_val(a, p))
    target = min(hi_cap if hi_cap is not None else INF, _phi_tail_floor(f, p, n, v))
    if f.is_certified_zero:
        return OESeries(p, n, {}, hi=target)
    neg = min(f.lo, 0)
    y_cap = None if target == INF else target + (-neg) * p ** v + 1
    y = onepx_power(p, n, a, hi_cap=y_cap) - OESeries.one(p, n)
    out = OESeries.const(p, n, f.terms.get(0, 0))
    out = OESeries(p, n, out.terms, hi=target)

    pos = sorted(e for e in f.terms if e > 0)
    if pos:
        pw, cur = y, 1
        for e in pos:
            while cur < e:
                # sound to truncate: y.lo >= 1, so discarded terms cannot
                # re-enter below the target in later powers
                pw = (pw * y).truncate(target)
                cur += 1
            out = out + pw.scale(f.terms[e])
    negs = sorted((e for e in f.terms if e < 0), reverse=True)
    if negs:
        z = oe_inv(y, hi_cap=y_cap)
        pw, cur = z, -1
        for e in negs:
            while cur > e:
                pw = pw * z
                cur -= 1
            out = out + pw.scale(f.terms[e])
    return out.truncate(target)


def gamma_subst(e, f, hi_cap=None):
    """Unit substitution X -> (1+X)^e - 1 (the Gamma-action on O_E)."""
    e = Fraction(e)
    if frac_val(e, f.p) != 0:
        raise DomainError("gamma substitution needs a unit parameter")
    return phi_subst(e, f, hi_cap=hi_cap)


def psi_components_lift(f, out_cap=None):
    """The p components of f = sum_i (1+X)^i phi_p(c_i), i = 0..p-1.

    Solved digit-by-digit in p: mod p the system is triangular per block
    because phi_p(X^j) ≡ X^(pj).  Exact inputs give exact components.
    ``out_cap`` truncates the certified component windows; passing it lets
    the digit reconstructions run on correspondingly small windows.
    """
    p, n = f.p, f.n
    onepx = [onepx_power(p, n, i) for i in range(p)]
    comps = [OESeries.zero(p, n) for _ in range(p)]
    comp_hi = [INF if out_cap is None else out_cap] * p
    comp_scale = 1
    residual = f if out_cap is None else f.truncate(p * out_cap + p)
    for d in range(n):
        digits = _triangular_solve_mod_p(residual)
        if out_cap is not None:
            digits = [dd.truncate(out_cap) for dd in digits]
        hi_d = fdiv(residual.hi - p, p) + 1 if residual.hi != INF else INF
        for i in range(p):
            comps[i] = comps[i] + digits[i].scale(comp_scale)
            comp_hi[i] = min(comp_hi[i], hi_d)
        comp_scale *= p
        if d + 1 < n:
            recon = OESeries.zero(p, n)
            for i in range(p):
                recon = recon + onepx[i] * phi_subst(p, digits[i])
            residual = (residual - recon)._exact_div_p(1)
    return [c.truncate(h) for c, h in zip(comps, comp_hi)]


# Component extraction is Z/p^n-linear, and with w := phi_p(X)/X^p (a unit
# 1 + p*sigma of the Laurent ring) the projection formula gives
#     psi((1+X)^(-i) X^(pj+l)) = X^j psi((1+X)^(-i) w^(-j) X^l),
# where w^(-j) mod p^n depends on j only through j mod p^(n-1+v_p((n-1)!)).
# The finitely many gadgets psi((1+X)^(-i) w^(-j0) X^l) are computed once by
# the digit-lift solver above; psi_components then just accumulates shifts.

_COMP_GADGETS = {}


def _factorial_val(m, p):
    v, f = 0, 1
    for t in range(2, m + 1):
        f *= t
    return int_val(f, p) if m >= 2 else 0


def _gadget_table(p, n):
    key = (p, n)
    if key not in _COMP_GADGETS:
        modulus = p ** (max(n - 1, 1) + _factorial_val(max(n - 1, 0), p))
        y = onepx_power(p, n, p) - OESeries.one(p, n)
        w = y.shift(-p)
        w_inv = oe_inv(w)  # exact: w = 1 + p*sigma
        table = {}
        spread = 0
        for j0 in range(modulus):
            pw = OESeries.one(p, n)
            for _ in range(j0):
                pw = pw * w_inv
            for l in range(p):
                comps = psi_components_lift(pw.shift(l))
                table[(l, j0)] = comps
                for c in comps:
                    if c.terms:
                        spread = max(spread, -c.lo, max(c.terms) + 1)
        _COMP_GADGETS[key] = (modulus, spread, table)
    return _COMP_GADGETS[key]


def psi_components(f, out_cap=None):
    """The p components of f = sum_i (1+X)^i phi_p(c_i), via gadget lookup."""
    p, n = f.p, f.n
    modulus, spread, table = _gadget_table(p, n)
    acc = [dict() for _ in range(p)]
    for e, coeff in f.terms.items():
        j, l = divmod(e, p)
        gadgets = table[(l, j % modulus)]
        for i in range(p):
            for ge, gc in gadgets[i].terms.items():
                pos = ge + j
                acc[i][pos] = acc[i].get(pos, 0) + coeff * gc
    hi = INF if f.hi == INF else fdiv(f.hi, p) - spread
    if out_cap is not None:
        hi = min(hi, out_cap)
    return [OESeries(p, n, a, hi=hi) for a in acc]


def _triangular_solve_mod_p(f):
    """Digit solve: f ≡ sum_i (1+X)^i c_i(X^p) mod p, exact Laurent-poly c_i."""
    p = f.p
    out = [dict() for _ in range(p)]
    if not f.terms:
        return [OESeries.zero(f.p, f.n) for _ in range(p)]
    coeffs = {e: c % p for e, c in f.terms.items() if c % p}
    if coeffs:
        jmin = min(coeffs) // p
        jmax = max(coeffs) // p
    else:
        jmin, jmax = 0, -1
    binom = [[0] * p for _ in range(p)]
    for i in range(p):
        binom[i][0] = 1
        for l in range(1, i + 1):
            binom[i][l] = (binom[i - 1][l - 1] + binom[i - 1][l]) % p
    for j in range(jmin, jmax + 1):
        block = [coeffs.get(p * j + l, 0) for l in range(p)]
        sol = [0] * p
        for l in range(p - 1, -1, -1):
            s = sum(binom[i][l] * sol[i] for i in range(l + 1, p)) % p
            sol[l] = (block[l] - s) % p
            if sol[l]:
                out[l][j] = sol[l]
    return [OESeries(f.p, f.n, {j: c for j, c in col.items()}) for col in out]


def psi_op(t, f):
    """Canonical left inverse of phi_a applied to f.

    Reduces to val(a) iterations of the a = p case followed by the inverse
    unit substitution.
    """
    a = t.a if isinstance(t, SubstParam) else Fraction(t)
    p = f.p
    if a == 0 or frac_val(a, p) < 0:
        raise DomainError("substitution parameter must be nonzero with val >= 0")
    v = int(frac_val(a, p))
    out = f
    for _ in range(v):
        out = psi_components(out)[0]
    e = a / Fraction(p) ** v
    if e != 1:
        cap = None if out.hi == INF else out.hi
        out = gamma_subst(1 / e, out, hi_cap=cap)
    return out


def in_ball(f, k, m=None):
    """Membership in the weak-topology ball B_{m,k} = p^m O_E + X^k Lambda."""
    m = f.n if m is None else m
    if f.hi < k:
        raise InsufficientPrecision(f"window ends at {f.hi} < {k}")
    q = f.p ** m
    return all(c % q == 0 for e, c in f.terms.items() if e < k)


def ball_index(f, m=None):
    """Largest k <= hi with f in B_{m,k} (INF when f is certified zero and exact)."""
    m = f.n if m is None else m
    q = f.p ** m
    hits = [e for e, c in f.terms.items() if c % q]
    return min(hits) if hits else f.hi


def render_series(f):
    """Terms as `c*X^e` sorted by exponent; the window is not part of the text."""
    if not f.terms:
        return "0"
    parts = []
    for e in sorted(f.terms):
        c = f.terms[e]
        if e == 0:
            parts.append(str(c))
        elif e == 1:
            parts.append(f"{c}*X" if c != 1 else "X")
        else:
            parts.append(f"{c}*X^{e}" if c != 1 else f"X^{e}")
    return " + ".join(parts)


_TERM_RE = re.compile(
    r"^\s*(?:(?P<coeff>-?\d+)\s*(?:\*\s*)?)?(?:X(?:\^(?P<exp>-?\d+))?)?\s*$")


def parse_series(text, p, n, hi=INF):
    """Parse the `c*X^e + ...` grammar produced by render_series."""
    text = text.strip()
    if not text:
        raise FormatError("empty series text")
    protected = text.replace("^-", "^~")
    chunks = [c.replace("^~", "^-") for c in re.split(r"\+", protected.replace("-", "+-"))]
    terms = {}
    for chunk in chunks:
        if not chunk.strip():
            continue
        neg = False
        body = chunk.strip()
        if body.startswith("-"):
            neg, body = True, body[1:]
        m = _TERM_RE.match(body)
        if not m or (m.group("coeff") is None and "X" not in body):
            raise FormatError(f"cannot parse series term {chunk.strip()!r}")
        coeff = int(m.group("coeff")) if m.group("coeff") is not None else 1
        if "X" in body:
            exp = int(m.group("exp")) if m.group("exp") is not None else 1
        else:
            exp = 0
        if neg:
            coeff = -coeff
        terms[exp] = terms.get(exp, 0) + coeff
    return OESeries(p, n, terms, hi=hi)


def oe_arith(f, g, op):
    """Dispatch used by the CLI layer: op in {add, mul}."""
    if op == "add":
        out = f + g
    elif op == "mul":
        out = f * g
    else:
        raise DomainError(f"unknown op {op!r}")
    if out.hi != INF and out.hi <= min(out.lo, 0):
        raise EmptyWindow(f"result window [{out.lo},{out.hi}) is empty")
    return out
