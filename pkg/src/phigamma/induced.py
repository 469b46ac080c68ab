"""The compactly induced module attached to an etale module D.

An element is kept in the canonical direct-sum form

    f = sigma_0(x_0) + sum_{k=1..K} sigma_k(y_k),   psi_D(y_k) = 0,

where sigma_k places a module element at depth k of the s-model (the
function with f(s^m) = phi^(m-k) x for m >= k).  In this form ev_0 reads the
head, the s-action shifts depths, and restrictions to compact opens of
Q_p ~ N decompose into depth-shifted res projectors.
"""

from fractions import Fraction

from .errors import DepthExceeded, DomainError
from .padics import frac_residue, frac_val
from .series import INF, onepx_power
from .sheaf import res_proj
from .cells import CompactOpen


class InducedElem:
    """Canonical-form element of the compactly induced module."""

    __slots__ = ("module", "head", "tails")

    def __init__(self, module, head, tails=None):
        self.module = module
        self.head = head
        self.tails = {k: y for k, y in (tails or {}).items()
                      if not y.is_certified_zero}
        if any(k < 1 for k in self.tails):
            raise DomainError("tail depths must be >= 1")

    @property
    def depth(self):
        return max(self.tails, default=0)

    @classmethod
    def sigma0(cls, module, m):
        return cls(module, m)

    @classmethod
    def from_depth_value(cls, module, depth, value, hi_cap=None):
        """The element with f(s^depth) = value, canonically decomposed.

        Writes Psi^depth sigma_0(value) as sigma_0(psi^depth value) plus the
        psi-killed parts (psi^(depth-k) value)^(psi=0) at depths 1..depth.
        """
        tails = {}
        cur = value
        for k in range(depth, 0, -1):
            nxt = module.psi_D(cur, hi_cap=hi_cap)
            killed = cur - module.phi_D(nxt, hi_cap=hi_cap)
            if not killed.is_certified_zero:
                tails[k] = killed
            cur = nxt
        return cls(module, cur, tails)

    def value_at(self, depth, hi_cap=None):
        """f(s^depth) = phi^depth(head) + sum phi^(depth-k)(y_k)."""
        if depth < self.depth:
            raise DepthExceeded(f"value_at needs depth >= {self.depth}")
        out = self.head
        for _ in range(depth):
            out = self.module.phi_D(out, hi_cap=hi_cap)
        for k, y in self.tails.items():
            term = y
            for _ in range(depth - k):
                term = self.module.phi_D(term, hi_cap=hi_cap)
            out = out + term
        return out

    # -- arithmetic ---------------------------------------------------------
    def __add__(self, other):
        tails = dict(self.tails)
        for k, y in other.tails.items():
            tails[k] = tails[k] + y if k in tails else y
        return InducedElem(self.module, self.head + other.head, tails)

    def __neg__(self):
        return InducedElem(self.module, -self.head,
                           {k: -y for k, y in self.tails.items()})

    def __sub__(self, other):
        return self + (-other)

    def agrees(self, other):
        if set(self.tails) != set(other.tails):
            common = set(self.tails) | set(other.tails)
            for k in common:
                a = self.tails.get(k)
                b = other.tails.get(k)
                if a is None or b is None:
                    target = a if a is not None else b
                    if not target.is_certified_zero:
                        return False
                elif not a.agrees(b):
                    return False
            return self.head.agrees(other.head)
        return self.head.agrees(other.head) and all(
            self.tails[k].agrees(other.tails[k]) for k in self.tails)

    # -- the operations -----------------------------------------------------
    def ev0(self):
        """Value at 1; on canonical forms this is the head."""
        return self.head

    def canonicalize(self, hi_cap=None):
        """Re-enforce the direct-sum form (idempotent on canonical input)."""
        head = self.head
        tails = {}
        for k, y in sorted(self.tails.items()):
            killed = y - self.module.phi_D(self.module.psi_D(y, hi_cap=hi_cap),
                                           hi_cap=hi_cap)
            rest = y - killed
            if not killed.is_certified_zero:
                tails[k] = tails[k] + killed if k in tails else killed
            # the phi-image part belongs one level down
            down = self.module.psi_D(rest, hi_cap=hi_cap)
            lvl = k - 1
            while lvl > 0 and not down.is_certified_zero:
                killed = down - self.module.phi_D(self.module.psi_D(down, hi_cap=hi_cap),
                                                  hi_cap=hi_cap)
                if not killed.is_certified_zero:
                    tails[lvl] = tails[lvl] + killed if lvl in tails else killed
                down = self.module.psi_D(down, hi_cap=hi_cap)
                lvl -= 1
            if lvl == 0:
                head = head + down
        return InducedElem(self.module, head, tails)

    def phi(self, hi_cap=None):
        """Action of s: depths shift down, the freed depth-1 tail joins the head."""
        head = self.module.phi_D(self.head, hi_cap=hi_cap)
        tails = {}
        for k, y in self.tails.items():
            if k == 1:
                head = head + y
            else:
                tails[k - 1] = y
        return InducedElem(self.module, head, tails)

    def psi(self, hi_cap=None):
        """Action of s^(-1): depths shift up, the head splits canonically."""
        tails = {k + 1: y for k, y in self.tails.items()}
        new_head = self.module.psi_D(self.head, hi_cap=hi_cap)
        killed = self.head - self.module.phi_D(new_head, hi_cap=hi_cap)
        if not killed.is_certified_zero:
            tails[1] = tails[1] + killed if 1 in tails else killed
        return InducedElem(self.module, new_head, tails)

    def act_n(self, u, hi_cap=None, max_depth=24):
        """Action of u(y) for y in Q_p: at depth m, multiply by (1+X)^(p^m y)."""
        y = Fraction(u)
        if y == 0:
            return self
        p = self.module.p
        need = max(self.depth, -min(0, int(frac_val(y, p))))
        if need > max_depth:
            raise DepthExceeded(f"depth {need} exceeds the budget {max_depth}")
        value = self.value_at(need, hi_cap=hi_cap)
        exponent = y * p ** need
        if exponent.denominator == 1 and 0 <= exponent <= 4096:
            tw = onepx_power(p, self.module.n, exponent)
        else:
            cap = hi_cap if hi_cap is not None else self.module.default_cap
            tw = onepx_power(p, self.module.n, exponent, hi_cap=cap)
        return InducedElem.from_depth_value(self.module, need, value.scale(tw),
                                            hi_cap=hi_cap)

    def res(self, u, hi_cap=None, max_depth=24):
        """Restriction to a compact open subset of Q_p ~ N (the N-model).

        Cosets a + p^j Z_p with j possibly negative are handled by shifting
        to a depth where they become cosets inside Z_p.
        """
        if isinstance(u, CompactOpen):
            cosets = [(Fraction(r), k) for r, k in u.cosets]
        else:
            cosets = [(Fraction(r), k) for r, k in u]
        out = InducedElem(self.module, self.module.zero_elem())
        p = self.module.p
        for r, j in cosets:
            shift = max(self.depth, max(0, -j),
                        max(0, -int(frac_val(r, p)) if r != 0 else 0))
            if shift > max_depth:
                raise DepthExceeded(f"depth {shift} exceeds the budget {max_depth}")
            # at depth `shift` the coset becomes p^shift(r + p^j Z_p) in Z_p
            value = self.value_at(shift, hi_cap=hi_cap)
            r_shifted = frac_residue(r * p ** shift, p, p ** (j + shift)) \
                if j + shift > 0 else 0
            proj = res_proj(self.module, [(r_shifted, j + shift)], value,
                            hi_cap=hi_cap)
            out = out + InducedElem.from_depth_value(self.module, shift, proj,
                                                     hi_cap=hi_cap)
        return out


def induced_ops(e, op, arg=None, hi_cap=None):
    """Dispatch mirroring the operation table of the induced module."""
    if op == "sigma0":
        return InducedElem.sigma0(e, arg)  # here e is the module
    if op == "ev0":
        return e.ev0()
    if op == "phi":
        return e.phi(hi_cap=hi_cap)
    if op == "psi":
        return e.psi(hi_cap=hi_cap)
    if op == "act_n":
        return e.act_n(arg, hi_cap=hi_cap)
    if op == "Res":
        return e.res(arg, hi_cap=hi_cap)
    if op == "canonicalize":
        return e.canonicalize(hi_cap=hi_cap)
    raise DomainError(f"unknown induced op {op!r}")
