"""GL(2, Q_p) cell geometry on the projective line.

Identifies the compact cell C_0 with Z_p via x -> u(x) w_0 P/P and computes,
for g = (a b; c d), the transported point g[x] = (ax+b)/(cx+d), the factor
g'[x] = (ad-bc)/(cx+d)^2 and the membership set

    X_g = { x in Z_p : cx + d != 0, (ax+b)/(cx+d) in Z_p }.

Everything here is exact rational arithmetic; compact open subsets of Z_p are
finite disjoint unions of cosets r + p^k Z_p in canonical form.
"""

from dataclasses import dataclass
from fractions import Fraction

from .errors import (CellRefinementTooDeep, DegenerateCell, DomainError,
                     PointOutsideCells)
from .padics import VAL_INF, frac_residue, frac_val


class GL2Mat:
    """Invertible 2x2 matrix over Q_p with exact rational entries."""

    __slots__ = ("a", "b", "c", "d")

    def __init__(self, a, b, c, d):
        self.a, self.b, self.c, self.d = (Fraction(a), Fraction(b),
                                          Fraction(c), Fraction(d))
        if self.det == 0:
            raise DomainError("matrix is singular")

    @property
    def det(self):
        return self.a * self.d - self.b * self.c

    @classmethod
    def w0(cls):
        return cls(0, 1, 1, 0)

    @classmethod
    def identity(cls):
        return cls(1, 0, 0, 1)

    @classmethod
    def u(cls, x):
        return cls(1, x, 0, 1)

    @classmethod
    def diag(cls, a, d):
        return cls(a, 0, 0, d)

    def __mul__(self, other):
        return GL2Mat(self.a * other.a + self.b * other.c,
                      self.a * other.b + self.b * other.d,
                      self.c * other.a + self.d * other.c,
                      self.c * other.b + self.d * other.d)

    def inv(self):
        det = self.det
        return GL2Mat(self.d / det, -self.b / det, -self.c / det, self.a / det)

    def __eq__(self, other):
        if not isinstance(other, GL2Mat):
            return NotImplemented
        return (self.a, self.b, self.c, self.d) == (other.a, other.b, other.c, other.d)

    def __hash__(self):
        return hash((self.a, self.b, self.c, self.d))

    @property
    def in_P(self):
        return self.c == 0

    def entries(self):
        return (self.a, self.b, self.c, self.d)

    def __repr__(self):
        return f"({self.a} {self.b}; {self.c} {self.d})"


class CellPoint:
    """Point u(r) w_0 P of the compact cell, r in Z_p given exactly."""

    __slots__ = ("r",)

    def __init__(self, r):
        self.r = Fraction(r)

    def __repr__(self):
        return f"CellPoint({self.r})"


@dataclass(frozen=True)
class CellData:
    in_Xg: bool
    g_of_r: Fraction | None
    gprime_of_r: Fraction | None
    denom: Fraction


def cell_data(g, r, p):
    """Transport data of the cell point r under g, exact at every precision."""
    r = r.r if isinstance(r, CellPoint) else Fraction(r)
    if frac_val(r, p) != VAL_INF and frac_val(r, p) < 0:
        raise DomainError("cell points have val >= 0")
    denom = g.c * r + g.d
    if denom == 0:
        return CellData(False, None, None, denom)
    img = (g.a * r + g.b) / denom
    factor = g.det / denom ** 2
    member = frac_val(img, p) >= 0
    return CellData(member, img if member else img, factor, denom)


def in_cell_monoid(g, p):
    """g in N_0 Pbar N_0, i.e. the intersection g^(-1)C_0 ∩ C_0 is nonempty."""
    try:
        first_point(g, p)
        return True
    except DegenerateCell:
        return False


def first_point(g, p, depth=6):
    """Some exact point of X_g (small search; raises DegenerateCell)."""
    for k in range(depth):
        for r in range(p ** k):
            data = cell_data(g, Fraction(r), p)
            if data.in_Xg:
                return Fraction(r)
    raise DegenerateCell(f"no point of X_g found for {g}")


def alpha_matrix(g, x, p):
    """alpha(g, x_u) in P with g u(x) w_0 N = alpha(g,x) u(x) w_0 N.

    The NT-part of g u(x) is u(g[x]) diag(g'[x](cx+d), cx+d), so
    alpha(g, x) = u(g[x]) diag(g'[x](cx+d), cx+d) u(-x).
    """
    data = cell_data(g, x, p)
    if not data.in_Xg:
        raise PointOutsideCells(f"{x} is not in X_g for {g}")
    x = x.r if isinstance(x, CellPoint) else Fraction(x)
    return (GL2Mat.u(data.g_of_r)
            * GL2Mat.diag(data.gprime_of_r * data.denom, data.denom)
            * GL2Mat.u(-x))


def cocycle_check(g, h, x, p):
    """Exact check of alpha(gh, x) = alpha(g, h.x) alpha(h, x).

    Requires x in (gh)^(-1)C ∩ h^(-1)C ∩ C (checked through cell_data).
    """
    x = x.r if isinstance(x, CellPoint) else Fraction(x)
    dh = cell_data(h, x, p)
    dgh = cell_data(g * h, x, p)
    if not (dh.in_Xg and dgh.in_Xg):
        raise PointOutsideCells("point is outside a required cell")
    hx = dh.g_of_r
    dg = cell_data(g, hx, p)
    if not dg.in_Xg:
        raise PointOutsideCells("transported point is outside the g-cell")
    lhs = alpha_matrix(g * h, x, p)
    rhs = alpha_matrix(g, hx, p) * alpha_matrix(h, x, p)
    return lhs == rhs


# ---------------------------------------------------------------------------
# compact opens of Z_p

def _coset_rep(r, k, p):
    """Canonical integer representative of r + p^k Z_p inside [0, p^k)."""
    return frac_residue(r, p, p ** k) if k > 0 else 0


class CompactOpen:
    """Finite disjoint union of cosets r + p^k Z_p inside Z_p, canonical form.

    Canonicalization merges any complete family of p sibling cosets into the
    parent coset, recursively.
    """

    __slots__ = ("p", "cosets")

    def __init__(self, p, cosets):
        norm = {(_coset_rep(r, k, p), k) for r, k in cosets}
        for r, k in norm:
            for r2, k2 in norm:
                if (r, k) != (r2, k2) and k2 <= k and (r - r2) % p ** k2 == 0:
                    raise DomainError(f"cosets {(r, k)} and {(r2, k2)} overlap")
        changed = True
        while changed:
            changed = False
            ks = sorted({k for _, k in norm if k > 0}, reverse=True)
            for k in ks:
                parents = {}
                for r, kk in norm:
                    if kk == k:
                        parents.setdefault(r % p ** (k - 1), set()).add(r)
                for parent, members in parents.items():
                    if len(members) == p:
                        norm -= {(r, k) for r in members}
                        norm.add((parent, k - 1))
                        changed = True
        self.p = p
        self.cosets = tuple(sorted(norm, key=lambda t: (t[1], t[0])))

    @classmethod
    def zp(cls, p):
        return cls(p, [(0, 0)])

    @classmethod
    def empty(cls, p):
        return cls(p, [])

    @classmethod
    def coset(cls, p, r, k):
        return cls(p, [(r, k)])

    @property
    def is_empty(self):
        return not self.cosets

    def contains_point(self, x):
        x = Fraction(x)
        return any(x == r or frac_val(x - r, self.p) >= k for r, k in self.cosets)

    def refine_to(self, k):
        """All cosets written at a common depth >= each stored depth."""
        out = []
        for r, kk in self.cosets:
            if kk > k:
                raise DomainError("cannot coarsen a coset")
            for t in range(self.p ** (k - kk)):
                out.append((r + t * self.p ** kk, k))
        return out

    def union(self, other):
        return CompactOpen(self.p, list(self.cosets) + list(other.cosets))

    def intersect(self, other):
        out = []
        for r1, k1 in self.cosets:
            for r2, k2 in other.cosets:
                k = max(k1, k2)
                if (r1 - r2) % self.p ** min(k1, k2) == 0:
                    out.append((r1 if k1 >= k2 else r2, k))
        return CompactOpen(self.p, out)

    def complement(self):
        out = CompactOpen.zp(self.p)
        for r, k in self.cosets:
            keep = []
            for r2, k2 in out.refine_to(max(k, max((kk for _, kk in out.cosets), default=0))):
                if (r2 - r) % self.p ** k != 0:
                    keep.append((r2, k2))
            out = CompactOpen(self.p, keep)
        return out

    def __eq__(self, other):
        if not isinstance(other, CompactOpen):
            return NotImplemented
        return self.p == other.p and self.cosets == other.cosets

    def __hash__(self):
        return hash((self.p, self.cosets))

    def __repr__(self):
        if self.is_empty:
            return "CompactOpen(empty)"
        return "CompactOpen(" + " ∪ ".join(f"{r}+p^{k}Zp" for r, k in self.cosets) + ")"


def xg_coset_analysis(g, r, k, p):
    """Decide membership of the coset r + p^k Z_p in X_g.

    Returns 'in', 'out' or 'split'.  Membership is decided when val(cx+d)
    is constant on the coset and the valuation comparison with ax+b is
    uniform; otherwise the coset must be refined.
    """
    a, b, c, d = g.entries()
    num0 = a * r + b
    den0 = c * r + d
    vden_floor = (frac_val(c, p) + k) if c != 0 else VAL_INF
    vnum_floor = (frac_val(a, p) + k) if a != 0 else VAL_INF
    vden = frac_val(den0, p)
    vnum = frac_val(num0, p)
    den_const = vden < vden_floor
    num_const = vnum < vnum_floor
    if not den_const:
        # val(cx+d) >= vden_floor on the whole coset; if the numerator is
        # uniformly smaller the quotient leaves Z_p everywhere
        if num_const and vnum < vden_floor:
            return "out"
        return "split"
    if num_const:
        return "in" if vnum >= vden else "out"
    # numerator valuation varies but is >= vnum_floor everywhere
    if vnum_floor >= vden:
        return "in"
    return "split"


def xg_cosets(g, p, depth_budget=24, start_depth=0):
    """X_g as a CompactOpen, by coset refinement with a depth budget."""
    stack = [(r, start_depth) for r in range(p ** start_depth)] or [(0, 0)]
    result = []
    while stack:
        r, k = stack.pop()
        if k > depth_budget:
            raise CellRefinementTooDeep(f"X_g refinement needs depth > {depth_budget}")
        status = xg_coset_analysis(g, Fraction(r), k, p)
        if status == "in":
            result.append((r, k))
        elif status == "split":
            stack.extend((r + t * p ** k, k + 1) for t in range(p))
    return CompactOpen(p, result)


def image_ball(g, r, k, p):
    """g[r + p^k Z_p] as a ball, valid when val(cx+d) is constant on the coset.

    With gamma = val(cr+d): g[x] - g[r] = (x-r) det / ((cx+d)(cr+d)), so the
    image is exactly g[r] + p^(k + val(det) - 2 gamma) Z_p.
    """
    data = cell_data(g, Fraction(r), p)
    if data.denom == 0:
        raise DomainError("denominator vanishes at the coset center")
    gamma = frac_val(data.denom, p)
    j = k + int(frac_val(g.det, p)) - 2 * int(gamma)
    return data.g_of_r, j


def preimage_in_cell(g, v, p, depth_budget=24):
    """g^(-1) V ∩ C_0 as a CompactOpen: the x in X_g with g[x] in V."""
    stack = [(0, 0)]
    result = []
    while stack:
        r, k = stack.pop()
        if k > depth_budget:
            raise CellRefinementTooDeep(f"preimage refinement needs depth > {depth_budget}")
        status = xg_coset_analysis(g, Fraction(r), k, p)
        if status == "out":
            continue
        if status == "split":
            stack.extend((r + t * p ** k, k + 1) for t in range(p))
            continue
        center, j = image_ball(g, r, k, p)
        if j < 0:
            # image ball leaves Z_p scale; refine until it fits inside balls of V
            stack.extend((r + t * p ** k, k + 1) for t in range(p))
            continue
        ball = CompactOpen.coset(p, frac_residue(center, p, p ** j) if j > 0 else 0, j)
        inter = ball.intersect(v)
        if inter.is_empty:
            continue
        if inter == ball:
            result.append((r, k))
        else:
            stack.extend((r + t * p ** k, k + 1) for t in range(p))
    return CompactOpen(p, result)


def k_min_depth(g, p, depth_budget=24):
    """Smallest k with t(g,r) s^k dominant for all r in X_g.

    t(g,r) s_p^k = diag(g'[r] p^k (cr+d), (cr+d)) is dominant iff
    val(g'[r]) + k >= 0, so k = max(0, -min val(g'[r])) over X_g, computed on
    a coset decomposition on which val(cr+d) is constant.
    """
    cosets = xg_cosets(g, p, depth_budget=depth_budget)
    if cosets.is_empty:
        raise DegenerateCell(f"X_g is empty for {g}")
    worst = 0
    for r, k in cosets.cosets:
        # val(g'[x]) = val(det) - 2 val(cx+d); the analysis guarantees the
        # denominator valuation is constant on each coset unless c = 0
        if g.c == 0:
            vden = frac_val(g.d, p)
        else:
            vden = frac_val(g.c * r + g.d, p)
        v = frac_val(g.det, p) - 2 * vden
        worst = min(worst, int(v))
    return -worst
