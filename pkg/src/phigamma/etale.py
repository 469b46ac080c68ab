"""Finite-rank etale modules over O_E with semilinear L_+-action.

A module of rank d is described in a fixed basis by the matrix of phi for
s = diag(p, 1) (semilinear convention: phi_D(v) = mat_phi * phi_p(v) applied
entrywise), the matrices of a topological generator of 1 + pZ_p (fixed to
1 + p) and of the torsion generator of Z_p^* (the Teichmuller lift of the
smallest primitive root), and a central character.

psi_D is entrywise psi composed with mat_phi^(-1); arbitrary unit actions
are assembled from the generator matrices via discrete logarithms, with an
explicit gamma^(p^K) ~ id stabilization check.
"""

import random
from fractions import Fraction

from .errors import (CharacterUndefined, DomainError, NotAUnit, NotDominant,
                     StabilizationFailure)
from .padics import (PAdicNum, UnitChar, char_eval, frac_residue, frac_val,
                     smallest_primitive_root, teichmuller, torsion_dlog,
                     principal_dlog)
from .series import (INF, OESeries, ball_index, in_ball, oe_inv, onepx_power,
                     phi_subst, psi_components)


# ---------------------------------------------------------------------------
# matrix helpers (entries are OESeries; ranks are small, Laplace is fine)

_TOR_PARAM_CACHE = {}


def mat_identity(p, n, d):
    one, zero = OESeries.one(p, n), OESeries.zero(p, n)
    return tuple(tuple(one if i == j else zero for j in range(d)) for i in range(d))

def mat_mul(a, b):
    d = len(a)
    return tuple(tuple(sum((a[i][k] * b[k][j] for k in range(d)),
                           OESeries.zero(a[0][0].p, a[0][0].n)) for j in range(d))
                 for i in range(d))

def mat_vec(a, v):
    d = len(a)
    return tuple(sum((a[i][k] * v[k] for k in range(d)),
                     OESeries.zero(a[0][0].p, a[0][0].n)) for i in range(d))

def mat_subst(param, a, hi_cap=None):
    return tuple(tuple(phi_subst(param, e, hi_cap=hi_cap) for e in row) for row in a)

def mat_scale(a, c):
    return tuple(tuple(e.scale(c) for e in row) for row in a)

def mat_det(a):
    d = len(a)
    if d == 1:
        return a[0][0]
    if d == 2:
        return a[0][0] * a[1][1] - a[0][1] * a[1][0]
    out = OESeries.zero(a[0][0].p, a[0][0].n)
    for j in range(d):
        minor = tuple(row[:j] + row[j + 1:] for row in a[1:])
        term = a[0][j] * mat_det(minor)
        out = out + (term if j % 2 == 0 else -term)
    return out

def mat_adjugate(a):
    d = len(a)
    if d == 1:
        return ((OESeries.one(a[0][0].p, a[0][0].n),),)
    cof = [[None] * d for _ in range(d)]
    for i in range(d):
        for j in range(d):
            minor = tuple(tuple(row[jj] for jj in range(d) if jj != j)
                          for ii, row in enumerate(a) if ii != i)
            m = mat_det(minor)
            cof[i][j] = m if (i + j) % 2 == 0 else -m
    return tuple(tuple(cof[j][i] for j in range(d)) for i in range(d))

def mat_agrees(a, b):
    return all(x.agrees(y) for row_a, row_b in zip(a, b) for x, y in zip(row_a, row_b))


class ModElem:
    """Vector over O_E attached to its parent module."""

    __slots__ = ("module", "coords")

    def __init__(self, module, coords):
        if len(coords) != module.rank:
            raise DomainError("coordinate count does not match module rank")
        self.module = module
        self.coords = tuple(coords)

    def __add__(self, other):
        return ModElem(self.module, tuple(a + b for a, b in zip(self.coords, other.coords)))

    def __sub__(self, other):
        return ModElem(self.module, tuple(a - b for a, b in zip(self.coords, other.coords)))

    def __neg__(self):
        return ModElem(self.module, tuple(-a for a in self.coords))

    def scale(self, c):
        if isinstance(c, OESeries):
            return ModElem(self.module, tuple(a * c for a in self.coords))
        return ModElem(self.module, tuple(a.scale(c) for a in self.coords))

    def truncate(self, hi):
        return ModElem(self.module, tuple(a.truncate(hi) for a in self.coords))

    def agrees(self, other, span=None):
        return all(a.agrees(b, span=span) for a, b in zip(self.coords, other.coords))

    def in_ball(self, k, m=None):
        return all(in_ball(c, k, m) for c in self.coords)

    def ball_index(self, m=None):
        return min(ball_index(c, m) for c in self.coords)

    def window_hi(self):
        return min(c.hi for c in self.coords)

    @property
    def is_certified_zero(self):
        return all(c.is_certified_zero for c in self.coords)

    def __repr__(self):
        return "ModElem(" + "; ".join(repr(c.terms) for c in self.coords) + ")"


class SemilinOp:
    """Composable semilinear operator (matrix, substitution exponent)."""

    __slots__ = ("mat", "param")

    def __init__(self, mat, param):
        self.mat = mat
        self.param = Fraction(param)

    def apply(self, m, hi_cap=None):
        coords = tuple(phi_subst(self.param, c, hi_cap=hi_cap) for c in m.coords)
        return ModElem(m.module, mat_vec(self.mat, coords))

    def compose(self, other, hi_cap=None):
        """self after other."""
        mat = mat_mul(self.mat, mat_subst(self.param, other.mat, hi_cap=hi_cap))
        return SemilinOp(mat, self.param * other.param)


class EtaleModule:
    """Rank-d etale phi-module over O_E with Gamma-action and central character."""

    def __init__(self, p, n, mat_phi, mat_gamma_top=None, mat_gamma_tor=None,
                 omega=None, window=(-24, 24), truncation=12, name="", comment=""):
        self.p = p
        self.n = n
        self.rank = len(mat_phi)
        self.mat_phi = tuple(tuple(row) for row in mat_phi)
        # Gamma data is optional: without it the module is a plain phi-module
        self.mat_gamma_top = mat_gamma_top
        self.mat_gamma_tor = mat_gamma_tor
        self.omega = omega
        self.window = tuple(window)
        self.truncation = truncation
        self.name = name
        self.comment = comment
        self.k_max = 2 * n
        self._inv_cache = {}
        self._gamma_chain_cache = {}
        self._gamma_unit_cache = {}

    # -- basic elements ----------------------------------------------------
    def elem(self, coords):
        return ModElem(self, tuple(coords))

    def zero_elem(self):
        return self.elem([OESeries.zero(self.p, self.n)] * self.rank)

    def basis_elem(self, i, series=None):
        coords = [OESeries.zero(self.p, self.n)] * self.rank
        coords[i] = series if series is not None else OESeries.one(self.p, self.n)
        return self.elem(coords)

    @property
    def default_cap(self):
        return self.window[1]

    @property
    def has_gamma(self):
        return self.mat_gamma_top is not None and self.mat_gamma_tor is not None

    def _require_gamma(self):
        if not self.has_gamma:
            raise DomainError("module carries no Gamma data")

    def omega_or_trivial(self):
        return self.omega if self.omega is not None else UnitChar.trivial(self.p, self.n)

    # -- the semilinear operators ------------------------------------------
    def phi_op(self):
        return SemilinOp(self.mat_phi, self.p)

    def phi_D(self, m, hi_cap=None):
        return self.phi_op().apply(m, hi_cap=hi_cap)

    def mat_phi_inv(self, hi_cap):
        key = hi_cap
        if key not in self._inv_cache:
            det = mat_det(self.mat_phi)
            if det.unit_val() is None:
                raise NotAUnit("mat_phi determinant is not a unit of O_E")
            det_inv = oe_inv(det, hi_cap=hi_cap)
            adj = mat_adjugate(self.mat_phi)
            self._inv_cache[key] = tuple(tuple(e * det_inv for e in row) for row in adj)
        return self._inv_cache[key]

    def components_D(self, m, hi_cap=None, out_cap=None):
        """The p components of m = sum_i (1+X)^i phi_D(v_i)."""
        cap = hi_cap if hi_cap is not None else self.default_cap
        w = mat_vec(self.mat_phi_inv(cap), m.coords)
        per_coord = [psi_components(c, out_cap=out_cap) for c in w]
        return [ModElem(self, tuple(per_coord[j][i] for j in range(self.rank)))
                for i in range(self.p)]

    def psi_D(self, m, hi_cap=None):
        return self.components_D(m, hi_cap=hi_cap)[0]

    # -- Gamma action --------------------------------------------------------
    def _tor_param(self, hi_cap):
        width = 64 if hi_cap is None or hi_cap == INF else max(int(hi_cap), 1)
        digits = self.n + width // (self.p - 1) + 2
        key = (self.p, digits)
        if key not in _TOR_PARAM_CACHE:
            g0 = smallest_primitive_root(self.p)
            _TOR_PARAM_CACHE[key] = teichmuller(g0, self.p, digits)
        return _TOR_PARAM_CACHE[key]

    def gamma_tor_op(self, hi_cap=None):
        self._require_gamma()
        return SemilinOp(self.mat_gamma_tor, self._tor_param(hi_cap))

    def gamma_top_chain(self, K, hi_cap=None):
        """Operators for gamma_1^(p^j), j = 0..K, with gamma_1 = 1 + p."""
        self._require_gamma()
        cap = hi_cap if hi_cap is not None else self.default_cap
        key = (K, cap)
        if key not in self._gamma_chain_cache:
            chain = [SemilinOp(self.mat_gamma_top, 1 + self.p)]
            while len(chain) <= K:
                op = chain[-1]
                acc = op
                for _ in range(self.p - 1):
                    acc = acc.compose(op, hi_cap=cap)
                chain.append(acc)
            self._gamma_chain_cache[key] = chain
        return self._gamma_chain_cache[key]

    def _op_is_identity(self, op, hi_cap):
        """Certified check that a semilinear operator acts as the identity."""
        x = OESeries(self.p, self.n, {1: 1})
        sub = phi_subst(op.param, x, hi_cap=hi_cap)
        if not sub.agrees(x):
            return False
        ident = mat_identity(self.p, self.n, self.rank)
        return mat_agrees(op.mat, ident)

    def k_needed(self, hi_cap):
        """Digits K with gamma_1^(p^K) ~ id on the window [*, hi_cap).

        The substitution exponent is 1 + p^(K+1) unit, whose binomials are
        0 mod p^n below X^(p^(K+2-n)); K defaults to at least 2n.
        """
        K = self.k_max
        width = self.default_cap if hi_cap is None else max(int(hi_cap), 1)
        while self.p ** (K + 2 - self.n) < 2 * width:
            K += 1
        return K

    def check_gamma_stabilization(self, K=None, hi_cap=None):
        K = self.k_max if K is None else K
        cap = hi_cap if hi_cap is not None else self.default_cap
        chain = self.gamma_top_chain(K, hi_cap=cap)
        if not self._op_is_identity(chain[K], cap):
            raise StabilizationFailure(
                f"gamma_1^(p^{K}) does not act as the identity within precision")

    def gamma_unit_op(self, e, hi_cap=None):
        """Operator for the unit e in Z_p^* given exactly as a rational.

        The truncation at K principal digits is sound because the discarded
        factor is a Z_p-power of gamma_1^(p^K), which the stabilization check
        certifies to act as the identity at this precision.  The operator
        depends on e only through its torsion discrete log and its principal
        discrete log mod p^K, which keys the cache.
        """
        e = Fraction(e)
        p = self.p
        if frac_val(e, p) != 0:
            raise DomainError("gamma_unit_op needs a unit")
        cap = hi_cap if hi_cap is not None else self.default_cap
        K = self.k_needed(cap)
        q = p ** (K + 1)
        e_res = frac_residue(e, p, q)
        i = torsion_dlog(e_res % p, p)
        tau = teichmuller(e_res, p, K + 1)
        z = principal_dlog(e_res * pow(tau, -1, q) % q, 1 + p, p, K)
        key = (i, z, cap)
        if key in self._gamma_unit_cache:
            return self._gamma_unit_cache[key]
        self.check_gamma_stabilization(K, hi_cap=cap)
        op = SemilinOp(mat_identity(p, self.n, self.rank), 1)
        tor = self.gamma_tor_op(hi_cap=cap)
        for _ in range(i):
            op = op.compose(tor, hi_cap=cap)
        chain = self.gamma_top_chain(K, hi_cap=cap)
        for j in range(K):
            digit = (z // p ** j) % p
            for _ in range(digit):
                op = op.compose(chain[j], hi_cap=cap)
        self._gamma_unit_cache[key] = op
        return op

    def gamma_apply(self, e, m, hi_cap=None):
        return self.gamma_unit_op(e, hi_cap=hi_cap).apply(m, hi_cap=hi_cap)

    # -- monoid action -------------------------------------------------------
    def act(self, t, m, hi_cap=None):
        """Action of diag(a, b) with a/b in Z_p; the center acts through omega."""
        a, b = t
        a, b = Fraction(a), Fraction(b)
        if a == 0 or b == 0:
            raise DomainError("torus entries must be nonzero")
        c = a / b
        v = frac_val(c, self.p)
        if v < 0:
            raise NotDominant(f"diag({a},{b}) is not dominant")
        v = int(v)
        out = m
        e = c / Fraction(self.p) ** v
        if e != 1:
            out = self.gamma_apply(e, out, hi_cap=hi_cap)
        for _ in range(v):
            out = self.phi_D(out, hi_cap=hi_cap)
        if b != 1:
            if self.omega is None:
                raise CharacterUndefined("central character required for diag(a,b) with b != 1")
            out = out.scale(char_eval(self.omega, b))
        return out

    # -- validation ----------------------------------------------------------
    def check_etale(self, hi_cap=None):
        """Determinant of mat_phi a unit plus commutation within precision."""
        cap = hi_cap if hi_cap is not None else self.default_cap
        det = mat_det(self.mat_phi)
        if det.unit_val() is None:
            return False
        if not self.has_gamma:
            return True
        for gmat, param in ((self.mat_gamma_top, Fraction(1 + self.p)),
                            (self.mat_gamma_tor, Fraction(self._tor_param(cap)))):
            lhs = mat_mul(gmat, mat_subst(param, self.mat_phi, hi_cap=cap))
            rhs = mat_mul(self.mat_phi, mat_subst(self.p, gmat, hi_cap=cap))
            if not mat_agrees(lhs, rhs):
                return False
        # the two gamma generators commute
        lhs = mat_mul(self.mat_gamma_top,
                      mat_subst(1 + self.p, self.mat_gamma_tor, hi_cap=cap))
        rhs = mat_mul(self.mat_gamma_tor,
                      mat_subst(Fraction(self._tor_param(cap)), self.mat_gamma_top, hi_cap=cap))
        if not mat_agrees(lhs, rhs):
            return False
        # torsion matrix has order dividing p - 1 within precision
        tor = self.gamma_tor_op(hi_cap=cap)
        acc = tor
        for _ in range(self.p - 2):
            acc = acc.compose(tor, hi_cap=cap)
        return self._op_is_identity(acc, cap)


def act(module, t, m, hi_cap=None):
    return module.act(t, m, hi_cap=hi_cap)


# ---------------------------------------------------------------------------
# random etale modules (etale by construction: conjugates of split modules)

def random_module(p, n, rank, rng=None, with_omega=True, window=(-24, 24),
                  truncation=12, name="", gamma_cap=None):
    """Conjugate a split module diag(units) by U = (I + X N_up)(I + X N_low).

    U has polynomial inverse because the N's are strictly triangular, so all
    three action matrices come out as exact Laurent polynomials (the torsion
    one is window-capped) and the module is etale by construction.

    ``gamma_cap`` sets the certified window of the torsion matrix entries;
    operator compositions H_g H_h read intermediate values on windows growing
    like p^depth, so modules destined for such checks need a generous cap.
    """
    rng = rng or random.Random(0)
    q = p ** n
    units = [rng.choice([u for u in range(1, q) if u % p]) for _ in range(rank)]
    density = 1.0 if rank <= 2 else 0.5
    n_up = [[rng.randrange(0, p) if j > i and rng.random() < density else 0
             for j in range(rank)] for i in range(rank)]
    n_low = [[rng.randrange(0, p) if j < i and rng.random() < density else 0
              for j in range(rank)] for i in range(rank)]

    def poly_mat(entries):
        return tuple(tuple(OESeries(p, n, {1: entries[i][j]} if entries[i][j] else {})
                           for j in range(rank)) for i in range(rank))

    ident = mat_identity(p, n, rank)
    xu = poly_mat(n_up)
    xl = poly_mat(n_low)
    u1 = tuple(tuple(ident[i][j] + xu[i][j] for j in range(rank)) for i in range(rank))
    u2 = tuple(tuple(ident[i][j] + xl[i][j] for j in range(rank)) for i in range(rank))
    u_mat = mat_mul(u1, u2)

    def nilpotent_inverse(base, nil):
        # (I + nil)^(-1) = sum (-nil)^k, finite since nil is strictly triangular
        acc = mat_identity(p, n, rank)
        pw = mat_identity(p, n, rank)
        for _ in range(rank - 1):
            pw = mat_mul(pw, tuple(tuple(-e for e in row) for row in nil))
            acc = tuple(tuple(acc[i][j] + pw[i][j] for j in range(rank)) for i in range(rank))
        return acc

    u1_inv = nilpotent_inverse(u1, xu)
    u2_inv = nilpotent_inverse(u2, xl)
    u_inv = mat_mul(u2_inv, u1_inv)

    a0 = tuple(tuple(OESeries.const(p, n, units[i]) if i == j else OESeries.zero(p, n)
                     for j in range(rank)) for i in range(rank))

    cap = gamma_cap if gamma_cap is not None else 2 * window[1] + 16
    mat_phi = mat_mul(u_inv, mat_mul(a0, mat_subst(p, u_mat)))
    mat_gamma_top = mat_mul(u_inv, mat_subst(1 + p, u_mat))
    tor_digits = n + cap // (p - 1) + 2
    tau = teichmuller(smallest_primitive_root(p), p, tor_digits)
    mat_gamma_tor = mat_mul(u_inv, mat_subst(tau, u_mat, hi_cap=cap))

    omega = None
    if with_omega:
        vp = rng.choice([u for u in range(1, q) if u % p])
        j = rng.randrange(0, p ** (n - 1))
        tor_val = teichmuller(smallest_primitive_root(p), p, n) if rng.random() < 0.5 else 1
        omega = UnitChar(p, n, value_at_p=vp, exponent_j=j, torsion_value=tor_val)

    return EtaleModule(p, n, mat_phi, mat_gamma_top, mat_gamma_tor, omega=omega,
                       window=window, truncation=truncation, name=name)


def trivial_module(p, n, omega=None, window=(-24, 24), truncation=12):
    """Rank-1 module with mat_phi = (1) and trivial Gamma matrices."""
    ident = mat_identity(p, n, 1)
    return EtaleModule(p, n, ident, mat_gamma_top=ident, mat_gamma_tor=ident,
                       omega=omega, window=window, truncation=truncation,
                       name="trivial")


def random_elem(module, rng, nterms=3, lo=-4, hi=6):
    coords = []
    for _ in range(module.rank):
        terms = {rng.randrange(lo, hi): rng.randrange(1, module.p ** module.n)
                 for _ in range(nterms)}
        coords.append(OESeries(module.p, module.n, terms))
    return module.elem(coords)
