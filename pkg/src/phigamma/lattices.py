"""Lattices over the Iwasawa algebra at finite truncation, and the treillis
operators D+, D++, D-natural, D-sharp.

A lattice is presented by generators inside X^(-r) D0 and worked with in the
finite quotient X^(-r) D0 / X^M D0, i.e. as a Z/p^n-submodule of a
finite-dimensional coordinate space that is closed under multiplication by X.
The canonical normal form is a Howell basis over the chain ring Z/p^n with
pivots ordered by (coordinate, X-degree), so two lattices are equal iff their
normal forms coincide.

D++ (orbit tends to 0) and D+ (orbit bounded) are obtained as stabilized
kernel/safety chains of the truncated linearization of phi_D; at finite
precision mod p^n boundedness and eventual periodicity of orbits coincide,
and the adaptive range r is enlarged until the answer stops moving.
"""

from .errors import (BudgetExceeded, DomainError, NoStabilization,
                     RangeTooSmall, TruncationMismatch)
from .padics import int_val
from .series import OESeries, onepx_power
from .etale import ModElem


# ---------------------------------------------------------------------------
# Howell normal form and kernels over Z/p^n

def howell_form(rows, p, n):
    """Canonical Howell basis of the row span over Z/p^n."""
    q = p ** n
    work = [list(x % q for x in r) for r in rows]
    work = [r for r in work if any(r)]
    if not work:
        return ()
    ncols = len(work[0])
    result = []
    for col in range(ncols):
        best, best_v = None, n
        for i, r in enumerate(work):
            if r[col]:
                v = int_val(r[col], p)
                if v < best_v:
                    best, best_v = i, v
        if best is None:
            continue
        piv = work.pop(best)
        v = best_v
        u = piv[col] // p ** v
        u_inv = pow(u, -1, q)
        piv = [x * u_inv % q for x in piv]
        for rows_list in (work, result):
            for r in rows_list:
                if r[col]:
                    c = r[col] // p ** v
                    if c:
                        for j in range(col, ncols):
                            r[j] = (r[j] - c * piv[j]) % q
        if v > 0:
            extra = [x * p ** (n - v) % q for x in piv]
            if any(extra):
                work.append(extra)
        work = [r for r in work if any(r)]
        result.append(piv)
    return tuple(tuple(r) for r in result)


def _pivot(row, p, n):
    for j, x in enumerate(row):
        if x:
            return j, int_val(x, p)
    return None, None


def reduce_against(rows_nf, vec, p, n):
    """Reduce a vector against a Howell basis; zero remainder iff member."""
    q = p ** n
    v = [x % q for x in vec]
    for row in rows_nf:
        j, e = _pivot(row, p, n)
        if j is None:
            continue
        if v[j]:
            if int_val(v[j], p) < e:
                return v
            c = v[j] // p ** e
            for k in range(j, len(v)):
                v[k] = (v[k] - c * row[k]) % q
    return v


def span_member(rows_nf, vec, p, n):
    return not any(reduce_against(rows_nf, vec, p, n))


def kernel(a_rows, ncols, p, n):
    """Generators of {x : A x = 0} over Z/p^n via Howell of [A^T | I]."""
    m = len(a_rows)
    big = []
    for j in range(ncols):
        big.append([a_rows[i][j] for i in range(m)] + [1 if k == j else 0 for k in range(ncols)])
    h = howell_form(big, p, n)
    return [row[m:] for row in h if not any(row[:m])]


# ---------------------------------------------------------------------------
# lattices

class Lattice:
    """Lambda-submodule of X^(-r) D0 at truncation M, in Howell normal form."""

    __slots__ = ("module", "r", "M", "rows")

    def __init__(self, module, r, M, rows):
        self.module = module
        self.r = r
        self.M = M
        self.rows = rows

    # flattened index of coordinate i, exponent e
    def _idx(self, i, e):
        return i * (self.M + self.r) + (e + self.r)

    @property
    def dim(self):
        return self.module.rank * (self.M + self.r)

    @classmethod
    def from_elems(cls, module, elems, r, M):
        """Lambda-span of the given elements (X-shifts added automatically)."""
        width = M + r
        rows = []
        for m in elems:
            flat = _flatten(module, m, r, M)
            for t in range(width):
                shifted = [0] * (module.rank * width)
                for i in range(module.rank):
                    for e in range(width - t):
                        shifted[i * width + e + t] = flat[i * width + e]
                rows.append(shifted)
        return cls(module, r, M, howell_form(rows, module.p, module.n))

    @classmethod
    def standard(cls, module, r, M, shift=0):
        """The lattice X^shift * (X^(-r) D0), clipped to the window."""
        gens = [module.basis_elem(i, OESeries.x_power(module.p, module.n, -r + shift))
                for i in range(module.rank)]
        return cls.from_elems(module, gens, r, M)

    def elems(self):
        width = self.M + self.r
        out = []
        for row in self.rows:
            coords = []
            for i in range(self.module.rank):
                terms = {e - self.r: row[i * width + (e)] for e in range(width)
                         if row[i * width + e]}
                coords.append(OESeries(self.module.p, self.module.n, terms))
            out.append(self.module.elem(coords))
        return out

    def _check_same_frame(self, other):
        if (self.module is not other.module or self.M != other.M):
            raise TruncationMismatch("lattices live at different truncations")

    def in_frame(self, r_new):
        """Re-embed into the larger region X^(-r_new) D0."""
        if r_new == self.r:
            return self
        if r_new < self.r:
            raise DomainError("cannot shrink the lattice frame")
        return Lattice.from_elems(self.module, self.elems(), r_new, self.M)

    def member(self, m):
        flat = _flatten(self.module, m, self.r, self.M)
        return span_member(self.rows, flat, self.module.p, self.module.n)

    def __add__(self, other):
        self._check_same_frame(other)
        r = max(self.r, other.r)
        a, b = self.in_frame(r), other.in_frame(r)
        return Lattice(self.module, r, self.M,
                       howell_form(list(a.rows) + list(b.rows), self.module.p, self.module.n))

    def contains(self, other):
        self._check_same_frame(other)
        r = max(self.r, other.r)
        a, b = self.in_frame(r), other.in_frame(r)
        return all(span_member(a.rows, row, self.module.p, self.module.n) for row in b.rows)

    def __eq__(self, other):
        if not isinstance(other, Lattice):
            return NotImplemented
        self._check_same_frame(other)
        r = max(self.r, other.r)
        return self.in_frame(r).rows == other.in_frame(r).rows

    def __hash__(self):
        return hash((id(self.module), self.r, self.M, self.rows))

    def shift(self, k):
        """The lattice X^k * L (k may be negative, enlarging the frame)."""
        gens = [m.scale(OESeries.x_power(self.module.p, self.module.n, k))
                for m in self.elems()]
        return Lattice.from_elems(self.module, gens, max(self.r - k, 0), self.M)

    def __repr__(self):
        return f"Lattice(rank={self.module.rank}, r={self.r}, M={self.M}, gens={len(self.rows)})"


def _flatten(module, m, r, M):
    width = M + r
    flat = [0] * (module.rank * width)
    for i, c in enumerate(m.coords):
        if c.hi < M:
            raise TruncationMismatch(
                f"coordinate window ends at {c.hi} < truncation {M}")
        for e, coeff in c.terms.items():
            if e < -r:
                raise DomainError(f"element leaves X^(-{r}) D0 (exponent {e})")
            if e < M:
                flat[i * width + (e + r)] = coeff
    return flat


def lattice_ops(l1, l2, op, elem=None):
    """Dispatch used by the CLI layer."""
    if op == "member":
        return l1.member(elem)
    if op == "sum":
        return l1 + l2
    if op == "equal":
        return l1 == l2
    if op == "contains":
        return l1.contains(l2)
    raise DomainError(f"unknown lattice op {op!r}")


# ---------------------------------------------------------------------------
# treillis computations

def _phi_images(module, r_in, M, cap):
    """phi_D on the monomial basis of X^(-r_in) D0 / X^M D0, plus the frame
    X^(-bot) that accommodates every image."""
    d = module.rank
    images = []
    min_e = 0
    for i in range(d):
        for e in range(-r_in, M):
            img = module.phi_D(module.basis_elem(i, OESeries.x_power(module.p, module.n, e)),
                               hi_cap=cap)
            images.append(img)
            for c in img.coords:
                if c.terms:
                    min_e = min(min_e, c.lo)
    bot = max(r_in, -min_e)
    return images, bot


def _phi_matrix(module, r_in, M, cap):
    images, bot = _phi_images(module, r_in, M, cap)
    width_out = M + bot
    rows_out = module.rank * width_out
    cols = len(images)
    mat = [[0] * cols for _ in range(rows_out)]
    for col, img in enumerate(images):
        flat = _flatten(module, img, bot, M)
        for rix in range(rows_out):
            mat[rix][col] = flat[rix]
    return mat, bot


def _embed_rows(rows, module, r_small, bot, M):
    """Embed normal-form rows from frame r_small into frame bot."""
    w_in, w_out = M + r_small, M + bot
    out = []
    for row in rows:
        big = [0] * (module.rank * w_out)
        for i in range(module.rank):
            for e in range(w_in):
                big[i * w_out + e + (bot - r_small)] = row[i * w_in + e]
        out.append(big)
    return out


def _stable_subspace(module, r, M, cap, mode):
    """Iterate the truncated linearization of phi_D.

    plusplus: increasing kernel chain S <- {x : phi(x) in span S}, S0 = 0.
    plus:     decreasing safety chain B <- {x : phi(x) in span B}, B0 = all.
    """
    p, n = module.p, module.n
    phi_mat, bot = _phi_matrix(module, r, M, cap)
    dim_in = module.rank * (M + r)
    if mode == "plusplus":
        span_rows = ()
    else:
        span_rows = howell_form(_embed_rows(
            [[1 if k == j else 0 for k in range(dim_in)] for j in range(dim_in)],
            module, r, bot, M), p, n)
    prev = None
    for _ in range(n * dim_in + 4):
        # solve phi(x) = combination of span rows:  [phi | span^T] (x, lam) = 0
        srows = list(span_rows)
        ncols = dim_in + len(srows)
        stacked = [phi_row[:] for phi_row in phi_mat]
        for i, srow in enumerate(srows):
            for rix in range(len(stacked)):
                stacked[rix].append((-srow[rix]) % p ** n)
        ker = kernel(stacked, ncols, p, n)
        xs = [k[:dim_in] for k in ker]
        new = howell_form(xs, p, n)
        if new == prev:
            break
        prev = new
        span_rows = howell_form(_embed_rows(list(new), module, r, bot, M), p, n)
    else:
        raise NoStabilization("orbit chain did not stabilize", history=[prev])
    return Lattice(module, r, M, prev)


def treillis_pp(module, mode, M=None, r=None, cap=None):
    """D+ (mode 'plus') or D++ (mode 'plusplus') as a lattice in normal form.

    The range r is enlarged adaptively; if two enlargements still change the
    answer the computation is rejected rather than silently accepted.
    """
    if mode not in ("plus", "plusplus"):
        raise DomainError(f"unknown treillis mode {mode!r}")
    M = module.truncation if M is None else M
    r0 = max(1, round(M / (2 * module.p))) if r is None else r
    cap = cap if cap is not None else module.p * (M + 4 * r0 + 8)
    results = []
    for r_try in (r0, 2 * r0, 4 * r0):
        results.append(_stable_subspace(module, r_try, M, cap, mode))
        if len(results) >= 2 and results[-1] == results[-2].in_frame(r_try):
            return results[-1]
    raise RangeTooSmall(
        f"treillis_{mode} changed when enlarging r twice (r0={r0}); last frames "
        f"{[res.r for res in results]}")


def psi_span(module, lat, include_self=False, cap=None):
    """Lambda-span of psi_D(L): generated by psi_D((1+X)^i g), 0 <= i < p.

    The exponents i run over [0, p) rather than (-p, 0]; the two spans agree
    because (1+X) is a unit of Lambda.
    """
    p, n = module.p, module.n
    cap = cap if cap is not None else module.p * (lat.M + lat.r + 8)
    gens = []
    for g in lat.elems():
        for i in range(p):
            twisted = g.scale(onepx_power(p, n, i))
            gens.append(module.psi_D(twisted, hi_cap=cap))
    if include_self:
        gens.extend(lat.elems())
    r_new = lat.r
    for g in gens:
        for c in g.coords:
            if c.terms:
                r_new = max(r_new, -c.lo)
    return Lattice.from_elems(module, gens, r_new, lat.M)


def _sharp_natural_once(module, mode, M, r, budget, cap):
    if mode == "sharp":
        cur = Lattice.standard(module, r, M)
        include = False
    else:
        cur = Lattice.standard(module, 0, M, shift=min(r, M - 1))
        include = True
    history = [cur]
    for _ in range(budget):
        nxt = psi_span(module, cur, include_self=include, cap=cap)
        if nxt == cur.in_frame(nxt.r):
            return nxt
        cur = nxt
        history.append(cur)
    raise NoStabilization(f"treillis_{mode} did not stabilize in {budget} steps",
                          history=history[-2:])


def treillis_sharp_natural(module, mode, M=None, r=None, budget=64, cap=None):
    """D-sharp (maximal psi-stable) / D-natural (minimal psi-stable) treillis.

    sharp: iterate T <- Lambda-span(psi_D(T)) from X^(-r) D0 until stable.
    natural: iterate U <- Lambda-span(U + psi_D(U)) from X^r D0 until stable.
    The starting depth r is probed by doubling: the fixed point must not move
    when the start is pushed further out/in.  Results are post-verified to be
    psi-stable with spanning psi-image.
    """
    if mode not in ("sharp", "natural"):
        raise DomainError(f"unknown treillis mode {mode!r}")
    M = module.truncation if M is None else M
    r0 = max(1, round(M / (2 * module.p))) if r is None else r
    results = []
    for r_try in (r0, 2 * r0, 4 * r0):
        results.append(_sharp_natural_once(module, mode, M, r_try, budget, cap))
        if len(results) >= 2:
            frame = max(results[-1].r, results[-2].r)
            if results[-1].in_frame(frame) == results[-2].in_frame(frame):
                stable = results[-1]
                break
    else:
        raise RangeTooSmall(
            f"treillis_{mode} changed when enlarging the starting depth twice (r0={r0})")
    image = psi_span(module, stable, include_self=False, cap=cap)
    if not (stable.contains(image) and image.contains(stable.in_frame(image.r))):
        raise NoStabilization(f"treillis_{mode}: psi image does not span the fixed point",
                              history=[stable, image])
    return stable


def psi_descent(module, lat, budget=12, sharp=None, cap=None):
    """Smallest k0 with Lambda-span(psi_D^k L) inside D-sharp for all tested k >= k0."""
    sharp = sharp if sharp is not None else treillis_sharp_natural(module, "sharp", M=lat.M)
    flags = []
    cur = lat
    for _ in range(budget + 1):
        flags.append(sharp.contains(cur.in_frame(max(cur.r, sharp.r))))
        cur = psi_span(module, cur, cap=cap)
    k0 = None
    for k in range(len(flags)):
        if all(flags[k:]):
            k0 = k
            break
    if k0 is None:
        raise BudgetExceeded(f"psi descent did not reach D-sharp within {budget} steps")
    return k0
