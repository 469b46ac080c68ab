"""The operators H_g on an etale module, built as stabilizing limits of
coset-indexed partial sums, together with the res projector algebra.

The depth-k partial sum is

    sum over r in X_g of reps mod p^k of
        omega(cr+d) (1+X)^(g[r]) Phi_(g'[r] p^k) psi^k ((1+X)^(-r) . )

with Phi the semilinear action of diag(. , 1).  The inner psi^k chain is
evaluated by nested component extraction, which keeps Laurent-polynomial
inputs exact; the working window is enlarged automatically with the depth
(the projector res(1_{u N_k}) mixes coefficients across ~p^k exponents, so a
fixed window cannot certify deep partial sums).

H_g is never materialized as a matrix: it is applied to elements, with
stabilization certified per input by the weak-topology balls B_{n,k}.
"""

import time
from dataclasses import dataclass
from fractions import Fraction

from .errors import (DegenerateCell, DepthTooSmall, DomainError,
                     NoStabilization, PointOutsideCells, PrecisionLoss)
from .padics import char_eval, frac_val
from .series import INF, OESeries, ball_index, oe_inv, onepx_power
from .cells import (CompactOpen, GL2Mat, cell_data, first_point, k_min_depth,
                    preimage_in_cell, xg_cosets)


@dataclass(frozen=True)
class SChoice:
    """Strictly dominant s = diag(z,z) * diag(p*e, 1) parameterizing the limit.

    The central part z acts through omega on both phi- and psi-sides of each
    summand and cancels exactly, so only the unit e enters the computation.
    """

    e: Fraction = Fraction(1)
    z: Fraction = Fraction(1)

    def __post_init__(self):
        object.__setattr__(self, "e", Fraction(self.e))
        object.__setattr__(self, "z", Fraction(self.z))


# ---------------------------------------------------------------------------
# res projectors

def _component_chain(module, m, digits, cap, cache=None):
    """psi^k((1+X)^(-r) m) for r with the given base-p digits (low first).

    Component windows shrink by a factor p per level anyway, so each level
    runs with a correspondingly truncated output cap.
    """
    if cache is None:
        cache = {}
    cur = m
    prefix = ()
    level_cap = cap
    for a in digits:
        level_cap = level_cap // module.p + 2 * module.p
        prefix = prefix + (a,)
        if prefix not in cache:
            parent = cache.get(prefix[:-1], cur) if len(prefix) > 1 else m
            comps = module.components_D(parent, hi_cap=cap, out_cap=level_cap)
            for digit in range(module.p):
                cache[prefix[:-1] + (digit,)] = comps[digit]
        cur = cache[prefix]
    return cur


def _digits(r, k, p):
    return tuple((r // p ** j) % p for j in range(k))


def res_coset(module, r, k, m, hi_cap=None, out_hi=None, _cache=None):
    """res(1_{r + p^k Z_p}) applied to m: (1+X)^r phi^k psi^k ((1+X)^(-r) m)."""
    p, n = module.p, module.n
    cap = hi_cap if hi_cap is not None else module.default_cap
    r = int(r) % p ** k
    w = _component_chain(module, m, _digits(r, k, p), cap, cache=_cache)
    needs = [cap if out_hi is None else min(out_hi, cap)]
    for _ in range(k):
        needs.append((needs[-1] + (n - 1) * (p - 1)) // p + p)
    needs.reverse()
    out = w
    for step, j in enumerate(range(k - 1, -1, -1)):
        out = module.phi_D(out, hi_cap=cap).truncate(needs[step + 1])
        a = (r // p ** j) % p
        if a:
            out = out.scale(onepx_power(p, n, a))
    return out


def res_proj(module, v, m, hi_cap=None, out_hi=None):
    """The projector res(1_V) for a compact open V inside Z_p ~ C_0."""
    if isinstance(v, CompactOpen):
        cosets = v.cosets
    else:
        cosets = tuple(v)
    out = module.zero_elem()
    cache = {}
    for r, k in cosets:
        out = out + res_coset(module, r, k, m, hi_cap=hi_cap, out_hi=out_hi,
                              _cache=cache)
    return out


# ---------------------------------------------------------------------------
# H_g partial sums

def _summand(module, g, point, center, k, m, s, cap, cache, out_hi=None):
    """alpha(g, x_point) res(1_{center + p^k Z_p}) applied to m.

    Normal-ordering alpha(g,x) u(center) gives the scalar twist
    (1+X)^(g[x] + (center-x) g'[x]) and the torus part
    diag(g'[x](cx+d), cx+d) = omega(cx+d) Phi_(g'[x]).
    """
    p, n = module.p, module.n
    data = cell_data(g, point, p)
    if not data.in_Xg:
        raise PointOutsideCells(f"{point} is not in X_g")
    v_r = frac_val(data.gprime_of_r, p)
    if k + v_r < 0:
        raise DepthTooSmall(
            f"depth {k} < {-v_r} needed for dominance at r = {point}")
    v_r = int(v_r)
    e_r = data.gprime_of_r / Fraction(p) ** v_r

    center_int = int(center)
    w = _component_chain(module, m, _digits(center_int % p ** k, k, p), cap, cache=cache)
    extra = center_int - center_int % p ** k
    if extra:
        # representative beyond [0, p^k): leftover twist after the psi-chain
        w = w.scale(oe_inv(onepx_power(p, n, extra // p ** k), hi_cap=cap))

    # backward-computed window needs: only out_cap matters after the last
    # phi step, so intermediate values can be truncated aggressively
    out_cap = min(cap, _summand_out_cap(module, cap, k))
    if out_hi is not None:
        out_cap = min(out_cap, out_hi)
    needs = [out_cap]
    for _ in range(k + v_r):
        needs.append((needs[-1] + (n - 1) * (p - 1)) // p + p)
    needs.reverse()
    # the unit actions commute with phi_D (module invariant), so they are
    # applied before the phi ladder, on the ladder's small entry window
    w = w.truncate(needs[0])
    lo_in = min((c.lo for c in w.coords if c.terms), default=0)
    g_cap = needs[0] + max(0, -int(lo_in)) + 2 * p
    e_s = s.e
    if e_s != 1 and k:
        w = module.gamma_apply(e_s ** (-k), w, hi_cap=g_cap)
    unit = e_r * e_s ** k
    if unit != 1:
        w = module.gamma_apply(unit, w, hi_cap=g_cap)
    for step in range(k + v_r):
        w = module.phi_D(w, hi_cap=cap).truncate(needs[step + 1])
    # the tail factors start at X^0, so certifying out_cap after multiplying
    # by them needs their windows extended past the negative support of w
    lo_w = min((c.lo for c in w.coords if c.terms), default=0)
    tail_cap = out_cap + max(0, -int(lo_w)) + abs(module.window[0]) + 4

    twist = data.g_of_r + (Fraction(center) - Fraction(point)) * data.gprime_of_r
    if twist != 0:
        if twist.denominator == 1 and 0 <= twist <= tail_cap:
            w = w.scale(onepx_power(p, n, twist))
        else:
            w = w.scale(onepx_power(p, n, twist, hi_cap=tail_cap))
    omega = module.omega_or_trivial()
    val = char_eval(omega, data.denom)
    if val.num != 1:
        w = w.scale(val)
    return w


def _summand_out_cap(module, cap, k):
    """Window the summand is expected to certify given the working cap."""
    p, n = module.p, module.n
    return max(cap - n * p ** k - 4 * (k + 1) - abs(module.window[0]), p)


def hg_partial(module, g, k, m, s=SChoice(), hi_cap=None, reps=None, out_hi=None):
    """The depth-k partial sum of H_g applied to m.

    ``reps`` may supply a custom system of representatives for Z_p/p^k Z_p
    (used by the representative-independence checks); default {0..p^k-1}.
    """
    p = module.p
    cap = hi_cap if hi_cap is not None else module.default_cap
    if reps is None:
        reps = range(p ** k)
    out = module.zero_elem()
    cache = {}
    hit = False
    for r in reps:
        data = cell_data(g, Fraction(r), p)
        if not data.in_Xg:
            continue
        hit = True
        out = out + _summand(module, g, Fraction(r), Fraction(r), k, m, s, cap, cache,
                             out_hi=out_hi)
    if not hit:
        try:
            first_point(g, p)
        except DegenerateCell:
            raise
    return out


def delta_diag(module, g, u, k, v, m, s=SChoice(), hi_cap=None, out_hi=None):
    """Difference operator (alpha_g0(u) - alpha_g0(uv)) res(1_{u N_(k+1)}).

    Applied to the test vector m; used to plot the contraction profile.
    """
    p = module.p
    u, v = Fraction(u), Fraction(v)
    if v != 0 and frac_val(v, p) < k:
        raise DomainError(f"v = {v} is not in p^{k} Z_p")
    if not cell_data(g, u, p).in_Xg:
        raise PointOutsideCells(f"{u} is not in U_g")
    if v == 0:
        return module.zero_elem()
    if not cell_data(g, u + v, p).in_Xg:
        raise PointOutsideCells(f"{u + v} is not in U_g")
    cap = hi_cap if hi_cap is not None else module.default_cap
    cache = {}
    lhs = _summand(module, g, u, u, k + 1, m, s, cap, cache, out_hi=out_hi)
    rhs = _summand(module, g, u + v, u, k + 1, m, s, cap, cache, out_hi=out_hi)
    return lhs - rhs


# ---------------------------------------------------------------------------
# the limit

def _auto_cap(module, g, k, target_hi):
    p, n = module.p, module.n
    v_max = max(0, k_min_depth(g, p))
    return int(target_hi + n * p ** (k + 1) + p ** v_max + 2 * k +
               abs(module.window[0]) + 16)

def _partial_with_window(module, g, k, m, s, target_hi, reps=None, tries=3):
    cap = _auto_cap(module, g, k, target_hi)
    in_hi = m.window_hi()
    for _ in range(tries):
        out = hg_partial(module, g, k, m, s=s, hi_cap=cap, reps=reps,
                         out_hi=target_hi)
        if out.window_hi() >= target_hi:
            return out
        if in_hi != INF and cap >= module.p ** k * in_hi:
            # the input's own window is the binding constraint
            break
        cap *= 2
    raise PrecisionLoss(
        f"cannot certify window {target_hi} for depth-{k} partial sum "
        f"(input window {in_hi})")


def hg_limit(module, g, m, target_k, s=SChoice(), k_max=10, k_start=None,
             reps_fn=None):
    """Iterate partial sums until two consecutive differences lie in
    B_{n, target_k}; returns (value, depth achieved, history).

    history holds per-step pairs (k, ball index of H^(k+1) - H^(k)).
    """
    p = module.p
    k0 = k_min_depth(g, p) if k_start is None else k_start
    slack = 2
    reps = (reps_fn(k0) if reps_fn else None)
    prev = _partial_with_window(module, g, k0, m, s, target_k + slack, reps=reps)
    history = []
    good = 0
    for k in range(k0, k_max):
        reps = (reps_fn(k + 1) if reps_fn else None)
        cur = _partial_with_window(module, g, k + 1, m, s, target_k + slack, reps=reps)
        diff = cur - prev
        mk = diff.ball_index()
        history.append((k, mk if mk != INF else "inf"))
        good = good + 1 if mk >= target_k else 0
        if good >= 2:
            return cur, k + 1, history
        prev = cur
    raise NoStabilization(
        f"H_g did not stabilize to ball {target_k} within depth {k_max}",
        history=history)


def hg_closed_form(module, b, m, hi_cap=None):
    """H_b for dominant upper-triangular b: b . res(1_{b^(-1)C_0 ∩ C_0}).

    Requires b = u(y) diag(a, d) with y in Z_p and val(a/d) >= 0, in which
    case b^(-1)C_0 ∩ C_0 = C_0 and H_b is the plain action of b.
    """
    if not b.in_P:
        raise DomainError("closed form only for upper-triangular b")
    y = b.b / b.d
    if frac_val(y, module.p) < 0 or frac_val(b.a / b.d, module.p) < 0:
        raise DomainError("closed form needs a dominant b with u-part in Z_p")
    out = module.act((b.a, b.d), m, hi_cap=hi_cap)
    if y != 0:
        if y.denominator == 1 and y >= 0:
            out = out.scale(onepx_power(module.p, module.n, y))
        else:
            out = out.scale(onepx_power(module.p, module.n, y,
                                        hi_cap=hi_cap or module.default_cap))
    return out


# ---------------------------------------------------------------------------
# relation verification

def _ball_of_difference(a, b):
    diff = a - b
    idx = diff.ball_index()
    return idx if idx != INF else diff.window_hi()


def _limit_after_res(module, g, sets, m, target, s, k_max, tries=5):
    """hg_limit(g, res(1_sets) m): the res input window is enlarged until the
    outer limit certifies."""
    p, n = module.p, module.n
    depth_v = max((k for _, k in sets.cosets), default=0)
    last = None
    for bump in range(tries):
        cap = _auto_cap(module, g, depth_v, (target + 2 * p) * p ** (bump + 1))
        rhs_in = res_proj(module, sets, m, hi_cap=cap)
        try:
            return hg_limit(module, g, rhs_in, target, s=s, k_max=k_max)
        except PrecisionLoss as exc:
            last = exc
    raise PrecisionLoss(f"H_g after res could not be certified: {last}")


def verify_h1(module, g, v, m, target, s=SChoice(), k_max=10):
    """res(1_V) H_g = H_g res(1_{g^(-1)V ∩ C_0}) on the sample m.

    The res projector at coset depth d reads its input on a window ~p^d times
    the certified target, so the H_g limit is recomputed at a larger target
    until the composite certifies.
    """
    p, n = module.p, module.n
    pull = preimage_in_cell(g, v, module.p)
    depth_v = max([k for _, k in v.cosets] + [k for _, k in pull.cosets], default=0)
    cap = _auto_cap(module, g, depth_v, target + n * p ** 2)
    rhs, depth2, _ = _limit_after_res(module, g, pull, m, target, s, k_max)
    for bump in range(1, 5):
        inner_target = (target + 2 * p) * p ** (depth_v + bump - 1)
        lim, depth, _ = hg_limit(module, g, m, inner_target, s=s, k_max=k_max)
        lhs = res_proj(module, v, lim, hi_cap=cap)
        diff_win = (lhs - rhs).window_hi()
        if diff_win >= target:
            return _ball_of_difference(lhs, rhs), max(depth, depth2)
    raise PrecisionLoss("could not certify the H1 difference window")


def verify_h2(module, g, h, m, target, s=SChoice(), k_max=10):
    """H_g H_h = H_(gh) res(1_{h^(-1)C_0 ∩ C_0}) on the sample m.

    The outer sum at depth k reads the inner value on a window growing like
    p^k, so the inner target is enlarged until the outer limit certifies.
    """
    p, n = module.p, module.n
    d1 = d2 = 0
    lhs = None
    for bump in range(2, 2 + 4):
        inner_target = target + n * p ** bump
        try:
            hm, d1, _ = hg_limit(module, h, m, inner_target, s=s, k_max=k_max)
            lhs, d2, _ = hg_limit(module, g, hm, target, s=s, k_max=k_max)
            break
        except PrecisionLoss:
            continue
    if lhs is None:
        raise PrecisionLoss("H_g(H_h(m)) could not be certified; inner window too small")
    uh = xg_cosets(h, module.p)
    rhs, d3, _ = _limit_after_res(module, g * h, uh, m, target, s, k_max)
    return _ball_of_difference(lhs, rhs), max(d1, d2, d3)


def verify_h3(module, b, m, target, s=SChoice(), k_max=10):
    """Closed form b res(1_{b^(-1)C_0 ∩ C_0}) against the limit."""
    lim, depth, _ = hg_limit(module, b, m, target, s=s, k_max=k_max)
    closed = hg_closed_form(module, b, m,
                            hi_cap=_auto_cap(module, b, depth, target))
    return _ball_of_difference(lim, closed), depth


def _verify_task(args):
    module, rel, pair, v, m, target, k_max, s = args
    t0 = time.perf_counter()
    if rel == "h1":
        ball, depth = verify_h1(module, pair[0], v, m, target, s=s, k_max=k_max)
    elif rel == "h2":
        ball, depth = verify_h2(module, pair[0], pair[1], m, target, s=s, k_max=k_max)
    elif rel == "h3":
        ball, depth = verify_h3(module, pair[0], m, target, s=s, k_max=k_max)
    else:
        raise DomainError(f"unknown relation {rel!r}")
    return ball, depth, time.perf_counter() - t0


def verify_relations(module, pairs, v, samples, seed, relations=("h1", "h2", "h3"),
                     target=6, k_max=10, s=SChoice(), sample_fn=None, workers=1):
    """Evaluate the requested relations on random samples; returns a report.

    Per relation and sample the certified ball index of the difference and
    the depth used are recorded; pass/fail is judged against ``target``.
    Samples are drawn up front so the report is byte-identical regardless of
    ``workers``; wall times are kept separate for the same reason.
    """
    import random as _random
    from .etale import random_elem

    rng = _random.Random(seed)
    make = sample_fn or (lambda: random_elem(module, rng, nterms=2, lo=-2, hi=4))
    tasks = []
    for rel in relations:
        for idx in range(samples):
            tasks.append((module, rel, pairs[idx % len(pairs)], v, make(),
                          target, k_max, s))
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_verify_task, tasks))
    else:
        outcomes = [_verify_task(t) for t in tasks]

    report = {"target": target, "relations": {}}
    timings = {}
    pos = 0
    for rel in relations:
        entries = []
        times = []
        for idx in range(samples):
            ball, depth, seconds = outcomes[pos]
            pos += 1
            times.append(seconds)
            entries.append({"sample": idx,
                            "ball": ball if ball != INF else "inf",
                            "depth": depth,
                            "pass": bool(ball == INF or ball >= target)})
        report["relations"][rel] = {
            "entries": entries,
            "pass": all(e["pass"] for e in entries),
        }
        timings[rel] = times
    report["pass"] = all(r["pass"] for r in report["relations"].values())
    return report, timings
