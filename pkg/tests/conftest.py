import random

import pytest

from phigamma.series import INF, OESeries

P, N = 3, 2


@pytest.fixture
def rng():
    return random.Random(20240811)


def random_series(rng, p=P, n=N, lo=-6, hi=8, nterms=4, exact=True):
    terms = {rng.randrange(lo, hi): rng.randrange(1, p ** n) for _ in range(nterms)}
    return OESeries(p, n, terms, hi=INF if exact else hi)


def doubled_precision_check(op, *args, p=P, n=N):
    """Recompute op at (2n, same integer lifts) and compare certified coefficients.

    The inputs' stored integers are one lift of their class; the op applied to
    the lift at precision 2n, truncated back mod p^n, must agree with the
    low-precision result on its certified window.
    """
    low = op(*args)
    lifted = [a.lift_precision(2 * n) if isinstance(a, OESeries) else a for a in args]
    high = op(*lifted)
    q = p ** n
    hi = min(low.hi, high.hi)
    for e in set(low.terms) | set(high.terms):
        if e < hi:
            assert low.terms.get(e, 0) % q == high.terms.get(e, 0) % q, (
                f"coefficient at X^{e}: {low.terms.get(e, 0)} vs {high.terms.get(e, 0)} mod {q}")
    assert low.hi <= high.hi or high.hi == hi
    return low
