"""Exact binomial computations against the closed-form tail bounds.

The convergence argument for the recycled chain leans on two inequalities
about B ~ Binomial(k, 1/n):

  * a Chernoff-style tail, P[B >= x] <= exp(-(5/4)(x-1)) for x >= 16, k <= n;
  * a conditional-overshoot bound, (E[B | B >= x] - x) P[B >= x]
    <= exp(-(x-1/2))/(x-1) for x >= 7/2, k <= n/2.

Both are checked here numerically: the left side is summed exactly from the
binomial mass in log space (lgamma-based, so k = n = 1024 is fine), and the
right side is the closed form. ``check_grid`` sweeps an exhaustive grid and
reports every violation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence


def _log_binom_pmf(j: int, k: int, n: int) -> float:
    """log P[B = j] for B ~ Binomial(k, 1/n)."""
    if j < 0 or j > k:
        return -math.inf
    if n == 1:
        # Degenerate p = 1: all mass at j = k.
        return 0.0 if j == k else -math.inf
    log_p = -math.log(n)
    log_q = math.log1p(-1.0 / n)
    log_choose = (
        math.lgamma(k + 1) - math.lgamma(j + 1) - math.lgamma(k - j + 1)
    )
    return log_choose + j * log_p + (k - j) * log_q


def _sum_exp(log_terms: Iterable[float]) -> float:
    """exp-sum with Kahan compensation, scaled by the max exponent."""
    terms = [t for t in log_terms if t > -math.inf]
    if not terms:
        return 0.0
    m = max(terms)
    total = 0.0
    comp = 0.0
    for t in terms:
        y = math.exp(t - m) - comp
        s = total + y
        comp = (s - total) - y
        total = s
    return math.exp(m) * total


def _log_pmf_vector(k: int, n: int) -> list[float]:
    return [_log_binom_pmf(j, k, n) for j in range(k + 1)]


def binom_sf(x_ceil: int, k: int, n: int, log_pmf: Sequence[float] | None = None) -> float:
    """P[B >= x_ceil] by exact summation of the binomial mass."""
    lp = log_pmf if log_pmf is not None else _log_pmf_vector(k, n)
    return _sum_exp(lp[j] for j in range(max(x_ceil, 0), k + 1))


def binom_overshoot(x: float, k: int, n: int, log_pmf: Sequence[float] | None = None) -> float:
    """E[max(0, B - x)] restricted to B >= ceil(x), by exact summation.

    Equals (E[B | B >= x] - x) * P[B >= x]; zero when the event is
    impossible (ceil(x) > k).
    """
    x_ceil = math.ceil(x)
    if x_ceil > k:
        return 0.0
    lp = log_pmf if log_pmf is not None else _log_pmf_vector(k, n)
    return _sum_exp(
        lp[j] + math.log(j - x) for j in range(x_ceil, k + 1) if j > x
    )


def lemma_tail_check(
    n: int, k: int, x: float, log_pmf: Sequence[float] | None = None
) -> tuple[float, float]:
    """(exact, bound) for the Chernoff-style tail at threshold x >= 16."""
    if not (1 <= k <= n):
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    if x < 16:
        raise ValueError(f"tail bound only claimed for x >= 16, got {x}")
    exact = binom_sf(math.ceil(x), k, n, log_pmf)
    bound = math.exp(-1.25 * (x - 1.0))
    return exact, bound


def lemma_conditional_check(
    n: int, k: int, x: float, log_pmf: Sequence[float] | None = None
) -> tuple[float, float]:
    """(exact, bound) for the conditional-overshoot inequality, x >= 7/2."""
    if not (0 <= k <= n / 2):
        raise ValueError(f"need k <= n/2, got k={k}, n={n}")
    if x < 3.5:
        raise ValueError(f"conditional bound only claimed for x >= 7/2, got {x}")
    exact = binom_overshoot(x, k, n, log_pmf)
    bound = math.exp(-(x - 0.5)) / (x - 1.0)
    return exact, bound


@dataclass(frozen=True)
class GridResult:
    lemma: str
    n: int
    k: int
    x: float
    exact: float
    bound: float

    @property
    def ok(self) -> bool:
        # The summation is exact to ~1e-15; allow 1e-12 relative so float
        # noise can never flag a genuinely tight point.
        return self.exact <= self.bound * (1.0 + 1e-12)


DEFAULT_NS = (16, 32, 64, 128, 256, 512, 1024)


def check_grid(
    ns: Sequence[int] = DEFAULT_NS,
    bound_scale: float = 1.0,
) -> list[GridResult]:
    """Evaluate both inequalities over an exhaustive parameter grid.

    For each n: the tail lemma sweeps all admissible k (1..n) and integer
    x from 16 up past k (where the probability hits zero exactly), and the
    conditional lemma sweeps k in 0..n/2 with x over half-integer steps in
    [3.5, k+2]. Beyond x ~ 64 both sides are below 1e-70 and monotonically
    separating, so the sweep caps there. ``bound_scale`` shrinks the claimed
    bound and exists purely as a negative-control hook for tests.
    """
    results = []
    for n in ns:
        for k in range(1, n + 1):
            log_pmf = _log_pmf_vector(k, n)
            # At least two points per k: small k exercise the exact-zero case.
            for x in range(16, max(min(k, 64) + 2, 18)):
                exact, bound = lemma_tail_check(n, k, float(x), log_pmf)
                results.append(GridResult("tail", n, k, float(x), exact, bound * bound_scale))
        for k in range(0, n // 2 + 1):
            log_pmf = _log_pmf_vector(k, n)
            x = 3.5
            x_max = max(min(k, 64) + 2, 5)
            while x <= x_max:
                exact, bound = lemma_conditional_check(n, k, x, log_pmf)
                results.append(GridResult("conditional", n, k, x, exact, bound * bound_scale))
                x += 0.5
    return results


def violations(results: Iterable[GridResult]) -> list[GridResult]:
    return [r for r in results if not r.ok]
