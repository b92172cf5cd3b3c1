#!/usr/bin/env python3
"""Exact binomial sums against the two closed-form bounds, spot-checked.

The convergence proof of the recycling chain needs a Chernoff-style tail
(P[B >= x] for B ~ Binomial(k, 1/n)) and a conditional-overshoot bound.
Both are verified numerically: the left side is an exact log-space
summation, the right side the claimed closed form.
"""

from arcanesim.bounds import check_grid, lemma_conditional_check, lemma_tail_check, violations

print("tail bound, P[B >= x] <= exp(-1.25 (x-1)):")
for n, k, x in ((16, 16, 16.0), (256, 200, 18.0), (1024, 1024, 16.0)):
    exact, bound = lemma_tail_check(n, k, x)
    print(f"  n={n:>5} k={k:>5} x={x:>4}: exact={exact:.3e}  bound={bound:.3e}  "
          f"slack={bound / max(exact, 1e-300):.1e}x")

print("\novershoot bound, E[(B-x)+] <= exp(-(x-1/2))/(x-1):")
for n, k, x in ((16, 8, 4.0), (100, 50, 7.0), (1024, 512, 3.5)):
    exact, bound = lemma_conditional_check(n, k, x)
    print(f"  n={n:>5} k={k:>5} x={x:>4}: exact={exact:.3e}  bound={bound:.3e}")

print("\nsweeping the n=16..64 grid...")
results = check_grid(ns=(16, 32, 64))
bad = violations(results)
print(f"{len(results)} points checked, {len(bad)} violations")
