"""Count homogeneous solutions at a few (theta, alpha) and compare with the multi-start oracle."""

from pottstree.homogeneous import count_total, count_zero_field, oracle_enumerate

k, q = 2, 5
for theta, alpha in [(3.0, 0.2), (6.9, -0.3), (6.9, 0.2), (12.0, -0.6)]:
    rep = count_total(k, q, theta, alpha)
    sols = oracle_enumerate(k, q, theta, alpha, n_sobol=4000)
    kinds = {}
    for s in sols:
        kinds[s.kind] = kinds.get(s.kind, 0) + 1
    print(f"theta={theta:5.2f} alpha={alpha:+.2f}: classifier {rep.nu:2d}, oracle {len(sols):2d} {kinds}")

for q in (2, 3, 4, 5):
    print(f"zero field, theta=20, q={q}: {count_zero_field(k, q, 20.0)} solutions")
