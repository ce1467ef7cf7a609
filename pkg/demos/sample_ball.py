"""Exact forward sampling on V_2 versus the brute-force table, and a translation check."""

import numpy as np

from pottstree.freetree import build_ball
from pottstree.homogeneous import oracle_enumerate, solution_gbc
from pottstree.model import ModelParams, exact_ball_measure, solve_inward
from pottstree.sampler import check_translation_invariance, empirical_table, sample_configuration

k, q, theta = 2, 2, 2.0
ball = build_ball(k, 2)
xi = np.zeros((ball.size, 1))
gbc = solve_inward(ball, xi, theta, np.full((len(ball.leaves), 1), 1.0))
exact = exact_ball_measure(ModelParams(k, q, theta), xi, gbc)
for n_samples in (10_000, 100_000, 1_000_000):
    smp = sample_configuration(gbc, xi, theta, count=n_samples, seed=1)
    tv = 0.5 * np.abs(empirical_table(smp, q) - exact.probs).sum()
    print(f"N={n_samples:>9,d}: TV to exact table {tv:.4f}")

# a completely homogeneous solution is translation invariant, a generic one is not
theta = 10.0
sol = max(oracle_enumerate(2, 2, theta, 0.0, n_sobol=500), key=lambda s: s.z[0])
hom_gbc = solution_gbc(sol, 2, 4)
print(check_translation_invariance(hom_gbc, np.zeros_like(hom_gbc.h), theta))
rng = np.random.default_rng(0)
ball4 = hom_gbc.ball
generic = solve_inward(ball4, np.zeros((ball4.size, 1)), theta, rng.normal(size=(len(ball4.leaves), 1)))
print(check_translation_invariance(generic, np.zeros((ball4.size, 1)), theta))
