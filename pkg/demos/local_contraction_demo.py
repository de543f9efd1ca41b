"""Local behavior of full Newton-CG steps near the minimizer.

When the steplength is pinned at one, the distance to the minimizer
contracts linearly by the factor

    (1/lambda_1) [ L_H/2 * dist + C*eta + 2 lambda_n eta / (1 - eta_bar) ]

on every iteration whose gradient and Hessian draws are both accurate,
which happens with probability at least (1 - delta_g)(1 - delta_h).

The demo warm-starts a rotated quadratic (L_H = 0) at distance 0.1,
pools every accepted unit step across 100 seeds, and compares the
observed contraction frequency with that probability floor.
"""

import math
from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt

import noisyncg as m

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

problem = m.make_quadratic(20, np.linspace(1.0, 4.0, 20), seed=101)
rng = np.random.default_rng(0)
direction = rng.standard_normal(20)
direction /= np.linalg.norm(direction)
x0 = problem.minimizer + 0.1 * direction

delta_g = delta_h = 0.1
eta = 0.05
params = m.LocalConvergenceParams(lipschitz_hess=0.0, hess_accuracy=1.0,
                                  c_tilde=0.9, delta_g=delta_g,
                                  delta_h=delta_h)
factor = m.local_contraction_factor(0.1, eta, params.lipschitz_hess,
                                    params.hess_accuracy, problem.bounds,
                                    0.5)
print(f"contraction factor at dist 0.1, eta {eta}: {factor:.3f} "
      f"(needs < {params.c_tilde})")
print(f"probability floor p = {params.p:.3f}")

ls = m.LinesearchParams(c=0.1, tau=0.5, eta_bar=0.5, eta_schedule=eta,
                        theta=0.02)
grad = m.GradientEstimatorParams(delta_g, "scaled_opposite")
hess = m.HessianEstimatorParams(delta_h, params.hess_accuracy)

pooled = contracted = 0
ratios = []
for seed in range(100):
    trace = m.run_dynamic(problem, 0.02, grad, hess, ls, epsilon=0.0,
                          max_iters=30, seed=seed, x0=x0)
    dists = trace.dist_sequence()
    for i, rec in enumerate(trace.records):
        if rec.t != 1.0 or not rec.successful or dists[i] == 0.0:
            continue
        f = m.local_contraction_factor(dists[i], rec.eta,
                                       params.lipschitz_hess,
                                       params.hess_accuracy,
                                       problem.bounds, 0.5)
        if f < params.c_tilde:
            pooled += 1
            contracted += dists[i + 1] < params.c_tilde * dists[i]
            ratios.append(dists[i + 1] / dists[i])

sigma = math.sqrt(params.p * (1 - params.p) / pooled)
print(f"\npooled {pooled} accepted unit steps over 100 seeds")
print(f"observed contraction frequency: {contracted / pooled:.4f}")
print(f"one-sided floor p - 3 sigma:    {params.p - 3 * sigma:.4f}")

fig, ax = plt.subplots(figsize=(7, 4.5))
ax.hist(ratios, bins=40, color="tab:purple", alpha=0.8)
ax.axvline(params.c_tilde, color="k", ls="--",
           label=f"required factor {params.c_tilde}")
ax.set_xlabel("per-step distance ratio ||x+ - x*|| / ||x - x*||")
ax.set_ylabel("count")
ax.set_title("unit-step error contraction near the minimizer")
ax.legend()
fig.tight_layout()
fig.savefig(OUT / "local_contraction_histogram.svg")
print(f"wrote {OUT / 'local_contraction_histogram.svg'}")
