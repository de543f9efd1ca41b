"""Newton-CG with dynamically controlled function accuracy.

Here the function oracle is told how much error it may commit at each
iteration: the allowance is theta * t_k * |s_k'g_k|, the scale of the
decrease the step is expected to produce.  The Armijo test then needs
no slack, and every accepted step is a true descent step.

The demo runs the driver on a ridge-regularized logistic regression
(N=1000 samples, 20 features) with 10% deliberately wrong gradient
draws, shows the monotone gap decrease and the steplength recovering
after each rejection, and checks the hitting-time bound.
"""

from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt

import noisyncg as m

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

fsp, _, _ = m.make_synthetic_logistic(1000, 20, ridge=1e-2, seed=2024)
problem = fsp.base
print(f"problem: {problem.name}")
print(f"  certified spectrum: [{problem.bounds.lambda_1}, "
      f"{problem.bounds.lambda_n:.4f}]")
print(f"  gap at x0 = 0: {m.optimality_gap(problem, np.zeros(20)):.4f}")

theta = 0.025  # must stay below c/2
ls = m.LinesearchParams(c=0.1, tau=0.5, eta_bar=0.5, theta=theta)

config = m.ExperimentConfig(
    problem=fsp,
    variant="dynamic",
    ls=ls,
    epsilon=1e-6,
    max_iters=600,
    replications=100,
    base_seed=0,
    grad_params=m.GradientEstimatorParams(0.1, "scaled_opposite"),
    hess_params=m.HessianEstimatorParams(0.1, 0.1),
)
result = m.run_experiment(config)

print(f"\n{config.replications} seeded runs at epsilon = {config.epsilon}:")
print(f"  mean hitting time = {result.stats.mean:.2f} "
      f"(bound {result.stats.theoretical_bound:.3e})")
print(f"  audit violations  = {len(result.audit_violations)}")

trace = result.traces[0]
rejected = [r.k for r in trace.records if not r.successful]
print(f"\nseed {trace.seed}: {trace.iterations} iterations, "
      f"{len(rejected)} rejected at k = {rejected}")

fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
ax1.semilogy(trace.gap_sequence(), marker="o", ms=3)
ax1.set_ylabel("optimality gap")
ax1.set_title("dynamic accuracy: one run in detail")
ax2.semilogy([r.t for r in trace.records], marker="s", ms=3, color="tab:orange")
ax2.set_ylabel("steplength t_k")
ax2.set_xlabel("iteration")
fig.tight_layout()
fig.savefig(OUT / "dynamic_gap_and_steplength.svg")
print(f"wrote {OUT / 'dynamic_gap_and_steplength.svg'}")
