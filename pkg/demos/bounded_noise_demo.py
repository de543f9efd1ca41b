"""Newton-CG under bounded function noise.

Builds a rotated 20-dimensional quadratic, corrupts every function
evaluation with worst-case sign-adversarial noise of magnitude eps_f,
draws gradients that are only probabilistically accurate, and runs the
relaxed-Armijo linesearch driver over many seeds.

The script prints the closed-form constants of the configuration (the
acceptance threshold t_bar, the contraction constant M, the smallest
admissible accuracy target), then compares the empirical mean hitting
time against the expected-iteration bound.  The bound is loose by
design; the point is that it holds.
"""

from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt

import noisyncg as m
from noisyncg import theory

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

EPS_F = 1e-3
GAMMA = 0.25

problem = m.make_quadratic(20, np.linspace(1.0, 4.0, 20), seed=101)
ls = m.LinesearchParams(c=0.1, tau=0.5, eta_bar=0.5)

big_m = theory.m_constant_bounded(ls.c, ls.eta_bar, problem.bounds, ls.t_max)
threshold = theory.epsilon_threshold(EPS_F, big_m, GAMMA)
epsilon = 2.0 * threshold

print("bounded-noise configuration")
print(f"  eps_f = {EPS_F}, noise law = adversarial_sign")
print(f"  t_bar = {theory.t_bar_bounded(ls.c, ls.eta_bar, problem.bounds)}")
print(f"  M = {big_m:.3e}")
print(f"  smallest admissible accuracy target = {threshold:.1f}")
print(f"  using epsilon = 2x threshold = {epsilon:.1f}")

# start far away so the hitting time is meaningful
u = np.ones(20)
gap_target = 1e4 * epsilon
alpha = np.sqrt(2 * gap_target / (u @ problem.hess_apply(u * 0, u)))
x0 = problem.minimizer + alpha * u

config = m.ExperimentConfig(
    problem=problem,
    variant="bounded",
    ls=ls,
    epsilon=epsilon,
    max_iters=400,
    replications=100,
    base_seed=0,
    x0=list(x0),
    noise=m.BoundedNoise(EPS_F, "adversarial_sign"),
    grad_params=m.GradientEstimatorParams(0.1, "scaled_opposite"),
    hess_params=m.HessianEstimatorParams(0.0, 1.0),
    gamma=GAMMA,
)
result = m.run_experiment(config)

print(f"\n{config.replications} seeded runs:")
print(f"  mean hitting time  = {result.stats.mean:.2f}")
print(f"  std                = {result.stats.std:.2f}")
print(f"  censored           = {result.stats.censored_count}")
print(f"  expected-iteration bound = {result.stats.theoretical_bound:.3e}")
print(f"  audit violations   = {len(result.audit_violations)}")

fig, ax = plt.subplots(figsize=(7, 4.5))
for trace in result.traces[:30]:
    ax.semilogy(trace.gap_sequence(), lw=1, alpha=0.6)
ax.axhline(epsilon, color="k", ls="--", label="accuracy target")
ax.axhline(4 * EPS_F, color="r", ls=":", label="4 eps_f")
ax.set_xlabel("iteration")
ax.set_ylabel("optimality gap")
ax.set_title("bounded noise: gap trajectories (30 of 100 seeds)")
ax.legend()
fig.tight_layout()
fig.savefig(OUT / "bounded_gap_trajectories.svg")
print(f"\nwrote {OUT / 'bounded_gap_trajectories.svg'}")
