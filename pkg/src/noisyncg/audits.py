"""Post-hoc per-iteration audits of the guaranteed inequalities.

Every trace carries ground-truth gaps and the worst-case constants of
its configuration, so each analytic guarantee can be re-checked after
the fact:

* acceptance: a true iteration at or below the steplength threshold
  t_bar must be successful (boolean, zero tolerance);
* accuracy link: on true iterations the true gradient norm is at most
  (1 + t*eta) times the estimate norm;
* progress: true successful iterations contract the gap by the
  closed-form factor; successful iterations never raise it beyond the
  variant's noise allowance; unsuccessful iterations freeze it exactly;
* finite sums: the gradient accuracy loop's exit condition and the
  recorded Bernstein sample sizes.

Float inequalities get a relative cushion of RTOL to absorb rounding in
the recorded quantities; boolean and frozen-iterate checks are exact.
Functions return violation strings, one per failed check; an empty list
means the trace is clean.
"""

import math

from .cg import SpectrumBounds
from . import theory
from .oracles import gradient_sample_size

RTOL = 1e-12


def _cushion(*values) -> float:
    return RTOL * max([1.0] + [abs(v) for v in values])


def audit_trace(trace) -> list:
    """Run every applicable per-iteration audit; return violations."""
    if trace.variant == "bounded":
        return _audit_common(trace) + _audit_bounded(trace)
    if trace.variant == "dynamic":
        return _audit_common(trace) + _audit_dynamic(trace)
    if trace.variant == "finite_sum":
        return _audit_common(trace) + _audit_finite_sum(trace)
    return [f"unknown variant {trace.variant!r}"]


def _pairs(trace):
    """Yield (record, gap after the iteration) pairs."""
    records = trace.records
    for i, rec in enumerate(records):
        nxt = records[i + 1].gap if i + 1 < len(records) else trace.final_gap
        yield rec, nxt


def _trace_setup(trace):
    p = trace.params
    bounds = SpectrumBounds(*p["bounds"])
    ls = p["ls"]
    return p, bounds, ls


def _audit_common(trace) -> list:
    p, bounds, ls = _trace_setup(trace)
    epsilon = p["epsilon"]
    out = []
    z_eps = (math.log(trace.gap0 / epsilon)
             if epsilon > 0.0 and trace.gap0 > 0.0 else math.inf)
    for rec, next_gap in _pairs(trace):
        tag = f"k={rec.k}"
        if not 0.0 < rec.t <= ls["t_max"]:
            out.append(f"{tag}: steplength {rec.t} outside (0, t_max]")
        if not rec.successful and next_gap != rec.gap:
            out.append(f"{tag}: unsuccessful iteration moved the gap "
                       f"{rec.gap} -> {next_gap}")
        if rec.true_iteration:
            rhs = (1.0 + rec.t * rec.eta) * rec.grad_est_norm
            if rec.grad_norm_true > rhs + _cushion(rhs):
                out.append(f"{tag}: true iteration violates "
                           f"||grad|| <= (1+t*eta)||g||")
        if rec.gap > epsilon and rec.z > z_eps + _cushion(z_eps):
            out.append(f"{tag}: z={rec.z} exceeds Z_eps={z_eps}")
    return out


def _audit_bounded(trace) -> list:
    p, bounds, ls = _trace_setup(trace)
    eps_f = p["oracles"]["epsilon_f"]
    epsilon = p["epsilon"]
    c, t_max = ls["c"], ls["t_max"]
    t_bar = theory.t_bar_bounded(c, ls["eta_bar"], bounds)
    kappa1, _, beta = theory.worst_case_constants(bounds, ls["eta_bar"])
    rate = c * beta * kappa1 ** 2 * bounds.lambda_1 / (1.0 + t_max) ** 2
    out = []
    for rec, next_gap in _pairs(trace):
        tag = f"k={rec.k}"
        if rec.true_iteration and rec.t <= t_bar and not rec.successful:
            out.append(f"{tag}: true iteration with t={rec.t} <= "
                       f"t_bar={t_bar} was rejected")
        if rec.successful:
            rhs = rec.gap + 4.0 * eps_f
            if next_gap > rhs + _cushion(rhs):
                out.append(f"{tag}: successful iteration raised the gap "
                           f"beyond 4*eps_f: {rec.gap} -> {next_gap}")
        contraction_applies = (rec.true_iteration and rec.successful
                               and rec.gap > epsilon
                               and (eps_f == 0.0 or epsilon >= 4.0 * eps_f))
        if contraction_applies:
            rhs = (1.0 - rate * rec.t) * rec.gap
            if eps_f > 0.0:
                rhs *= 1.0 + 4.0 * eps_f / epsilon
            if next_gap > rhs + _cushion(rhs):
                out.append(f"{tag}: true successful iteration missed its "
                           f"contraction bound: {next_gap} > {rhs}")
    return out


def _audit_dynamic(trace) -> list:
    p, bounds, ls = _trace_setup(trace)
    theta = p["oracles"]["theta"]
    epsilon = p["epsilon"]
    c, t_max = ls["c"], ls["t_max"]
    try:
        t_bar = theory.t_bar_dynamic(c, theta, ls["eta_bar"], bounds)
    except theory.TheoryError:
        # no acceptance threshold exists when 1 - c - 2*theta <= 0; the
        # remaining guarantees still apply
        t_bar = 0.0
    kappa1, _, beta = theory.worst_case_constants(bounds, ls["eta_bar"])
    rate = (2.0 * beta * kappa1 ** 2 * bounds.lambda_1 * (c - 2.0 * theta)
            / (1.0 + t_max) ** 2)
    out = []
    for rec, next_gap in _pairs(trace):
        tag = f"k={rec.k}"
        if rec.true_iteration and rec.t <= t_bar and not rec.successful:
            out.append(f"{tag}: true iteration with t={rec.t} <= "
                       f"t_bar={t_bar} was rejected")
        if rec.successful:
            rhs = rec.gap + (c - 2.0 * theta) * rec.t * rec.step_dot_g
            if next_gap > rhs + _cushion(rec.gap, next_gap):
                out.append(f"{tag}: successful iteration below the "
                           f"guaranteed decrease: {next_gap} > {rhs}")
            if next_gap > rec.gap + _cushion(rec.gap):
                out.append(f"{tag}: successful iteration raised the gap "
                           f"{rec.gap} -> {next_gap}")
        if rec.true_iteration and rec.successful and rec.gap > epsilon:
            rhs = (1.0 - rate * rec.t) * rec.gap
            if next_gap > rhs + _cushion(rhs):
                out.append(f"{tag}: true successful iteration missed its "
                           f"contraction bound: {next_gap} > {rhs}")
    return out


def _audit_finite_sum(trace) -> list:
    p, bounds, ls = _trace_setup(trace)
    sub = p["oracles"]["sub"]
    n = p["dimension"]
    big_n = p["n_components"]
    forced = p["oracles"]["force_full_sample"]
    c = ls["c"]
    t_bar = theory.t_bar_dynamic(c, 0.0, ls["eta_bar"], bounds)
    out = []
    for rec, next_gap in _pairs(trace):
        tag = f"k={rec.k}"
        if rec.true_iteration and rec.t <= t_bar and not rec.successful:
            out.append(f"{tag}: true iteration with t={rec.t} <= "
                       f"t_bar={t_bar} was rejected")
        if rec.successful:
            rhs = rec.gap + c * rec.t * rec.step_dot_g
            if next_gap > rhs + _cushion(rec.gap, next_gap):
                out.append(f"{tag}: successful iteration below the exact "
                           f"Armijo decrease: {next_gap} > {rhs}")
        if rec.gamma_final > rec.t * rec.eta * rec.grad_est_norm:
            out.append(f"{tag}: gamma loop exit condition violated: "
                       f"{rec.gamma_final} > t*eta*||g||")
        if not 1 <= rec.grad_sample_size <= big_n:
            out.append(f"{tag}: gradient sample size {rec.grad_sample_size} "
                       f"outside [1, {big_n}]")
        if not 1 <= rec.hess_sample_size <= big_n:
            out.append(f"{tag}: Hessian sample size {rec.hess_sample_size} "
                       f"outside [1, {big_n}]")
        if not forced:
            expect = gradient_sample_size(rec.kappa_fg, rec.gamma_final,
                                          sub["delta_g"], n, big_n)
            if rec.grad_sample_size != expect:
                out.append(f"{tag}: recorded gradient sample size "
                           f"{rec.grad_sample_size} != recomputed {expect}")
    return out


def count_acceptance_violations(traces) -> int:
    """Count rejected true iterations at or below t_bar across traces."""
    total = 0
    for trace in traces:
        for line in audit_trace(trace):
            if "was rejected" in line:
                total += 1
    return total
