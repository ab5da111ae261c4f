"""Change-of-variable verification on simulated paths.

The time-independent formula replaces the classical second-order term by an
integral of the left derivative against the local-time slice; the
time-dependent formula uses the two-parameter local-time integral, computed
through the discrete summation-by-parts route (whose time increments
telescope exactly) with the direct corner sum reported alongside as a cross
check. Residuals are aggregated across seeds by the median.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .pathcore import MollifierSpec, SampledPath
from .stochastic import (LocalTimeField, PathBundle, decompose_local_time,
                         local_time_tanaka, simulate)
from .variation import p_variation_exact
from .young import YoungHypothesisError, integrate_f_dL
from .young2d import check_series_condition

__all__ = [
    "ItoReport",
    "verify_ito_time_independent",
    "verify_ito_time_dependent",
    "mollified_route_check",
    "median_residual_study",
    "DEFAULT_SCHEDULE",
]

# (n_steps, n_levels) pairs; the level grid refines with the time grid so
# neither error source dominates the refinement study
DEFAULT_SCHEDULE = ((2**10, 2**6), (2**12, 2**8), (2**14, 2**10))


@dataclass(frozen=True)
class ItoReport:
    """Named terms of the change-of-variable formula and their residual.

    residual = |fEnd - fStart - dsTerm - stochasticIntegral + localTimeTerm|
    with dsTerm treated as 0 when absent; refinement records (n_steps,
    residual) per schedule level, finest last.
    """

    terms: dict
    residual: float
    refinement: tuple
    seeds: tuple
    meta: dict

    def to_json(self):
        return {"terms": self.terms, "residual": self.residual,
                "refinement": [[int(n), r] for n, r in self.refinement],
                "seeds": list(self.seeds), "meta": self.meta}


def residual_from_terms(terms):
    ds = terms.get("dsTerm") or 0.0
    return abs(terms["fEnd"] - terms["fStart"] - ds
               - terms["stochasticIntegral"] + terms["localTimeTerm"])


def _level_grid(bundle, n_levels, margin_frac=0.01):
    lo, hi = float(bundle.x.min()), float(bundle.x.max())
    pad = margin_frac * (hi - lo)
    return np.linspace(lo - pad, hi + pad, n_levels + 1)


def _warn_if_growing(values_coarse, values_fine, exponent, what, slack=0.25):
    v1 = p_variation_exact(values_coarse, exponent).value
    v2 = p_variation_exact(values_fine, exponent).value
    if v1 > 0 and (v2 - v1) / v1 > slack:
        warnings.warn(
            f"{what}: grid {exponent}-variation grew {100 * (v2 - v1) / v1:.0f}% "
            f"under refinement; the asserted variation bound may fail",
            RuntimeWarning, stacklevel=3)


def _report_time_independent(f, grad_minus, bundle, n_levels, jump_threshold,
                             q_assert, check_variation):
    levels = _level_grid(bundle, n_levels)
    ltf = local_time_tanaka(bundle, levels,
                            time_indices=[len(bundle.times) - 1],
                            jump_threshold=jump_threshold)
    grad_vals = np.asarray(grad_minus(levels), dtype=float)
    if check_variation:
        _warn_if_growing(grad_vals[::2], grad_vals, q_assert,
                         "left-derivative integrand")
    dx = np.diff(bundle.x)
    stoch = math.fsum(np.asarray(grad_minus(bundle.x[:-1]), dtype=float) * dx)
    lt = integrate_f_dL(grad_minus, ltf.slice_at(-1, "ltilde"),
                        ltf.slice_at(-1, "h")).value
    terms = {"fEnd": float(f(bundle.x[-1])), "fStart": float(f(bundle.x[0])),
             "dsTerm": None, "stochasticIntegral": stoch,
             "localTimeTerm": lt}
    return terms, residual_from_terms(terms)


def verify_ito_time_independent(f, grad_minus, spec, schedule=DEFAULT_SCHEDULE,
                                replicate=0, jump_threshold=10.0,
                                q_assert=1.5, check_variation=True):
    """Residuals of f(X_T) = f(X_0) + sum grad-(X) dX - integral grad- dL.

    Left-point sums throughout; the trajectory is simulated once at the
    finest step count and observed at coarser strides for the refinement
    history. q_assert is the caller's variation exponent for grad_minus
    (must be < 2); a grid-growth heuristic warns when it looks violated.
    """
    if not q_assert < 2.0:
        raise YoungHypothesisError("grad_minus must be asserted of variation "
                                   "exponent q < 2")
    schedule = sorted(schedule)
    fine = simulate(spec.with_steps(schedule[-1][0]), replicate)
    refinement = []
    terms = res = None
    for n_steps, n_levels in schedule:
        b = fine.strided(schedule[-1][0] // n_steps)
        terms, res = _report_time_independent(
            f, grad_minus, b, n_levels, jump_threshold, q_assert,
            check_variation and n_steps == schedule[-1][0])
        refinement.append((n_steps, res))
    meta = {"kind": "time-independent", "x0": spec.x0, "T": spec.T,
            "q_assert": q_assert, "schedule": [list(s) for s in schedule]}
    return ItoReport(terms, res, tuple(refinement), (spec.seed,), meta)


def _lt_term_time_dependent(bundle, levels, grad_fn, jump_threshold,
                            chunk=128):
    """Two-parameter local-time term of the time-dependent formula.

    Streaming evaluation over level chunks of both routes:
      parts:   sum L~(s_j, x_i) ddg(j, i) - sum L~(T, x_i) dg(T, i)
      direct:  lower-left corner sum of g against ddL~
    The initial-row correction of the discrete identity vanishes because
    L(0, .) = 0. Jumps are detected on the final slice; when present, each
    jump column's time profile moves to the jump part, which integrates
    against g as a Lebesgue-Stieltjes sum, lower-left in time.
    """
    times = bundle.times
    x = bundle.x
    dx = np.diff(x)
    x0 = x[0]
    nl = len(levels)

    # final slice first: jump detection operates there
    phi_T = np.maximum(x[-1] - levels, 0.0) - np.maximum(x0 - levels, 0.0)
    final = phi_T - dx @ (x[:-1, None] > levels[None, :])
    final[levels < x.min()] = 0.0
    _, h_final = decompose_local_time(final, jump_threshold)
    jump_cols = np.flatnonzero(np.diff(h_final[0]) != 0.0) + 1
    profiles = {int(jc): _jump_profile(bundle, levels, int(jc))
                for jc in jump_cols}

    t1 = 0.0          # sum over j>=1, i>=1 of L~ ddg
    direct = 0.0      # lower-left corner sum of g against ddL~
    prev_L = None     # column i-1 of L~ over all times
    prev_g = None
    g_T = np.empty(nl)
    lt_final = np.empty(nl)
    phi0 = np.maximum(x0 - levels, 0.0)
    below = levels < x.min()
    for s in range(0, nl, chunk):
        lv = levels[s:s + chunk]
        ind = x[:-1, None] > lv[None, :]
        cum = np.cumsum(ind * dx[:, None], axis=0)
        Lc = np.maximum(x[:, None] - lv[None, :], 0.0) - phi0[s:s + chunk]
        Lc[1:] -= cum
        Lc[:, below[s:s + chunk]] = 0.0
        for jc, prof in profiles.items():
            affected = np.arange(s, s + Lc.shape[1]) >= jc
            if np.any(affected):
                Lc[:, affected] -= prof[:, None]
        gc = np.asarray(grad_fn(times[:, None], lv[None, :]), dtype=float)
        g_T[s:s + chunk] = gc[-1]
        lt_final[s:s + chunk] = Lc[-1]
        if prev_L is None:
            L2, G2 = Lc, gc
        else:
            L2 = np.concatenate([prev_L[:, None], Lc], axis=1)
            G2 = np.concatenate([prev_g[:, None], gc], axis=1)
        dgt = np.diff(G2, axis=0)
        ddg = dgt[:, 1:] - dgt[:, :-1]
        t1 += float(np.sum(L2[1:, 1:] * ddg))
        dLt = np.diff(L2, axis=0)
        ddL = dLt[:, 1:] - dLt[:, :-1]
        direct += float(np.sum(G2[:-1, :-1] * ddL))
        prev_L = Lc[:, -1].copy()
        prev_g = gc[:, -1].copy()
    t2 = float(np.sum(lt_final[1:] * np.diff(g_T)))
    ls_part = 0.0
    for jc, prof in profiles.items():
        g_col = np.asarray(grad_fn(times[:-1], np.full(len(times) - 1,
                                                       levels[jc])), dtype=float)
        ls_part += float(np.sum(g_col * np.diff(prof)))
    return t1 - t2 + ls_part, direct + ls_part


def _jump_profile(bundle, levels, col):
    """Time profile L(., levels[col]) - L(., levels[col-1]) of a jump cell."""
    dx = np.diff(bundle.x)
    out = np.zeros(len(bundle.times))
    for sign, lv in ((1.0, levels[col]), (-1.0, levels[col - 1])):
        cum = np.concatenate(([0.0], np.cumsum((bundle.x[:-1] > lv) * dx)))
        out += sign * (np.maximum(bundle.x - lv, 0.0)
                       - max(bundle.x[0] - lv, 0.0) - cum)
    return out


def _report_time_dependent(f, dt_minus, grad_minus, bundle, n_levels,
                           jump_threshold):
    levels = _level_grid(bundle, n_levels)
    times = bundle.times
    dx = np.diff(bundle.x)
    dt = np.diff(times)
    stoch = math.fsum(np.asarray(grad_minus(times[:-1], bundle.x[:-1]),
                                 dtype=float) * dx)
    ds = math.fsum(np.asarray(dt_minus(times[:-1], bundle.x[:-1]),
                              dtype=float) * dt)
    lt, lt_direct = _lt_term_time_dependent(bundle, levels, grad_minus,
                                            jump_threshold)
    terms = {"fEnd": float(f(times[-1], bundle.x[-1])),
             "fStart": float(f(times[0], bundle.x[0])),
             "dsTerm": ds, "stochasticIntegral": stoch,
             "localTimeTerm": lt, "localTimeTermDirect": lt_direct}
    return terms, residual_from_terms(terms)


def verify_ito_time_dependent(f, dt_minus, grad_minus, spec,
                              schedule=DEFAULT_SCHEDULE, replicate=0,
                              jump_threshold=10.0, gamma_assert=1.5,
                              pq_assert=(1.2, 1.0), force=False):
    """Residuals of the time-dependent formula with the two-parameter
    local-time term.

    The asserted exponents must satisfy gamma < 2 and the power-gauge series
    condition for (p, q); infeasible assertions refuse unless forced.
    """
    if not gamma_assert < 2.0:
        raise YoungHypothesisError("need gamma < 2 for the space variation")
    cond = check_series_condition(*pq_assert)
    if not cond.feasible and not force:
        raise YoungHypothesisError(
            f"series condition infeasible for p={pq_assert[0]}, q={pq_assert[1]}; "
            "pass force=True to proceed")
    schedule = sorted(schedule)
    fine = simulate(spec.with_steps(schedule[-1][0]), replicate)
    refinement = []
    terms = res = None
    for n_steps, n_levels in schedule:
        b = fine.strided(schedule[-1][0] // n_steps)
        terms, res = _report_time_dependent(f, dt_minus, grad_minus, b,
                                            n_levels, jump_threshold)
        refinement.append((n_steps, res))
    meta = {"kind": "time-dependent", "x0": spec.x0, "T": spec.T,
            "gamma_assert": gamma_assert, "pq_assert": list(pq_assert),
            "schedule": [list(s) for s in schedule]}
    return ItoReport(terms, res, tuple(refinement), (spec.seed,), meta)


def median_residual_study(verify, base_spec, seeds, **kwargs):
    """Run a verify function across seeds and aggregate medians per level.

    Returns (medians, matrix) where matrix[s, l] is seed s's residual at
    schedule level l. The median is the robust choice against the heavy
    tails produced by paths grazing a test function's singular point.
    """
    from dataclasses import replace

    rows = []
    for seed in seeds:
        rep = verify(spec=replace(base_spec, seed=int(seed)), **kwargs)
        rows.append([r for _, r in rep.refinement])
    matrix = np.asarray(rows)
    return np.median(matrix, axis=0), matrix


def _mollified_second_derivative_1d(f, n, spec):
    z, w = spec.nodes_weights
    coeff = spec.rho_second(z) * w

    def second(x):
        x = np.asarray(x, dtype=float)
        return n**2 * np.sum(coeff * f(x[..., None] - z / n), axis=-1)

    return second


def _mollified_dxx_2d(f, n, spec, chunk=2048):
    z, w = spec.nodes_weights
    c_rho = spec.rho(z) * w
    c_sec = spec.rho_second(z) * w

    def second(s, x):
        s = np.asarray(s, dtype=float)
        x = np.asarray(x, dtype=float)
        s, x = np.broadcast_arrays(s, x)
        out = np.empty(s.shape)
        flat_s, flat_x, flat_o = s.ravel(), x.ravel(), out.ravel()
        for lo in range(0, len(flat_s), chunk):
            sl = slice(lo, lo + chunk)
            xs_shift = flat_x[sl, None] - z / n
            acc = np.zeros(xs_shift.shape[0])
            for za, ca in zip(z, c_rho):
                ss = flat_s[sl, None] - za / n
                vals = np.where(ss < 0.0, 0.0, f(np.maximum(ss, 0.0), xs_shift))
                acc += ca * (vals @ c_sec)
            flat_o[sl] = n**2 * acc
        return out

    return second


def mollified_route_check(f, grad_minus, spec, n_schedule=(8, 32, 128),
                          n_levels=512, time_dependent=False, replicate=0,
                          moll_spec=None, jump_threshold=10.0):
    """Gap between the smoothed classical second-order term and the
    local-time route, per mollification order.

    For each n the classical term is 1/2 sum f_n''(X) d<M> with f_n'' from
    the kernel's second derivative; its limit target is minus the
    local-time term, so rows report (n, classical_term, gap) and the gap
    must shrink as n grows.
    """
    moll_spec = moll_spec or MollifierSpec(quadrature_nodes=96 if time_dependent
                                           else 512)
    fine = simulate(spec, replicate)
    levels = _level_grid(fine, n_levels)
    dqv = np.diff(fine.qv)
    if time_dependent:
        lt, _ = _lt_term_time_dependent(fine, levels, grad_minus,
                                        jump_threshold)
    else:
        ltf = local_time_tanaka(fine, levels,
                                time_indices=[len(fine.times) - 1],
                                jump_threshold=jump_threshold)
        lt = integrate_f_dL(grad_minus, ltf.slice_at(-1, "ltilde"),
                            ltf.slice_at(-1, "h")).value
    rows = []
    for n in n_schedule:
        if time_dependent:
            sec = _mollified_dxx_2d(f, n, moll_spec)
            vals = sec(fine.times[:-1], fine.x[:-1])
        else:
            sec = _mollified_second_derivative_1d(f, n, moll_spec)
            vals = sec(fine.x[:-1])
        classical = 0.5 * math.fsum(vals * dqv)
        rows.append((int(n), classical, abs(classical + lt)))
    return {"rows": rows, "local_time_term": lt}
