"""Two-parameter Young integration over product partitions.

Riemann sums evaluate the integrand at a fixed corner of every cell (lower
left for the forward integral, upper right for the backward one) against
double increments of the integrator. Partitions always include the caller's
jump sets, refinement is dyadic in both axes simultaneously, and verdicts
are Cauchy-gap based.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .pathcore import Partition1D, SampledField
from .variation import ConvexGauge, uniform_axis_variation, _dp_sup
from .young import IntegralResult, YoungHypothesisError, _finish

__all__ = [
    "SeriesCondition",
    "JumpSets",
    "check_series_condition",
    "young_integral_2d",
    "young_integral_2d_backward",
    "dyadic_refinement_trace",
    "summation_by_parts_2d",
    "dominated_convergence_test",
]


@dataclass(frozen=True)
class SeriesCondition:
    """Feasibility record for the power-gauge double series test.

    For gauges u^p (inner) and u^q (outer) the splitting exponent alpha must
    satisfy 2(1 - 1/p) < alpha < 1/(pq); such an alpha exists iff
    2q + 1 > 2pq. The recorded partial sums use the slack-adjusted exponents
    alpha/(2 + delta) + 1/p and (1 - alpha) + 1/(pq).
    """

    p: float
    q: float
    delta: float
    feasible: bool
    alpha: float | None
    alpha_interval: tuple
    effective_delta: float
    partial_sums: tuple
    tail_bound: float
    gamma: float | None = None

    def to_json(self):
        return {"p": self.p, "q": self.q, "delta": self.delta,
                "gamma": self.gamma, "feasible": self.feasible,
                "alpha": self.alpha,
                "alpha_interval": list(self.alpha_interval),
                "effective_delta": self.effective_delta,
                "partial_sums": [list(t) for t in self.partial_sums],
                "tail_bound": self.tail_bound}


@dataclass(frozen=True)
class JumpSets:
    """Axis points that every integration partition must contain."""

    H: tuple = ()
    Hprime: tuple = ()

    @classmethod
    def detect(cls, field, epsilon, gauges=None):
        from .variation import detect_large_jumps
        return cls(*detect_large_jumps(field, epsilon, gauges))


def _partial_power_sums(a, b, n_max):
    """Checkpointed partial sums of (sum n^-a)(sum m^-b) plus an integral
    tail bound for the full double series."""
    n = np.arange(1, n_max + 1, dtype=float)
    ca = np.cumsum(n**-a)
    cb = np.cumsum(n**-b)
    checkpoints = sorted({10, 100, n_max} | {n_max // 10}) if n_max >= 100 else [n_max]
    partial = tuple((int(N), float(ca[N - 1] * cb[N - 1]))
                    for N in checkpoints if 1 <= N <= n_max)
    if a > 1.0 and b > 1.0:
        tail_a = n_max ** (1.0 - a) / (a - 1.0)
        tail_b = n_max ** (1.0 - b) / (b - 1.0)
        tail = float((ca[-1] + tail_a) * (cb[-1] + tail_b))
    else:
        tail = math.inf
    return partial, tail


def check_series_condition(p, q, delta=0.25, n_max=1000, gamma=None):
    """Power-gauge feasibility of the two-parameter convergence series.

    Feasible exactly when 2q + 1 > 2pq. The returned alpha is the midpoint
    of the delta-adjusted admissible interval; delta is halved as needed so
    the adjusted interval stays nonempty (always possible when feasible).
    """
    if p < 1.0 or q < 1.0:
        raise ValueError("check_series_condition: p and q must be >= 1")
    if delta < 0.0:
        raise ValueError("check_series_condition: delta must be >= 0")
    if n_max < 100:
        raise ValueError("check_series_condition: n_max must be >= 100")
    lo = 2.0 * (1.0 - 1.0 / p)
    hi = 1.0 / (p * q)
    feasible = 2.0 * q + 1.0 > 2.0 * p * q
    if not feasible:
        return SeriesCondition(p, q, delta, False, None, (lo, hi), delta,
                               (), math.inf, gamma)
    eff = delta
    while (2.0 + eff) * (1.0 - 1.0 / p) >= hi and eff > 1e-12:
        eff /= 2.0
    adj_lo = (2.0 + eff) * (1.0 - 1.0 / p)
    if adj_lo >= hi:                      # p == 1 never lands here (lo == 0)
        eff = 0.0
        adj_lo = lo
    alpha = 0.5 * (adj_lo + hi)
    a = alpha / (2.0 + eff) + 1.0 / p
    b = (1.0 - alpha) + 1.0 / (p * q)
    partial, tail = _partial_power_sums(a, b, n_max)
    return SeriesCondition(p, q, delta, True, alpha, (lo, hi), eff,
                           partial, tail, gamma)


# ---------------------------------------------------------------------------
# Riemann-sum engine.

def _axis_points(lo, hi, n, forced):
    pts = np.linspace(lo, hi, n + 1)
    if forced:
        pts = np.unique(np.concatenate([pts, np.asarray(forced, dtype=float)]))
        if pts[0] < lo - 1e-12 or pts[-1] > hi + 1e-12:
            raise ValueError("jump points fall outside the integration rectangle")
    return pts


def _grid_level_indices(n_points, n_target, forced_idx):
    idx = np.unique(np.round(np.linspace(0, n_points - 1, n_target + 1)).astype(int))
    if forced_idx:
        idx = np.unique(np.concatenate([idx, np.asarray(forced_idx, dtype=int)]))
    return idx

def _forced_indices(axis, forced_values):
    out = []
    for v in forced_values:
        i = int(np.argmin(np.abs(axis - v)))
        if abs(axis[i] - v) > 1e-9 * max(1.0, abs(v)):
            raise ValueError(f"jump point {v} is not representable on the grid")
        out.append(i)
    return out


def _corner_sum(F, G, px, py, corner):
    xm, ym = np.meshgrid(px, py, indexing="ij")
    Gm = G(xm, ym) if callable(G) else G
    dd = Gm[1:, 1:] - Gm[:-1, 1:] - Gm[1:, :-1] + Gm[:-1, :-1]
    if corner == "lower-left":
        if callable(F):
            Fm = F(xm[:-1, :-1], ym[:-1, :-1])
        else:
            Fm = F[:-1, :-1]
    else:
        if callable(F):
            Fm = F(xm[1:, 1:], ym[1:, 1:])
        else:
            Fm = F[1:, 1:]
    s = float(np.sum(Fm * dd))
    if not math.isfinite(s):
        raise ValueError("non-finite Riemann sum")
    return s


def _integrate_2d(F, G, rect, jumps, schedule, tol, corner,
                  pq=None, force=False):
    if pq is not None:
        cond = check_series_condition(*pq)
        if not cond.feasible and not force:
            raise YoungHypothesisError(
                f"series condition infeasible for p={pq[0]}, q={pq[1]} "
                f"(needs 2q + 1 > 2pq); pass force=True to integrate anyway")
    jumps = jumps or JumpSets()
    F_sampled = isinstance(F, SampledField)
    G_sampled = isinstance(G, SampledField)
    levels = []
    if F_sampled or G_sampled:
        base = G if G_sampled else F
        for other in (F, G):
            if isinstance(other, SampledField):
                if not (np.array_equal(other.xs, base.xs)
                        and np.array_equal(other.ys, base.ys)):
                    raise ValueError("sampled F and G need identical grids")
        fx = _forced_indices(base.xs, jumps.H)
        fy = _forced_indices(base.ys, jumps.Hprime)
        nx, ny = len(base.xs), len(base.ys)
        if schedule is None:
            schedule = []
            n = 8
            while n < max(nx, ny) - 1:
                schedule.append(n)
                n *= 2
            schedule.append(max(nx, ny) - 1)
        for n in schedule:
            ix = _grid_level_indices(nx, min(n, nx - 1), fx)
            iy = _grid_level_indices(ny, min(n, ny - 1), fy)
            px, py = base.xs[ix], base.ys[iy]
            Gm = G.values[np.ix_(ix, iy)] if G_sampled else G
            Fm = F.values[np.ix_(ix, iy)] if F_sampled else F
            levels.append((len(ix) - 1, _corner_sum(Fm, Gm, px, py, corner)))
    else:
        if rect is None:
            raise ValueError("callable inputs need an integration rectangle")
        (x0, x1), (y0, y1) = rect
        schedule = schedule or [2**k for k in range(4, 11)]
        for n in schedule:
            px = _axis_points(x0, x1, n, jumps.H)
            py = _axis_points(y0, y1, n, jumps.Hprime)
            levels.append((n, _corner_sum(F, G, px, py, corner)))
    return _finish(levels, tol)


def young_integral_2d(F, G, rect=None, jumps=None, schedule=None, tol=1e-3,
                      pq=None, force=False):
    """Forward two-parameter Young integral: lower-left corner sums of F
    against double increments of G over product partitions containing the
    jump sets, refined dyadically, with a Cauchy-gap verdict."""
    return _integrate_2d(F, G, rect, jumps, schedule, tol, "lower-left",
                         pq, force)


def young_integral_2d_backward(F, G, rect=None, jumps=None, schedule=None,
                               tol=1e-3, pq=None, force=False):
    """Backward variant: F evaluated at the upper-right corner of each cell."""
    return _integrate_2d(F, G, rect, jumps, schedule, tol, "upper-right",
                         pq, force)


# ---------------------------------------------------------------------------
# Variation-equalized refinement diagnostic.

def _cumulative_uniform_variation(values, gauge):
    """omega[k] = max over lines of the exact variation of the prefix [0..k]."""
    nx = values.shape[0]
    omega = np.zeros(nx)
    for line in values.T:
        _, _, best = _dp_sup(line, gauge.phi)
        omega = np.maximum(omega, best)
    return omega


def _equal_mass_partitions(omega, pmax):
    """Nested partitions splitting any cell whose omega-mass exceeds
    2^-p * total; one bisection point per offending pair and level."""
    total = omega[-1]
    parts = [[0, len(omega) - 1]]
    for p in range(pmax):
        cur = parts[-1]
        nxt = [cur[0]]
        for a, b in zip(cur, cur[1:]):
            if omega[b] - omega[a] > 2.0 ** -(p + 1) * total and b - a > 1:
                mid_mass = 0.5 * (omega[a] + omega[b])
                k = a + int(np.argmin(np.abs(omega[a + 1:b] - mid_mass))) + 1
                nxt.append(k)
            nxt.append(b)
        parts.append(nxt)
    return [Partition1D(tuple(pp)) for pp in parts]


def dyadic_refinement_trace(F, G, pmax, qmax, rect=None, n_grid=128,
                            gauge_x=None, gauge_y=None):
    """Matrix of corner sums S(E_p, E'_q) on variation-equalized partitions.

    E_p splits cells by equal mass of the cumulative uniform variation of F
    along x (E'_q along y). Returns the sum matrix and its double first
    differences; diagnostic only.
    """
    gauge_x = gauge_x or ConvexGauge.power(1.0)
    gauge_y = gauge_y or ConvexGauge.power(1.0)
    if isinstance(F, SampledField):
        xs, ys = F.xs, F.ys
        Fv = F.values
        Gv = G.values if isinstance(G, SampledField) else G(
            *np.meshgrid(xs, ys, indexing="ij"))
    else:
        if rect is None:
            raise ValueError("callable inputs need a rectangle")
        (x0, x1), (y0, y1) = rect
        xs = np.linspace(x0, x1, n_grid + 1)
        ys = np.linspace(y0, y1, n_grid + 1)
        xm, ym = np.meshgrid(xs, ys, indexing="ij")
        Fv = F(xm, ym)
        Gv = G.values if isinstance(G, SampledField) else G(xm, ym)
    omega_x = _cumulative_uniform_variation(Fv, gauge_x)
    omega_y = _cumulative_uniform_variation(Fv.T, gauge_y)
    ex = _equal_mass_partitions(omega_x, pmax)
    ey = _equal_mass_partitions(omega_y, qmax)
    S = np.zeros((pmax + 1, qmax + 1))
    for i, px in enumerate(ex):
        for j, py in enumerate(ey):
            ix = np.asarray(px.indices)
            iy = np.asarray(py.indices)
            S[i, j] = _corner_sum(Fv[np.ix_(ix, iy)], Gv[np.ix_(ix, iy)],
                                  xs[ix], ys[iy], "lower-left")
    dd = S[1:, 1:] - S[:-1, 1:] - S[1:, :-1] + S[:-1, :-1] if pmax and qmax \
        else np.zeros((0, 0))
    return {"sums": S, "double_differences": dd,
            "x_partitions": ex, "y_partitions": ey}


# ---------------------------------------------------------------------------
# Discrete summation by parts for local-time style fields.

def summation_by_parts_2d(g, ltilde):
    """Exact discrete identity between the two corner sums.

    lhs sums g at the lower-left corner against double increments of L; rhs
    sums L at the upper-right corner against double increments of g, minus
    the final-row correction and plus the initial-row correction. The
    initial-row term vanishes for genuine local-time fields (zero first
    row); it is kept so the identity is exact for arbitrary fields with zero
    boundary columns. Residual is floating-point rounding only.
    """
    if not (np.array_equal(g.xs, ltilde.xs) and np.array_equal(g.ys, ltilde.ys)):
        raise ValueError("summation_by_parts_2d: grids must match")
    L = ltilde.values        # indexed (time, space)
    gv = g.values
    if np.any(L[:, 0] != 0.0) or np.any(L[:, -1] != 0.0):
        raise ValueError("summation_by_parts_2d: boundary columns of the "
                         "local-time field must vanish (compact support)")
    ddL = L[1:, 1:] - L[:-1, 1:] - L[1:, :-1] + L[:-1, :-1]
    lhs = float(np.sum(gv[:-1, :-1] * ddL))
    ddg = gv[1:, 1:] - gv[:-1, 1:] - gv[1:, :-1] + gv[:-1, :-1]
    rhs = (float(np.sum(L[1:, 1:] * ddg))
           - float(np.sum(L[-1, 1:] * np.diff(gv[-1, :])))
           + float(np.sum(L[0, 1:] * np.diff(gv[0, :]))))
    return lhs, rhs, abs(lhs - rhs)


# ---------------------------------------------------------------------------
# Dominated-convergence harness.

def _sup_diff(fa, fb, rect, n_points, seed=7):
    rng = np.random.default_rng(seed)
    (x0, x1), (y0, y1) = rect
    xs = rng.uniform(x0, x1, n_points)
    ys = rng.uniform(y0, y1, n_points)
    va = fa(xs, ys) if callable(fa) else None
    vb = fb(xs, ys) if callable(fb) else None
    if va is None or vb is None:
        return None
    return float(np.max(np.abs(va - vb)))


def dominated_convergence_test(F, G, F_seq=None, G_seq=None, rect=None,
                               jumps=None, schedule=None, tol=1e-6,
                               check_points=1000, check_grid=17,
                               variation_slack=10.0):
    """Differences |I(F_k, G_k) - I(F, G)| along a sequence of integrands.

    Spot checks: uniform convergence at `check_points` random points (the
    last element must be at least as close as the first, or below tol) and
    uniform variation bounds of the sequence on a coarse common grid.
    Verdict 'decaying' when the final difference is below the first tenth of
    the first difference or below tol.
    """
    if F_seq is None and G_seq is None:
        raise ValueError("need at least one of F_seq, G_seq")
    k_count = len(F_seq) if F_seq is not None else len(G_seq)

    if rect is not None:
        seq, ref = (F_seq, F) if F_seq is not None else (G_seq, G)
        if callable(ref):
            sups = [_sup_diff(fk, ref, rect, check_points) for fk in seq]
            sups = [s for s in sups if s is not None]
            if sups and not (sups[-1] <= sups[0] + 1e-15 or sups[-1] < tol):
                raise ValueError("uniform-convergence spot check failed: "
                                 f"sup|diff| grew from {sups[0]:.3g} to {sups[-1]:.3g}")
        # coarse-grid variation uniformity spot check
        (x0, x1), (y0, y1) = rect
        gx = np.linspace(x0, x1, check_grid)
        gy = np.linspace(y0, y1, check_grid)
        xm, ym = np.meshgrid(gx, gy, indexing="ij")
        gauge = ConvexGauge.power(1.0)
        bounds = []
        for fk in seq:
            if callable(fk):
                fld = SampledField(gx, gy, fk(xm, ym))
                bounds.append(max(uniform_axis_variation(fld, "x", gauge),
                                  uniform_axis_variation(fld, "y", gauge)))
        if bounds and not all(np.isfinite(bounds)):
            raise ValueError("variation spot check produced non-finite bounds")
        if bounds:
            med = float(np.median(bounds))
            if med > 0 and max(bounds) > variation_slack * med:
                raise ValueError("variation spot check: bounds not uniform in k")

    base = young_integral_2d(F, G, rect=rect, jumps=jumps, schedule=schedule,
                             tol=tol)
    rows = []
    for k in range(k_count):
        Fk = F_seq[k] if F_seq is not None else F
        Gk = G_seq[k] if G_seq is not None else G
        res = young_integral_2d(Fk, Gk, rect=rect, jumps=jumps,
                                schedule=schedule, tol=tol)
        rows.append((k, abs(res.value - base.value)))
    final, first = rows[-1][1], rows[0][1]
    verdict = "decaying" if (final < 0.1 * first or final < tol) else "not-decaying"
    return {"differences": rows, "verdict": verdict, "base_value": base.value}
