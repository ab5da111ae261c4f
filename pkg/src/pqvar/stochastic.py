"""Seeded simulation of continuous semimartingales and local-time estimation.

Randomness comes from a counter-based 64-bit generator (Philox) keyed by
(seed, replicate), so replicates are independent streams and every result is
reproducible bit for bit from its spec. Local times follow the half-free
Tanaka normalization ('tanaka-no-half'): the estimated L equals one half of
the classical semimartingale local time, and the occupation identity reads
integral phi(x) L_t^x dx = 1/2 integral_0^t phi(X_s) d<M>_s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .pathcore import SampledField, SampledPath

__all__ = [
    "SemimartingaleSpec",
    "PathBundle",
    "LocalTimeField",
    "simulate",
    "local_time_tanaka",
    "local_time_occupation",
    "occupation_identity_check",
    "decompose_local_time",
    "pvar_exponent_probe",
    "quantile_level_grid",
]

_trapz = getattr(np, "trapezoid", None) or np.trapz

CONVENTION = "tanaka-no-half"


@dataclass(frozen=True)
class SemimartingaleSpec:
    """Euler scheme inputs; drift and volatility are floats or callables (s, x)."""

    T: float = 1.0
    n_steps: int = 1024
    drift: object = 0.0
    volatility: object = 1.0
    x0: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.T <= 0:
            raise ValueError("SemimartingaleSpec: T must be positive")
        if self.n_steps < 1:
            raise ValueError("SemimartingaleSpec: n_steps must be >= 1")

    def with_steps(self, n_steps):
        return replace(self, n_steps=n_steps)


@dataclass(frozen=True, eq=False)
class PathBundle:
    """Simulated path with its martingale/bounded-variation split.

    x = x0 + m + v pointwise (the Euler increments are shared), qv is the
    accumulated squared volatility sum sigma^2 dt.
    """

    times: np.ndarray
    x: np.ndarray
    m: np.ndarray
    v: np.ndarray
    qv: np.ndarray
    spec: SemimartingaleSpec
    replicate: int = 0

    def path(self, which="x"):
        return SampledPath(self.times, getattr(self, which), meta=which)

    def strided(self, stride):
        """Coarser observation of the same trajectory (stride must divide)."""
        if (len(self.times) - 1) % stride:
            raise ValueError("stride must divide the number of steps")
        sl = slice(None, None, stride)
        return PathBundle(self.times[sl], self.x[sl], self.m[sl], self.v[sl],
                          self.qv[sl], self.spec, self.replicate)


def _rng(seed, replicate):
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, replicate & 0xFFFFFFFFFFFFFFFF],
                   dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def simulate(spec, replicate=0):
    """Euler stepping X_{k+1} = X_k + b dt + sigma dW, deterministic in
    (spec.seed, replicate)."""
    n = spec.n_steps
    dt = spec.T / n
    times = np.arange(n + 1) * dt
    dW = _rng(spec.seed, replicate).standard_normal(n) * math.sqrt(dt)
    b_const = not callable(spec.drift)
    s_const = not callable(spec.volatility)
    if b_const and s_const:
        b = float(spec.drift)
        s = float(spec.volatility)
        dm = s * dW
        dv = np.full(n, b * dt)
    else:
        dm = np.empty(n)
        dv = np.empty(n)
        x = spec.x0
        for k in range(n):
            t = times[k]
            bk = spec.drift(t, x) if callable(spec.drift) else spec.drift
            sk = spec.volatility(t, x) if callable(spec.volatility) else spec.volatility
            if not (math.isfinite(bk) and math.isfinite(sk)):
                raise ValueError("non-finite drift or volatility evaluation")
            dm[k] = sk * dW[k]
            dv[k] = bk * dt
            x = x + (dv[k] + dm[k])
    dx = dv + dm
    cum = np.concatenate(([0.0], np.cumsum(dx)))
    m = np.concatenate(([0.0], np.cumsum(dm)))
    v = np.concatenate(([0.0], np.cumsum(dv)))
    if s_const:
        dqv = np.full(n, float(spec.volatility) ** 2 * dt)
    else:
        dqv = np.empty(n)
        xs = spec.x0 + cum[:-1]
        for k in range(n):
            dqv[k] = spec.volatility(times[k], xs[k]) ** 2 * dt
    qv = np.concatenate(([0.0], np.cumsum(dqv)))
    return PathBundle(times, spec.x0 + cum, m, v, qv, spec, replicate)


@dataclass(frozen=True, eq=False)
class LocalTimeField:
    """Local time on a (time x level) grid with its continuous/jump split.

    L = ltilde + h identically on the grid; convention is fixed to
    'tanaka-no-half' (half the classical normalization).
    """

    times: np.ndarray
    levels: np.ndarray
    L: np.ndarray
    ltilde: np.ndarray
    h: np.ndarray
    convention: str = CONVENTION
    estimator: str = "tanaka"

    def final_slice(self, part="ltilde"):
        return SampledPath(self.levels, getattr(self, part)[-1])

    def slice_at(self, row, part="ltilde"):
        return SampledPath(self.levels, getattr(self, part)[row])

    def as_field(self, part="ltilde"):
        return SampledField(self.times, self.levels, getattr(self, part))

    def to_json(self):
        return {"times": self.times.tolist(), "levels": self.levels.tolist(),
                "L": self.L.tolist(), "ltilde": self.ltilde.tolist(),
                "h": self.h.tolist(), "convention": self.convention,
                "estimator": self.estimator}


def _time_rows(n_steps, time_indices, max_rows):
    if time_indices is None:
        rows = np.unique(np.round(
            np.linspace(0, n_steps, min(n_steps, max_rows) + 1)).astype(int))
    elif isinstance(time_indices, str) and time_indices == "all":
        rows = np.arange(n_steps + 1)
    else:
        rows = np.asarray(time_indices, dtype=int)
        rows = np.where(rows < 0, rows + n_steps + 1, rows)
        rows = np.unique(rows)
    return rows


def _check_levels(bundle, levels):
    levels = np.asarray(levels, dtype=float)
    if np.any(np.diff(levels) <= 0):
        raise ValueError("levels must be strictly increasing")
    if levels[0] > bundle.x.min() or levels[-1] < bundle.x.max():
        raise ValueError("level grid does not cover the path range")
    return levels


def local_time_tanaka(bundle, levels, time_indices=None, max_rows=128,
                      jump_threshold=10.0, chunk=256):
    """Discrete Tanaka estimate
    L(t_j, x) = (X_{t_j} - x)^+ - (X_0 - x)^+ - sum_{k<j} 1{X_{t_k} > x} dX_k.

    Strict inequality with left-endpoint evaluation on each time cell. Rows
    below the path minimum are zeroed explicitly: the three terms cancel
    algebraically there, zeroing removes the rounding residue.
    """
    levels = _check_levels(bundle, levels)
    n = len(bundle.times) - 1
    rows = _time_rows(n, time_indices, max_rows)
    dx = np.diff(bundle.x)
    x0 = bundle.x[0]
    L = np.empty((len(rows), len(levels)))
    for s in range(0, len(levels), chunk):
        lv = levels[s:s + chunk]
        ind = bundle.x[:-1, None] > lv[None, :]
        cum = np.cumsum(ind * dx[:, None], axis=0)
        for r, j in enumerate(rows):
            hat = cum[j - 1] if j > 0 else np.zeros(len(lv))
            L[r, s:s + chunk] = (np.maximum(bundle.x[j] - lv, 0.0)
                                 - np.maximum(x0 - lv, 0.0) - hat)
    L[:, levels < bundle.x.min()] = 0.0
    ltilde, h = decompose_local_time(L, jump_threshold)
    return LocalTimeField(bundle.times[rows], levels, L, ltilde, h)


def local_time_occupation(bundle, levels, eps, time_indices=None,
                          max_rows=128, jump_threshold=10.0, chunk=256):
    """Band-occupation estimate L(t, x) ~ (1/(4 eps)) sum 1{|X-x|<eps} d<M>;
    the extra 1/2 keeps the Tanaka normalization."""
    if eps <= 0:
        raise ValueError("local_time_occupation: eps must be positive")
    levels = _check_levels(bundle, levels)
    spacing = float(np.max(np.diff(levels)))
    if eps <= spacing:
        raise ValueError("local_time_occupation: eps must exceed the level spacing")
    n = len(bundle.times) - 1
    rows = _time_rows(n, time_indices, max_rows)
    dqv = np.diff(bundle.qv)
    L = np.empty((len(rows), len(levels)))
    for s in range(0, len(levels), chunk):
        lv = levels[s:s + chunk]
        ind = np.abs(bundle.x[:-1, None] - lv[None, :]) < eps
        cum = np.cumsum(ind * dqv[:, None], axis=0)
        for r, j in enumerate(rows):
            L[r, s:s + chunk] = cum[j - 1] / (4.0 * eps) if j > 0 else 0.0
    ltilde, h = decompose_local_time(L, jump_threshold)
    fld = LocalTimeField(bundle.times[rows], levels, L, ltilde, h,
                         estimator="occupation")
    return fld


def decompose_local_time(L, jump_threshold=10.0):
    """Split L into a continuous part and a cumulative-jump part.

    Level-axis jumps are detected on the final time row where the increment
    exceeds jump_threshold times the robust (MAD) increment scale; each
    detected cell contributes its full time profile to h. Continuous
    simulations are expected to produce h identically zero.
    """
    L = np.asarray(L, dtype=float)
    if L.ndim == 1:
        L = L[None, :]
    h = np.zeros_like(L)
    if not math.isfinite(jump_threshold):
        return L - h, h
    d = np.diff(L[-1])
    if len(d) == 0:
        return L - h, h
    mad = np.median(np.abs(d - np.median(d)))
    scale = 1.4826 * mad
    floor = 1e-12 * max(1.0, float(np.max(np.abs(L))))
    hits = np.flatnonzero((np.abs(d) > jump_threshold * scale)
                          & (np.abs(d) > floor))
    for i in hits:
        profile = L[:, i + 1] - L[:, i]
        h[:, i + 1:] += profile[:, None]
    return L - h, h


def occupation_identity_check(phi, ltf, bundle, row=-1):
    """Residual of the occupation identity at one time row.

    lhs integrates phi against the local-time slice by the trapezoid rule;
    rhs is half the forward sum of phi(X) against the quadratic variation up
    to that time. Returns (lhs, rhs, |lhs - rhs|).
    """
    t = float(ltf.times[row])
    slice_L = ltf.L[row]
    lhs = float(_trapz(phi(ltf.levels) * slice_L, ltf.levels))
    j = int(np.searchsorted(bundle.times, t, side="left"))
    rhs = 0.5 * math.fsum(np.asarray(phi(bundle.x[:j]), dtype=float)
                          * np.diff(bundle.qv[:j + 1]))
    return lhs, rhs, abs(lhs - rhs)


def quantile_level_grid(x, n_levels):
    """Occupation-adapted level grid: path quantiles, uniform fallback if the
    quantiles fail to be strictly increasing."""
    pts = np.quantile(np.asarray(x, dtype=float), np.linspace(0.0, 1.0, n_levels + 1))
    if np.all(np.diff(pts) > 0):
        return pts
    return np.linspace(float(np.min(x)), float(np.max(x)), n_levels + 1)


@dataclass(frozen=True)
class ProbeReport:
    level_counts: tuple
    values: dict          # p -> tuple of variation values per level
    verdicts: dict        # p -> 'stabilizing' | 'growing'
    relative_changes: dict

    def to_json(self):
        return {"level_counts": list(self.level_counts),
                "values": {str(p): list(v) for p, v in self.values.items()},
                "verdicts": {str(p): v for p, v in self.verdicts.items()},
                "relative_changes": {str(p): r for p, r in
                                     self.relative_changes.items()}}


def pvar_exponent_probe(bundle, p_list=(1.5, 3.0),
                        level_counts=(64, 128, 256, 512, 1024),
                        spacing="quantile", rel_threshold=0.10):
    """Level-axis variation of the final local-time slice on nested grids.

    The finest grid is occupation-adapted (path quantiles) by default and
    coarser grids are strides of it, so the grids are nested and the exact
    grid supremum is nondecreasing under refinement. Verdict per exponent
    compares the last two levels against the relative-change threshold.
    """
    from .variation import p_variation_exact

    level_counts = sorted(int(c) for c in level_counts)
    if len(level_counts) < 3:
        raise ValueError("pvar_exponent_probe: need at least 3 refinement levels")
    finest = level_counts[-1]
    for c in level_counts:
        if finest % c:
            raise ValueError("level counts must divide the finest count")
    if spacing == "quantile":
        grid = quantile_level_grid(bundle.x, finest)
    else:
        lo, hi = float(bundle.x.min()), float(bundle.x.max())
        pad = 0.01 * (hi - lo)
        grid = np.linspace(lo - pad, hi + pad, finest + 1)
    ltf = local_time_tanaka(bundle, grid, time_indices=[len(bundle.times) - 1],
                            jump_threshold=math.inf)
    slice_fine = ltf.L[-1]
    values, verdicts, rels = {}, {}, {}
    for p in p_list:
        vals = []
        for c in level_counts:
            stride = finest // c
            vals.append(p_variation_exact(slice_fine[::stride], p).value)
        rel = abs(vals[-1] - vals[-2]) / max(vals[-2], 1e-300)
        values[p] = tuple(vals)
        rels[p] = rel
        verdicts[p] = "stabilizing" if rel <= rel_threshold else "growing"
    return ProbeReport(tuple(level_counts), values, verdicts, rels)
