"""Approach curves ("wings") toward a base point and classification of g(t) as t -> 0+."""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import mpmath
import numpy as np

from .expr import DomainError, Expr, evaluate
from .strata import (
    ImplicitStratum,
    ParametricStratum,
    PointStratum,
    Stratum,
    _ineq_ok,
    _min_norm_step,
)

__all__ = [
    "WingNotFound",
    "TooFewSamples",
    "WingSample",
    "LimitVerdict",
    "DeclaredWing",
    "geometric_grid",
    "find_approach_point",
    "sample_wing",
    "sample_declared_wing",
    "classify_limit",
    "secant_direction",
    "exponent_patterns",
    "samples_to_csv",
]

CONVERGES = "ConvergesToZero"
BOUNDED = "Bounded"
DIVERGES = "Diverges"
INCONCLUSIVE = "Inconclusive"


class WingNotFound(RuntimeError):
    pass


class TooFewSamples(ValueError):
    pass


def geometric_grid(t0: float = 0.1, q: float = 0.6, m: int = 24) -> np.ndarray:
    if not (t0 > 0 and 0 < q < 1 and m >= 1):
        raise ValueError(f"bad grid t0={t0} q={q} m={m}")
    return t0 * q ** np.arange(m)


@dataclass
class WingSample:
    """Points x(t_i) on the big stratum approaching ``base``, with feet y(t_i)
    on the small one."""

    base: np.ndarray
    t: np.ndarray
    points: list
    feet: list
    preimages: list | None = None
    kind: str = "random"
    label: str = ""

    def __len__(self) -> int:
        return len(self.t)

    def distances(self) -> list:
        return [_dist(x, self.base) for x in self.points]


@dataclass
class LimitVerdict:
    cls: str
    slope: float
    bound: float
    residual: float
    n: int

    def as_dict(self) -> dict:
        return {"class": self.cls, "slope": self.slope, "bound": self.bound, "residual": self.residual, "n": self.n}


@dataclass(frozen=True)
class DeclaredWing:
    """Scene-supplied approach family rho(y, t) for a stratum pair.

    ``point`` gives the coordinates of the approaching point as expressions in
    the base point coordinates (variables 0..n-1) and the parameter t
    (variable n). ``param`` optionally gives the parameter-space preimage when
    the big stratum is parametric. The foot of every sample is the base point.
    Declared wings are evaluated in extended precision.
    """

    point: tuple[Expr, ...]
    param: tuple[Expr, ...] | None = None
    t_values: tuple[float, ...] | None = None
    grid: tuple[float, float, int] | None = None
    label: str = "declared"
    texts: dict = field(default_factory=dict, compare=False)

    def parameters(self, default_grid) -> list[float]:
        if self.t_values is not None:
            return list(self.t_values)
        t0, q, m = self.grid if self.grid is not None else default_grid
        return list(geometric_grid(t0, q, int(m)))


def _dist(a, b):
    d = np.asarray(a) - np.asarray(b)
    if d.dtype == object:
        return mpmath.sqrt(mpmath.fsum(v * v for v in d))
    return float(np.linalg.norm(d))


def secant_direction(x, y) -> np.ndarray:
    """(x - y)/|x - y|."""
    d = np.asarray(x) - np.asarray(y)
    n = _dist(x, y)
    if n == 0:
        raise ValueError("secant direction needs two distinct points")
    return d / n


def exponent_patterns(n: int) -> list[tuple[int, ...]]:
    """Per-coordinate exponents in {1, 2} with at least one 1; linear first."""
    pats = [p for p in itertools.product((1, 2), repeat=n) if 1 in p]
    pats.sort(key=lambda p: (sum(p), [-v for v in p]))
    return pats


# ---------------------------------------------------------------------------
# point finding


def _implicit_approach(s: ImplicitStratum, y0, t, direction, pattern, frame, hint=None):
    scale_s = t * hint.get("ratio", 1.0) if hint is not None else t
    x = None
    r = 0.0
    for attempt in range(8):
        local = direction * scale_s ** np.asarray(pattern, dtype=float)
        c = y0 + frame @ local
        if s.equations:
            x, ok = s.newton(c, scale=t)
            if not ok:
                return None
            for _ in range(2):
                # near a singular set the stopping rule leaves errors of the order of
                # the transverse distance times 1e-12; polish past it
                x = x + _min_norm_step(s.jacobian(x), s.residuals(x))
        else:
            x = c
        if attempt == 0 and not _ineq_ok(s.inequalities, x):
            # wrong side of a sign condition; rescaling rarely helps
            return None
        r = float(np.linalg.norm(x - y0))
        if r == 0 or not np.isfinite(r):
            return None
        if 0.8 * t <= r <= 1.25 * t:
            break
        scale_s *= t / r
    if not (t / 2 <= r <= 2 * t):
        return None
    if not _ineq_ok(s.inequalities, x) or not s.is_regular(x):
        return None
    if hint is not None:
        hint["ratio"] = scale_s / t
    return x, None


def _closed_preimage(s: ParametricStratum, y0):
    cache = s.__dict__.setdefault("_preimage_cache", {})
    key = tuple(np.asarray(y0, dtype=float))
    if key not in cache:
        if len(cache) > 4096:
            cache.clear()
        cache[key] = s.invert(y0, closed=True)
    return cache[key]


def _parametric_approach(s: ParametricStratum, y0, t, direction):
    y0 = np.asarray(y0, dtype=float)
    u_star, d = _closed_preimage(s, y0)
    if u_star is None or d > 1e-6 * max(1.0, float(np.linalg.norm(y0))):
        return None
    k = s.dim
    w = np.array(direction[:k], dtype=float) if len(direction) >= k else np.ones(k)
    if not np.any(w):
        w = np.ones(k)
    for j, (a, b) in enumerate(s.domain):
        if u_star[j] - a <= 1e-9 * (b - a):
            w[j] = abs(w[j]) or 1.0
        elif b - u_star[j] <= 1e-9 * (b - a):
            w[j] = -(abs(w[j]) or 1.0)
    w = w / np.linalg.norm(w)
    smax = math.inf
    for j, (a, b) in enumerate(s.domain):
        if w[j] > 0:
            smax = min(smax, (b - u_star[j]) / w[j])
        elif w[j] < 0:
            smax = min(smax, (a - u_star[j]) / w[j])
    if not math.isfinite(smax) or smax <= 0:
        return None

    def gap(sig):
        u = u_star + sig * w
        if not s.in_domain(u):
            return None
        try:
            return float(np.linalg.norm(s.phi(u).astype(float) - y0)) - t
        except DomainError:
            return None

    hi = smax * (1 - 1e-9)
    ghi = gap(hi)
    if ghi is None or ghi < 0:
        return None
    lo = hi
    for _ in range(400):
        lo /= 2
        glo = gap(lo)
        if glo is None:
            return None
        if glo < 0:
            break
    else:
        return None
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        gm = gap(mid)
        if gm is None:
            return None
        if gm < 0:
            lo = mid
        else:
            hi = mid
        if hi / lo - 1 < 1e-14:
            break
    u = u_star + hi * w
    x = s.phi(u).astype(float)
    return x, u


def find_approach_point(s: Stratum, y0, t: float, direction, pattern, frame=None, hint=None):
    """A point of ``s`` at distance about ``t`` from ``y0`` (within [t/2, 2t]).

    ``direction`` is a unit vector in the frame coordinates; ``pattern`` gives
    the power of the step size used on each frame coordinate, so (2, 1, 2)
    approaches along x ~ s^2, y ~ s, z ~ s^2. ``hint`` is a dict carried
    along one wing that remembers the step size that worked last time.
    Returns (point, preimage) or None.
    """
    y0 = np.asarray(y0, dtype=float)
    direction = np.asarray(direction, dtype=float)
    if isinstance(s, PointStratum):
        return None
    if isinstance(s, ParametricStratum):
        return _parametric_approach(s, y0, t, direction)
    frame = np.eye(len(y0)) if frame is None else np.asarray(frame, dtype=float)
    return _implicit_approach(s, y0, t, direction, pattern, frame, hint)


def _foot(gamma: Stratum, x, y0, scale: float):
    if isinstance(gamma, PointStratum):
        return np.asarray(y0, dtype=float)
    p = gamma.project(x, scale=scale)
    if p is None:
        return None
    return np.asarray(p, dtype=float)


def sample_wing(
    gamma: Stratum,
    gamma_p: Stratum,
    y0,
    grid=(0.1, 0.6, 24),
    seed: int = 0,
    pattern: Sequence[int] | None = None,
    direction=None,
    frame=None,
) -> WingSample:
    """One sampled approach curve in ``gamma_p`` toward ``y0`` on ``gamma``.

    Sign variants of the direction are tried until a point lands in
    ``gamma_p``; the first accepted variant is kept for the rest of the grid.
    Raises WingNotFound when more than half of the grid fails.
    """
    y0 = np.asarray(y0, dtype=float)
    n = len(y0)
    rng = np.random.default_rng(seed)
    if direction is None:
        direction = rng.standard_normal(n)
    direction = np.asarray(direction, dtype=float)
    direction = direction / np.linalg.norm(direction)
    pattern = tuple(pattern) if pattern is not None else (1,) * n
    ts = geometric_grid(*grid) if not isinstance(grid, np.ndarray) else grid
    masks = [np.array([(-1.0) ** ((k >> j) & 1) for j in range(n)]) for k in range(2 ** n)]
    order = list(range(len(masks)))
    kept_t, pts, feet, pres = [], [], [], []
    last = math.inf
    failures = 0
    hints = [dict() for _ in masks]
    for t in ts:
        hit = None
        for k in order:
            hit = find_approach_point(gamma_p, y0, float(t), direction * masks[k], pattern, frame, hints[k])
            if hit is not None:
                if order[0] != k:
                    order.remove(k)
                    order.insert(0, k)
                break
        if hit is None:
            failures += 1
            if failures > len(ts) / 2:
                break
            continue
        x, pre = hit
        r = float(np.linalg.norm(x - y0))
        foot = _foot(gamma, x, y0, float(t))
        if r >= last or foot is None:
            failures += 1
            continue
        last = r
        kept_t.append(float(t))
        pts.append(x)
        feet.append(foot)
        pres.append(pre)
    if failures > len(ts) / 2:
        raise WingNotFound(
            f"wing toward {tuple(float(v) for v in y0)} in {gamma_p.name!r}: {failures}/{len(ts)} grid points failed"
        )
    has_pre = any(p is not None for p in pres)
    return WingSample(
        base=y0,
        t=np.array(kept_t),
        points=pts,
        feet=feet,
        preimages=pres if has_pre else None,
        kind="random",
        label=f"pattern={''.join(map(str, pattern))}",
    )


def sample_declared_wing(
    wing: DeclaredWing,
    gamma: Stratum,
    gamma_p: Stratum,
    y0,
    default_grid=(0.1, 0.6, 24),
    dps: int = 60,
) -> WingSample:
    n = len(y0)
    with mpmath.workdps(dps):
        base = np.array([mpmath.mpf(float(v)) for v in y0], dtype=object)
        ts, pts, pres = [], [], []
        for t in wing.parameters(default_grid):
            env = list(base) + [mpmath.mpf(t)]
            try:
                x = np.array([evaluate(e, env) for e in wing.point], dtype=object)
                pre = None
                if wing.param is not None:
                    pre = np.array([evaluate(e, env) for e in wing.param], dtype=object)
            except DomainError:
                continue
            if len(x) != n:
                raise ValueError("declared wing has the wrong number of coordinates")
            if isinstance(gamma_p, ParametricStratum):
                if pre is None or not gamma_p.in_domain(pre):
                    continue
            elif not gamma_p.contains(x):
                continue
            ts.append(float(t))
            pts.append(x)
            pres.append(pre)
    if len(ts) < max(2, len(wing.parameters(default_grid)) // 2):
        raise WingNotFound(f"declared wing {wing.label!r} left {gamma_p.name!r} at most parameters")
    return WingSample(
        base=base,
        t=np.array(ts),
        points=pts,
        feet=[base] * len(ts),
        preimages=pres if wing.param is not None else None,
        kind="declared",
        label=wing.label,
    )


# ---------------------------------------------------------------------------
# classification


def _envelope(g: np.ndarray) -> np.ndarray:
    # centred window; the two end samples have no full window and are dropped
    return np.maximum(np.maximum(g[:-2], g[1:-1]), g[2:])


def classify_limit(
    t: Sequence[float],
    g: Sequence[float],
    slope_tol: float = 0.1,
    residual_tol: float = 0.5,
    zero_tol: float = 1e-13,
) -> LimitVerdict:
    """Classify g(t) as t -> 0+ from samples on a decreasing grid.

    The slope of log g against log t is fitted on the last half of the grid
    after taking a running maximum over three neighbours, which keeps
    oscillating sequences from being read as convergent.
    """
    t = np.asarray(t, dtype=float)
    g = np.asarray(g, dtype=float)
    if len(t) != len(g):
        raise ValueError("t and g differ in length")
    if len(t) < 8:
        raise TooFewSamples(f"need at least 8 samples, got {len(t)}")
    if np.any(np.diff(t) >= 0) or np.any(t <= 0):
        raise ValueError("t must be positive and strictly decreasing")
    if np.any(g < 0) or not np.all(np.isfinite(g)):
        raise ValueError("g must be finite and non-negative")
    half = len(t) // 2
    tw, gw = t[-half:], g[-half:]
    if np.all(gw < zero_tol):
        return LimitVerdict(CONVERGES, math.inf, float(np.max(gw)), 0.0, len(t))
    env = _envelope(g)[-(half - 1):]
    tw = t[-half:-1]
    floor = max(float(np.min(env[env > 0])) if np.any(env > 0) else zero_tol, 1e-300) * 1e-3
    lt = np.log(tw)
    lg = np.log(np.maximum(env, floor))
    slope, icpt = np.polyfit(lt, lg, 1)
    resid = float(np.sqrt(np.mean((lg - (slope * lt + icpt)) ** 2)))
    bound = float(np.max(gw))
    slope = float(slope)
    if resid > residual_tol:
        return LimitVerdict(INCONCLUSIVE, slope, bound, resid, len(t))
    if slope >= slope_tol:
        cls = CONVERGES
    elif slope <= -slope_tol:
        cls = DIVERGES
    else:
        cls = BOUNDED
    return LimitVerdict(cls, slope, bound, resid, len(t))


def samples_to_csv(t: Sequence[float], g: Sequence[float]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "g", "log_t", "log_g"])
    for ti, gi in zip(t, g):
        lg = math.log(gi) if gi > 0 else float("-inf")
        w.writerow([repr(float(ti)), repr(float(gi)), repr(math.log(ti)), repr(lg)])
    return buf.getvalue()
