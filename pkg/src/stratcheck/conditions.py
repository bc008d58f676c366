"""Regularity checkers for a stratum pair (Gamma below Gamma') at a base point.

Every checker samples approach wings toward the base point, turns each wing
into a scalar sequence g(t) and classifies its behaviour as t -> 0+:

    w   delta(T_y Gamma, T_x Gamma') / |x - y|
    a   delta(T_y0 Gamma, T_x Gamma')
    b   max(delta(T_y0 Gamma, T_x Gamma'), delta(span(x - y), T_x Gamma'))
    af  delta(T_y0,f Gamma, T_x,f Gamma')
    wf  delta(T_y,f Gamma, T_x,f Gamma') / |x - y|

where y is the foot of x on Gamma.
"""

from __future__ import annotations

import json
import math
import zlib
from dataclasses import dataclass, field, replace
from typing import Sequence

import mpmath
import numpy as np

from .expr import DomainError, is_mp_point
from .limits import (
    BOUNDED,
    CONVERGES,
    DIVERGES,
    DeclaredWing,
    LimitVerdict,
    WingNotFound,
    WingSample,
    classify_limit,
    exponent_patterns,
    sample_declared_wing,
    sample_wing,
)
from .strata import (
    Box,
    FunctionOnSpace,
    PointStratum,
    RankDrop,
    Stratum,
    base_points,
    level_tangent_at,
)
from .subspace import Subspace, delta, orthonormalize

__all__ = [
    "HOLDS",
    "FAILS",
    "INCONCLUSIVE",
    "CONDITIONS",
    "CheckParams",
    "WingRecord",
    "ConditionReport",
    "ScanResult",
    "check",
    "check_many",
    "check_w",
    "check_a",
    "check_b",
    "check_af",
    "check_wf",
    "scan_bad_locus",
    "scan_many",
]

HOLDS = "Holds"
FAILS = "Fails"
INCONCLUSIVE = "Inconclusive"
CONDITIONS = ("w", "a", "b", "af", "wf")

# random wings tried before concluding that no wing reaches the base point
GIVE_UP_AFTER = 3
MIN_SEPARATION = 1e-8


@dataclass(frozen=True)
class CheckParams:
    grid: tuple[float, float, int] = (0.1, 0.6, 24)
    wings: int = 8
    seed: int = 0
    slope_tol: float = 0.1
    residual_tol: float = 0.5
    b_gap: float = 0.05
    zero_tol: float = 1e-8
    dps: int = 60
    declared: tuple[DeclaredWing, ...] = ()
    frame: tuple | None = None
    seed_key: str | None = None

    def with_(self, **kw) -> "CheckParams":
        return replace(self, **kw)

    def as_dict(self) -> dict:
        return {
            "grid": [float(self.grid[0]), float(self.grid[1]), int(self.grid[2])],
            "wings": self.wings,
            "seed": self.seed,
            "slope_tol": self.slope_tol,
            "residual_tol": self.residual_tol,
            "b_gap": self.b_gap,
            "zero_tol": self.zero_tol,
            "declared_wings": [w.label for w in self.declared],
        }


@dataclass
class WingRecord:
    label: str
    kind: str
    verdict: LimitVerdict
    t: list[float]
    g: list[float]
    witness: bool = False

    def as_dict(self) -> dict:
        return {
            "label": self.label,
            "kind": self.kind,
            "witness": self.witness,
            "verdict": self.verdict.as_dict(),
            "t": self.t,
            "g": self.g,
        }


@dataclass
class ConditionReport:
    condition: str
    pair: tuple[str, str]
    base: tuple[float, ...]
    verdict: str
    constant: float
    slope: float
    wings: list[WingRecord] = field(default_factory=list)
    params: dict = field(default_factory=dict)
    diagnostics: list[str] = field(default_factory=list)

    @property
    def witnesses(self) -> list[WingRecord]:
        return [w for w in self.wings if w.witness]

    def as_dict(self) -> dict:
        return {
            "condition": self.condition,
            "pair": list(self.pair),
            "base": [_clean(v) for v in self.base],
            "verdict": self.verdict,
            "constant": _clean(self.constant),
            "slope": _clean(self.slope),
            "params": self.params,
            "diagnostics": list(self.diagnostics),
            "wings": [w.as_dict() for w in self.wings],
        }

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(_jsonable(self.as_dict()), indent=indent)


def _clean(v):
    v = float(v)
    if math.isnan(v):
        return None
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float):
        return _clean(obj)
    return obj


# ---------------------------------------------------------------------------
# wings


def _wing_seed(params: CheckParams, gamma: Stratum, gamma_p: Stratum, y0) -> int:
    key = params.seed_key
    if key is None:
        key = ",".join(f"{float(v):.12g}" for v in y0)
    text = f"{params.seed}|{gamma.name}|{gamma_p.name}|{key}"
    return zlib.crc32(text.encode())


def _effective_grid(gamma: Stratum, y0, grid) -> tuple[float, float, int]:
    t0, q, m = grid
    room = gamma.boundary_distance(np.asarray(y0, dtype=float))
    if math.isfinite(room) and room > 0:
        t0 = min(t0, room / 4)
    return (float(t0), float(q), int(m))


def _collect_wings(gamma: Stratum, gamma_p: Stratum, y0, params: CheckParams):
    wings: list[WingSample] = []
    notes: list[str] = []
    for dw in params.declared:
        try:
            wings.append(sample_declared_wing(dw, gamma, gamma_p, y0, params.grid, params.dps))
        except (WingNotFound, DomainError) as exc:
            notes.append(f"declared wing {dw.label}: {exc}")
    grid = _effective_grid(gamma, y0, params.grid)
    n = len(y0)
    rng = np.random.default_rng(_wing_seed(params, gamma, gamma_p, y0))
    patterns = exponent_patterns(n)
    frame = None if params.frame is None else np.asarray(params.frame, dtype=float)
    for i in range(params.wings):
        d = rng.standard_normal(n)
        sub_seed = int(rng.integers(2**31))
        pattern = patterns[i % len(patterns)]
        try:
            w = sample_wing(gamma, gamma_p, y0, grid, sub_seed, pattern, d, frame)
        except WingNotFound as exc:
            notes.append(str(exc))
            if i + 1 >= GIVE_UP_AFTER and not any(w.kind == "random" for w in wings):
                notes.append(f"no random wing found in {i + 1} attempts; base point looks outside the closure")
                break
            continue
        w.label = f"wing{i} {w.label}"
        wings.append(w)
    return wings, notes


# ---------------------------------------------------------------------------
# per-sample quantities


def _dist(a, b):
    d = np.asarray(a) - np.asarray(b)
    if d.dtype == object:
        return mpmath.sqrt(mpmath.fsum(v * v for v in d))
    return float(np.linalg.norm(d))


def _tangent(s: Stratum, x, pre=None) -> Subspace:
    if isinstance(s, PointStratum):
        return Subspace.zero(s.ambient_dim)
    return s.tangent_at(x, pre)


def _level(s: Stratum, f: FunctionOnSpace, x, pre=None) -> Subspace:
    if isinstance(s, PointStratum):
        return Subspace.zero(s.ambient_dim)
    return level_tangent_at(s, f, x, pre)


class _Quantity:
    """Computes g for one sample; cached tangent at the base point."""

    def __init__(self, cond: str, gamma: Stratum, gamma_p: Stratum, f: FunctionOnSpace | None):
        self.cond = cond
        self.gamma = gamma
        self.gamma_p = gamma_p
        self.f = f
        self._base_cache: dict = {}

    def _at_base(self, y0):
        key = tuple(float(v) for v in y0)
        if key not in self._base_cache:
            if self.cond in ("af",):
                self._base_cache[key] = _level(self.gamma, self.f, y0)
            else:
                self._base_cache[key] = _tangent(self.gamma, y0)
        return self._base_cache[key]

    def __call__(self, x, foot, pre, base):
        c = self.cond
        if c in ("w", "a", "b"):
            tx = _tangent(self.gamma_p, x, pre)
        else:
            tx = _level(self.gamma_p, self.f, x, pre)
        if c == "a" or c == "af":
            return delta(self._at_base(base), tx)
        if c == "b":
            tang = delta(self._at_base(base), tx)
            sec = np.asarray(x) - np.asarray(foot)
            if _dist(x, foot) == 0:
                return tang
            radial = delta(orthonormalize([sec], ambient_dim=len(sec)), tx)
            return max(tang, radial)
        r = _dist(x, foot)
        if r == 0:
            raise ZeroDivisionError("sample coincides with its foot")
        ty = _tangent(self.gamma, foot) if c == "w" else _level(self.gamma, self.f, foot)
        return delta(ty, tx) / r


def _wing_values(q: _Quantity, w: WingSample):
    ts, gs = [], []
    # below this separation float rounding of the coordinates dominates the
    # secant and the tangent; extended precision samples are exempt
    floor = MIN_SEPARATION * max(1.0, float(np.max(np.abs(np.asarray(w.base, dtype=float)))))
    for i, t in enumerate(w.t):
        pre = w.preimages[i] if w.preimages is not None else None
        if not is_mp_point(w.points[i]) and _dist(w.points[i], w.feet[i]) < floor:
            continue
        try:
            g = q(w.points[i], w.feet[i], pre, w.base)
        except (RankDrop, DomainError, ZeroDivisionError):
            continue
        g = float(g)
        if not math.isfinite(g):
            continue
        ts.append(float(t))
        gs.append(g)
    return ts, gs


# ---------------------------------------------------------------------------
# verdicts


def _lipschitz_verdict(records: list[WingRecord]):
    if any(r.verdict.cls == DIVERGES for r in records):
        for r in records:
            r.witness = r.verdict.cls == DIVERGES
        return FAILS
    if all(r.verdict.cls in (BOUNDED, CONVERGES) for r in records):
        return HOLDS
    return INCONCLUSIVE


def _limit_zero_verdict(records: list[WingRecord], params: CheckParams):
    def vanishes(r: WingRecord) -> bool:
        return r.verdict.cls == CONVERGES or max(r.g) < params.zero_tol

    def gap(r: WingRecord) -> bool:
        return r.verdict.cls in (BOUNDED, DIVERGES) and not vanishes(r) and r.verdict.bound >= params.b_gap

    if any(gap(r) for r in records):
        for r in records:
            r.witness = gap(r)
        return FAILS
    if all(vanishes(r) for r in records):
        return HOLDS
    return INCONCLUSIVE


def check_many(
    conditions: Sequence[str],
    gamma: Stratum,
    gamma_p: Stratum,
    y0,
    params: CheckParams | None = None,
    f: FunctionOnSpace | None = None,
) -> dict[str, ConditionReport]:
    """Run several checkers at ``y0`` on one shared set of wings."""
    for c in conditions:
        if c not in CONDITIONS:
            raise ValueError(f"unknown condition {c!r}; expected one of {CONDITIONS}")
        if c in ("af", "wf") and f is None:
            raise ValueError(f"condition {c} needs a function")
    params = params or CheckParams()
    y0 = np.asarray([float(v) for v in y0])
    wings, notes = _collect_wings(gamma, gamma_p, y0, params)
    return {c: _evaluate(c, gamma, gamma_p, y0, params, f, wings, notes) for c in conditions}


def _evaluate(condition, gamma, gamma_p, y0, params, f, wings, notes) -> ConditionReport:
    report = ConditionReport(
        condition=condition,
        pair=(gamma.name, gamma_p.name),
        base=tuple(float(v) for v in y0),
        verdict=INCONCLUSIVE,
        constant=math.nan,
        slope=math.nan,
        params=params.as_dict(),
        diagnostics=list(notes),
    )
    q = _Quantity(condition, gamma, gamma_p, f)
    records = []
    for w in wings:
        ts, gs = _wing_values(q, w)
        try:
            v = classify_limit(ts, gs, params.slope_tol, params.residual_tol)
        except ValueError as exc:
            # TooFewSamples is a ValueError too
            report.diagnostics.append(f"{w.label}: {exc}")
            continue
        records.append(WingRecord(w.label, w.kind, v, ts, gs))
    report.wings = records
    if not records:
        report.diagnostics.append("no usable wing")
        return report
    if condition in ("w", "wf"):
        report.verdict = _lipschitz_verdict(records)
    else:
        report.verdict = _limit_zero_verdict(records, params)
    report.constant = max(r.verdict.bound for r in records)
    report.slope = min(r.verdict.slope for r in records)
    return report


def check(
    condition: str,
    gamma: Stratum,
    gamma_p: Stratum,
    y0,
    params: CheckParams | None = None,
    f: FunctionOnSpace | None = None,
) -> ConditionReport:
    """Run one regularity checker at ``y0``; see the module docstring for g."""
    return check_many([condition], gamma, gamma_p, y0, params, f)[condition]


def check_w(gamma, gamma_p, y0, params=None) -> ConditionReport:
    return check("w", gamma, gamma_p, y0, params)


def check_a(gamma, gamma_p, y0, params=None) -> ConditionReport:
    return check("a", gamma, gamma_p, y0, params)


def check_b(gamma, gamma_p, y0, params=None) -> ConditionReport:
    return check("b", gamma, gamma_p, y0, params)


def check_af(gamma, gamma_p, f, y0, params=None) -> ConditionReport:
    return check("af", gamma, gamma_p, y0, params, f)


def check_wf(gamma, gamma_p, f, y0, params=None) -> ConditionReport:
    return check("wf", gamma, gamma_p, y0, params, f)


# ---------------------------------------------------------------------------
# bad locus


@dataclass
class ScanResult:
    condition: str
    pair: tuple[str, str]
    reports: list[ConditionReport]

    @property
    def points(self) -> list[tuple[float, ...]]:
        return [r.base for r in self.reports]

    @property
    def failing(self) -> list[ConditionReport]:
        return [r for r in self.reports if r.verdict == FAILS]

    @property
    def inconclusive(self) -> list[ConditionReport]:
        return [r for r in self.reports if r.verdict == INCONCLUSIVE]

    @property
    def failing_fraction(self) -> float:
        return len(self.failing) / len(self.reports) if self.reports else 0.0

    def summary(self) -> dict:
        return {
            "condition": self.condition,
            "pair": list(self.pair),
            "base_points": len(self.reports),
            "failing": len(self.failing),
            "inconclusive": len(self.inconclusive),
            "failing_fraction": self.failing_fraction,
        }


def scan_many(
    gamma: Stratum,
    gamma_p: Stratum,
    conditions: Sequence[str],
    box: Box,
    f: FunctionOnSpace | None = None,
    base_grid: int = 50,
    params: CheckParams | None = None,
    points: Sequence | None = None,
) -> dict[str, ScanResult]:
    params = params or CheckParams()
    if points is None:
        points = base_points(gamma, base_grid, box, params.seed)
    per_point = [check_many(conditions, gamma, gamma_p, y, params, f) for y in points]
    return {c: ScanResult(c, (gamma.name, gamma_p.name), [r[c] for r in per_point]) for c in conditions}


def scan_bad_locus(
    gamma: Stratum,
    gamma_p: Stratum,
    condition: str,
    box: Box,
    f: FunctionOnSpace | None = None,
    base_grid: int = 50,
    params: CheckParams | None = None,
    points: Sequence | None = None,
) -> ScanResult:
    """Check ``condition`` at ``base_grid`` base points of ``gamma``.

    Results keep base point order, so the output is deterministic for a fixed
    seed.
    """
    return scan_many(gamma, gamma_p, [condition], box, f, base_grid, params, points)[condition]
