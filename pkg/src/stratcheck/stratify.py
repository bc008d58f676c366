"""Refinement engine: decompose V(p), check stratum pairs, split at bad points.

Scope is deliberately small: one square-free polynomial in at most three
variables whose singular locus is a finite point set, coordinate axes, or a
mix of both. Anything else raises UnsupportedSingularLocus.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
import sympy
from scipy.optimize import least_squares
from scipy.spatial import cKDTree

from .conditions import (
    FAILS,
    HOLDS,
    INCONCLUSIVE,
    CheckParams,
    ScanResult,
    scan_many,
)
from .expr import Const, DomainError, Expr, Unary, Var
from .polynomial import Polynomial
from .strata import (
    Box,
    FunctionOnSpace,
    ImplicitStratum,
    ParametricStratum,
    PointStratum,
    RankDrop,
    Stratification,
    Stratum,
    _ineq_ok,
    in_closure,
    rank_at,
)

__all__ = [
    "NotSquareFree",
    "UnsupportedSingularLocus",
    "UnsupportedCriticalLocus",
    "NonConvergence",
    "RefinementState",
    "Certificate",
    "singular_locus",
    "initial_decomposition",
    "refine",
    "rank_partition",
    "certify",
    "split_stratum",
]

CERTIFIED = "Certified"
REFUTED = "Refuted"

MAX_SINGULAR_POINTS = 20
SIGN_TOL = 1e-9


class NotSquareFree(ValueError):
    pass


class UnsupportedSingularLocus(ValueError):
    pass


class UnsupportedCriticalLocus(ValueError):
    pass


class NonConvergence(RuntimeError):
    """Refinement stopped with failures left; ``state`` holds the evidence."""

    def __init__(self, message: str, state: "RefinementState"):
        super().__init__(message)
        self.state = state


# ---------------------------------------------------------------------------
# singular locus


@dataclass
class SingularLocus:
    points: list[tuple]
    axes: list[int]
    split: dict[int, list]

    def sample(self, box: Box, per_axis: int = 9) -> list[np.ndarray]:
        out = [np.array([float(v) for v in p]) for p in self.points]
        n = box.dim
        for i in self.axes:
            for s in np.linspace(box.lo[i], box.hi[i], per_axis):
                x = np.zeros(n)
                x[i] = s
                out.append(x)
            for s in self.split.get(i, []):
                x = np.zeros(n)
                x[i] = float(s)
                out.append(x)
        return out

    def distance(self, x) -> float:
        x = np.asarray(x, dtype=float)
        best = math.inf
        for p in self.points:
            best = min(best, float(np.linalg.norm(x - np.array([float(v) for v in p]))))
        for i in self.axes:
            best = min(best, float(np.linalg.norm(np.delete(x, i))))
        return best

    def is_empty(self) -> bool:
        return not self.points and not self.axes


def _snap(v: float, max_den: int = 64, tol: float = 1e-7):
    f = Fraction(v).limit_denominator(max_den)
    return f if abs(float(f) - v) <= tol else None


def _snap_point(p: Polynomial, system, x):
    fr = [_snap(float(v)) for v in x]
    if all(v is not None for v in fr) and all(q.evaluate(fr) == 0 for q in system):
        return tuple(fr)
    return None


def _axis_split_points(p: Polynomial, axis: int, box: Box) -> list:
    """Points of a singular axis where the transverse Hessian degenerates."""
    n = p.nvars
    others = [j for j in range(n) if j != axis]
    zero = {j: 0 for j in others}
    syms = sympy.symbols(f"v0:{n}")
    rows = []
    for j in others:
        rows.append([p.diff(j).diff(k).substitute(zero).to_sympy(syms) for k in others])
    det = sympy.expand(sympy.Matrix(rows).det())
    if det == 0:
        raise UnsupportedSingularLocus(
            f"transverse Hessian along axis x{axis + 1} vanishes identically; the local type is not recognized"
        )
    s = syms[axis]
    out = []
    if det.free_symbols:
        for r in sympy.Poly(det, s).real_roots():
            val = Fraction(int(r.p), int(r.q)) if r.is_Rational else float(r)
            if box.lo[axis] < float(val) < box.hi[axis]:
                out.append(val)
    return sorted(set(out), key=float)


def singular_locus(p: Polynomial, box: Box, seed: int = 0, seeds: int = 160) -> SingularLocus:
    """Sigma = V(p, grad p) inside ``box``: coordinate axes plus isolated points."""
    n = p.nvars
    system = [p] + [d for d in p.gradient() if not d.is_zero()]
    axes = []
    if n >= 3:
        for i in range(n):
            zero = {j: 0 for j in range(n) if j != i}
            if all(q.substitute(zero).is_zero() for q in system):
                axes.append(i)
    split = {i: _axis_split_points(p, i, box) for i in axes}
    solver = ImplicitStratum("sigma", n, tuple(system), (), 0)
    found: list[np.ndarray] = []
    for c in box.points(seeds, seed + 17):
        x, _ = solver.newton(c, scale=box.scale, iters=200, tol=1e-15)
        if not np.all(np.isfinite(x)) or not box.contains(x):
            continue
        if float(np.max(np.abs(solver.residuals(x)))) > 1e-10:
            continue
        if any(float(np.linalg.norm(np.delete(x, i))) < 1e-6 * box.scale for i in axes):
            continue
        found.append(x)
    clusters: list[list[np.ndarray]] = []
    for x in found:
        for cl in clusters:
            if np.linalg.norm(cl[0] - x) < 1e-5 * box.scale:
                cl.append(x)
                break
        else:
            clusters.append([x])
            if len(clusters) > MAX_SINGULAR_POINTS:
                raise UnsupportedSingularLocus(
                    f"more than {MAX_SINGULAR_POINTS} singular points found; the singular locus looks positive dimensional"
                )
    points = []
    for cl in clusters:
        x = np.mean(cl, axis=0)
        exact = _snap_point(p, system, x)
        points.append(exact if exact is not None else tuple(float(v) for v in x))
    for i, vals in split.items():
        for s in vals:
            pt = [Fraction(0)] * n
            pt[i] = s
            points.append(tuple(pt))
    points = sorted(set(points), key=lambda q: tuple(float(v) for v in q))
    return SingularLocus(points, axes, split)


# ---------------------------------------------------------------------------
# initial decomposition


def _linear_form(i: int, c, sign: int) -> Expr:
    """sign * (x_i - c) as an expression."""
    c = Fraction(c) if not isinstance(c, float) else c
    e: Expr = Var(i) if c == 0 else Var(i) - Const(c)
    return e if sign > 0 else (Unary("neg", Var(i)) if c == 0 else Const(c) - Var(i))


def _sign_vector(x, forms, tol) -> tuple[int, ...]:
    out = []
    for i, c in forms:
        v = float(x[i]) - float(c)
        out.append(0 if abs(v) <= tol else (1 if v > 0 else -1))
    return tuple(out)


class _UnionFind:
    def __init__(self):
        self.parent: dict = {}

    def find(self, a):
        self.parent.setdefault(a, a)
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def _candidate_forms(sigma: SingularLocus, box: Box) -> list[tuple[int, object]]:
    n = box.dim
    forms = set()
    for p in sigma.points:
        for i in range(n):
            forms.add((i, p[i]))
    for a in sigma.axes:
        for j in range(n):
            if j != a:
                forms.add((j, Fraction(0)))
    if not forms:
        for i in range(n):
            forms.add((i, _snap(float(box.center[i]), 1000, 1e-12) or float(box.center[i])))
    return sorted(forms, key=lambda f: (f[0], float(f[1])))


def _axis_pieces(sigma: SingularLocus, box: Box) -> list[ImplicitStratum]:
    n = box.dim
    pieces = []
    for a in sigma.axes:
        cuts = [Fraction(box.lo[a]) - 1] + [Fraction(s) if not isinstance(s, float) else s for s in sigma.split[a]] + [
            Fraction(box.hi[a]) + 1
        ]
        eqs = tuple(Polynomial.variable(n, j) for j in range(n) if j != a)
        for k in range(len(cuts) - 1):
            lo, hi = cuts[k], cuts[k + 1]
            ineqs = []
            if k > 0:
                ineqs.append(_linear_form(a, lo, 1))
            if k < len(cuts) - 2:
                ineqs.append(_linear_form(a, hi, -1))
            pieces.append(ImplicitStratum("", n, eqs, tuple(ineqs), 1))
    return pieces


def _smooth_components(p: Polynomial, sigma: SingularLocus, box: Box, seed: int, samples: int):
    n = p.nvars
    surface = ImplicitStratum("V", n, (p,), (), n - 1)
    r_excl = 0.05 * box.scale
    pts = [x for x in surface.sample(samples, seed, box) if sigma.distance(x) > r_excl]
    if not pts:
        return [], []
    forms = _candidate_forms(sigma, box)
    tol = SIGN_TOL * box.scale
    signs = [_sign_vector(x, forms, tol) for x in pts]
    uf = _UnionFind()
    for s in signs:
        uf.find(s)
    # glue sign cells across regular crossings of each coordinate form
    eps = 1e-3 * box.scale
    for k, (i, c) in enumerate(forms):
        plane = Polynomial.variable(n, i) - Polynomial.constant(n, c)
        cut = ImplicitStratum("cut", n, (p, plane), (), max(n - 2, 0))
        hits = 0
        for q0 in box.points(48, seed + 101 * (k + 1)):
            q, ok = cut.newton(q0, scale=box.scale)
            if not ok or not box.contains(q) or sigma.distance(q) <= r_excl:
                continue
            try:
                tangent = surface.tangent_at(q)
            except RankDrop:
                continue
            around = [_sign_vector(q, forms, tol)]
            for v in tangent.basis:
                for sgn in (1, -1):
                    x, ok2 = surface.newton(q + sgn * eps * v, scale=eps)
                    if ok2 and np.linalg.norm(x - q) < 4 * eps:
                        around.append(_sign_vector(x, forms, tol))
            for s in around[1:]:
                uf.union(around[0], s)
            hits += 1
            if hits >= 16:
                break
    # a sample sitting on a coordinate hyperplane joins a nearby cell that
    # agrees with it on every nonzero sign
    by_sign: dict = {}
    for x, s in zip(pts, signs):
        by_sign.setdefault(s, []).append(x)
    link = 0.1 * box.scale
    for s, xs in by_sign.items():
        if 0 not in s:
            continue
        for t, ys in by_sign.items():
            if t == s or any(a != 0 and a != b for a, b in zip(s, t)):
                continue
            d = cKDTree(np.array(ys)).query(np.array(xs))[0]
            if float(np.min(d)) < link:
                uf.union(s, t)
    groups: dict = {}
    for x, s in zip(pts, signs):
        groups.setdefault(uf.find(s), []).append(x)
    comps = [groups[k] for k in sorted(groups)]
    return comps, forms


def _separating_inequalities(comp, others, forms, tol) -> tuple[Expr, ...]:
    comp = np.array(comp)
    others = np.array(others) if len(others) else np.zeros((0, comp.shape[1]))
    options = []
    for i, c in forms:
        vals = comp[:, i] - float(c)
        if np.all(vals > tol):
            options.append((i, c, 1))
        elif np.all(vals < -tol):
            options.append((i, c, -1))
    todo = np.ones(len(others), dtype=bool)
    chosen = []
    while todo.any():
        best, best_cover = None, None
        for opt in options:
            i, c, s = opt
            cover = todo & (s * (others[:, i] - float(c)) <= tol)
            if best is None or cover.sum() > best_cover.sum():
                best, best_cover = opt, cover
        if best is None or not best_cover.any():
            raise UnsupportedSingularLocus("a smooth component cannot be cut out by coordinate sign conditions")
        chosen.append(best)
        options.remove(best)
        todo &= ~best_cover
    chosen.sort(key=lambda o: (o[0], float(o[1]), o[2]))
    return tuple(_linear_form(i, c, s) for i, c, s in chosen)


def _frontier(strata: dict[str, Stratum], box: Box, seed: int, pairs: Iterable | None = None) -> list[tuple[str, str]]:
    out = []
    names = list(strata)
    if pairs is None:
        pairs = [(a, b) for a in names for b in names if strata[a].dim < strata[b].dim]
    for a, b in pairs:
        if in_closure(strata[a], strata[b], box, seed):
            out.append((a, b))
    return out


def initial_decomposition(p: Polynomial, box: Box | None = None, seed: int = 0, samples: int = 600) -> Stratification:
    """Candidate stratification of V(p) inside ``box``.

    Strata: the singular points, the pieces of singular coordinate axes between
    their special points, and the connected components of the smooth part, each
    cut out by p = 0 and coordinate sign conditions. Frontier pairs come from
    sampled closure tests.
    """
    n = p.nvars
    if n > 3:
        raise ValueError(f"at most three variables are supported, got {n}")
    if p.degree == 0:
        raise ValueError("constant polynomial")
    if not p.is_square_free():
        raise NotSquareFree(f"{p} has a repeated factor")
    box = box or Box((-1.0,) * n, (1.0,) * n)
    sigma = singular_locus(p, box, seed)
    strata: dict[str, Stratum] = {}
    for k, pt in enumerate(sigma.points):
        strata[f"P{k}"] = PointStratum(f"P{k}", tuple(float(v) for v in pt))
    for k, piece in enumerate(_axis_pieces(sigma, box)):
        piece.name = f"L{k}"
        strata[piece.name] = piece
    comps, forms = _smooth_components(p, sigma, box, seed, samples)
    sig_samples = sigma.sample(box)
    tol = SIGN_TOL * box.scale
    for k, comp in enumerate(comps):
        others = [x for j, c in enumerate(comps) if j != k for x in c] + sig_samples
        ineqs = _separating_inequalities(comp, others, forms, tol)
        strata[f"S{k}"] = ImplicitStratum(f"S{k}", n, (p,), ineqs, n - 1)
    return Stratification(strata, _frontier(strata, box, seed), box)


# ---------------------------------------------------------------------------
# splitting


def _snap_vector(v) -> list:
    out = []
    for x in v:
        f = _snap(float(x), 1000, 1e-12)
        out.append(f if f is not None else float(x))
    return out


def _affine_expr(coeffs, point) -> Expr:
    """sum_i coeffs_i * (x_i - point_i)."""
    e: Expr | None = None
    for i, (a, c) in enumerate(zip(coeffs, point)):
        if a == 0:
            continue
        term: Expr = Var(i) if c == 0 else (Var(i) - Const(c))
        if a != 1:
            term = Const(a) * term
        e = term if e is None else e + term
    return e if e is not None else Const(Fraction(0))


def _sq_dist_expr(point) -> Expr:
    e: Expr | None = None
    for i, c in enumerate(point):
        d: Expr = Var(i) if c == 0 else (Var(i) - Const(c))
        term = d * d
        e = term if e is None else e + term
    return e


def split_stratum(s: Stratum, centers: Sequence, box: Box) -> tuple[list[Stratum], list[PointStratum]]:
    """Cut ``s`` at the given points; returns (pieces, new point strata)."""
    centers = [np.asarray(c, dtype=float) for c in centers]
    points = [PointStratum(f"{s.name}.p{k}", tuple(float(v) for v in _snap_vector(c))) for k, c in enumerate(centers)]
    if isinstance(s, PointStratum):
        raise ValueError("a point stratum cannot be split")
    if s.dim == 1 and isinstance(s, ParametricStratum):
        (a, b), = s.domain
        cuts = sorted(float(s.invert(c)[0][0]) for c in centers)
        bounds = [a] + cuts + [b]
        pieces = [
            ParametricStratum(f"{s.name}.{k + 1}", s.ambient_dim, s.maps, ((bounds[k], bounds[k + 1]),), True)
            for k in range(len(bounds) - 1)
        ]
        return pieces, points
    if s.dim == 1:
        assert isinstance(s, ImplicitStratum)
        pieces: list[ImplicitStratum] = [s]
        for c in centers:
            tau = _snap_vector(s.tangent_at(c).basis[0])
            cpt = _snap_vector(c)
            form = _affine_expr(tau, cpt)
            nxt = []
            for piece in pieces:
                if piece.contains(c, tol=1e-6) or _on_closure(piece, c):
                    for sign in (1, -1):
                        g = form if sign > 0 else Unary("neg", form)
                        nxt.append(ImplicitStratum("", s.ambient_dim, s.equations, piece.inequalities + (g,), 1, True))
                else:
                    nxt.append(piece)
            pieces = nxt
        pieces = [p for p in pieces if p.sample(1, 0, box) or _nonempty_near(p, centers)]
        for k, piece in enumerate(pieces):
            piece.name = f"{s.name}.{k + 1}"
        return pieces, points
    assert isinstance(s, ImplicitStratum)
    ineqs = s.inequalities + tuple(_sq_dist_expr(_snap_vector(c)) for c in centers)
    return [ImplicitStratum(f"{s.name}.1", s.ambient_dim, s.equations, ineqs, s.dim, s.connected)], points


def _on_closure(piece: ImplicitStratum, c) -> bool:
    x, ok = piece.newton(c)
    if not ok:
        return False

    return _ineq_ok(piece.inequalities, x, -1e-9)


def _nonempty_near(piece: ImplicitStratum, centers) -> bool:
    for c in centers:
        for d in np.eye(len(c)):
            for sgn in (1, -1):
                x = piece.project(np.asarray(c) + sgn * 1e-3 * d, scale=1e-3)
                if x is not None:
                    return True
    return False


def _replace(strat: Stratification, name: str, pieces: list[Stratum], points: list[PointStratum], seed: int) -> Stratification:
    box = strat.box
    strata = {k: v for k, v in strat.strata.items() if k != name}
    for q in points:
        strata[q.name] = q
    for piece in pieces:
        strata[piece.name] = piece
    old = [pair for pair in strat.frontier if name not in pair]
    new_names = {q.name for q in points} | {p.name for p in pieces}
    candidates = []
    for lo, hi in strat.frontier:
        if hi == name:
            candidates += [(lo, p.name) for p in pieces]
        elif lo == name:
            candidates += [(p.name, hi) for p in pieces] + [(q.name, hi) for q in points]
    candidates += [(q.name, p.name) for q in points for p in pieces]
    seen = set(old)
    pairs = [c for c in candidates if c not in seen and not seen.add(c)]
    pairs = [(a, b) for a, b in pairs if strata[a].dim < strata[b].dim]
    frontier = old + _frontier(strata, box, seed, pairs)
    # keep dict order stable: untouched strata first, then new ones sorted
    ordered = {k: strata[k] for k in strat.strata if k in strata}
    for k in sorted(new_names):
        ordered[k] = strata[k]
    return Stratification(ordered, frontier, box)


# ---------------------------------------------------------------------------
# refinement


@dataclass
class RefinementState:
    stratification: Stratification
    function: FunctionOnSpace | None = None
    wings: dict = field(default_factory=dict)
    base_points: dict = field(default_factory=dict)
    params: CheckParams = field(default_factory=CheckParams)
    base_grid: int = 20
    reports: dict = field(default_factory=dict)
    pending: dict = field(default_factory=dict)
    unsplittable: dict = field(default_factory=dict)
    level: int = 0
    rounds: int = 0
    history: list = field(default_factory=list)

    @classmethod
    def from_scene(
        cls, scene, params: CheckParams | None = None, base_grid: int = 20, scene_points: bool = False
    ) -> "RefinementState":
        """State for a scene. Base points come from a grid on each stratum unless
        ``scene_points`` asks for the ones listed in the scene."""
        return cls(
            stratification=scene.stratification,
            function=scene.function,
            wings=dict(scene.wings),
            base_points={k: list(v) for k, v in scene.base_points.items()} if scene_points else {},
            params=params or CheckParams(),
            base_grid=base_grid,
        )

    def scan(self, lower: str, upper: str, conditions: Sequence[str]) -> dict[str, ScanResult]:
        """Scan results for one pair, computing only what is not cached."""
        missing = [c for c in conditions if (c, lower, upper) not in self.reports]
        if missing:
            S = self.stratification
            params = self.params.with_(declared=tuple(self.wings.get((lower, upper), ())))
            pts = self.base_points.get(lower)
            res = scan_many(
                S.strata[lower], S.strata[upper], missing, S.box, self.function, self.base_grid, params, pts
            )
            for c, r in res.items():
                self.reports[(c, lower, upper)] = r
        return {c: self.reports[(c, lower, upper)] for c in conditions}

    def failing_fraction(self, condition: str, lower: str, upper: str) -> float:
        return self.reports[(condition, lower, upper)].failing_fraction

    def summary(self) -> dict:
        return {
            "rounds": self.rounds,
            "level": self.level,
            "strata": {k: s.dim for k, s in self.stratification.strata.items()},
            "frontier": [list(p) for p in self.stratification.frontier],
            "unsplittable": {k: v for k, v in self.unsplittable.items()},
            "history": list(self.history),
        }


def _clusters(points: list, radius: float) -> list[list[np.ndarray]]:
    pts = [np.asarray(p, dtype=float) for p in points]
    uf = _UnionFind()
    for i in range(len(pts)):
        uf.find(i)
    if len(pts) > 1:
        tree = cKDTree(np.array(pts))
        for i, j in sorted(tree.query_pairs(radius)):
            uf.union(i, j)
    groups: dict = {}
    for i, p in enumerate(pts):
        groups.setdefault(uf.find(i), []).append(p)
    return [groups[k] for k in sorted(groups)]


def _representative(cluster: list[np.ndarray]) -> np.ndarray:
    mean = np.mean(cluster, axis=0)
    return min(cluster, key=lambda p: (float(np.linalg.norm(p - mean)), tuple(p)))


def _needs(cond: str) -> bool:
    return cond in ("af", "wf")


def refine(
    state: RefinementState,
    conditions: Sequence[str] = ("w",),
    max_rounds: int = 5,
    cluster_radius: float = 0.05,
    full_fraction: float = 0.5,
) -> RefinementState:
    """Split strata at clustered bad points, highest lower-stratum dimension first.

    ``cluster_radius`` is relative to half the smallest box side. A stratum
    whose failing fraction exceeds ``full_fraction`` is not split (its whole
    extent is bad); remaining failures raise NonConvergence.
    """
    if any(_needs(c) for c in conditions) and state.function is None:
        raise ValueError("conditions af/wf need a function in the scene")
    radius = cluster_radius * state.stratification.box.scale / 2
    seed = state.params.seed
    while True:
        S = state.stratification
        top = max(s.dim for s in S.strata.values())
        split_done = False
        state.pending = {}
        state.unsplittable = {}
        for d in range(top, -1, -1):
            state.level = d
            level_bad: dict[str, list] = {}
            for lo, hi in S.frontier:
                if S.strata[lo].dim != d:
                    continue
                for c, res in state.scan(lo, hi, conditions).items():
                    bad = [r.base for r in res.failing]
                    if not bad:
                        continue
                    if d == 0 or res.failing_fraction > full_fraction:
                        state.unsplittable.setdefault(lo, []).append(
                            {"condition": c, "upper": hi, "failing_fraction": res.failing_fraction}
                        )
                    else:
                        level_bad.setdefault(lo, []).extend(bad)
            if level_bad:
                state.pending = {k: [tuple(map(float, p)) for p in v] for k, v in level_bad.items()}
                if state.rounds >= max_rounds:
                    break
                for name in sorted(level_bad):
                    if name in state.unsplittable:
                        continue
                    reps = [_representative(cl) for cl in _clusters(level_bad[name], radius)]
                    pieces, points = split_stratum(S.strata[name], reps, S.box)
                    S = _replace(S, name, pieces, points, seed)
                    state.history.append(
                        f"round {state.rounds + 1}: split {name} at "
                        + ", ".join("(" + ", ".join(f"{v:.6g}" for v in r) + ")" for r in reps)
                    )
                    state.reports = {k: v for k, v in state.reports.items() if name not in k[1:]}
                    for k in list(state.wings):
                        if name in k:
                            for piece in pieces:
                                key = (piece.name, k[1]) if k[0] == name else (k[0], piece.name)
                                state.wings.setdefault(key, state.wings[k])
                state.stratification = S
                state.rounds += 1
                split_done = True
                break
        if not split_done:
            break
    if not S.is_partial_order():
        raise RuntimeError("refinement produced a frontier cycle")
    if state.unsplittable or state.pending:
        parts = []
        for name, items in sorted(state.unsplittable.items()):
            for it in items:
                parts.append(f"{name} below {it['upper']} fails {it['condition']} on {it['failing_fraction']:.0%} of base points")
        for name, pts in sorted(state.pending.items()):
            parts.append(f"{name}: {len(pts)} bad points left after {state.rounds} rounds")
        raise NonConvergence("refinement did not converge: " + "; ".join(parts), state)
    return state


# ---------------------------------------------------------------------------
# rank partition


def _projected_gradient_residual(s: Stratum, f: FunctionOnSpace):
    if isinstance(s, ParametricStratum):

        def res(u):
            try:
                x = s.phi(u).astype(float)
                g = f.gradient(x)
                return s.jacobian(u).astype(float).T @ g
            except DomainError:
                return np.full(s.dim, 1e6)

        return res
    assert isinstance(s, ImplicitStratum)

    def res(x):
        try:
            g = f.gradient(x)
        except DomainError:
            return np.full(len(s.equations) + s.ambient_dim, 1e6)
        eqs = s.residuals(x)
        if not s.equations:
            return np.concatenate([eqs, g])
        jac = s.jacobian(x)
        coef = np.linalg.lstsq(jac.T, g, rcond=None)[0]
        return np.concatenate([eqs, g - jac.T @ coef])

    return res


def _critical_points(s: Stratum, f: FunctionOnSpace, box: Box, seed: int, seeds: int = 48) -> list[np.ndarray]:
    res = _projected_gradient_residual(s, f)
    if isinstance(s, ParametricStratum):
        dom = Box(tuple(a for a, _ in s.domain), tuple(b for _, b in s.domain))
        starts = dom.points(seeds, seed + 3)
    else:
        starts = box.points(seeds, seed + 3)
    found = []
    for x0 in starts:
        try:
            sol = least_squares(res, x0, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=400)
        except (ValueError, np.linalg.LinAlgError):
            continue
        if not np.all(np.isfinite(sol.x)) or np.linalg.norm(sol.fun) > 1e-9:
            continue
        if isinstance(s, ParametricStratum):
            if not s.in_domain(sol.x):
                continue
            x = s.phi(sol.x).astype(float)
        else:
            x = sol.x
            if not _ineq_ok(s.inequalities, x) or not s.is_regular(x):
                continue
        if not box.contains(x):
            continue
        found.append(x)
    clusters = _clusters(found, 1e-5 * box.scale)
    if len(clusters) > MAX_SINGULAR_POINTS:
        raise UnsupportedCriticalLocus(f"critical set of f on {s.name!r} looks positive dimensional")
    out = []
    for cl in clusters:
        x = np.mean(cl, axis=0)
        out.append(np.array([float(v) for v in _snap_vector_loose(x)]))
    return out


def _snap_vector_loose(x) -> list:
    out = []
    for v in x:
        f = _snap(float(v), 64, 1e-7)
        out.append(f if f is not None else float(v))
    return out


def rank_partition(S: Stratification, f: FunctionOnSpace, seed: int = 0, samples: int = 40) -> tuple[Stratification, FunctionOnSpace]:
    """Split strata so that the rank of f restricted to each one is constant.

    Returns the new stratification and f with the rank of every stratum
    recorded.
    """
    box = S.box
    ranks: dict[str, int] = dict(f.declared_rank)
    for name in list(S.strata):
        s = S.strata[name]
        if s.dim == 0 or name in f.declared_rank:
            ranks[name] = 0 if s.dim == 0 else ranks[name]
            continue
        pts = s.sample(samples, seed, box)
        values = []
        for x in pts:
            try:
                values.append(rank_at(s, f, x))
            except (RankDrop, DomainError):
                continue
        if values and all(v == 0 for v in values):
            ranks[name] = 0
            continue
        if values and any(v == 0 for v in values):
            raise UnsupportedCriticalLocus(f"f has rank 0 on part of {name!r} at sampled points")
        crit = _critical_points(s, f, box, seed)
        if not crit:
            ranks[name] = 1
            continue
        pieces, points = split_stratum(s, crit, box)
        S = _replace(S, name, pieces, points, seed)
        for piece in pieces:
            ranks[piece.name] = 1
        for q in points:
            ranks[q.name] = 0
    ranks = {k: v for k, v in ranks.items() if k in S.strata}
    return S, FunctionOnSpace(f.expr, f.ambient_dim, ranks)


# ---------------------------------------------------------------------------
# certification


@dataclass
class Certificate:
    status: str
    conditions: tuple[str, ...]
    scans: list[ScanResult]

    def rows(self) -> list[dict]:
        out = []
        for scan in self.scans:
            for r in scan.reports:
                out.append(
                    {
                        "condition": r.condition,
                        "lower": r.pair[0],
                        "upper": r.pair[1],
                        "base": [float(v) for v in r.base],
                        "verdict": r.verdict,
                        "constant": r.constant,
                        "slope": r.slope,
                    }
                )
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["condition", "lower", "upper", "base", "verdict", "constant", "slope"])
        for row in self.rows():
            w.writerow(
                [
                    row["condition"],
                    row["lower"],
                    row["upper"],
                    " ".join(repr(v) for v in row["base"]),
                    row["verdict"],
                    repr(float(row["constant"])),
                    repr(float(row["slope"])),
                ]
            )
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "status": self.status,
            "conditions": list(self.conditions),
            "pairs": [s.summary() for s in self.scans],
        }

    def witnesses(self):
        return [r for s in self.scans for r in s.failing]


def certify(state: RefinementState, conditions: Sequence[str] = ("w",), base_grid: int | None = None) -> Certificate:
    """Verdict matrix over every frontier pair and base point.

    Certified when every entry holds, Refuted when some entry fails (its
    witness wing is in the report), Inconclusive otherwise.
    """
    if base_grid is not None and base_grid != state.base_grid:
        state.base_grid = base_grid
        state.reports = {}
    S = state.stratification
    scans = []
    for lo, hi in S.frontier:
        res = state.scan(lo, hi, conditions)
        scans.extend(res[c] for c in conditions)
    verdicts = [r.verdict for s in scans for r in s.reports]
    if any(v == FAILS for v in verdicts):
        status = REFUTED
    elif all(v == HOLDS for v in verdicts):
        status = CERTIFIED
    else:
        status = INCONCLUSIVE
    return Certificate(status, tuple(conditions), scans)
