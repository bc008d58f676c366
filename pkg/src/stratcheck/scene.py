"""Scene files: JSON description of a stratified set, a function and wings.

Schema (all keys except ``variables``, ``box`` and ``strata`` optional)::

    {
      "name": "umbrella",
      "variables": ["x", "y", "z"],
      "box": [[-1, 1], [-1, 1], [-1, 1]],
      "polynomial": "x^2 - z*y^2",
      "strata": [
        {"name": "O", "type": "point", "point": [0, 0, 0]},
        {"name": "Z", "type": "implicit", "equations": ["x", "y"],
         "inequalities": ["z"], "dim": 1},
        {"name": "C", "type": "parametric", "params": ["u"],
         "maps": ["u", "u*sin(1/u)"], "domain": [[0, 1]]}
      ],
      "frontier": [["O", "Z"]],
      "function": {"expr": "y^x", "rank": {"G": 0}},
      "base_points": {"Z": [[0, 0, 0.5]]},
      "wings": [{"pair": ["G", "H"], "label": "level",
                 "point": ["x", "exp(-1/(t*x))"], "param": null,
                 "t_values": null, "grid": null}],
      "definable": true,
      "polynomially_bounded": true
    }

Wing expressions use the scene variables for the base point plus ``t``.
Expression strings are kept verbatim, so load followed by dump returns the
same document.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .expr import Const, Expr, Var, parse, substitute, to_text
from .limits import DeclaredWing
from .polynomial import Polynomial
from .strata import (
    Box,
    FunctionOnSpace,
    ImplicitStratum,
    ParametricStratum,
    PointStratum,
    Stratification,
    Stratum,
)

__all__ = ["SceneError", "Scene", "load_scene", "parse_scene", "dump_scene", "scene_from_stratification"]

DEFAULT_PARAMS = ("u", "v", "w")


class SceneError(ValueError):
    pass


@dataclass(eq=False)
class Scene:
    name: str
    variables: tuple[str, ...]
    stratification: Stratification
    function: FunctionOnSpace | None = None
    wings: dict[tuple[str, str], tuple[DeclaredWing, ...]] = field(default_factory=dict)
    base_points: dict[str, list[tuple[float, ...]]] = field(default_factory=dict)
    polynomial: Polynomial | None = None
    data: dict = field(default_factory=dict)

    @property
    def box(self) -> Box:
        return self.stratification.box

    @property
    def strata(self) -> dict[str, Stratum]:
        return self.stratification.strata

    @property
    def definable(self) -> bool:
        return bool(self.data.get("definable", True))

    @property
    def polynomially_bounded(self) -> bool:
        return bool(self.data.get("polynomially_bounded", True))

    def declared_wings(self, lower: str, upper: str) -> tuple[DeclaredWing, ...]:
        return self.wings.get((lower, upper), ())

    def to_dict(self) -> dict:
        return copy.deepcopy(self.data)

    def dumps(self) -> str:
        return dump_scene(self)

    def with_stratification(self, strat: Stratification, name: str | None = None) -> "Scene":
        """New scene sharing function and polynomial, with strata rewritten.

        Wings and base points are kept for strata that still exist.
        """
        extra = {k: self.data[k] for k in ("definable", "polynomially_bounded") if k in self.data}
        wings = [w for w in self.data.get("wings", []) if all(k in strat.strata for k in w["pair"])]
        if wings:
            extra["wings"] = copy.deepcopy(wings)
        points = {k: v for k, v in self.data.get("base_points", {}).items() if k in strat.strata}
        if points:
            extra["base_points"] = copy.deepcopy(points)
        return scene_from_stratification(
            strat,
            name or self.name,
            self.variables,
            function=self.data.get("function"),
            polynomial=self.data.get("polynomial"),
            extra=extra,
        )

    def transformed(self, matrix, offset) -> "Scene":
        """Image of the scene under x -> matrix @ x + offset (matrix invertible).

        Declared wings are carried along; base points are mapped.
        """
        matrix = np.asarray(matrix, dtype=float)
        offset = np.asarray(offset, dtype=float)
        n = len(self.variables)
        inv = np.linalg.inv(matrix)
        back = -inv @ offset
        strat = self.stratification.transformed(matrix, offset)
        data = _strat_data(strat, self.variables)
        data["name"] = self.name
        if self.function is not None:
            fx = _compose(self.function.expr, inv, back, n)
            data["function"] = {"expr": to_text(fx, self.variables), "rank": dict(self.function.declared_rank)}
        if self.polynomial is not None:
            data["polynomial"] = str_poly(self.polynomial.compose_affine(inv, back), self.variables)
        if self.base_points:
            data["base_points"] = {
                k: [[float(v) for v in matrix @ np.asarray(p) + offset] for p in pts] for k, pts in self.base_points.items()
            }
        wings = []
        wnames = list(self.variables) + ["t"]
        for (lo, hi), ws in self.wings.items():
            for w in ws:
                # base coordinates of the original scene, then t
                images = [_affine_expr(inv[i], back[i], n) for i in range(n)] + [Var(n)]
                pt = [substitute(e, images) for e in w.point]
                pt = [_affine_combo(matrix[i], offset[i], pt) for i in range(n)]
                entry = {"pair": [lo, hi], "label": w.label, "point": [to_text(e, wnames) for e in pt]}
                if w.param is not None:
                    entry["param"] = [to_text(substitute(e, images), wnames) for e in w.param]
                if w.t_values is not None:
                    entry["t_values"] = list(w.t_values)
                if w.grid is not None:
                    entry["grid"] = list(w.grid)
                wings.append(entry)
        if wings:
            data["wings"] = wings
        for k in ("definable", "polynomially_bounded"):
            if k in self.data:
                data[k] = self.data[k]
        out = parse_scene(data)
        # the parsed strata match, but only these keep the pulled-back equations
        out.stratification = strat
        return out


def str_poly(p: Polynomial, names) -> str:
    return to_text(p.to_expr(), list(names))


def _affine_expr(row, c, n) -> Expr:
    e: Expr = Const(float(c))
    for j in range(n):
        if row[j] != 0:
            e = e + Const(float(row[j])) * Var(j)
    return e


def _affine_combo(row, c, exprs) -> Expr:
    e: Expr = Const(float(c))
    for j, ex in enumerate(exprs):
        if row[j] != 0:
            e = e + Const(float(row[j])) * ex
    return e


def _compose(e: Expr, matrix, offset, n) -> Expr:
    return substitute(e, [_affine_expr(matrix[i], offset[i], n) for i in range(n)])


def _floats(seq) -> list[float]:
    return [float(v) for v in seq]


def _parse_expr(text, names, where: str) -> Expr:
    if not isinstance(text, str):
        text = repr(text) if isinstance(text, float) else str(text)
    try:
        return parse(text, names)
    except ValueError as exc:
        raise SceneError(f"{where}: {exc}") from None


def _build_stratum(entry: dict, names) -> Stratum:
    n = len(names)
    kind = entry.get("type")
    name = entry.get("name")
    if not name:
        raise SceneError("stratum without a name")
    where = f"stratum {name!r}"
    connected = bool(entry.get("connected", True))
    if kind == "point":
        pt = _floats(entry["point"])
        if len(pt) != n:
            raise SceneError(f"{where}: point has {len(pt)} coordinates, expected {n}")
        return PointStratum(name, tuple(pt), connected)
    if kind == "implicit":
        eqs = []
        for text in entry.get("equations", []):
            try:
                eqs.append(Polynomial.from_expr(_parse_expr(text, names, where), n))
            except ValueError as exc:
                raise SceneError(f"{where}: {exc}") from None
        ineqs = tuple(_parse_expr(g, names, where) for g in entry.get("inequalities", []))
        dim = int(entry.get("dim", n - len(eqs)))
        try:
            return ImplicitStratum(name, n, tuple(eqs), ineqs, dim, connected)
        except ValueError as exc:
            raise SceneError(f"{where}: {exc}") from None
    if kind == "parametric":
        domain = [tuple(_floats(d)) for d in entry["domain"]]
        pnames = list(entry.get("params", DEFAULT_PARAMS[: len(domain)]))
        if len(pnames) != len(domain):
            raise SceneError(f"{where}: {len(pnames)} parameter names for a {len(domain)}-dimensional domain")
        maps = tuple(_parse_expr(m, pnames, where) for m in entry["maps"])
        if len(maps) != n:
            raise SceneError(f"{where}: {len(maps)} maps for ambient dimension {n}")
        return ParametricStratum(name, n, maps, tuple(domain), connected)
    raise SceneError(f"{where}: unknown type {kind!r}")


def parse_scene(data: dict) -> Scene:
    """Build a Scene from a decoded JSON document."""
    try:
        names = tuple(data["variables"])
        box = Box.from_pairs(data["box"])
        strata_entries = data["strata"]
    except KeyError as exc:
        raise SceneError(f"scene is missing {exc.args[0]!r}") from None
    if box.dim != len(names):
        raise SceneError(f"box has {box.dim} sides for {len(names)} variables")
    strata: dict[str, Stratum] = {}
    for entry in strata_entries:
        s = _build_stratum(entry, names)
        if s.name in strata:
            raise SceneError(f"duplicate stratum {s.name!r}")
        strata[s.name] = s
    try:
        strat = Stratification(strata, [tuple(p) for p in data.get("frontier", [])], box)
    except KeyError as exc:
        raise SceneError(str(exc.args[0])) from None
    function = None
    if data.get("function") is not None:
        fd = data["function"]
        if isinstance(fd, str):
            fd = {"expr": fd}
        rank = {k: int(v) for k, v in (fd.get("rank") or {}).items()}
        for k in rank:
            if k not in strata:
                raise SceneError(f"function rank names unknown stratum {k!r}")
        function = FunctionOnSpace(_parse_expr(fd["expr"], names, "function"), len(names), rank)
    polynomial = None
    if data.get("polynomial") is not None:
        try:
            polynomial = Polynomial.from_expr(_parse_expr(data["polynomial"], names, "polynomial"), len(names))
        except ValueError as exc:
            raise SceneError(f"polynomial: {exc}") from None
    wnames = list(names) + ["t"]
    wings: dict[tuple[str, str], tuple[DeclaredWing, ...]] = {}
    for i, w in enumerate(data.get("wings", []) or []):
        pair = tuple(w["pair"])
        if pair[0] not in strata or pair[1] not in strata:
            raise SceneError(f"wing {i} names unknown strata {pair}")
        where = f"wing {w.get('label', i)!r}"
        point = tuple(_parse_expr(e, wnames, where) for e in w["point"])
        if len(point) != len(names):
            raise SceneError(f"{where}: {len(point)} coordinates, expected {len(names)}")
        param = tuple(_parse_expr(e, wnames, where) for e in w["param"]) if w.get("param") else None
        tv = tuple(float(v) for v in w["t_values"]) if w.get("t_values") else None
        grid = tuple(w["grid"]) if w.get("grid") else None
        dw = DeclaredWing(point, param, tv, grid, str(w.get("label", f"declared{i}")), texts=dict(w))
        wings[pair] = wings.get(pair, ()) + (dw,)
    bases = {}
    for k, pts in (data.get("base_points") or {}).items():
        if k not in strata:
            raise SceneError(f"base points name unknown stratum {k!r}")
        bases[k] = [tuple(_floats(p)) for p in pts]
    return Scene(
        name=str(data.get("name", "scene")),
        variables=names,
        stratification=strat,
        function=function,
        wings=wings,
        base_points=bases,
        polynomial=polynomial,
        data=copy.deepcopy(data),
    )


def load_scene(path) -> Scene:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SceneError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return parse_scene(data)


def dump_scene(scene: Scene) -> str:
    return json.dumps(scene.data, indent=2) + "\n"


def _stratum_data(s: Stratum, names) -> dict:
    if isinstance(s, PointStratum):
        return {"name": s.name, "type": "point", "point": [float(v) for v in s.point]}
    if isinstance(s, ImplicitStratum):
        d = {
            "name": s.name,
            "type": "implicit",
            "equations": [str_poly(p, names) for p in s.equations],
            "inequalities": [to_text(g, list(names)) for g in s.inequalities],
            "dim": s.dim,
        }
    else:
        assert isinstance(s, ParametricStratum)
        pnames = list(DEFAULT_PARAMS[: s.dim])
        d = {
            "name": s.name,
            "type": "parametric",
            "params": pnames,
            "maps": [to_text(m, pnames) for m in s.maps],
            "domain": [list(p) for p in s.domain],
        }
    if not s.connected:
        d["connected"] = False
    return d


def _strat_data(strat: Stratification, names) -> dict:
    return {
        "variables": list(names),
        "box": strat.box.pairs(),
        "strata": [_stratum_data(s, names) for s in strat.strata.values()],
        "frontier": [list(p) for p in strat.frontier],
    }


def scene_from_stratification(strat: Stratification, name: str, names, function=None, polynomial=None, extra=None) -> Scene:
    data = {"name": name}
    data.update(_strat_data(strat, names))
    if polynomial is not None:
        data["polynomial"] = polynomial if isinstance(polynomial, str) else str_poly(polynomial, names)
    if function is not None:
        data["function"] = function
    data.update(extra or {})
    return parse_scene(data)
