"""Built-in worked examples with expected verdicts.

Each expectation carries a provenance tag: PAPER (a published computation),
TRIVIAL (follows from the definitions) or DERIVED (an independent analytic
argument, then locked in as a regression). Entries marked as open questions
run and report but carry no expectation.
"""

from __future__ import annotations

import csv
import io
import json
import math
import zlib
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .conditions import FAILS, HOLDS, CheckParams, ConditionReport, _jsonable, check_many
from .limits import samples_to_csv
from .scene import Scene, load_scene

__all__ = [
    "TAGS",
    "Expect",
    "Probe",
    "GalleryEntry",
    "GALLERY",
    "ProbeOutcome",
    "EntryResult",
    "scene_path",
    "entry_seed",
    "run_entry",
    "run_gallery",
    "write_report",
    "summary_csv",
    "summary_table",
]

TAGS = ("PAPER", "TRIVIAL", "DERIVED")


@dataclass(frozen=True)
class Expect:
    condition: str
    verdict: str
    tag: str
    note: str = ""
    slope: tuple[float, float] | None = None  # (target, tolerance)
    min_constant: float | None = None

    def __post_init__(self):
        if self.tag not in TAGS:
            raise ValueError(f"unknown provenance tag {self.tag!r}")

    def problems(self, report: ConditionReport) -> list[str]:
        out = []
        if report.verdict != self.verdict:
            out.append(f"{self.condition}: expected {self.verdict}, got {report.verdict}")
        if self.slope is not None:
            target, tol = self.slope
            if not abs(report.slope - target) <= tol:
                out.append(f"{self.condition}: slope {report.slope:.4g} not within {tol} of {target}")
        if self.min_constant is not None and not report.constant >= self.min_constant:
            out.append(f"{self.condition}: constant {report.constant:.4g} below {self.min_constant}")
        return out


@dataclass(frozen=True)
class Probe:
    """One base point of one pair, with the conditions to run there."""

    pair: tuple[str, str]
    base: tuple[float, ...]
    expect: tuple[Expect, ...] = ()
    extra: tuple[str, ...] = ()

    @property
    def conditions(self) -> tuple[str, ...]:
        seen = [e.condition for e in self.expect] + list(self.extra)
        return tuple(dict.fromkeys(seen))


@dataclass(frozen=True)
class GalleryEntry:
    name: str
    scene: str
    probes: tuple[Probe, ...]
    polynomially_bounded: bool
    definable: bool
    source: str
    open_question: str | None = None
    # conditions whose verdicts and constants must coincide at every probe
    agree: tuple[tuple[str, str], ...] = ()

    def load(self) -> Scene:
        return load_scene(scene_path(self.scene))

    @property
    def expectations(self) -> list[Expect]:
        return [e for p in self.probes for e in p.expect]


def scene_path(name: str) -> Path:
    """Path of a shipped scene file, by name without extension."""
    return Path(str(resources.files("stratcheck") / "scenes" / f"{name}.json"))


def _both(pair, base, verdict, tag_w, tag_b, note=""):
    return Probe(pair, base, (Expect("w", verdict, tag_w, note), Expect("b", verdict, tag_b, note)))


_DIM0 = "the small stratum is a point, so its tangent space is zero"

GALLERY: tuple[GalleryEntry, ...] = (
    GalleryEntry(
        "kurdyka",
        "kurdyka",
        tuple(
            Probe(
                ("G", "H"),
                (x0, 0.0),
                (
                    Expect("wf", FAILS, "PAPER", "ratio 1/(t x^2) along level curves", slope=(-1.0, 0.05)),
                    Expect("af", HOLDS, "DERIVED", "level tangents (x, -y log y) turn into the x axis"),
                ),
            )
            for x0 in (0.5, 1.0, 2.0)
        ),
        polynomially_bounded=False,
        definable=True,
        source="f(x, y) = y^x over the half strip, level curves y = exp(-1/(t x))",
    ),
    GalleryEntry(
        "xsin",
        "xsin",
        (
            Probe(
                ("O", "C"),
                (0.0, 0.0),
                (
                    Expect("b", FAILS, "PAPER", "secants along sin(1/x) = 0 stay off the tangents", min_constant=0.9),
                    Expect("w", HOLDS, "TRIVIAL", _DIM0),
                ),
            ),
        ),
        polynomially_bounded=False,
        definable=False,
        source="graph of x sin(1/x) for x > 0 over the origin",
    ),
    GalleryEntry(
        "spiral",
        "spiral",
        (Probe(("O", "C"), (0.0, 0.0), extra=("w", "b")),),
        polynomially_bounded=True,
        definable=True,
        source="curve (r cos r, r sin r), r > 0, over the origin",
        open_question="secant and tangent both tend to (1, 0) as r -> 0; no verdict is asserted",
    ),
    GalleryEntry(
        "xy-cross",
        "xy-cross",
        tuple(_both(("P0", s), (0.0, 0.0), HOLDS, "TRIVIAL", "TRIVIAL", "rays are straight") for s in ("S0", "S1", "S2", "S3")),
        polynomially_bounded=True,
        definable=True,
        source="V(xy): four open rays and the origin",
    ),
    GalleryEntry(
        "cusp",
        "cusp",
        tuple(_both(("P0", s), (0.0, 0.0), HOLDS, "TRIVIAL", "DERIVED", "both branches are tangent to the x axis") for s in ("S0", "S1")),
        polynomially_bounded=True,
        definable=True,
        source="V(y^2 - x^3): two branches and the cusp point",
    ),
    GalleryEntry(
        "umbrella-coarse",
        "umbrella-coarse",
        (
            _both(("Z", "S+"), (0.0, 0.0, 0.0), FAILS, "DERIVED", "DERIVED", "tangent planes along the handle rotate"),
            _both(("Z", "S+"), (0.0, 0.0, 0.5), HOLDS, "DERIVED", "DERIVED"),
        ),
        polynomially_bounded=True,
        definable=True,
        source="Whitney umbrella x^2 = z y^2 with the whole z axis as one stratum",
    ),
    GalleryEntry(
        "umbrella",
        "umbrella",
        tuple(_both(("P0", s), (0.0, 0.0, 0.0), HOLDS, "TRIVIAL", "DERIVED") for s in ("L0", "L1", "S0", "S1"))
        + tuple(_both(("L1", s), (0.0, 0.0, 0.5), HOLDS, "DERIVED", "DERIVED") for s in ("S0", "S1")),
        polynomially_bounded=True,
        definable=True,
        source="Whitney umbrella stratified by the engine, origin split off",
    ),
    GalleryEntry(
        "exp-graph",
        "exp-graph",
        (
            Probe(
                ("O", "C"),
                (0.0, 0.0),
                (Expect("w", HOLDS, "TRIVIAL", _DIM0), Expect("b", HOLDS, "DERIVED", "secant and tangent both tend to (1, 0)")),
            ),
        ),
        polynomially_bounded=False,
        definable=True,
        source="graph of exp(-1/x) for x > 0 over the origin",
    ),
    GalleryEntry(
        "constant-f",
        "constant-f",
        (
            Probe(
                ("L1", "S1"),
                (0.0, 0.0, 0.5),
                (Expect("wf", HOLDS, "TRIVIAL", "f constant: level tangents are full tangents"), Expect("w", HOLDS, "DERIVED")),
            ),
            Probe(("P0", "S1"), (0.0, 0.0, 0.0), (Expect("wf", HOLDS, "TRIVIAL", _DIM0), Expect("w", HOLDS, "TRIVIAL", _DIM0))),
        ),
        polynomially_bounded=True,
        definable=True,
        source="umbrella with f = 1, where the strict Thom condition reduces to (w)",
        agree=(("wf", "w"),),
    ),
)


def entry_seed(master: int, name: str) -> int:
    return zlib.crc32(f"{master}|{name}".encode()) & 0x7FFFFFFF


@dataclass
class ProbeOutcome:
    entry: str
    pair: tuple[str, str]
    base: tuple[float, ...]
    reports: dict[str, ConditionReport]
    expected: dict[str, Expect]
    problems: list[str]
    files: list[str] = field(default_factory=list)

    def rows(self) -> list[dict]:
        out = []
        for c, r in self.reports.items():
            e = self.expected.get(c)
            mine = [p for p in self.problems if p.startswith(c + ":")]
            if e is None:
                status = "no expectation"
            else:
                status = "pass" if not mine else "FAIL"
            out.append(
                {
                    "entry": self.entry,
                    "pair": f"{self.pair[0]}<{self.pair[1]}",
                    "base": " ".join(f"{v:.6g}" for v in self.base),
                    "condition": c,
                    "verdict": r.verdict,
                    "expected": e.verdict if e else "",
                    "tag": e.tag if e else "",
                    "constant": f"{r.constant:.6g}",
                    "slope": f"{r.slope:.6g}",
                    "status": status,
                }
            )
        return out


@dataclass
class EntryResult:
    entry: GalleryEntry
    outcomes: list[ProbeOutcome]

    @property
    def passed(self) -> bool:
        return not any(o.problems for o in self.outcomes)

    def rows(self) -> list[dict]:
        return [row for o in self.outcomes for row in o.rows()]


def _agreement(entry: GalleryEntry, reports: dict[str, ConditionReport]) -> list[str]:
    out = []
    for a, b in entry.agree:
        ra, rb = reports[a], reports[b]
        if ra.verdict != rb.verdict:
            out.append(f"{a}: verdict {ra.verdict} differs from {b} ({rb.verdict})")
        elif not _close(ra.constant, rb.constant, 1e-10):
            out.append(f"{a}: constant {ra.constant!r} differs from {b} ({rb.constant!r})")
    return out


def _close(u: float, v: float, tol: float) -> bool:
    if math.isnan(u) or math.isnan(v):
        return math.isnan(u) and math.isnan(v)
    return u == v or abs(u - v) <= tol


def run_entry(entry: GalleryEntry, params: CheckParams | None = None, seed: int = 0, out: Path | None = None) -> EntryResult:
    """Run every probe of an entry. With ``out`` set, reports, wing CSVs and
    plots go to ``out / entry.name``."""
    params = (params or CheckParams()).with_(seed=entry_seed(seed, entry.name))
    scene = entry.load()
    outcomes = []
    for k, probe in enumerate(entry.probes):
        lo, hi = probe.pair
        p = params.with_(declared=scene.declared_wings(lo, hi))
        reports = check_many(probe.conditions, scene.strata[lo], scene.strata[hi], probe.base, p, scene.function)
        expected = {e.condition: e for e in probe.expect}
        problems = [msg for e in probe.expect for msg in e.problems(reports[e.condition])]
        if entry.agree:
            problems += _agreement(entry, reports)
        outcome = ProbeOutcome(entry.name, probe.pair, tuple(probe.base), reports, expected, problems)
        if out is not None:
            for c, r in reports.items():
                outcome.files += write_report(r, Path(out) / entry.name, f"{lo}_{hi}_p{k}_{c}")
        outcomes.append(outcome)
    return EntryResult(entry, outcomes)


def write_report(report: ConditionReport, directory: Path, stem: str, plot: bool = True) -> list[str]:
    """Write ``stem``.json, one CSV per wing and an SVG plot. Returns the file names."""
    from .plots import ratio_plot

    directory.mkdir(parents=True, exist_ok=True)
    files = []
    refs = []
    for j, w in enumerate(report.wings):
        name = f"{stem}_wing{j}.csv"
        (directory / name).write_text(samples_to_csv(w.t, w.g))
        refs.append(name)
        files.append(name)
    data = report.as_dict()
    for w, ref in zip(data["wings"], refs):
        w["csv"] = ref
    if plot:
        svg = f"{stem}.svg"
        ratio_plot(report, directory / svg)
        data["plot"] = svg
        files.append(svg)
    (directory / f"{stem}.json").write_text(json.dumps(_jsonable(data), indent=2) + "\n")
    files.append(f"{stem}.json")
    return files


def run_gallery(
    names: list[str] | None = None,
    params: CheckParams | None = None,
    seed: int = 0,
    out: Path | None = None,
    jobs: int = 1,
) -> list[EntryResult]:
    """Run the selected entries (all by default) in gallery order.

    With ``jobs`` > 1 entries run in worker processes; results are merged in
    gallery order, and each entry's seed depends only on the master seed and
    its name, so output does not depend on scheduling.
    """
    entries = [e for e in GALLERY if names is None or e.name in names]
    if names is not None:
        unknown = sorted(set(names) - {e.name for e in GALLERY})
        if unknown:
            raise KeyError(f"unknown gallery entries: {', '.join(unknown)}")
    if jobs > 1 and len(entries) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(run_entry, e, params, seed, out) for e in entries]
            return [f.result() for f in futures]
    return [run_entry(e, params, seed, out) for e in entries]


SUMMARY_FIELDS = ("entry", "pair", "base", "condition", "verdict", "expected", "tag", "constant", "slope", "status")


def summary_csv(results: list[EntryResult]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SUMMARY_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in results:
        w.writerows(r.rows())
    return buf.getvalue()


def summary_table(results: list[EntryResult]) -> str:
    rows = [r for res in results for r in res.rows()]
    cols = ("entry", "pair", "base", "condition", "verdict", "expected", "tag", "status")
    widths = {c: max(len(c), *(len(str(r[c])) for r in rows)) if rows else len(c) for c in cols}
    lines = ["  ".join(c.ljust(widths[c]) for c in cols).rstrip()]
    lines += ["  ".join(str(r[c]).ljust(widths[c]) for c in cols).rstrip() for r in rows]
    for res in results:
        if res.entry.open_question:
            lines.append(f"{res.entry.name}: no expectation (open question: {res.entry.open_question})")
        for o in res.outcomes:
            lines += [f"{res.entry.name} {o.pair[0]}<{o.pair[1]}: {p}" for p in o.problems]
    ok = sum(r.passed for r in results)
    lines.append(f"{ok}/{len(results)} entries met all expectations")
    return "\n".join(lines) + "\n"
