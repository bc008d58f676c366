import json

import pytest

from stratcheck.conditions import CONDITIONS, HOLDS
from stratcheck.gallery import (
    GALLERY,
    TAGS,
    Expect,
    entry_seed,
    run_entry,
    run_gallery,
    scene_path,
    summary_csv,
    summary_table,
)

BY_NAME = {e.name: e for e in GALLERY}


def test_gallery_contents():
    assert list(BY_NAME) == [
        "kurdyka",
        "xsin",
        "spiral",
        "xy-cross",
        "cusp",
        "umbrella-coarse",
        "umbrella",
        "exp-graph",
        "constant-f",
    ]
    for e in GALLERY:
        assert scene_path(e.scene).exists()


def test_every_expectation_is_tagged():
    for e in GALLERY:
        for probe in e.probes:
            for x in probe.expect:
                assert x.tag in TAGS
                assert x.condition in CONDITIONS


def test_open_questions_carry_no_expectation():
    spiral = BY_NAME["spiral"]
    assert spiral.open_question
    assert all(not p.expect for p in spiral.probes)
    assert all(p.conditions for p in spiral.probes)
    assert [e.name for e in GALLERY if e.open_question] == ["spiral"]


def test_flags():
    assert BY_NAME["kurdyka"].polynomially_bounded is False
    assert BY_NAME["xsin"].definable is False
    assert BY_NAME["xy-cross"].polynomially_bounded is True


def test_untagged_expectation_is_rejected():
    with pytest.raises(ValueError):
        Expect("w", HOLDS, "GUESS")


def test_entry_seeds_depend_on_master_and_name():
    assert entry_seed(7, "cusp") == entry_seed(7, "cusp")
    assert entry_seed(7, "cusp") != entry_seed(8, "cusp")
    assert entry_seed(7, "cusp") != entry_seed(7, "kurdyka")


def test_run_entry_writes_replayable_reports(tmp_path):
    res = run_entry(BY_NAME["cusp"], seed=1, out=tmp_path)
    assert res.passed
    files = sorted(p.name for p in (tmp_path / "cusp").iterdir())
    reports = [f for f in files if f.endswith(".json")]
    assert reports and all(f[:-5] + ".svg" in files for f in reports)
    data = json.loads((tmp_path / "cusp" / reports[0]).read_text())
    assert list(data)[:4] == ["condition", "pair", "base", "verdict"]
    for w in data["wings"]:
        assert w["csv"] in files


def test_unknown_entry():
    with pytest.raises(KeyError):
        run_gallery(["nope"])


def test_summary_table():
    results = run_gallery(["xy-cross", "spiral"], seed=2)
    table = summary_table(results)
    assert table.endswith("2/2 entries met all expectations\n")
    assert "no expectation" in table
    assert "open question" in table
    rows = summary_csv(results).strip().splitlines()
    assert rows[0].startswith("entry,")
    assert len(rows) > 4


def test_parallel_run_matches_sequential(tmp_path):
    a = run_gallery(["xy-cross", "cusp"], seed=3, out=tmp_path / "a")
    b = run_gallery(["xy-cross", "cusp"], seed=3, out=tmp_path / "b", jobs=2)
    assert summary_csv(a) == summary_csv(b)
    for p in (tmp_path / "a").rglob("*"):
        if p.is_file():
            assert p.read_bytes() == (tmp_path / "b" / p.relative_to(tmp_path / "a")).read_bytes()
