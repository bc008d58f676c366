import json

import numpy as np
import pytest

from stratcheck.gallery import GALLERY, scene_path
from stratcheck.scene import SceneError, dump_scene, load_scene, parse_scene
from stratcheck.strata import ImplicitStratum, ParametricStratum, PointStratum, membership

MINIMAL = {
    "name": "half",
    "variables": ["x", "y"],
    "box": [[-1, 1], [-1, 1]],
    "strata": [
        {"name": "L", "type": "implicit", "equations": ["y"], "dim": 1},
        {"name": "H", "type": "implicit", "equations": [], "inequalities": ["y"], "dim": 2},
    ],
    "frontier": [["L", "H"]],
}


def with_(**kw):
    d = json.loads(json.dumps(MINIMAL))
    d.update(kw)
    return d


def test_minimal_scene():
    sc = parse_scene(MINIMAL)
    assert set(sc.strata) == {"L", "H"}
    assert sc.stratification.frontier == [("L", "H")]
    assert sc.function is None
    assert sc.box.dim == 2


@pytest.mark.parametrize("name", sorted({e.scene for e in GALLERY} | {"half-plane"}))
def test_shipped_scenes_round_trip(name):
    sc = load_scene(scene_path(name))
    text = dump_scene(sc)
    again = parse_scene(json.loads(text))
    assert dump_scene(again) == text


def test_stratum_types(shipped):
    xs = shipped("xsin")
    assert isinstance(xs.strata["O"], PointStratum)
    assert isinstance(xs.strata["C"], ParametricStratum)
    assert isinstance(shipped("umbrella").strata["S0"], ImplicitStratum)
    assert xs.definable is False
    assert shipped("kurdyka").polynomially_bounded is False


def test_declared_wings_are_attached_to_pairs(shipped):
    k = shipped("kurdyka")
    (w,) = k.declared_wings("G", "H")
    assert w.label == "level curve"
    assert k.declared_wings("H", "G") == ()


@pytest.mark.parametrize(
    "data, fragment",
    [
        ({k: v for k, v in MINIMAL.items() if k != "box"}, "missing 'box'"),
        (with_(box=[[-1, 1]]), "sides"),
        (with_(frontier=[["L", "Q"]]), "Q"),
        (with_(strata=MINIMAL["strata"] + [MINIMAL["strata"][0]]), "duplicate"),
        (with_(strata=[{"name": "P", "type": "point", "point": [0]}]), "coordinates"),
        (with_(strata=[{"name": "P", "type": "blob"}]), "unknown type"),
        (with_(strata=[{"name": "L", "type": "implicit", "equations": ["y +"], "dim": 1}]), "L"),
        (with_(function={"expr": "x", "rank": {"Q": 0}}), "unknown stratum"),
        (with_(wings=[{"pair": ["L", "Q"], "point": ["t", "t"]}]), "unknown strata"),
        (with_(wings=[{"pair": ["L", "H"], "point": ["t"]}]), "coordinates"),
        (with_(base_points={"Q": [[0, 0]]}), "unknown stratum"),
        (with_(polynomial="exp(x)"), "polynomial"),
    ],
)
def test_bad_scenes(data, fragment):
    with pytest.raises(SceneError) as err:
        parse_scene(data)
    assert fragment in str(err.value)


def test_bad_json_reports_position(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"name": "x",\n "box": [}')
    with pytest.raises(SceneError) as err:
        load_scene(p)
    assert "line 2" in str(err.value)


def test_transformed_scene_maps_strata_and_wings(shipped):
    sc = shipped("kurdyka")
    m = np.array([[0.0, -1.0], [1.0, 0.0]])
    b = np.array([1.0, 2.0])
    moved = sc.transformed(m, b)
    x = np.array([1.0, 0.0])
    assert membership(moved.strata["G"], m @ x + b)
    assert moved.base_points["G"][1] == pytest.approx(list(m @ x + b))
    assert len(moved.declared_wings("G", "H")) == 1
    # the function follows the points
    from stratcheck.expr import evaluate

    pt = np.array([1.5, 0.3])
    assert evaluate(moved.function.expr, list(m @ pt + b)) == pytest.approx(evaluate(sc.function.expr, list(pt)))
