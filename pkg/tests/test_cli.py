import json

import pytest

from stratcheck.cli import main


def run(args, tmp_path, capsys):
    code = main(args + ["--out", str(tmp_path / "out")])
    return code, capsys.readouterr()


def test_kurdyka_wf_fails(tmp_path, capsys):
    code, out = run(["check", "kurdyka", "-c", "wf", "--base", "1,0"], tmp_path, capsys)
    assert code == 2
    assert "Fails" in out.out
    data = json.loads((tmp_path / "out" / "G_H_0_wf.json").read_text())
    assert abs(data["slope"] + 1) <= 0.05
    assert any(w["witness"] for w in data["wings"])


def test_half_plane_w_holds(tmp_path, capsys):
    code, out = run(["check", "half-plane", "-c", "w", "--base", "0.2,0"], tmp_path, capsys)
    assert code == 0
    assert "C=0 " in out.out


def test_umbrella_b_at_origin(tmp_path, capsys):
    code, _ = run(["check", "umbrella-coarse", "-c", "b", "--pair", "Z,S+", "--base", "0,0,0"], tmp_path, capsys)
    assert code == 2


def test_inconclusive_exit(tmp_path, capsys):
    code, _ = run(["check", "umbrella-coarse", "-c", "b", "--pair", "Z,S+", "--base", "0,0,-0.5"], tmp_path, capsys)
    assert code == 3


def test_scene_file_path(tmp_path, capsys):
    scene = {
        "name": "flat",
        "variables": ["x", "y"],
        "box": [[-1, 1], [-1, 1]],
        "strata": [
            {"name": "L", "type": "implicit", "equations": ["y"], "dim": 1},
            {"name": "H", "type": "implicit", "equations": [], "inequalities": ["y"], "dim": 2},
        ],
        "frontier": [["L", "H"]],
    }
    path = tmp_path / "flat.json"
    path.write_text(json.dumps(scene))
    code, out = run(["check", str(path), "-c", "a", "--base", "0.1,0", "--base=-0.3,0"], tmp_path, capsys)
    assert code == 0
    assert out.out.count("Holds") == 2


@pytest.mark.parametrize(
    "args",
    [
        [],
        ["check", "kurdyka", "-c", "zz"],
        ["check", "no-such-scene", "-c", "w"],
        ["check", "kurdyka", "-c", "w", "--grid", "0.1,2,24"],
        ["check", "kurdyka", "-c", "w", "--tol", "speed=3"],
        ["check", "kurdyka", "-c", "w", "--pair", "G,Q"],
        ["check", "kurdyka", "-c", "w", "--base", "1,0,0"],
        ["check", "umbrella", "-c", "w"],
        ["check", "half-plane", "-c", "wf", "--base", "1,0", "--pair", "L,H", "--tol", "dps=x"],
        ["check", "umbrella", "-c", "wf", "--pair", "P0,S0"],
        ["stratify", "x^2*y"],
        ["stratify", "x +* y"],
        ["stratify", "x*y", "--conditions", "w,q"],
        ["gallery", "--filter", "nope"],
    ],
)
def test_usage_errors_exit_1(args, tmp_path, capsys):
    code = main(args + (["--out", str(tmp_path)] if args else []))
    assert code == 1
    assert capsys.readouterr().err


def test_stratify_polynomial(tmp_path, capsys):
    code, out = run(["stratify", "x*y", "--conditions", "w,b", "--wings", "3", "--base-grid", "4"], tmp_path, capsys)
    assert code == 0
    assert out.out.strip().endswith("Certified")
    d = tmp_path / "out"
    assert json.loads((d / "summary.json").read_text())["certificate"]["status"] == "Certified"
    assert (d / "certificate.csv").read_text().startswith("condition,")
    assert json.loads((d / "stratification.json").read_text())["polynomial"] == "x*y"


def test_gallery_filter(tmp_path, capsys):
    code, out = run(["gallery", "--filter", "spiral", "--seed", "7"], tmp_path, capsys)
    assert code == 0
    assert "no expectation" in out.out
    assert (tmp_path / "out" / "summary.csv").exists()


def test_check_is_deterministic(tmp_path, capsys):
    args = ["check", "umbrella-coarse", "-c", "w", "--pair", "Z,S-", "--base", "0,0,0.3", "--seed", "4"]
    main(args + ["--out", str(tmp_path / "a")])
    main(args + ["--out", str(tmp_path / "b")])
    capsys.readouterr()
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert names == sorted(p.name for p in (tmp_path / "b").iterdir())
    for n in names:
        assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()


def test_module_entry_point():
    import subprocess
    import sys

    r = subprocess.run([sys.executable, "-m", "stratcheck", "check", "--help"], capture_output=True, text=True)
    assert r.returncode == 0
    assert "--condition" in r.stdout
