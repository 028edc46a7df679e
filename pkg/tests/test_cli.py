import copy
import json

import numpy as np
import pytest

from genconvex import cli
from genconvex.scenarios import builtin, builtin_document


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    return code, capsys.readouterr().err


def _read_all(folder):
    return {p.name: p.read_bytes() for p in sorted(folder.iterdir())}


def test_disc_hull_exit_zero(tmp_path, capsys):
    code, err = run(capsys, "hull", "builtin:disc", "--set", "circle:0.75:64", "--degree", "8", "--out", tmp_path)
    assert code == 0 and err == ""
    assert {"hull.csv", "certificates.json", "hull.svg"} <= set(_read_all(tmp_path))
    doc = json.loads((tmp_path / "certificates.json").read_text())
    assert doc["escape"] is False and doc["members"] > 0


def test_hartogs_hull_exit_two(tmp_path, capsys):
    code, err = run(capsys, "hull", "builtin:hartogs", "--set", "torus:0.9,0.75:16", "--query", "near:0.7,0,0,0",
                    "--out", tmp_path)
    assert code == 2
    assert err.startswith("evidence:") and "outside the domain" in err


def test_cone_mode_uses_symmetrized_sample(tmp_path, capsys):
    code, err = run(capsys, "hull", "builtin:disc", "--set", "circle:0.75:64", "--mode", "cone", "--out", tmp_path)
    assert code == 0 and err == ""
    doc = json.loads((tmp_path / "certificates.json").read_text())
    assert doc["escape"] is False and doc["members"] > 0


def test_hull_outputs_are_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert run(capsys, "hull", "builtin:disc", "--set", "chain:2", "--mode", "C", "--C", "2", "--out", out)[0] == 0
    assert _read_all(a) == _read_all(b)


def test_exhaust_disc_and_outputs(tmp_path, capsys):
    code, _ = run(capsys, "exhaust", "builtin:disc", "--out", tmp_path)
    assert code == 0
    files = _read_all(tmp_path)
    assert {"exhaustion.json", "values.csv", "polygons.json", "contours.svg"} <= set(files)
    assert len(json.loads(files["exhaustion.json"])["levels"]) == 4
    again = tmp_path / "again"
    run(capsys, "exhaust", "builtin:disc", "--out", again)
    assert _read_all(again) == {k: v for k, v in files.items() if k != "again"}


def test_exhaust_hartogs_names_uncovered_points(tmp_path, capsys):
    code, err = run(capsys, "exhaust", "builtin:hartogs", "--out", tmp_path)
    assert code == 2
    assert "evidence: uncovered shell point" in err
    doc = json.loads((tmp_path / "exhaustion.json").read_text())
    assert doc["built"] is False and doc["uncovered_points"]


def test_cone_path_with_short_chain_exits_one(tmp_path, capsys):
    doc = copy.deepcopy(builtin_document("disc"))
    doc["chain"]["params"]["radii"] = [0.5, 0.75, 0.875]
    path = tmp_path / "short.json"
    path.write_text(json.dumps(doc))
    code, err = run(capsys, "exhaust", path, "--path", "cone", "--out", tmp_path / "out")
    assert code == 1
    assert err.startswith("error:") and "at least 4" in err


def test_certify_exit_codes(tmp_path, capsys):
    assert run(capsys, "certify", "builtin:polydisc", "--out", tmp_path / "p")[0] == 0
    code, err = run(capsys, "certify", "builtin:hartogs", "--out", tmp_path / "h")
    assert code == 2
    assert "evidence: hull_compactness failed" in err
    assert "evidence: exhaustion_built failed" in err
    report = json.loads((tmp_path / "h" / "report.json").read_text())
    assert report["coherent"] is True


def test_missing_file_exits_one(tmp_path, capsys):
    code, err = run(capsys, "certify", tmp_path / "nope.json", "--out", tmp_path)
    assert code == 1 and err.startswith("error:")


def test_schema_error_names_the_key(tmp_path, capsys):
    doc = copy.deepcopy(builtin_document("disc"))
    doc["grid"]["spacing"] = 0.1
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    code, err = run(capsys, "hull", path, "--out", tmp_path / "out")
    assert code == 1
    assert "spacing" in err and "grid" in err


def test_malformed_json_exits_one(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text('{"name": ')
    code, err = run(capsys, "certify", path, "--out", tmp_path / "out")
    assert code == 1 and "malformed JSON" in err


@pytest.mark.parametrize(
    "argv",
    [
        ["hull"],
        ["hull", "builtin:disc", "--mode", "spectral"],
        ["frobnicate"],
    ],
)
def test_usage_errors_exit_one(argv, capsys):
    with pytest.raises(SystemExit) as info:
        cli.main(argv)
    assert info.value.code == 1
    assert "error:" in capsys.readouterr().err


@pytest.mark.parametrize("spec", ["circle:x:4", "torus:1:4", "chain:9", "bogus:1", "points:1,2;3"])
def test_bad_set_specs_exit_one(spec, tmp_path, capsys):
    code, err = run(capsys, "hull", "builtin:disc", "--set", spec, "--out", tmp_path)
    assert code == 1 and err.startswith("error:")


def test_parse_set_and_query_grammar(tmp_path):
    sc = builtin("disc")
    assert cli.parse_set("circle:0.5:8:1,0", sc).shape == (8, 2)
    np.testing.assert_allclose(cli.parse_set("circle:0.5:8:1,0", sc).mean(axis=0), [1.0, 0.0], atol=1e-12)
    assert cli.parse_set("points:0,0;0.1,0.2", sc).tolist() == [[0.0, 0.0], [0.1, 0.2]]
    assert cli.parse_set("chain:1", sc).shape == (64, 2)
    csv_file = tmp_path / "pts.csv"
    csv_file.write_text("# x,y\n0.1,0.2\n0.3,0.4\n")
    assert cli.parse_set(f"file:{csv_file}", sc).shape == (2, 2)
    json_file = tmp_path / "pts.json"
    json_file.write_text("[[0.1, 0.2]]")
    assert cli.parse_set(f"file:{json_file}", sc).shape == (1, 2)
    g = sc.grid
    assert len(cli.parse_query("grid", sc)) == len(g)
    np.testing.assert_array_equal(cli.parse_query("escape", sc), np.flatnonzero(g.escape_zone))
    np.testing.assert_array_equal(cli.parse_query("chain:1", sc), np.flatnonzero(sc.chain.mask(1)))
    assert cli.parse_query("near:0.31,-0.01", sc).tolist() == [g.nearest([0.3, 0.0])]
    with pytest.raises(cli.SpecError):
        cli.parse_query("near:0.1,0.2,0.3", sc)
