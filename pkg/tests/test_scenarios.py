import copy
import json

import pytest

from genconvex.scenarios import BUILTIN, ScenarioError, builtin, builtin_document, builtin_path, from_dict, load


@pytest.fixture
def doc():
    return copy.deepcopy(builtin_document("disc"))


@pytest.mark.parametrize("name", BUILTIN)
def test_builtins_load(name):
    sc = builtin(name)
    assert sc.name == name
    assert builtin_path(name).is_file()
    assert sc.expected in ("consistent-with-convex", "inconsistent")


def test_two_disc_has_local_components():
    sc = builtin("two_disc")
    assert len(sc.components) == 2
    assert [c.center for c in sc.components] == [(-2 + 0j,), (2 + 0j,)]
    fam = sc.family_for(sc.components[1])
    assert fam.basis[1].describe() == "Re (z-2)"


@pytest.mark.parametrize(
    "path, value, where",
    [
        (("grid", "colour"), "red", "grid"),
        (("options", "speed"), 1, "options"),
        (("typo",), 1, "<root>"),
    ],
)
def test_unknown_keys_rejected(doc, path, value, where):
    node = doc
    for key in path[:-1]:
        node = node[key]
    node[path[-1]] = value
    with pytest.raises(ScenarioError, match=f"at {where}:.*{path[-1]}"):
        from_dict(doc)


@pytest.mark.parametrize("key, value", [("resolution", 7), ("margin_cells", 0)])
def test_grid_limits(doc, key, value):
    doc["grid"][key] = value
    with pytest.raises(ScenarioError, match=f"grid/{key}"):
        from_dict(doc)


def test_missing_required_key(doc):
    del doc["family"]
    with pytest.raises(ScenarioError, match="family"):
        from_dict(doc)


def test_dimension_mismatch(doc):
    doc["family"]["n_complex"] = 2
    with pytest.raises(ScenarioError, match="real coordinates"):
        from_dict(doc)


def test_bad_chain_becomes_scenario_error(doc):
    doc["chain"]["params"]["radii"] = [0.5, 0.5]
    with pytest.raises(ScenarioError, match="adds no grid point"):
        from_dict(doc)


def test_unknown_builtin():
    with pytest.raises(ScenarioError, match="unknown built-in"):
        builtin("torus")


def test_load_round_trip_and_malformed_json(tmp_path, doc):
    good = tmp_path / "disc.json"
    good.write_text(json.dumps(doc))
    assert load(good).name == "disc"
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ScenarioError, match="malformed JSON"):
        load(bad)


def test_affine_rect_scenario():
    sc = from_dict({
        "name": "box",
        "grid": {"kind": "rect", "params": {"lo": [-1, -1], "hi": [1, 1]}, "resolution": 20},
        "chain": {"kind": "radial", "params": {"radii": [0.2, 0.4, 0.6, 0.8]}},
        "family": {"kind": "affine", "n_real": 2},
    })
    assert sc.grid.dim == 2 and len(sc.chain) == 4
