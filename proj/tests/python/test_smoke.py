import json

import pytest

import jlct


@pytest.fixture(scope="module")
def sim():
    return jlct.simulate(structure="tree", n=250, seed=4)


def test_simulate_is_deterministic(sim):
    csv, truth = sim
    again, _ = jlct.simulate(structure="tree", n=250, seed=4)
    assert csv == again
    assert csv.splitlines()[0].startswith("ID,")
    assert json.loads(truth)["config"]["n_subjects"] == 250


def test_fit_predict_round_trip(sim):
    csv, _ = sim
    model = jlct.fit(csv, max_leaves=4)
    assert 1 <= model.n_leaves <= 4
    assert "X" in str(model)
    times = [0.5, 1.0, 2.0]
    pred = model.predict(csv, times)
    assert len(pred["leaves"]) == len(csv.splitlines()) - 1
    for row in pred["survival"]:
        assert row == sorted(row, reverse=True)
        assert all(0.0 <= s <= 1.0 for s in row)
    back = jlct.Model.from_json(model.to_json())
    assert back.predict(csv, times) == pred


def test_variant_one_has_a_single_leaf(sim):
    csv, _ = sim
    assert jlct.fit(csv, variant="jlct1").n_leaves == 1


def test_errors_surface_as_jlct_error(sim):
    csv, _ = sim
    roles = json.loads(jlct.default_roles())
    roles["survival"] = ["nope"]
    with pytest.raises(jlct.JlctError):
        jlct.fit(csv, roles=json.dumps(roles))
    with pytest.raises(jlct.JlctError):
        jlct.simulate(structure="spiral")
