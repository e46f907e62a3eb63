import json
import math

import numpy as np
import pytest

import spatialgen as sg

QUICK = {"k": 3, "embedding_dim": 4, "hypernet_hidden": [8, 8], "epochs": 20}


def test_synth_shapes_and_determinism():
    a = sg.synth(locations=15, samples=4, features=3, seed=2)
    b = sg.synth(locations=15, samples=4, features=3, seed=2)
    assert len(a) == 15
    assert a.num_samples == 60
    assert a.feature_names == ["x0", "x1", "x2"]
    assert a.to_csv_string() == b.to_csv_string()
    xs, ys = a.domain(0)
    assert xs.shape == (4, 3)
    assert ys.shape == (4,)


def test_csv_round_trip(tmp_path):
    data = sg.synth(locations=8, samples=3, seed=5)
    path = tmp_path / "d.csv"
    data.to_csv(str(path))
    back = sg.Dataset.load_csv(str(path))
    assert back.to_csv_string() == data.to_csv_string()
    np.testing.assert_array_equal(back.coords(), data.coords())


def test_knn_graph_matches_brute_force():
    rng = np.random.default_rng(0)
    coords = rng.random((40, 2))
    k = 5
    got = sg.knn_graph(coords, k)
    for i in range(len(coords)):
        others = [j for j in range(len(coords)) if j != i]
        others.sort(key=lambda j: (math.dist(coords[i], coords[j]), j))
        assert list(got[i]) == others[:k]


def test_edge_features_lengths_and_angle_range():
    rng = np.random.default_rng(1)
    coords = rng.random((30, 2))
    feats = sg.edge_features(coords, 4)
    nbrs = sg.knn_graph(coords, 4)
    assert feats.shape == (30, 4, 2)
    for i in range(30):
        for t in range(4):
            assert feats[i, t, 0] == pytest.approx(math.dist(coords[i], coords[nbrs[i, t]]), abs=1e-12)
    assert np.all(feats[..., 1] >= -math.pi) and np.all(feats[..., 1] < math.pi)


def test_train_predict_evaluate_agree():
    data = sg.synth(locations=30, samples=6, seed=3)
    train_ids, test_ids = sg.split(len(data), 0.2, seed=3)
    assert len(test_ids) == 6 and sorted(train_ids + test_ids) == list(range(30))
    model = sg.train(data.subset(train_ids), {**QUICK, "mode": "signn"})
    assert model.mode == "signn"
    assert len(model.history) == 20
    test = data.subset(test_ids)
    report = sg.evaluate(model, test)
    assert report["metric_name"] == "mae"
    assert len(report["per_domain"]) == 6
    lat, lon = test.coords()[0]
    xs, _ = test.domain(0)
    np.testing.assert_array_equal(model.predict(lat, lon, xs), report["predictions"][0])
    assert model.embedding(lat, lon).shape == (4,)


def test_checkpoint_round_trip(tmp_path):
    data = sg.synth(locations=12, samples=4, seed=4)
    model = sg.train(data, {**QUICK, "mode": "signn_g", "epochs": 5})
    path = tmp_path / "m.json"
    model.save(str(path))
    back = sg.Model.load(str(path))
    assert back.to_json() == model.to_json()
    assert back.config["mode"] == "signn_g"
    assert "theta" not in json.loads(model.to_json())


def test_errors_carry_codes():
    with pytest.raises(sg.Error, match="^bad_config: "):
        sg.train(sg.synth(locations=10, samples=2), {"no_such_key": 1})
    with pytest.raises(sg.Error, match="^duplicate_location: "):
        sg.knn_graph(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 0.0]]), 1)
    with pytest.raises(ValueError):
        sg.synth(locations=0)


def test_cli_entry_point(tmp_path):
    out = tmp_path / "d.csv"
    code, stdout, stderr = sg.run_cli(["synth", "--locations", "5", "--samples", "2", "--out", str(out)])
    assert code == 0 and stderr == ""
    assert out.read_text().count("\n") == 11
    code, _, stderr = sg.run_cli(["synth", "--locations", "0", "--out", str(out)])
    assert code == 2 and "--locations" in stderr
