from pathlib import Path

import numpy as np
import pytest

from _oracles import twisted_orbit
from perskern import datasets as dsets
from perskern.datasets import DataError

FIX = Path(__file__).parent / "fixtures"


def test_orbit_matches_scalar_oracle():
    got = dsets.orbit(0.3, 0.7, 4.1, 200)
    want = np.array(twisted_orbit(0.3, 0.7, 4.1, 200))
    assert got.shape == (200, 2) and np.array_equal(got, want)


def test_generate_orbits_layout_and_determinism():
    a = dsets.generate_orbits(n_orbits=3, n_points=50, seed=11)
    b = dsets.generate_orbits(n_orbits=3, n_points=50, seed=11)
    assert len(a) == 15 and a.labels.tolist() == [c for c in range(5) for _ in range(3)]
    assert a.ids[4] == "r1_o1"
    assert all(np.array_equal(x, y) for x, y in zip(a.samples, b.samples))
    assert all(np.all((x >= 0) & (x < 1)) for x in a.samples)
    starts = np.random.default_rng(11).random((5, 3, 2))
    for k, (c, o) in enumerate((c, o) for c in range(5) for o in range(3)):
        assert np.array_equal(a.samples[k][0], starts[c, o])
        want = np.array(twisted_orbit(*starts[c, o], dsets.ORBIT_R_VALUES[c], 50))
        assert np.array_equal(a.samples[k], want)
    c = dsets.generate_orbits(n_orbits=3, n_points=50, seed=12)
    assert not np.array_equal(a.samples[0], c.samples[0])


def test_point_cloud_round_trip(tmp_path):
    data = dsets.generate_orbits((2.5, 4.3), n_orbits=2, n_points=7, seed=1)
    dsets.save_point_clouds(data, tmp_path / "o.csv")
    back = dsets.load_point_clouds(tmp_path / "o.csv")
    assert back.ids == data.ids and np.array_equal(back.labels, data.labels)
    assert all(np.array_equal(x, y) for x, y in zip(back.samples, data.samples))


def test_point_cloud_fixture_and_errors(tmp_path):
    data = dsets.load_point_clouds(FIX / "clouds.csv")
    assert data.ids == ["a", "b"] and data.samples[0].shape == (2, 2)
    bad = tmp_path / "bad.csv"
    bad.write_text("id,label,x0\na,0,1.0\na,1,2.0\n")
    with pytest.raises(DataError, match=r"bad.csv:3"):
        dsets.load_point_clouds(bad)
    bad.write_text("id,label,x0\na,0,nan\n")
    with pytest.raises(DataError, match=r":2"):
        dsets.load_point_clouds(bad)
    with pytest.raises(DataError, match="no such file"):
        dsets.load_point_clouds(tmp_path / "missing.csv")


def test_graph_loader():
    data = dsets.load_graphs(FIX / "graphs.txt")
    assert data.ids == ["tri", "path"] and data.labels.tolist() == [0, 1]
    assert data.samples[0].n == 3 and len(data.samples[0].edges) == 3
    assert data.samples[1].edges[0] == (0, 1, 2.5)
    with pytest.raises(DataError, match=r"bad_graph.txt:3"):
        dsets.load_graphs(FIX / "bad_graph.txt")


def test_graph_round_trip(tmp_path):
    data = dsets.load_graphs(FIX / "graphs.txt")
    dsets.save_graphs(data, tmp_path / "g.txt")
    back = dsets.load_graphs(tmp_path / "g.txt")
    assert [g.edges for g in back.samples] == [g.edges for g in data.samples] and back.ids == data.ids


def test_image_loader(tmp_path):
    data = dsets.load_images(FIX / "images.csv")
    assert data.samples[0].shape == (2, 3) and data.labels.tolist() == [0, 1]
    assert data.samples[1][0].tolist() == [255, 255, 255]
    sq = tmp_path / "sq.csv"
    sq.write_text("3,1,2,3,4\n")
    assert dsets.load_images(sq).samples[0].shape == (2, 2)
    sq.write_text("3,1,2,3\n")
    with pytest.raises(DataError, match=r"sq.csv:1"):
        dsets.load_images(sq)


def test_time_series_loader():
    data = dsets.load_time_series(FIX / "series.tsv")
    assert data.labels.tolist() == [1, 2, -1]
    assert [len(s) for s in data.samples] == [5, 5, 5]
    with pytest.raises(DataError, match=r"bad_series.tsv:2"):
        dsets.load_time_series(FIX / "bad_series.tsv")


def test_collection_validation():
    with pytest.raises(DataError):
        dsets.LabeledCollection([], [], [], "graphs")
    with pytest.raises(DataError):
        dsets.LabeledCollection([1, 2], [0], ["a", "b"], "graphs")
