import json
import math

import numpy as np
import pytest

from conftest import make_grid, plane_grid, record_from_ring, square_ring
from landtopo.errors import ModelMismatchError, ValidationError
from landtopo.features import TOPO_FEATURE_NAMES
from landtopo.geometry import GEOMETRIC_FEATURE_NAMES
from landtopo.pipeline import (
    FeatureTable,
    featurize_records,
    read_feature_csv,
    sidecar_path,
    write_feature_csv,
    write_sidecar,
)


@pytest.fixture
def small_table():
    return FeatureTable(
        ids=["a", "b", "c"],
        names=["f1", "f2"],
        X=np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.5]]),
        labels=["slide", None, "flow"],
    )


def test_csv_roundtrip_bytes(tmp_path, small_table):
    p1, p2 = tmp_path / "t1.csv", tmp_path / "t2.csv"
    write_feature_csv(small_table, p1)
    back = read_feature_csv(p1)
    assert back.ids == small_table.ids
    assert back.names == small_table.names
    assert back.labels == small_table.labels
    np.testing.assert_array_equal(back.X, small_table.X)
    write_feature_csv(back, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_csv_without_labels(tmp_path, small_table):
    small_table.labels = None
    path = tmp_path / "nolabel.csv"
    write_feature_csv(small_table, path)
    assert read_feature_csv(path).labels is None
    header = path.read_text().splitlines()[0]
    assert header == "id,f1,f2"


def test_csv_header_required(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("notid,f1\nx,1.0\n")
    with pytest.raises(ValidationError, match="'id'"):
        read_feature_csv(path)
    path.write_text("")
    with pytest.raises(ValidationError, match="empty"):
        read_feature_csv(path)


def test_csv_non_numeric_value(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("id,f1,label\nx,oops,slide\n")
    with pytest.raises(ValidationError, match="non-numeric"):
        read_feature_csv(path)


def test_select_missing_column_names_it(small_table):
    with pytest.raises(ModelMismatchError, match="ghost"):
        small_table.select(["f1", "ghost"])


def test_labeled_rows_filters(small_table):
    labeled = small_table.labeled_rows()
    assert labeled.ids == ["a", "c"]
    assert labeled.labels == ["slide", "flow"]
    small_table.labels = None
    with pytest.raises(ValidationError):
        small_table.labeled_rows()


def test_sidecar_write(tmp_path):
    path = tmp_path / "f.csv"
    write_sidecar(sidecar_path(path), {"x": 1})
    assert json.loads((tmp_path / "f.csv.meta.json").read_text()) == {"x": 1}


# ---------------------------------------------------------------------------
# featurize_records
# ---------------------------------------------------------------------------


def test_featurize_records_collects_failures():
    grid = make_grid(np.zeros((20, 20)))
    good = record_from_ring(square_ring(side=4.0, origin=(3, 3)), rid="good", label="slide")
    outside = record_from_ring(square_ring(origin=(500, 500)), rid="outside", label="flow")
    table, failures = featurize_records(
        [good, outside], grid, n_points=16, coords="projected"
    )
    assert table.ids == ["good"]
    assert [rid for rid, _ in failures] == ["outside"]
    assert table.labels == ["slide"]
    assert table.names == list(TOPO_FEATURE_NAMES)


def test_featurize_records_with_geometry_columns():
    grid = make_grid(np.zeros((20, 20)))
    rec = record_from_ring(square_ring(side=4.0, origin=(3, 3)), rid="g")
    table, _ = featurize_records([rec], grid, n_points=16, coords="projected",
                                 with_geometry=True)
    assert table.names == list(TOPO_FEATURE_NAMES) + list(GEOMETRIC_FEATURE_NAMES)
    assert table.labels is None  # no record carries a label


def test_featurize_records_threaded_matches_serial():
    grid = plane_grid(a=0.4, b=0.2, c=3.0, n=40)
    records = [
        record_from_ring(square_ring(side=3.0 + i, origin=(5 + i, 5)), rid=f"r{i}")
        for i in range(4)
    ]
    serial, _ = featurize_records(records, grid, n_points=24, coords="projected", workers=1)
    threaded, _ = featurize_records(records, grid, n_points=24, coords="projected", workers=4)
    assert serial.ids == threaded.ids
    np.testing.assert_array_equal(serial.X, threaded.X)


def test_featurize_records_geographic_coords():
    # ~0.002 deg square at lat 45 on a flat DEM in degree units
    lat0, lon0 = 45.0, 7.0
    d = 0.002
    ring = np.array(
        [
            [lon0, lat0],
            [lon0 + d, lat0],
            [lon0 + d, lat0 + d],
            [lon0, lat0 + d],
            [lon0, lat0],
        ]
    )
    grid = make_grid(
        np.full((30, 30), 250.0),
        origin_x=lon0 - 0.01,
        origin_y=lat0 - 0.01,
        cell_size=0.001,
    )
    rec = record_from_ring(ring, rid="geo")
    table, failures = featurize_records(
        [rec], grid, n_points=32, coords="geographic", with_geometry=True
    )
    assert not failures
    # flat terrain: component lifetimes only, no z spread
    assert table.column("WA_H")[0] > 0
    # projected dimensions: dx = R*rad(d)*cos(lat), dy = R*rad(d)
    dx = 6_371_000.0 * math.radians(d) * math.cos(math.radians(lat0 + d / 2))
    dy = 6_371_000.0 * math.radians(d)
    area = table.column("A")[0]
    assert area == pytest.approx(dx * dy, rel=1e-3)
