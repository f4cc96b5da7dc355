import json
import time

import numpy as np
import pytest

from landtopo.geometry import ElevationGrid, GeoPolygon, InventoryRecord

ACCEPTANCE_CORPUS_SEED = 20250809
ACCEPTANCE_SWEEP_SEED = 20250810
ACCEPTANCE_N_POINTS = 64  # CLI default is 128; tests use the exposed knob


def make_grid(values, origin_x=0.0, origin_y=0.0, cell_size=1.0, nodata=-9999.0):
    """Grid from a bottom-up 2D list (row 0 = southernmost)."""
    arr = np.asarray(values, dtype=float)
    return ElevationGrid(
        n_cols=arr.shape[1],
        n_rows=arr.shape[0],
        origin_x=origin_x,
        origin_y=origin_y,
        cell_size=cell_size,
        nodata_value=nodata,
        values=arr[::-1],  # constructor stores top row first
    )


def plane_grid(a, b, c, n=40, cell_size=1.0, origin=(0.0, 0.0)):
    """Grid sampling the affine surface z = a*x + b*y + c at cell centers."""
    x0, y0 = origin
    xs = x0 + (np.arange(n) + 0.5) * cell_size
    ys = y0 + (np.arange(n) + 0.5) * cell_size
    xx, yy = np.meshgrid(xs, ys)
    return make_grid(a * xx + b * yy + c, x0, y0, cell_size)


def square_ring(side=1.0, origin=(0.0, 0.0)):
    x0, y0 = origin
    return np.array(
        [
            [x0, y0],
            [x0 + side, y0],
            [x0 + side, y0 + side],
            [x0, y0 + side],
            [x0, y0],
        ]
    )


def record_from_ring(ring, rid="r0", label=None):
    return InventoryRecord(id=rid, polygon=GeoPolygon(ring=np.asarray(ring, float)), label=label)


def feature_collection(features):
    return json.dumps({"type": "FeatureCollection", "features": features})


def polygon_feature(ring, fid="f0", properties=None):
    return {
        "type": "Feature",
        "id": fid,
        "properties": properties or {},
        "geometry": {
            "type": "Polygon",
            "coordinates": [[list(map(float, p)) for p in ring]],
        },
    }


@pytest.fixture
def unit_square_cloud():
    return np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], dtype=float)


def _featurized_corpus(n_per_class, seed):
    from landtopo.pipeline import featurize_records
    from landtopo.synth import gen_inventory

    t0 = time.monotonic()
    records, grid, _ = gen_inventory(n_per_class, seed=seed)
    table, failures = featurize_records(
        records, grid, n_points=ACCEPTANCE_N_POINTS, coords="projected",
        with_geometry=True,
    )
    assert not failures
    return table, np.array(table.labels), time.monotonic() - t0


@pytest.fixture(scope="session")
def corpus():
    """4 classes x 100 synthetic landslides, featurized with geometry."""
    return _featurized_corpus(100, ACCEPTANCE_CORPUS_SEED)


@pytest.fixture(scope="session")
def sweep_corpus():
    """Larger corpus so a 100/class training draw leaves a held-out test set."""
    return _featurized_corpus(150, ACCEPTANCE_SWEEP_SEED)
