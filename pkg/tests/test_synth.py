import hashlib
import json
import math

import numpy as np
import pytest
from scipy.integrate import quad

from landtopo.errors import ValidationError
from landtopo.geometry import geometric_features, parse_inventory
from landtopo.pipeline import featurize_records
from landtopo.synth import (
    CLASSES,
    SynthParams,
    _flow_profile,
    gen_dem,
    gen_inventory,
    gen_polygon,
    records_to_geojson,
    write_inventory,
)


def sine_arc_ratio(slope_amplitude: float) -> float:
    """Quadrature oracle: mean arc-length factor of x = A sin(2*pi*k*y/L)
    where the max slope dx/dy is `slope_amplitude`."""
    integrand = lambda u: math.sqrt(1.0 + (slope_amplitude * math.cos(u)) ** 2)
    value, _ = quad(integrand, 0.0, 2.0 * math.pi)
    return value / (2.0 * math.pi)


# ---------------------------------------------------------------------------
# terrain kinds
# ---------------------------------------------------------------------------


def test_dem_uniform_flat():
    params = SynthParams("slide", size_scale=100.0, slope_deg=0.0)
    grid = gen_dem("uniform_slope", (0, 0, 50, 50), 5.0, params)
    assert np.ptp(grid.values) == 0.0


def test_dem_uniform_45deg_unit_cell():
    params = SynthParams("slide", size_scale=100.0, slope_deg=45.0)
    grid = gen_dem("uniform_slope", (0, 0, 10, 10), 1.0, params)
    column = grid.values[::-1, 0]  # bottom-up along the gradient
    np.testing.assert_allclose(np.diff(column), 1.0, atol=1e-12)


def test_dem_cliff_talus_gradient_contrast():
    params = SynthParams("fall", size_scale=100.0, slope_deg=55.0)
    grid = gen_dem("cliff_talus", (0, 0, 400, 400), 10.0, params)
    bottom_up = grid.values[::-1]
    grad = np.abs(np.diff(bottom_up, axis=0))
    n_half = grad.shape[0] // 2
    lower_max = grad[:n_half].max()
    upper_max = grad[n_half:].max()
    assert upper_max > 3.0 * lower_max


def test_dem_channelized_has_incision():
    params = SynthParams("flow", size_scale=200.0, sinuosity=1.0, slope_deg=8.0)
    grid = gen_dem("channelized", (0, 0, 600, 600), 10.0, params)
    plain = gen_dem("uniform_slope", (0, 0, 600, 600), 10.0, params)
    assert (plain.values - grid.values).max() > 1.0  # carved below the plane


def test_dem_unknown_kind():
    params = SynthParams("slide", size_scale=100.0)
    with pytest.raises(ValidationError):
        gen_dem("volcano", (0, 0, 10, 10), 1.0, params)


# ---------------------------------------------------------------------------
# polygons
# ---------------------------------------------------------------------------


def test_slide_noise_free_is_nearly_convex():
    params = SynthParams("slide", size_scale=150.0, noise=0.0, seed=0)
    polygon = gen_polygon(params, np.random.default_rng(0))
    assert geometric_features(polygon)["convexity"] >= 0.95


def test_flow_straight_when_sinuosity_zero():
    ys, cx, hw = _flow_profile(150.0, 0.0, {"width_factor": 0.3, "length_factor": 8.0, "cycles": 2.0})
    arc = np.hypot(np.diff(cx), np.diff(ys)).sum()
    endpoint = math.hypot(cx[-1] - cx[0], ys[-1] - ys[0])
    assert arc / endpoint == pytest.approx(1.0, abs=1e-12)


def test_flow_sinuosity_raises_centerline_ratio():
    # quadrature oracle for the sine arc length
    slope = 1.3
    expected = sine_arc_ratio(slope)
    assert expected > 1.2
    ys, cx, hw = _flow_profile(150.0, slope, {"width_factor": 0.3, "length_factor": 8.0, "cycles": 2.0})
    arc = np.hypot(np.diff(cx), np.diff(ys)).sum()
    ratio = arc / (ys[-1] - ys[0])
    assert ratio == pytest.approx(expected, rel=0.01)
    assert ratio > 1.2


def test_flow_corridor_is_elongated():
    # construction invariant: corridor length is at least 6x its width
    for seed in range(8):
        rng = np.random.default_rng(seed)
        from landtopo.synth import _shape_draws

        draws = _shape_draws("flow", rng)
        assert draws["length_factor"] >= 6.0
    params = SynthParams("flow", size_scale=150.0, sinuosity=1.1, noise=2.0, seed=0)
    polygon = gen_polygon(params, np.random.default_rng(1))
    f = geometric_features(polygon)
    assert f["semi_major"] / f["minor"] >= 2.0  # elongated even after meandering


def test_every_class_generates_valid_polygons():
    for ci, cls in enumerate(CLASSES):
        for i in range(6):
            rng = np.random.default_rng([ci, i])
            params = SynthParams(
                cls, size_scale=float(rng.uniform(120, 260)),
                sinuosity=1.0 if cls in ("flow", "complex") else 0.0,
                noise=4.0, seed=0,
            )
            polygon = gen_polygon(params, rng)
            polygon.validate()  # simple, closed, >= 3 distinct vertices


def test_rejection_budget_error():
    params = SynthParams("flow", size_scale=50.0, sinuosity=1.2, noise=500.0, seed=0)
    with pytest.raises(ValidationError, match="rejection budget"):
        gen_polygon(params, np.random.default_rng(2))


def test_synth_params_validation():
    with pytest.raises(ValidationError):
        SynthParams("landslide", size_scale=10.0)
    with pytest.raises(ValidationError):
        SynthParams("slide", size_scale=-1.0)
    with pytest.raises(ValidationError):
        SynthParams("slide", size_scale=1.0, slope_deg=95.0)


# ---------------------------------------------------------------------------
# inventory assembly
# ---------------------------------------------------------------------------


def test_inventory_balanced_and_parseable():
    records, grid, manifest = gen_inventory(5, seed=3)
    assert len(records) == 20
    labels = [r.label for r in records]
    assert all(labels.count(c) == 5 for c in CLASSES)
    assert len(manifest["records"]) == 20
    # records survive a geojson round trip through the parser
    doc = json.dumps(records_to_geojson(records))
    parsed = parse_inventory(doc)
    assert len(parsed.records) == 20 and not parsed.skipped
    # complex records carry the grouping property
    complex_records = [r for r in parsed.records if r.label == "complex"]
    assert all(r.properties.get("behavior") == "slide_then_flow" for r in complex_records)


def test_inventory_deterministic_files(tmp_path):
    def digest(directory):
        hashes = {}
        for name in ("inventory.geojson", "dem.asc", "manifest.json"):
            hashes[name] = hashlib.sha256((directory / name).read_bytes()).hexdigest()
        return hashes

    a, b = tmp_path / "a", tmp_path / "b"
    write_inventory(*gen_inventory(3, seed=11), a)
    write_inventory(*gen_inventory(3, seed=11), b)
    assert digest(a) == digest(b)
    write_inventory(*gen_inventory(3, seed=12), b)
    assert digest(a) != digest(b)


def test_inventory_records_fit_grid():
    records, grid, _ = gen_inventory(4, seed=5)
    x_min, y_min, x_max, y_max = grid.extent
    for rec in records:
        ring = rec.polygon.ring
        assert ring[:, 0].min() >= x_min and ring[:, 0].max() <= x_max
        assert ring[:, 1].min() >= y_min and ring[:, 1].max() <= y_max


def test_flows_have_stronger_betti_hole_signal_than_slides():
    # separability precondition, measured on a generated corpus
    records, grid, _ = gen_inventory(8, seed=21)
    table, failures = featurize_records(
        records, grid, n_points=48, coords="projected", with_geometry=False
    )
    assert not failures
    labels = np.array(table.labels)
    bc_h = table.column("BC_H")
    assert bc_h[labels == "flow"].mean() > bc_h[labels == "slide"].mean()


def test_gen_inventory_validation():
    with pytest.raises(ValidationError):
        gen_inventory(0, seed=0)


def test_class_separability_80_20(corpus):
    # 80/20 stratified split of the 4x100 corpus: micro-F1 >= 0.9
    from landtopo.evaluation import compute_metrics, confusion_from_predictions
    from landtopo.forest import ForestParams, fit

    table, labels, _ = corpus
    rng = np.random.default_rng(99)
    test_mask = np.zeros(len(labels), bool)
    for cls in sorted(set(labels.tolist())):
        members = np.nonzero(labels == cls)[0]
        pick = rng.permutation(len(members))[: len(members) // 5]
        test_mask[members[pick]] = True
    model = fit(
        table.X[~test_mask], labels[~test_mask],
        ForestParams(n_trees=150, seed=17), table.names,
    )
    predicted = model.predict(table.X[test_mask])
    metrics = compute_metrics(
        confusion_from_predictions(model.classes, labels[test_mask], predicted)
    )
    assert metrics["micro_F1"] >= 0.9
