"""Labeled synthetic inventories: polygons plus a matching elevation grid.

Class archetypes encode the morphological contrasts the classifier is
supposed to pick up: slides are compact perturbed ellipses on smooth
steep slopes, flows are long sinuous corridors on gentle channelized
terrain, falls are short straight fans straddling a cliff-to-talus
break, and complex shapes fuse a slide head onto a flow tail. Every
draw is reproducible from the master seed.

Coordinates are projected meters (use `coords = projected` downstream).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .geometry import (
    ElevationGrid,
    GeoPolygon,
    InventoryRecord,
    _dedupe_consecutive,
)

CLASSES = ("slide", "flow", "fall", "complex")
REJECTION_BUDGET = 100


@dataclass(frozen=True)
class SynthParams:
    failure_class: str
    size_scale: float
    sinuosity: float = 0.0
    slope_deg: float = 20.0
    noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.failure_class not in CLASSES:
            raise ValidationError(f"unknown class {self.failure_class!r}")
        if self.size_scale <= 0:
            raise ValidationError("size_scale must be positive")
        if self.sinuosity < 0 or self.noise < 0:
            raise ValidationError("sinuosity and noise must be non-negative")
        if not 0 <= self.slope_deg < 90:
            raise ValidationError("slope_deg must be in [0, 90)")


# ---------------------------------------------------------------------------
# Shape construction
# ---------------------------------------------------------------------------


def _sweep_ring(ys: np.ndarray, cx: np.ndarray, hw: np.ndarray) -> np.ndarray:
    """Closed ring from a centerline swept with horizontal half-widths.

    Both boundaries are graphs over y, so the raw outline is always
    simple; y runs from toe (0) to head (max).
    """
    left = np.column_stack([cx - hw, ys])
    right = np.column_stack([cx + hw, ys])
    ring = np.vstack([left, right[::-1]])
    ring = _dedupe_consecutive(ring)
    return np.vstack([ring, ring[:1]])


def _shape_draws(cls: str, rng: np.random.Generator) -> dict:
    """Within-class shape diversity; wide ranges blur the 2D geometry
    overlap across classes while the hole/slope structure stays
    class-specific."""
    if cls == "slide":
        return {
            "aspect": float(rng.uniform(1.15, 2.3)),
            "lobe_amp": float(rng.uniform(0.15, 0.28)),
            "lobe_freq": int(rng.integers(2, 6)),
            "lobe_phase": float(rng.uniform(0.0, 2.0 * math.pi)),
        }
    if cls == "flow":
        return {
            "width_factor": float(rng.uniform(0.26, 0.44)),
            "length_factor": float(rng.uniform(6.0, 9.5)),
            "cycles": float(rng.uniform(1.4, 2.2)),
        }
    if cls == "fall":
        return {
            "width_factor": float(rng.uniform(0.50, 0.70)),
            "length_over_width": float(rng.uniform(1.8, 2.2)),
            "apex_factor": float(rng.uniform(0.08, 0.20)),
            "lobe_amp": float(rng.uniform(0.06, 0.14)),
            "lobe_freq": int(rng.integers(2, 4)),
            "lobe_phase": float(rng.uniform(0.0, 2.0 * math.pi)),
        }
    return {
        "head_hw": float(rng.uniform(0.44, 0.52)),
        "head_len": float(rng.uniform(1.10, 1.50)),
        "tail_len": float(rng.uniform(0.40, 0.70)),
        "tail_width": float(rng.uniform(0.13, 0.19)),
        "cycles": 1.0,
        "lobe_amp": float(rng.uniform(0.05, 0.12)),
        "lobe_freq": int(rng.integers(2, 5)),
        "lobe_phase": float(rng.uniform(0.0, 2.0 * math.pi)),
    }


def _lobed(hw: np.ndarray, ys: np.ndarray, draws: dict, noise: float) -> np.ndarray:
    """Gentle width lobes; dents the hull without changing hole structure.

    Lobes are part of the boundary irregularity budget, so they fade out
    with the noise parameter: noise 0 means the pure archetype.
    """
    amp = draws["lobe_amp"] * min(1.0, noise / 2.0)
    if amp <= 0:
        return hw
    length = ys[-1] if ys[-1] > 0 else 1.0
    wave = np.sin(2.0 * math.pi * draws["lobe_freq"] * ys / length + draws["lobe_phase"])
    return hw * (1.0 + amp * wave)


def _slide_profile(s: float, draws: dict, noise: float, n: int = 44):
    length = draws["aspect"] * s
    ys = np.linspace(0.0, length, n)
    u = 2.0 * ys / length - 1.0
    hw = 0.5 * s * np.sqrt(np.maximum(0.0, 1.0 - u * u))
    return ys, np.zeros(n), _lobed(hw, ys, draws, noise)


def _flow_profile(s: float, sinuosity: float, draws: dict, n: int = 72):
    width = draws["width_factor"] * s
    length = draws["length_factor"] * width
    cycles = draws["cycles"]
    ys = np.linspace(0.0, length, n)
    amplitude = sinuosity * length / (2.0 * math.pi * cycles)
    cx = amplitude * np.sin(2.0 * math.pi * cycles * ys / length)
    hw = np.full(n, width / 2.0)
    return ys, cx, hw


def _fall_profile(s: float, draws: dict, noise: float, n: int = 30):
    width = draws["width_factor"] * s
    length = draws["length_over_width"] * width
    apex = draws["apex_factor"] * width
    ys = np.linspace(0.0, length, n)
    hw = (width / 2.0) * (1.0 - ys / length) + apex * (ys / length)
    return ys, np.zeros(n), _lobed(hw, ys, draws, noise)


def _complex_profile(s: float, sinuosity: float, draws: dict, noise: float, n_tail: int = 44, n_head: int = 30):
    tail_w = draws["tail_width"] * s
    tail_len = draws["tail_len"] * s
    head_len = draws["head_len"] * s
    head_hw = draws["head_hw"] * s
    ys_tail = np.linspace(0.0, tail_len, n_tail, endpoint=False)
    cycles = draws["cycles"]  # half-integer so the centerline rejoins the axis
    amplitude = sinuosity * tail_len / (2.0 * math.pi * cycles)
    cx_tail = amplitude * np.sin(2.0 * math.pi * cycles * ys_tail / tail_len)
    hw_tail = np.full(n_tail, tail_w / 2.0)

    ys_head = np.linspace(tail_len, tail_len + head_len, n_head)
    yc = tail_len + head_len / 2.0
    u = (ys_head - yc) / (head_len / 2.0)
    bulb = head_hw * np.sqrt(np.maximum(0.0, 1.0 - u * u))
    bulb = _lobed(bulb, ys_head - tail_len, draws, noise)
    feather = (tail_w / 2.0) * np.maximum(0.0, 1.0 - 3.0 * (ys_head - tail_len) / head_len)
    hw_head = np.maximum(bulb, feather)
    cx_head = np.zeros(n_head)

    ys = np.concatenate([ys_tail, ys_head])
    cx = np.concatenate([cx_tail, cx_head])
    hw = np.concatenate([hw_tail, hw_head])
    return ys, cx, hw


def _raw_profile(params: SynthParams, draws: dict):
    cls = params.failure_class
    if cls == "slide":
        return _slide_profile(params.size_scale, draws, params.noise)
    if cls == "flow":
        return _flow_profile(params.size_scale, params.sinuosity, draws)
    if cls == "fall":
        return _fall_profile(params.size_scale, draws, params.noise)
    return _complex_profile(params.size_scale, params.sinuosity, draws, params.noise)


def _smooth_noise(n: int, sigma: float, rng: np.random.Generator, harmonics: int = 4):
    """Smooth periodic boundary jitter: a few random Fourier harmonics.

    Smoothness keeps neighboring vertices moving together, so noisy
    outlines stay simple far more often than with iid jitter.
    """
    t = 2.0 * math.pi * np.arange(n) / n
    out = np.zeros((n, 2))
    scale = sigma / math.sqrt(harmonics)
    for h in range(1, harmonics + 1):
        coeff = rng.normal(0.0, scale, 4)
        out[:, 0] += coeff[0] * np.cos(h * t) + coeff[1] * np.sin(h * t)
        out[:, 1] += coeff[2] * np.cos(h * t) + coeff[3] * np.sin(h * t)
    return out


def _polygon_from_profile(base: np.ndarray, noise: float, cls: str,
                          rng: np.random.Generator) -> GeoPolygon:
    for _ in range(REJECTION_BUDGET):
        ring = base.copy()
        if noise > 0:
            ring[:-1] += _smooth_noise(len(ring) - 1, noise, rng)
            ring[-1] = ring[0]
        polygon = GeoPolygon(ring=ring)
        try:
            polygon.validate()
        except ValidationError:
            continue
        return polygon
    raise ValidationError(f"rejection budget exhausted generating a {cls} polygon")


def gen_polygon(params: SynthParams, rng: np.random.Generator) -> GeoPolygon:
    """One synthetic outline; vertex noise applied with rejection sampling."""
    draws = _shape_draws(params.failure_class, rng)
    ys, cx, hw = _raw_profile(params, draws)
    return _polygon_from_profile(
        _sweep_ring(ys, cx, hw), params.noise, params.failure_class, rng
    )


# ---------------------------------------------------------------------------
# Terrain painters
# ---------------------------------------------------------------------------


def _cell_center_mesh(x0, y0, n_cols, n_rows, cs):
    xs = x0 + (np.arange(n_cols) + 0.5) * cs
    ys = y0 + (np.arange(n_rows) + 0.5) * cs
    return np.meshgrid(xs, ys)  # (rows, cols), row 0 at the bottom


def _paint_uniform(xx, yy, y_ref, slope_deg):
    return math.tan(math.radians(slope_deg)) * (yy - y_ref)


def _paint_channel(xx, yy, y_ref, slope_deg, y_lo, y_hi, center_x, amplitude,
                   cycles, depth, half_width):
    z = _paint_uniform(xx, yy, y_ref, slope_deg)
    length = y_hi - y_lo
    phase = np.clip((yy - y_lo) / length, 0.0, 1.0)
    cx = center_x + amplitude * np.sin(2.0 * math.pi * cycles * phase)
    window = np.exp(-0.5 * ((yy - 0.5 * (y_lo + y_hi)) / (0.6 * length)) ** 2)
    z -= depth * window * np.exp(-0.5 * ((xx - cx) / half_width) ** 2)
    return z


def _paint_cliff(xx, yy, y_ref, y_break, lower_deg, upper_deg):
    lower = math.tan(math.radians(lower_deg)) * (yy - y_ref)
    upper = math.tan(math.radians(lower_deg)) * (y_break - y_ref) + math.tan(
        math.radians(upper_deg)
    ) * (yy - y_break)
    return np.where(yy <= y_break, lower, upper)


def gen_dem(
    kind: str,
    extent: tuple[float, float, float, float],
    cell_size: float,
    params: SynthParams,
    seed: int = 0,
) -> ElevationGrid:
    """Standalone terrain of one archetype over an extent.

    Kinds: uniform_slope (plane at slope_deg), channelized (plane with a
    sinusoidal valley incision), cliff_talus (steep upper ramp meeting a
    near-flat lower apron).
    """
    x0, y0, x1, y1 = extent
    if not (x1 > x0 and y1 > y0):
        raise ValidationError("extent must have positive width and height")
    n_cols = max(2, int(round((x1 - x0) / cell_size)))
    n_rows = max(2, int(round((y1 - y0) / cell_size)))
    xx, yy = _cell_center_mesh(x0, y0, n_cols, n_rows, cell_size)
    if kind == "uniform_slope":
        z = _paint_uniform(xx, yy, y0, params.slope_deg)
    elif kind == "channelized":
        s = params.size_scale
        z = _paint_channel(
            xx,
            yy,
            y0,
            params.slope_deg,
            y0,
            y1,
            0.5 * (x0 + x1),
            params.sinuosity * (y1 - y0) / (2.0 * math.pi * 2.0),
            2.0,
            0.25 * s,
            0.3 * s,
        )
    elif kind == "cliff_talus":
        z = _paint_cliff(xx, yy, y0, 0.5 * (y0 + y1), 4.0, params.slope_deg)
    else:
        raise ValidationError(f"unknown DEM kind {kind!r}")
    if params.noise > 0:
        rng = np.random.default_rng([seed, 977])
        z = z + rng.normal(0.0, params.noise, z.shape)
    return ElevationGrid(
        n_cols=n_cols,
        n_rows=n_rows,
        origin_x=x0,
        origin_y=y0,
        cell_size=cell_size,
        nodata_value=-9999.0,
        values=z[::-1],  # top row first
    )


DEM_KIND_BY_CLASS = {
    "slide": "uniform_slope",
    "flow": "channelized",
    "fall": "cliff_talus",
    "complex": "channelized",
}


# ---------------------------------------------------------------------------
# Inventory assembly
# ---------------------------------------------------------------------------


def _draw_params(cls: str, rng: np.random.Generator) -> dict:
    """Per-record parameter draws; size ranges overlap across classes."""
    s = float(rng.uniform(120.0, 260.0))
    noise_range = {"slide": (3.0, 7.0), "flow": (2.0, 4.0), "fall": (3.0, 6.0), "complex": (2.0, 5.0)}[cls]
    draws = {"size_scale": s, "noise": float(rng.uniform(*noise_range))}
    if cls == "slide":
        draws["slope_deg"] = float(rng.uniform(28.0, 40.0))
        draws["sinuosity"] = 0.0
    elif cls == "flow":
        draws["slope_deg"] = float(rng.uniform(5.0, 12.0))
        draws["sinuosity"] = float(rng.uniform(1.0, 1.6))
    elif cls == "fall":
        draws["slope_deg"] = float(rng.uniform(52.0, 64.0))  # upper ramp
        draws["sinuosity"] = 0.0
    else:  # complex
        draws["slope_deg"] = float(rng.uniform(20.0, 30.0))
        draws["sinuosity"] = float(rng.uniform(0.7, 1.1))
    return draws


def _paint_tile(values, cls, draws, tile_x, tile_y, tile_size, cs, poly_y0, poly_y1, centerline):
    """Render one tile's terrain in place (values is the full bottom-up grid)."""
    c0 = int(round(tile_x / cs))
    r0 = int(round(tile_y / cs))
    n = int(round(tile_size / cs))
    xx, yy = _cell_center_mesh(tile_x, tile_y, n, n, cs)
    if cls == "slide":
        z = _paint_uniform(xx, yy, tile_y, draws["slope_deg"])
    elif cls in ("flow", "complex"):
        amp, cycles, cw, y_lo, y_hi = centerline
        depth = 0.5 * cw if cls == "flow" else 0.3 * cw
        z = _paint_channel(
            xx, yy, tile_y, draws["slope_deg"], y_lo, y_hi,
            tile_x + tile_size / 2.0, amp, cycles, depth, 0.9 * cw,
        )
    else:  # fall: break sits inside the polygon's upper half
        y_break = poly_y0 + 0.50 * (poly_y1 - poly_y0)
        z = _paint_cliff(xx, yy, tile_y, y_break, 2.0, draws["slope_deg"])
    values[r0 : r0 + n, c0 : c0 + n] = z


def gen_inventory(
    n_per_class: int,
    seed: int,
    classes: tuple[str, ...] = CLASSES,
    cell_size: float = 10.0,
    tile_size: float = 1000.0,
) -> tuple[list[InventoryRecord], ElevationGrid, dict]:
    """Balanced labeled inventory with a composite terrain grid.

    Records are laid out on a square lattice of independent tiles; each
    tile's terrain matches its record's class archetype and, for
    channelized classes, follows the polygon's own centerline. Returns
    (records, grid, manifest); the manifest lists every seed and
    parameter draw.
    """
    if n_per_class < 1:
        raise ValidationError("n_per_class must be >= 1")
    total = n_per_class * len(classes)
    tiles_per_side = math.ceil(math.sqrt(total))
    n_cells_side = int(round(tile_size / cell_size)) * tiles_per_side
    values = np.zeros((n_cells_side, n_cells_side))  # bottom-up during painting

    records: list[InventoryRecord] = []
    manifest_records = []
    for ci, cls in enumerate(classes):
        for i in range(n_per_class):
            rng = np.random.default_rng([seed, ci, i])
            draws = _draw_params(cls, rng)
            shape = _shape_draws(cls, rng)
            params = SynthParams(
                failure_class=cls,
                size_scale=draws["size_scale"],
                sinuosity=draws["sinuosity"],
                slope_deg=draws["slope_deg"],
                noise=draws["noise"],
                seed=seed,
            )
            ys, cx, hw = _raw_profile(params, shape)
            polygon = _polygon_from_profile(
                _sweep_ring(ys, cx, hw), params.noise, cls, rng
            )

            g = ci * n_per_class + i
            row, col = divmod(g, tiles_per_side)
            tile_x = col * tile_size
            tile_y = row * tile_size
            center = np.array([tile_x + tile_size / 2.0, tile_y + tile_size / 2.0])
            bbox_mid = 0.5 * (polygon.ring.min(axis=0) + polygon.ring.max(axis=0))
            shift = center - bbox_mid
            ring = polygon.ring + shift
            polygon = GeoPolygon(ring=ring)

            poly_y0 = float(ring[:, 1].min())
            poly_y1 = float(ring[:, 1].max())
            s = draws["size_scale"]
            if cls == "flow":
                width = shape["width_factor"] * s
                length = shape["length_factor"] * width
                centerline = (
                    draws["sinuosity"] * length / (2.0 * math.pi * shape["cycles"]),
                    shape["cycles"],
                    width,
                    poly_y0,
                    poly_y1,
                )
            elif cls == "complex":
                tail_w = shape["tail_width"] * s
                tail_len = shape["tail_len"] * s
                centerline = (
                    draws["sinuosity"] * tail_len / (2.0 * math.pi * shape["cycles"]),
                    shape["cycles"],
                    tail_w,
                    poly_y0,
                    poly_y0 + tail_len,  # incision follows the tail only
                )
            else:
                centerline = None
            _paint_tile(
                values, cls, draws, tile_x, tile_y, tile_size, cell_size,
                poly_y0, poly_y1, centerline,
            )

            rid = f"{cls}_{i:04d}"
            properties = {"label": cls}
            if cls == "complex":
                properties["behavior"] = "slide_then_flow"
            records.append(
                InventoryRecord(
                    id=rid, polygon=polygon, label=cls, properties=properties
                )
            )
            manifest_records.append(
                {
                    "id": rid,
                    "label": cls,
                    "seed_key": [seed, ci, i],
                    "tile": [tile_x, tile_y],
                    **draws,
                    **{f"shape_{k}": v for k, v in shape.items()},
                }
            )

    grid = ElevationGrid(
        n_cols=n_cells_side,
        n_rows=n_cells_side,
        origin_x=0.0,
        origin_y=0.0,
        cell_size=cell_size,
        nodata_value=-9999.0,
        values=values[::-1],  # store top row first
    )
    manifest = {
        "master_seed": seed,
        "n_per_class": n_per_class,
        "classes": list(classes),
        "cell_size": cell_size,
        "tile_size": tile_size,
        "coords": "projected",
        "records": manifest_records,
    }
    return records, grid, manifest


def records_to_geojson(records: list[InventoryRecord]) -> dict:
    features = []
    for rec in records:
        features.append(
            {
                "type": "Feature",
                "id": rec.id,
                "properties": rec.properties,
                "geometry": {
                    "type": "Polygon",
                    "coordinates": [[[float(x), float(y)] for x, y in rec.polygon.ring]],
                },
            }
        )
    return {"type": "FeatureCollection", "features": features}


def write_inventory(records, grid, manifest, out_dir) -> dict[str, str]:
    """Write inventory.geojson, dem.asc, and manifest.json into a directory."""
    import os

    from .geometry import write_grid_asc
    from .pipeline import _atomic_write_text

    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "inventory": os.path.join(out_dir, "inventory.geojson"),
        "dem": os.path.join(out_dir, "dem.asc"),
        "manifest": os.path.join(out_dir, "manifest.json"),
    }
    _atomic_write_text(
        paths["inventory"],
        json.dumps(records_to_geojson(records), sort_keys=True, separators=(",", ":")) + "\n",
    )
    write_grid_asc(grid, paths["dem"])
    _atomic_write_text(
        paths["manifest"],
        json.dumps(manifest, sort_keys=True, separators=(",", ":")) + "\n",
    )
    return paths
