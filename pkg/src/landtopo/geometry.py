"""Inventory polygons, elevation grids, and 3D outline point clouds.

Parses GeoJSON landslide inventories and ESRI ASCII elevation grids,
drapes polygon outlines into normalized 3D point clouds (local metric
coordinates, meters on all axes), and computes the 2D geometric shape
descriptors used as the baseline feature set.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

EARTH_RADIUS_M = 6_371_000.0

CANONICAL_CLASSES = ("slide", "flow", "fall", "complex")
CANONICAL_SUBTYPES = (
    "rotational_slide",
    "translational_slide",
    "debris_flow",
    "earth_flow",
    "rock_fall",
)


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass
class GeoPolygon:
    """Closed simple ring of (x, y) vertices; first vertex equals last."""

    ring: np.ndarray  # (k, 2) float64, closed

    def __post_init__(self):
        self.ring = np.asarray(self.ring, dtype=np.float64)

    @property
    def vertices(self) -> np.ndarray:
        """Ring without the closing duplicate vertex."""
        return self.ring[:-1]

    def validate(self) -> None:
        ring = self.ring
        if ring.ndim != 2 or ring.shape[1] != 2:
            raise ValidationError("ring must be a (k, 2) coordinate array")
        if not np.isfinite(ring).all():
            raise ValidationError("ring contains non-finite coordinates")
        if len(ring) < 4 or not np.array_equal(ring[0], ring[-1]):
            raise ValidationError("ring must be closed (first vertex == last)")
        open_ring = _dedupe_consecutive(ring[:-1])
        if len(np.unique(open_ring, axis=0)) < 3:
            raise ValidationError("ring has fewer than 3 distinct vertices")
        if not ring_is_simple(open_ring):
            raise ValidationError("ring is self-intersecting")


@dataclass
class ElevationGrid:
    """Regular elevation raster; header values kept verbatim from the source.

    `values` is row-major with the top row first, matching the ESRI ASCII
    layout. `origin_x`/`origin_y` locate the lower-left corner of the
    lower-left cell; cell centers sit half a cell inward.
    """

    n_cols: int
    n_rows: int
    origin_x: float
    origin_y: float
    cell_size: float
    nodata_value: float
    values: np.ndarray  # (n_rows, n_cols), top row first

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64).reshape(
            self.n_rows, self.n_cols
        )
        if self.n_cols < 2 or self.n_rows < 2:
            raise ValidationError("grid must be at least 2x2")
        if self.cell_size <= 0:
            raise ValidationError("cell_size must be positive")

    @property
    def extent(self) -> tuple[float, float, float, float]:
        """(x_min, y_min, x_max, y_max) of the covered area."""
        return (
            self.origin_x,
            self.origin_y,
            self.origin_x + self.n_cols * self.cell_size,
            self.origin_y + self.n_rows * self.cell_size,
        )


@dataclass
class PointCloud3D:
    """Ordered outline points in meters; per-axis minimum is zero."""

    points: np.ndarray  # (n, 3) float64
    source_id: str = ""

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)


@dataclass
class InventoryRecord:
    id: str
    polygon: GeoPolygon
    label: str | None = None
    sublabel: str | None = None
    properties: dict = field(default_factory=dict)


@dataclass
class InventoryParse:
    """Outcome of parsing one inventory document."""

    records: list[InventoryRecord]
    skipped: list[tuple[str, str]] = field(default_factory=list)  # (id, reason)
    warnings: list[str] = field(default_factory=list)
    n_non_polygon: int = 0


# ---------------------------------------------------------------------------
# Low-level ring utilities
# ---------------------------------------------------------------------------


def _dedupe_consecutive(pts: np.ndarray) -> np.ndarray:
    """Drop consecutive duplicate vertices of an open ring, wrap included."""
    if len(pts) <= 1:
        return pts
    keep = np.ones(len(pts), dtype=bool)
    keep[1:] = np.any(pts[1:] != pts[:-1], axis=1)
    out = pts[keep]
    if len(out) > 1 and np.array_equal(out[0], out[-1]):
        out = out[:-1]
    return out


def ring_is_simple(pts: np.ndarray) -> bool:
    """True when no two non-adjacent ring edges intersect or touch.

    `pts` is an open ring with consecutive duplicates removed. Adjacent
    edges share exactly one endpoint by construction and are skipped.
    """
    k = len(pts)
    if k < 3:
        return False
    a1 = pts
    a2 = np.roll(pts, -1, axis=0)
    i, j = np.triu_indices(k, 1)
    adjacent = (j == i + 1) | ((i == 0) & (j == k - 1))
    i, j = i[~adjacent], j[~adjacent]
    if len(i) == 0:
        return True
    p1, p2, q1, q2 = a1[i], a2[i], a1[j], a2[j]

    def cross(o, a, b):
        return (a[:, 0] - o[:, 0]) * (b[:, 1] - o[:, 1]) - (a[:, 1] - o[:, 1]) * (
            b[:, 0] - o[:, 0]
        )

    d1 = cross(q1, q2, p1)
    d2 = cross(q1, q2, p2)
    d3 = cross(p1, p2, q1)
    d4 = cross(p1, p2, q2)
    proper = (
        (((d1 > 0) & (d2 < 0)) | ((d1 < 0) & (d2 > 0)))
        & (((d3 > 0) & (d4 < 0)) | ((d3 < 0) & (d4 > 0)))
    )
    if proper.any():
        return False

    def on_segment(p, q, r):
        return (
            (np.minimum(p[:, 0], q[:, 0]) <= r[:, 0])
            & (r[:, 0] <= np.maximum(p[:, 0], q[:, 0]))
            & (np.minimum(p[:, 1], q[:, 1]) <= r[:, 1])
            & (r[:, 1] <= np.maximum(p[:, 1], q[:, 1]))
        )

    touch = (
        ((d1 == 0) & on_segment(q1, q2, p1))
        | ((d2 == 0) & on_segment(q1, q2, p2))
        | ((d3 == 0) & on_segment(p1, p2, q1))
        | ((d4 == 0) & on_segment(p1, p2, q2))
    )
    return not touch.any()


def shoelace_area(ring: np.ndarray) -> float:
    """Unsigned polygon area; accepts open or closed rings."""
    pts = ring[:-1] if len(ring) > 1 and np.array_equal(ring[0], ring[-1]) else ring
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def ring_perimeter(ring: np.ndarray) -> float:
    pts = ring[:-1] if len(ring) > 1 and np.array_equal(ring[0], ring[-1]) else ring
    seg = np.roll(pts, -1, axis=0) - pts
    return float(np.hypot(seg[:, 0], seg[:, 1]).sum())


def convex_hull(pts: np.ndarray) -> np.ndarray:
    """Convex hull (counter-clockwise, no repeated last point); monotone chain."""
    uniq = np.unique(pts, axis=0)  # lexicographic sort
    if len(uniq) <= 2:
        return uniq

    def build(points):
        h: list[np.ndarray] = []
        for p in points:
            while len(h) >= 2:
                ax, ay = h[-1] - h[-2]
                bx, by = p - h[-2]
                if ax * by - ay * bx > 0:
                    break
                h.pop()
            h.append(p)
        return h

    lower = build(uniq)
    upper = build(uniq[::-1])
    return np.array(lower[:-1] + upper[:-1])


def min_area_rectangle(pts: np.ndarray) -> tuple[float, float]:
    """(longer side, shorter side) of the minimum-area bounding rectangle.

    Classic rotating-calipers result: the optimal rectangle is aligned
    with one hull edge, so scanning hull-edge directions is exact.
    """
    hull = convex_hull(pts)
    if len(hull) < 3:
        # degenerate: collinear input
        d = np.linalg.norm(hull[-1] - hull[0]) if len(hull) == 2 else 0.0
        return float(d), 0.0
    best = None
    edges = np.roll(hull, -1, axis=0) - hull
    lengths = np.hypot(edges[:, 0], edges[:, 1])
    for e, elen in zip(edges, lengths):
        if elen == 0:
            continue
        ux, uy = e[0] / elen, e[1] / elen
        proj_u = hull[:, 0] * ux + hull[:, 1] * uy
        proj_v = -hull[:, 0] * uy + hull[:, 1] * ux
        w = float(proj_u.max() - proj_u.min())
        h = float(proj_v.max() - proj_v.min())
        area = w * h
        if best is None or area < best[0]:
            best = (area, max(w, h), min(w, h))
    assert best is not None
    return best[1], best[2]


# ---------------------------------------------------------------------------
# Inventory parsing
# ---------------------------------------------------------------------------


def normalize_label(raw, label_map: dict[str, str] | None = None) -> str:
    """Lowercase and underscore a source label, applying the configured mapping."""
    key = str(raw).strip().lower()
    if label_map:
        if key in label_map:
            return label_map[key]
        underscored = key.replace(" ", "_")
        if underscored in label_map:
            return label_map[underscored]
    return key.replace(" ", "_")


def _close_ring(coords: np.ndarray) -> tuple[np.ndarray, bool]:
    """Return a closed ring and whether auto-closure was applied."""
    if np.array_equal(coords[0], coords[-1]):
        return coords, False
    return np.vstack([coords, coords[:1]]), True


def parse_inventory(
    source: bytes | str,
    label_key: str = "label",
    label_map: dict[str, str] | None = None,
    sublabel_key: str | None = None,
) -> InventoryParse:
    """Parse a GeoJSON FeatureCollection into inventory records.

    One record is produced per polygon exterior ring; MultiPolygon parts
    become separate records with `_p<i>` suffixed ids. Non-polygon
    geometries are skipped and counted; rings with fewer than 3 distinct
    vertices or self-intersections are rejected per record. Unclosed
    rings are auto-closed with a warning.

    Args:
        source: GeoJSON document as bytes or text.
        label_key: feature property holding the class label.
        label_map: source-string -> canonical class mapping (lowercased keys).
        sublabel_key: optional feature property holding a sub-type label.

    Returns:
        InventoryParse with accepted records, skipped (id, reason) pairs,
        and warnings.
    """
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    try:
        doc = json.loads(source)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed GeoJSON document: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("type") != "FeatureCollection":
        raise ValidationError("document is not a GeoJSON FeatureCollection")

    result = InventoryParse(records=[])
    seen_ids: set[str] = set()
    for idx, feature in enumerate(doc.get("features", [])):
        props = feature.get("properties") or {}
        fid = feature.get("id", props.get("id", f"feature_{idx}"))
        fid = str(fid)
        geom = feature.get("geometry") or {}
        gtype = geom.get("type")
        if gtype == "Polygon":
            parts = [(fid, geom.get("coordinates") or [])]
        elif gtype == "MultiPolygon":
            parts = [
                (f"{fid}_p{k}", rings)
                for k, rings in enumerate(geom.get("coordinates") or [])
            ]
        else:
            result.n_non_polygon += 1
            result.warnings.append(f"{fid}: non-polygon geometry ({gtype}) skipped")
            continue

        label = None
        if label_key in props and props[label_key] is not None:
            label = normalize_label(props[label_key], label_map)
        sublabel = None
        if sublabel_key and sublabel_key in props and props[sublabel_key] is not None:
            sublabel = normalize_label(props[sublabel_key], label_map)

        for part_id, rings in parts:
            if not rings:
                result.skipped.append((part_id, "polygon has no rings"))
                continue
            exterior = np.asarray(rings[0], dtype=np.float64)
            if exterior.ndim != 2 or exterior.shape[1] < 2:
                result.skipped.append((part_id, "exterior ring is not a coordinate list"))
                continue
            exterior = exterior[:, :2]
            if not np.isfinite(exterior).all():
                result.skipped.append((part_id, "ring contains non-finite coordinates"))
                continue
            closed, was_closed = _close_ring(exterior)
            if was_closed:
                result.warnings.append(f"{part_id}: ring auto-closed")
            polygon = GeoPolygon(ring=closed)
            try:
                polygon.validate()
            except ValidationError as exc:
                result.skipped.append((part_id, str(exc)))
                continue
            if part_id in seen_ids:
                result.skipped.append((part_id, "duplicate record id"))
                continue
            seen_ids.add(part_id)
            result.records.append(
                InventoryRecord(
                    id=part_id,
                    polygon=polygon,
                    label=label,
                    sublabel=sublabel,
                    properties=dict(props),
                )
            )
    return result


# ---------------------------------------------------------------------------
# Elevation grid I/O and sampling
# ---------------------------------------------------------------------------

_REQUIRED_HEADER = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize")


def load_grid(source: bytes | str) -> ElevationGrid:
    """Load an ESRI ASCII grid (.asc).

    Header keys ncols, nrows, xllcorner, yllcorner, cellsize are required;
    NODATA_value is optional and defaults to -9999 per common usage.
    Values follow row-major with the top row first.
    """
    if isinstance(source, bytes):
        source = source.decode("ascii")
    tokens = source.split()
    header: dict[str, float] = {}
    pos = 0
    while pos + 1 < len(tokens):
        key = tokens[pos].lower()
        if key not in _REQUIRED_HEADER and key != "nodata_value":
            break
        try:
            header[key] = float(tokens[pos + 1])
        except ValueError as exc:
            raise ValidationError(f"non-numeric header value for {key!r}") from exc
        pos += 2
    missing = [k for k in _REQUIRED_HEADER if k not in header]
    if missing:
        raise ValidationError(f"missing header key(s): {', '.join(missing)}")

    n_cols = int(header["ncols"])
    n_rows = int(header["nrows"])
    body = tokens[pos:]
    if len(body) != n_cols * n_rows:
        raise ValidationError(
            f"value count mismatch: expected {n_cols * n_rows}, got {len(body)}"
        )
    try:
        values = np.array(body, dtype=np.float64)
    except ValueError as exc:
        raise ValidationError(f"non-numeric grid value: {exc}") from exc
    return ElevationGrid(
        n_cols=n_cols,
        n_rows=n_rows,
        origin_x=header["xllcorner"],
        origin_y=header["yllcorner"],
        cell_size=header["cellsize"],
        nodata_value=header.get("nodata_value", -9999.0),
        values=values,
    )


def write_grid_asc(grid: ElevationGrid, path, fmt: str = "%.3f") -> None:
    """Write a grid in ESRI ASCII form (fixed decimal format), atomically."""
    import os
    import tempfile

    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp_path = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(f"ncols {grid.n_cols}\n")
            fh.write(f"nrows {grid.n_rows}\n")
            fh.write(f"xllcorner {float(grid.origin_x)!r}\n")
            fh.write(f"yllcorner {float(grid.origin_y)!r}\n")
            fh.write(f"cellsize {float(grid.cell_size)!r}\n")
            fh.write(f"NODATA_value {float(grid.nodata_value)!r}\n")
            np.savetxt(fh, grid.values, fmt=fmt)
        os.chmod(tmp_path, 0o644)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise


def _is_nodata(grid: ElevationGrid, v: float) -> bool:
    return v == grid.nodata_value or math.isnan(v)


def sample_elevation(grid: ElevationGrid, x: float, y: float) -> float:
    """Bilinear elevation at (x, y) in grid units.

    Interpolates the four surrounding cell centers. If some of the four
    are nodata, falls back to the nearest non-nodata neighbor of the
    four; raises when all four are nodata or the point is outside the
    grid extent. Exact on affine surfaces (border cells extrapolate the
    local plane).
    """
    x_min, y_min, x_max, y_max = grid.extent
    if not (x_min <= x <= x_max and y_min <= y <= y_max):
        raise ValidationError(f"point ({x}, {y}) outside grid extent")
    cs = grid.cell_size
    gx = (x - grid.origin_x) / cs - 0.5
    gy = (y - grid.origin_y) / cs - 0.5  # row coordinate counted from the bottom
    i0 = int(np.clip(math.floor(gx), 0, grid.n_cols - 2))
    j0 = int(np.clip(math.floor(gy), 0, grid.n_rows - 2))
    fx = gx - i0
    fy = gy - j0

    def value_at(j: int, i: int) -> float:
        return float(grid.values[grid.n_rows - 1 - j, i])

    corners = []  # (value, center_x, center_y, weight)
    weights = ((1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy)
    for n, (dj, di) in enumerate(((0, 0), (0, 1), (1, 0), (1, 1))):
        j, i = j0 + dj, i0 + di
        cxm = grid.origin_x + (i + 0.5) * cs
        cym = grid.origin_y + (j + 0.5) * cs
        corners.append((value_at(j, i), cxm, cym, weights[n]))

    good = [c for c in corners if not _is_nodata(grid, c[0])]
    if not good:
        raise ValidationError(f"all four neighbors of ({x}, {y}) are nodata")
    if len(good) < 4:
        # nearest non-nodata of the four surrounding centers
        best = min(good, key=lambda c: ((c[1] - x) ** 2 + (c[2] - y) ** 2))
        return best[0]
    return float(sum(v * w for v, _, _, w in corners))


# ---------------------------------------------------------------------------
# Projection, resampling, draping
# ---------------------------------------------------------------------------


def project_ring_to_metric(ring: np.ndarray) -> tuple[np.ndarray, tuple[float, float, float]]:
    """Equirectangular projection of a lon/lat ring to local meters.

    Uses the mean latitude of the ring's distinct vertices as the
    reference parallel. Returns the projected ring and the parameters
    (lon0, lat0, cos_lat0) needed for the inverse transform.
    """
    open_ring = ring[:-1] if np.array_equal(ring[0], ring[-1]) else ring
    lat0 = float(np.mean(open_ring[:, 1]))
    cos_lat0 = math.cos(math.radians(lat0))
    lon0 = float(ring[0, 0])
    lat_ref = float(ring[0, 1])
    x = EARTH_RADIUS_M * np.radians(ring[:, 0] - lon0) * cos_lat0
    y = EARTH_RADIUS_M * np.radians(ring[:, 1] - lat_ref)
    return np.column_stack([x, y]), (lon0, lat_ref, cos_lat0)


def metric_to_geographic(xy: np.ndarray, proj: tuple[float, float, float]) -> np.ndarray:
    lon0, lat_ref, cos_lat0 = proj
    lon = lon0 + np.degrees(xy[:, 0] / (EARTH_RADIUS_M * cos_lat0))
    lat = lat_ref + np.degrees(xy[:, 1] / EARTH_RADIUS_M)
    return np.column_stack([lon, lat])


def resample_ring(ring: np.ndarray, n_points: int) -> np.ndarray:
    """Resample a closed ring to n_points by uniform arc length.

    The first output point coincides with the first ring vertex; the
    closing vertex is not repeated.
    """
    closed = ring if np.array_equal(ring[0], ring[-1]) else np.vstack([ring, ring[:1]])
    seg = np.diff(closed, axis=0)
    seg_len = np.hypot(seg[:, 0], seg[:, 1])
    total = float(seg_len.sum())
    if total <= 0:
        raise ValidationError("degenerate zero-perimeter ring")
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    targets = np.arange(n_points) * (total / n_points)
    idx = np.searchsorted(cum, targets, side="right") - 1
    idx = np.clip(idx, 0, len(seg_len) - 1)
    frac = (targets - cum[idx]) / np.where(seg_len[idx] > 0, seg_len[idx], 1.0)
    return closed[idx] + seg[idx] * frac[:, None]


def metric_ring(record: InventoryRecord, coords: str = "geographic") -> np.ndarray:
    """Record's closed ring in local metric coordinates (meters)."""
    if coords == "projected":
        return record.polygon.ring.copy()
    if coords != "geographic":
        raise ValidationError(f"unknown coords mode {coords!r}")
    projected, _ = project_ring_to_metric(record.polygon.ring)
    return projected


def build_point_cloud(
    record: InventoryRecord,
    grid: ElevationGrid,
    n_points: int = 128,
    coords: str = "geographic",
) -> PointCloud3D:
    """Drape a polygon outline into a normalized 3D point cloud.

    The ring is projected to local meters (skipped for projected
    inventories), resampled to exactly `n_points` by uniform arc length,
    draped on the grid, and translated so each axis minimum is zero.
    Units stay meters on all axes; no rescaling is applied so lifetime
    descriptors keep physical meaning.
    """
    if n_points < 8:
        raise ValidationError("n_points must be at least 8")
    record.polygon.validate()
    ring = record.polygon.ring
    if coords == "projected":
        metric = ring
        proj = None
    elif coords == "geographic":
        metric, proj = project_ring_to_metric(ring)
    else:
        raise ValidationError(f"unknown coords mode {coords!r}")

    resampled = resample_ring(metric, n_points)
    sample_xy = (
        resampled if proj is None else metric_to_geographic(resampled, proj)
    )
    z = np.empty(n_points)
    for k in range(n_points):
        z[k] = sample_elevation(grid, float(sample_xy[k, 0]), float(sample_xy[k, 1]))

    pts = np.column_stack([resampled[:, 0], resampled[:, 1], z])
    pts -= pts.min(axis=0)
    return PointCloud3D(points=pts, source_id=record.id)


# ---------------------------------------------------------------------------
# Geometric baseline features
# ---------------------------------------------------------------------------

GEOMETRIC_FEATURE_NAMES = (
    "A",
    "P",
    "A_over_P",
    "convexity",
    "ellipticity",
    "semi_major",
    "minor",
    "bbox_width",
)


def geometric_features(polygon) -> dict[str, float]:
    """2D shape descriptors of a metric-coordinate polygon.

    A: shoelace area (m^2); P: perimeter (m); convexity: A over the
    convex-hull area; semi_major/minor: half-axes of the minimum-area
    bounding rectangle (longer/shorter); bbox_width: the rectangle's
    shorter side; ellipticity: minor/semi_major.
    """
    ring = polygon.ring if isinstance(polygon, GeoPolygon) else np.asarray(polygon, float)
    pts = ring[:-1] if np.array_equal(ring[0], ring[-1]) else ring
    area = shoelace_area(pts)
    if area <= 0:
        raise ValidationError("degenerate ring with zero area")
    perim = ring_perimeter(pts)
    hull_area = shoelace_area(convex_hull(pts))
    long_side, short_side = min_area_rectangle(pts)
    semi_major = long_side / 2.0
    minor = short_side / 2.0
    return {
        "A": area,
        "P": perim,
        "A_over_P": area / perim,
        "convexity": area / hull_area,
        "ellipticity": minor / semi_major if semi_major > 0 else 0.0,
        "semi_major": semi_major,
        "minor": minor,
        "bbox_width": short_side,
    }
