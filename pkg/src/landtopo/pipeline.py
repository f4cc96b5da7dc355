"""Batch featurization and the feature-table format.

The feature table is a CSV with `id` first, descriptor columns in
canonical order, and an optional final `label` column; a JSON sidecar
records the knobs that shaped the numbers (resample count, grid bins,
sigma rule, cap rule) so runs can be reproduced.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ModelMismatchError, ValidationError
from .features import TOPO_FEATURE_NAMES, FeatureConfig, featurize
from .geometry import (
    GEOMETRIC_FEATURE_NAMES,
    ElevationGrid,
    InventoryRecord,
    build_point_cloud,
    geometric_features,
    metric_ring,
)
from .persistence import RipsConfig, persistence_diagram


@dataclass
class FeatureTable:
    ids: list[str]
    names: list[str]
    X: np.ndarray  # (n, m) float64
    labels: list[str | None] | None = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64).reshape(len(self.ids), len(self.names))

    def column(self, name: str) -> np.ndarray:
        return self.X[:, self.names.index(name)]

    def select(self, names) -> "FeatureTable":
        names = list(names)
        missing = [n for n in names if n not in self.names]
        if missing:
            raise ModelMismatchError(f"missing feature column(s): {', '.join(missing)}")
        cols = [self.names.index(n) for n in names]
        return FeatureTable(
            ids=list(self.ids), names=names, X=self.X[:, cols], labels=self.labels
        )

    def matrix_for(self, feature_names) -> np.ndarray:
        """Columns aligned to a model's feature order."""
        return self.select(feature_names).X

    def labeled_rows(self) -> "FeatureTable":
        """Rows that carry a label (training views)."""
        if self.labels is None:
            raise ValidationError("feature table has no label column")
        keep = [i for i, lab in enumerate(self.labels) if lab]
        return FeatureTable(
            ids=[self.ids[i] for i in keep],
            names=list(self.names),
            X=self.X[keep],
            labels=[self.labels[i] for i in keep],
        )


def _atomic_write_text(path, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp_path = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.chmod(tmp_path, 0o644)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise


def write_feature_csv(table: FeatureTable, path) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    has_labels = table.labels is not None
    header = ["id", *table.names] + (["label"] if has_labels else [])
    writer.writerow(header)
    for i, rid in enumerate(table.ids):
        row = [rid] + [repr(float(v)) for v in table.X[i]]
        if has_labels:
            row.append(table.labels[i] or "")
        writer.writerow(row)
    _atomic_write_text(path, buf.getvalue())


def read_feature_csv(path) -> FeatureTable:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError("feature CSV is empty") from None
        if not header or header[0] != "id":
            raise ValidationError("feature CSV must start with an 'id' column")
        has_labels = header[-1] == "label"
        names = header[1:-1] if has_labels else header[1:]
        ids, rows, labels = [], [], []
        for line in reader:
            if not line:
                continue
            ids.append(line[0])
            values = line[1 : 1 + len(names)]
            try:
                rows.append([float(v) for v in values])
            except ValueError as exc:
                raise ValidationError(f"non-numeric feature value in row {line[0]!r}") from exc
            if has_labels:
                labels.append(line[-1] or None)
    X = np.array(rows, dtype=np.float64).reshape(len(ids), len(names))
    return FeatureTable(ids=ids, names=names, X=X, labels=labels if has_labels else None)


def write_sidecar(path, payload: dict) -> None:
    _atomic_write_text(path, json.dumps(payload, sort_keys=True, indent=2) + "\n")


def sidecar_path(csv_path) -> str:
    return str(csv_path) + ".meta.json"


# ---------------------------------------------------------------------------
# Batch featurization
# ---------------------------------------------------------------------------


def featurize_record(
    record: InventoryRecord,
    grid: ElevationGrid,
    n_points: int,
    coords: str,
    feature_cfg: FeatureConfig,
    with_geometry: bool,
    rips_cfg: RipsConfig = RipsConfig(),
) -> dict[str, float]:
    cloud = build_point_cloud(record, grid, n_points=n_points, coords=coords)
    diagram = persistence_diagram(cloud, rips_cfg)
    values = featurize(diagram, feature_cfg)
    if with_geometry:
        values.update(geometric_features(metric_ring(record, coords)))
    return values


def featurize_records(
    records: list[InventoryRecord],
    grid: ElevationGrid,
    n_points: int = 128,
    coords: str = "geographic",
    feature_cfg: FeatureConfig = FeatureConfig(),
    with_geometry: bool = False,
    rips_cfg: RipsConfig = RipsConfig(),
    workers: int | None = None,
) -> tuple[FeatureTable, list[tuple[str, str]]]:
    """Featurize an inventory; per-record failures never abort the batch.

    Returns the feature table of successful records and a list of
    (record id, reason) failures. Records are processed concurrently
    (the kernels drop the GIL) but outputs keep inventory order.
    """
    names = list(TOPO_FEATURE_NAMES) + (
        list(GEOMETRIC_FEATURE_NAMES) if with_geometry else []
    )

    def work(record: InventoryRecord):
        try:
            return record.id, featurize_record(
                record, grid, n_points, coords, feature_cfg, with_geometry, rips_cfg
            ), None
        except (ValidationError, ValueError) as exc:
            return record.id, None, str(exc)

    if workers is None:
        workers = min(os.cpu_count() or 1, 4)
    if workers > 1 and len(records) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(work, records))
    else:
        outcomes = [work(r) for r in records]

    ids, rows, labels, failures = [], [], [], []
    for record, (rid, values, err) in zip(records, outcomes):
        if err is not None:
            failures.append((rid, err))
            continue
        ids.append(rid)
        rows.append([values[n] for n in names])
        labels.append(record.label)
    X = np.array(rows, dtype=np.float64).reshape(len(ids), len(names))
    any_labels = any(lab for lab in labels)
    table = FeatureTable(
        ids=ids, names=names, X=X, labels=labels if any_labels else None
    )
    return table, failures
