"""Landslide failure-type classification from 3D outline topology.

Pipeline: inventory polygons + elevation grid -> draped, normalized 3D
outline clouds -> Vietoris-Rips persistence diagrams (H0/H1) ->
topological descriptor vectors (optionally plus 2D geometric baselines)
-> random-forest classification with feature selection, cross-validated
evaluation, probability decomposition of composite records, and
sample-efficiency sweeps.
"""

from .config import RunConfig, load_config, parse_config
from .errors import ModelFormatError, ModelMismatchError, ValidationError
from .features import SELECTED_SIX, TOPO_FEATURE_NAMES, FeatureConfig, featurize
from .forest import ForestModel, ForestParams, fit, load_model, save_model
from .geometry import (
    GEOMETRIC_FEATURE_NAMES,
    ElevationGrid,
    GeoPolygon,
    InventoryRecord,
    PointCloud3D,
    build_point_cloud,
    geometric_features,
    load_grid,
    parse_inventory,
    sample_elevation,
)
from .persistence import (
    PersistenceDiagram,
    RipsConfig,
    brute_force_persistence,
    distance_matrix,
    persistence_diagram,
    rips_persistence,
)
from .pipeline import FeatureTable, featurize_records, read_feature_csv, write_feature_csv

__version__ = "0.1.0"

__all__ = [
    "RunConfig", "load_config", "parse_config",
    "ValidationError", "ModelFormatError", "ModelMismatchError",
    "SELECTED_SIX", "TOPO_FEATURE_NAMES", "FeatureConfig", "featurize",
    "ForestModel", "ForestParams", "fit", "load_model", "save_model",
    "GEOMETRIC_FEATURE_NAMES", "ElevationGrid", "GeoPolygon", "InventoryRecord",
    "PointCloud3D", "build_point_cloud", "geometric_features", "load_grid",
    "parse_inventory", "sample_elevation",
    "PersistenceDiagram", "RipsConfig", "brute_force_persistence",
    "distance_matrix", "persistence_diagram", "rips_persistence",
    "FeatureTable", "featurize_records", "read_feature_csv", "write_feature_csv",
    "__version__",
]
