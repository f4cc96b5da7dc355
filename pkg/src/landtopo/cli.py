"""Command-line surface for the landslide failure-type toolkit.

Subcommands: synth, featurize, train, evaluate, predict, decompose,
sweep. Logs go to stderr, data to files only; outputs are written
atomically. Exit codes: 0 ok, 1 empty result, 2 I/O error,
3 validation error, 4 model mismatch.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import evaluation, forest, pipeline, synth
from .config import RunConfig, load_config
from .errors import ModelFormatError, ModelMismatchError, ValidationError
from .features import SELECTED_SIX, FeatureConfig
from .geometry import GEOMETRIC_FEATURE_NAMES, load_grid, parse_inventory
from .persistence import RipsConfig

log = logging.getLogger("landtopo")

EXIT_OK = 0
EXIT_EMPTY = 1
EXIT_IO = 2
EXIT_VALIDATION = 3
EXIT_MODEL = 4


# ---------------------------------------------------------------------------
# Shared plumbing
# ---------------------------------------------------------------------------


def _effective_config(args) -> RunConfig:
    """Config file first, then command-line flags override."""
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    for flag, attr in (
        ("n_points", "n_points"),
        ("bins", "curve_bins"),
        ("sigma", "sigma_rule"),
        ("coords", "coords"),
        ("trees", "n_trees"),
        ("seed", "seed"),
        ("min_leaf", "min_leaf"),
        ("correlation_threshold", "correlation_threshold"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            setattr(cfg, attr, value)
    if getattr(args, "no_balance", False):
        cfg.balance_classes = False
    cfg.validate()
    return cfg


def _forest_params(cfg: RunConfig) -> forest.ForestParams:
    return forest.ForestParams(
        n_trees=cfg.n_trees,
        p_features=cfg.p_features,
        max_depth=cfg.max_depth,
        min_leaf=cfg.min_leaf,
        seed=cfg.seed,
    )


def _read_bytes(path) -> bytes:
    with open(path, "rb") as fh:
        return fh.read()


def _featurize_from_args(args, cfg: RunConfig, with_geometry: bool):
    inv = parse_inventory(
        _read_bytes(args.inventory),
        label_key=args.label_key,
        label_map=cfg.label_map,
        sublabel_key=getattr(args, "group_key", None),
    )
    for msg in inv.warnings:
        log.warning(msg)
    for rid, reason in inv.skipped:
        log.warning("record %s rejected: %s", rid, reason)
    grid = load_grid(_read_bytes(args.dem))
    table, failures = pipeline.featurize_records(
        inv.records,
        grid,
        n_points=cfg.n_points,
        coords=cfg.coords,
        feature_cfg=FeatureConfig(curve_bins=cfg.curve_bins, sigma_rule=cfg.sigma_rule),
        with_geometry=with_geometry,
        rips_cfg=RipsConfig(),
    )
    for rid, reason in failures:
        log.warning("record %s failed: %s", rid, reason)
    if failures or inv.skipped:
        log.warning(
            "summary: %d featurized, %d failed, %d rejected at parse, %d non-polygon",
            len(table.ids), len(failures), len(inv.skipped), inv.n_non_polygon,
        )
    return inv, table, failures


def _balanced_training_view(table: pipeline.FeatureTable, cfg: RunConfig, seed_tag: int):
    labeled = table.labeled_rows()
    y = np.array(labeled.labels)
    if len(set(y.tolist())) < 2:
        raise ValidationError("training requires at least 2 classes")
    if not cfg.balance_classes:
        return labeled, y
    rng = np.random.default_rng([cfg.seed, seed_tag])
    keep = evaluation.balance_indices(y, np.arange(len(y)), rng)
    view = pipeline.FeatureTable(
        ids=[labeled.ids[i] for i in keep],
        names=list(labeled.names),
        X=labeled.X[keep],
        labels=[labeled.labels[i] for i in keep],
    )
    return view, np.array(view.labels)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_featurize(args) -> int:
    cfg = _effective_config(args)
    _, table, _ = _featurize_from_args(args, cfg, with_geometry=args.with_geometry)
    if not table.ids:
        log.error("no record could be featurized")
        return EXIT_EMPTY
    pipeline.write_feature_csv(table, args.out)
    pipeline.write_sidecar(
        pipeline.sidecar_path(args.out),
        {
            "config": cfg.as_dict(),
            "with_geometry": bool(args.with_geometry),
            "cap_rule": "auto (enclosing diameter)",
            "records": len(table.ids),
        },
    )
    log.info("wrote %s (%d records)", args.out, len(table.ids))
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _effective_config(args)
    table = pipeline.read_feature_csv(args.features)
    view, y = _balanced_training_view(table, cfg, seed_tag=101)

    trace = evaluation.SelectionTrace()
    names = list(view.names)
    X = view.X
    if args.select is not None:
        k = cfg.selected_k if args.select == -1 else args.select
        kept, dropped = evaluation.correlation_prune(
            X, names, threshold=cfg.correlation_threshold
        )
        trace.dropped_by_correlation = dropped
        view_kept = view.select(kept)
        trace_rfe = evaluation.rfe_to_k(
            view_kept.X, kept, y, k, _forest_params(cfg)
        )
        trace.elimination_order = trace_rfe.elimination_order
        trace.selected = trace_rfe.selected
        names = trace_rfe.selected
        X = view.select(names).X
    else:
        trace.selected = names

    model = forest.fit(X, y, _forest_params(cfg), names)
    forest.save_model(model, args.model)
    trace_doc = {"config": cfg.as_dict(), **trace.to_dict()}
    pipeline.write_sidecar(str(args.model) + ".trace.json", trace_doc)
    log.info(
        "wrote %s (classes: %s; features: %s)",
        args.model, ", ".join(model.classes), ", ".join(model.feature_names),
    )
    if not args.no_plots:
        from . import plots

        plots.save_importance_figure(
            list(model.feature_names),
            model.importances,
            str(args.model) + ".importances.png",
            highlight=set(SELECTED_SIX),
        )
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _effective_config(args)
    table = pipeline.read_feature_csv(args.features).labeled_rows()
    y = np.array(table.labels)
    report = evaluation.kfold_cv(
        table.X,
        y,
        k=args.folds,
        repeats=args.repeats,
        params=_forest_params(cfg),
        seed=cfg.seed,
        feature_names=table.names,
        balance=cfg.balance_classes,
    )
    doc = {"config": cfg.as_dict(), "folds": args.folds, "repeats": args.repeats}
    doc.update(report.to_dict())
    pipeline.write_sidecar(args.report, doc)
    confusion_csv = str(args.report) + ".confusion.csv"
    lines = ["true\\predicted," + ",".join(report.classes)]
    for cls, row in zip(report.classes, report.confusion):
        lines.append(cls + "," + ",".join(str(int(v)) for v in row))
    pipeline._atomic_write_text(confusion_csv, "\n".join(lines) + "\n")
    log.info(
        "micro-F1 %.4f +/- %.4f over %d repeat(s)",
        report.micro_f1_mean, report.micro_f1_std, args.repeats,
    )
    if not args.no_plots:
        from . import plots

        plots.save_confusion_figure(
            report.classes, report.confusion, str(args.report) + ".confusion.png"
        )
    return EXIT_OK


def cmd_predict(args) -> int:
    cfg = _effective_config(args)
    model = forest.load_model(args.model)
    needs_geometry = any(n in GEOMETRIC_FEATURE_NAMES for n in model.feature_names)
    inv, table, _ = _featurize_from_args(args, cfg, with_geometry=needs_geometry)
    if not table.ids:
        log.error("no record could be featurized")
        return EXIT_EMPTY
    X = table.matrix_for(model.feature_names)
    proba = model.predict_proba(X)
    predicted = [model.classes[k] for k in proba.argmax(axis=1)]

    by_id = {rid: (cls, row) for rid, cls, row in zip(table.ids, predicted, proba)}
    features = []
    for rec in inv.records:
        if rec.id not in by_id:
            continue
        cls, row = by_id[rec.id]
        props = dict(rec.properties)
        props["predicted_class"] = cls
        for c, p in zip(model.classes, row):
            props[f"proba_{c}"] = float(p)
        features.append(
            {
                "type": "Feature",
                "id": rec.id,
                "properties": props,
                "geometry": {
                    "type": "Polygon",
                    "coordinates": [[[float(x), float(y)] for x, y in rec.polygon.ring]],
                },
            }
        )
    doc = {"type": "FeatureCollection", "features": features}
    pipeline._atomic_write_text(
        args.out, json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"
    )
    log.info("wrote %s (%d predictions)", args.out, len(features))
    return EXIT_OK


def cmd_decompose(args) -> int:
    cfg = _effective_config(args)
    model = forest.load_model(args.model)
    needs_geometry = any(n in GEOMETRIC_FEATURE_NAMES for n in model.feature_names)
    inv, table, _ = _featurize_from_args(args, cfg, with_geometry=needs_geometry)
    if not table.ids:
        log.error("no record could be featurized")
        return EXIT_EMPTY
    groups = []
    props_by_id = {rec.id: rec.properties for rec in inv.records}
    for rid in table.ids:
        groups.append(str(props_by_id.get(rid, {}).get(args.group_key, "all")))
    X = table.matrix_for(model.feature_names)
    records, summary = evaluation.decompose_complex(model, X, table.ids, groups)

    header = ["id", "group"] + [f"p_{c}" for c in model.classes]
    lines = [",".join(header)]
    for rec in records:
        lines.append(",".join(str(rec[h]) for h in header))
    pipeline._atomic_write_text(args.out, "\n".join(lines) + "\n")

    summary_path = str(args.out) + ".summary.csv"
    lines = ["group,class,q1,median,q3,n"]
    for grp in sorted(summary):
        for cls in model.classes:
            s = summary[grp][cls]
            lines.append(f"{grp},{cls},{s['q1']!r},{s['median']!r},{s['q3']!r},{s['n']}")
    pipeline._atomic_write_text(summary_path, "\n".join(lines) + "\n")
    pipeline.write_sidecar(
        str(args.out) + ".meta.json",
        {"config": cfg.as_dict(), "group_key": args.group_key, "records": len(records)},
    )
    log.info("wrote %s and %s", args.out, summary_path)
    if not args.no_plots:
        from . import plots

        plots.save_probability_box_figure(
            records, model.classes, str(args.out) + ".png"
        )
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _effective_config(args)
    table = pipeline.read_feature_csv(args.features).labeled_rows()
    sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    if not sizes:
        raise ValidationError("--sizes must list at least one size")
    rows = evaluation.sample_efficiency_sweep(
        table.X,
        table.labels,
        sizes,
        repeats=args.repeats,
        params=_forest_params(cfg),
        seed=cfg.seed,
        feature_names=table.names,
        test_fraction=args.test_fraction,
    )
    header = list(rows[0].keys())
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(repr(row[h]) if isinstance(row[h], float) else str(row[h]) for h in header))
    pipeline._atomic_write_text(args.out, "\n".join(lines) + "\n")
    pipeline.write_sidecar(
        str(args.out) + ".meta.json",
        {"config": cfg.as_dict(), "sizes": sizes, "repeats": args.repeats,
         "test_fraction": args.test_fraction},
    )
    log.info("wrote %s (%d sizes)", args.out, len(rows))
    if not args.no_plots:
        from . import plots

        classes = sorted(set(lab for lab in table.labels if lab))
        plots.save_sweep_figure(rows, classes, str(args.out) + ".png")
    return EXIT_OK


def cmd_synth(args) -> int:
    records, grid, manifest = synth.gen_inventory(
        args.n, seed=args.seed, cell_size=args.cell_size
    )
    paths = synth.write_inventory(records, grid, manifest, args.out)
    log.info(
        "wrote %s, %s, %s (%d records)",
        paths["inventory"], paths["dem"], paths["manifest"], len(records),
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_common(sub, config=True, plots=False):
    if config:
        sub.add_argument("--config", help="key-value config file; flags override it")
    if plots:
        sub.add_argument(
            "--no-plots", action="store_true",
            help="skip the companion PNG figure next to the report",
        )


def _add_forest_flags(sub):
    sub.add_argument("--trees", type=int, help="number of trees (default: 500)")
    sub.add_argument("--seed", type=int, help="master seed (default: 0)")
    sub.add_argument(
        "--no-balance", action="store_true",
        help="disable per-class down-sampling to the minority count (default: balanced)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="landtopo",
        description="Classify landslide failure types from polygon outlines and a DEM "
        "via persistent-homology descriptors and a random forest.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("featurize", help="compute the per-landslide feature table")
    p.add_argument("--inventory", required=True, help="GeoJSON FeatureCollection")
    p.add_argument("--dem", required=True, help="ESRI ASCII grid (.asc)")
    p.add_argument("--out", required=True, help="output feature CSV")
    p.add_argument("--label-key", default="label", help="feature property holding the class label (default: label)")
    p.add_argument("--with-geometry", action="store_true", help="append the 8 geometric baseline columns")
    p.add_argument("--n-points", type=int, dest="n_points", help="outline resample count (default: 128)")
    p.add_argument("--bins", type=int, help="curve/kernel grid bins (default: 100)")
    p.add_argument("--sigma", help="kernel sigma rule (default: cap/20)")
    p.add_argument("--coords", choices=["geographic", "projected"], help="inventory coordinate mode (default: geographic)")
    _add_common(p)
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("train", help="select features and fit the forest")
    p.add_argument("--features", required=True, help="feature CSV with a label column")
    p.add_argument("--model", required=True, help="output model JSON")
    p.add_argument(
        "--select", nargs="?", type=int, const=-1, default=None, metavar="K",
        help="correlation-prune then recursively eliminate to K features "
        "(bare --select uses the configured selected_k, default 6; "
        "omitted: use all features)",
    )
    p.add_argument("--correlation-threshold", type=float, dest="correlation_threshold",
                   help="|r| at or above which the later feature is dropped (default: 0.9)")
    _add_forest_flags(p)
    _add_common(p, plots=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="repeated stratified k-fold cross-validation")
    p.add_argument("--features", required=True)
    p.add_argument("--folds", type=int, default=10, help="folds (default: 10)")
    p.add_argument("--repeats", type=int, default=10, help="repeats (default: 10)")
    p.add_argument("--report", required=True, help="output report JSON")
    _add_forest_flags(p)
    _add_common(p, plots=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="label an inventory with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--inventory", required=True)
    p.add_argument("--dem", required=True)
    p.add_argument("--out", required=True, help="output GeoJSON with predicted_class and probabilities")
    p.add_argument("--label-key", default="label")
    p.add_argument("--n-points", type=int, dest="n_points")
    p.add_argument("--coords", choices=["geographic", "projected"])
    _add_common(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("decompose", help="class-probability decomposition of composite records")
    p.add_argument("--model", required=True, help="model trained on exactly slide/flow/fall")
    p.add_argument("--inventory", required=True)
    p.add_argument("--dem", required=True)
    p.add_argument("--group-key", default="behavior", help="record property to group summaries by (default: behavior)")
    p.add_argument("--out", required=True, help="output per-record probability CSV")
    p.add_argument("--label-key", default="label")
    p.add_argument("--n-points", type=int, dest="n_points")
    p.add_argument("--coords", choices=["geographic", "projected"])
    _add_common(p, plots=True)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("sweep", help="accuracy versus per-class training-set size")
    p.add_argument("--features", required=True)
    p.add_argument("--sizes", required=True, help="comma-separated per-class training sizes")
    p.add_argument("--repeats", type=int, default=10, help="repeats per size (default: 10)")
    p.add_argument("--test-fraction", type=float, default=0.25,
                   help="held-out stratified test fraction (default: 0.25)")
    p.add_argument("--out", required=True, help="output CSV, one row per size")
    _add_forest_flags(p)
    _add_common(p, plots=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("synth", help="generate a labeled synthetic inventory + DEM")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--n", type=int, default=25, help="records per class (default: 25)")
    p.add_argument("--seed", type=int, default=0, help="master seed (default: 0)")
    p.add_argument("--cell-size", type=float, default=10.0, help="DEM cell size in meters (default: 10)")
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ModelFormatError, ModelMismatchError) as exc:
        log.error("%s", exc)
        return EXIT_MODEL
    except ValidationError as exc:
        log.error("%s", exc)
        return EXIT_VALIDATION
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
