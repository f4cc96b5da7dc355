"""Key-value run configuration and label mapping.

Config files are plain text, one `key = value` per line, `#` comments.
Label-mapping entries use a `label.` prefix, e.g.
`label.Rock Fall = fall`. Unknown keys are rejected.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

from .errors import ValidationError


@dataclass
class RunConfig:
    n_points: int = 128
    curve_bins: int = 100
    sigma_rule: str = "cap/20"
    correlation_threshold: float = 0.9
    selected_k: int = 6
    n_trees: int = 500
    p_features: int | None = None
    max_depth: int | None = None
    min_leaf: int = 1
    seed: int = 0
    coords: str = "geographic"
    balance_classes: bool = True
    label_map: dict[str, str] = field(default_factory=dict)

    def validate(self) -> None:
        if self.n_points < 8:
            raise ValidationError("n_points must be >= 8")
        if self.curve_bins < 2:
            raise ValidationError("curve_bins must be >= 2")
        if not 0 < self.correlation_threshold <= 1:
            raise ValidationError("correlation_threshold must be in (0, 1]")
        if self.selected_k < 1:
            raise ValidationError("selected_k must be >= 1")
        if self.n_trees < 1:
            raise ValidationError("n_trees must be >= 1")
        if self.min_leaf < 1:
            raise ValidationError("min_leaf must be >= 1")
        if self.p_features is not None and self.p_features < 1:
            raise ValidationError("p_features must be >= 1 when set")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValidationError("max_depth must be >= 1 when set")
        if self.coords not in ("projected", "geographic"):
            raise ValidationError("coords must be 'projected' or 'geographic'")

    def as_dict(self) -> dict:
        doc = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "label_map"}
        doc["label_map"] = dict(self.label_map)
        return doc


_BOOL_STRINGS = {"true": True, "false": False, "yes": True, "no": False, "1": True, "0": False}

_OPTIONAL_INT = ("p_features", "max_depth")


def _coerce(key: str, raw: str):
    raw = raw.strip()
    if key in _OPTIONAL_INT:
        if raw.lower() in ("", "none", "auto", "unlimited"):
            return None
        return int(raw)
    if key in ("n_points", "curve_bins", "selected_k", "n_trees", "min_leaf", "seed"):
        return int(raw)
    if key == "correlation_threshold":
        return float(raw)
    if key == "balance_classes":
        try:
            return _BOOL_STRINGS[raw.lower()]
        except KeyError:
            raise ValidationError(f"invalid boolean {raw!r} for balance_classes") from None
    if key in ("sigma_rule", "coords"):
        return raw
    raise ValidationError(f"unknown config key {key!r}")


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    cfg = base if base is not None else RunConfig()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValidationError(f"config line {lineno} is not 'key = value': {line!r}")
        key, raw = stripped.split("=", 1)
        key = key.strip()
        if key.startswith("label."):
            source = key[len("label."):].strip().lower()
            if not source:
                raise ValidationError(f"config line {lineno}: empty label-map key")
            cfg.label_map[source] = raw.strip().lower()
            continue
        try:
            setattr(cfg, key, _coerce(key, raw))
        except ValidationError:
            raise
        except (ValueError, TypeError) as exc:
            raise ValidationError(
                f"config line {lineno}: bad value for {key!r}: {exc}"
            ) from exc
    cfg.validate()
    return cfg


def load_config(path, base: RunConfig | None = None) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read(), base)
