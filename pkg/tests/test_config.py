import pytest

from landtopo.config import RunConfig, parse_config
from landtopo.errors import ValidationError


def test_defaults_match_documented_values():
    cfg = RunConfig()
    assert cfg.n_points == 128
    assert cfg.curve_bins == 100
    assert cfg.sigma_rule == "cap/20"
    assert cfg.correlation_threshold == 0.9
    assert cfg.selected_k == 6
    assert cfg.n_trees == 500
    assert cfg.p_features is None
    assert cfg.max_depth is None
    assert cfg.min_leaf == 1
    assert cfg.coords == "geographic"
    assert cfg.balance_classes is True


def test_parse_overrides_and_comments():
    cfg = parse_config(
        """
        # comment line
        n_points = 64
        coords = projected
        balance_classes = false
        sigma_rule = cap/10
        max_depth = none
        p_features = 3
        """
    )
    assert cfg.n_points == 64
    assert cfg.coords == "projected"
    assert cfg.balance_classes is False
    assert cfg.sigma_rule == "cap/10"
    assert cfg.max_depth is None
    assert cfg.p_features == 3


def test_parse_label_map():
    cfg = parse_config(
        """
        label.Rock Fall = fall
        label.DEBRIS FLOW = debris_flow
        """
    )
    assert cfg.label_map == {"rock fall": "fall", "debris flow": "debris_flow"}


def test_unknown_key_rejected():
    with pytest.raises(ValidationError, match="unknown config key"):
        parse_config("n_pionts = 64")


def test_bad_values_rejected():
    with pytest.raises(ValidationError):
        parse_config("n_points = many")
    with pytest.raises(ValidationError):
        parse_config("balance_classes = maybe")
    with pytest.raises(ValidationError):
        parse_config("just a line without equals")


def test_range_validation():
    with pytest.raises(ValidationError):
        parse_config("n_points = 4")
    with pytest.raises(ValidationError):
        parse_config("correlation_threshold = 1.5")
    with pytest.raises(ValidationError):
        parse_config("coords = martian")
    with pytest.raises(ValidationError):
        parse_config("curve_bins = 1")


def test_as_dict_echo():
    cfg = parse_config("seed = 9\nlabel.x = slide")
    doc = cfg.as_dict()
    assert doc["seed"] == 9
    assert doc["label_map"] == {"x": "slide"}
