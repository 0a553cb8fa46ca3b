from pathlib import Path

import pytest

from semicon.errors import ConfigError
from semicon.models.config_io import config_items, load_config, parse_config, write_config
from semicon.models.enums import AttentionMode, Variant
from semicon.models.settings import RunConfig

REPO = Path(__file__).resolve().parents[1]


def test_defaults_validate():
    RunConfig().validate()


def test_parse_sections_and_comments():
    cfg = parse_config(
        """
        # comment line
        seed = 7
        stage.m = 2          # trailing comment
        stage.mode = erase
        icon.grouped = no
        model.variant = NO_ICON
        train.lr = 0.5
        """
    )
    assert cfg.seed == 7
    assert cfg.stage.m == 2
    assert cfg.stage.mode is AttentionMode.ERASE
    assert cfg.icon.grouped is False
    assert cfg.model.variant is Variant.NO_ICON
    assert cfg.train.lr == 0.5
    assert cfg.train.gamma == 200.0


@pytest.mark.parametrize(
    "text",
    [
        "stage.mm = 2",
        "nosuch.key = 1",
        "stage.m = two",
        "icon.grouped = maybe",
        "model.variant = fancy",
        "just a line",
        "stage = 3",
        "stage.alpha = 1.5",
        "icon.portions = 3",          # 16 channels
        "data.channels = 1",          # model.in_channels = 3
    ],
)
def test_bad_config_lines(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_write_then_load_reproduces(tmp_path: Path):
    cfg = parse_config("seed = 3\nstage.alpha = 0.25\ntrain.soft_constraint = true\n")
    path = write_config(cfg, tmp_path / "run.cfg")
    assert load_config(path) == cfg
    keys = [k for k, _ in config_items(cfg)]
    assert "train.soft_constraint" in keys and "seed" in keys


def test_desk_config_loads():
    cfg = load_config(REPO / "configs" / "desk.cfg")
    assert cfg.model.code_bits == 48
    assert cfg.stage.m == 3
    assert cfg.train.iterations == 10


def test_missing_config(tmp_path: Path):
    with pytest.raises(FileNotFoundError):
        load_config(tmp_path / "none.cfg")


def test_with_variant_sets_stage_mode():
    cfg = RunConfig()
    assert cfg.with_variant(Variant.PLAIN_STAGES).stage.mode is AttentionMode.NONE
    assert cfg.with_variant(Variant.PLAIN_STAGES).with_variant(Variant.FULL).stage.mode is AttentionMode.SEM
    assert cfg.with_variant(Variant.BASELINE).model.variant is Variant.BASELINE
