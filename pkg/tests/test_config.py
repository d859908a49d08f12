import pytest

from sentibench.config import ConfigError, as_list, defaults, load_config, parse_config, parse_scalar, section


@pytest.mark.parametrize("text, value", [
    ("none", None), ("True", True), ("false", False), ("42", 42), ("-3", -3),
    ("1e-4", 1e-4), ("0.5", 0.5), ("logistic", "logistic"), ("  spaced  ", "spaced"),
])
def test_parse_scalar(text, value):
    assert parse_scalar(text) == value and type(parse_scalar(text)) is type(value)


def test_parse_config_grammar():
    cfg = parse_config("""
# comment
seed = 7   # trailing comment
models = logistic, gbdt
gbdt.max_depth = none
tune.gbdt.l2_leaf = 0.1, 1.0
""")
    assert cfg == {"seed": 7, "models": ["logistic", "gbdt"], "gbdt.max_depth": None,
                   "tune.gbdt.l2_leaf": [0.1, 1.0]}


@pytest.mark.parametrize("line", ["seed 7", "Seed = 1", "= 3", "bogus.key = 1", "a..b = 2"])
def test_parse_errors_carry_location(line):
    with pytest.raises(ConfigError, match=r"^run\.cfg:2: "):
        parse_config("seed = 1\n" + line, "run.cfg")


def test_defaults_cover_every_model():
    cfg = defaults()
    assert cfg["seed"] == 42 and cfg["cv_k"] == 10 and cfg["split.ratios"] == [0.8, 0.1, 0.1]
    assert section(cfg, "gbdt")["max_depth"] is None
    assert section(cfg, "bilstm")["max_epochs"] == 20
    # grids sit under tune.<family> and are not model params
    assert "logistic.lr" not in section(cfg, "tune")
    assert section(cfg, "tune.logistic")["lr"] == [0.01, 0.03, 0.1, 0.3]
    for family in ("logistic", "svm_linear", "gbdt"):
        for key, grid in section(cfg, f"tune.{family}").items():
            assert section(cfg, family)[key] in as_list(grid)


def test_load_config_layers(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("seed = 1\ngbdt.n_rounds = 5\n", encoding="utf-8")
    cfg = load_config(p, {"seed": 9})
    assert cfg["seed"] == 9 and cfg["gbdt.n_rounds"] == 5 and cfg["cv_k"] == 10
    with pytest.raises(OSError):
        load_config(tmp_path / "missing.cfg")


def test_as_list():
    assert as_list(3) == [3] and as_list([1, 2]) == [1, 2]
