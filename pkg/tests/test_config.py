import pytest

from ricciforms.config import ConfigError, ConfigReadError, ExperimentConfig, load_config

MINIMAL = """
[grid]
dim = 3
N = 16

[scenario]
name = "flat_torus"

[form]
degree = 1
"""


def test_minimal_config_fills_defaults():
    cfg = load_config(MINIMAL)
    assert cfg.cfl == 0.2 and cfg.record_every == 1
    assert cfg.points == (16, 16, 16) and cfg.periods == (1.0, 1.0, 1.0)
    assert cfg.form_kind == "fourier_mode" and cfg.seed == 0


def test_parsing_is_deterministic():
    assert load_config(MINIMAL) == load_config(MINIMAL)


def test_form_degree_above_dimension_names_field():
    with pytest.raises(ConfigError) as info:
        load_config(MINIMAL.replace("degree = 1", "degree = 4"))
    assert info.value.field == "form_degree"
    assert "form_degree" in str(info.value)


@pytest.mark.parametrize(
    "text,field",
    [
        (MINIMAL + "\n[run]\ncfll = 0.1\n", "run.cfll"),
        (MINIMAL.replace('name = "flat_torus"', 'name = "flat_torus"\neps = 0.1'), "scenario.eps"),
        (MINIMAL + "\n[extra]\nx = 1\n", "extra"),
        (MINIMAL.replace('name = "flat_torus"', 'name = "sphere"'), "scenario.name"),
        (MINIMAL.replace("N = 16", "N = 4"), "grid.N"),
        (MINIMAL.replace("N = 16", "N = [16, 16]"), "grid.N"),
        (MINIMAL.replace("dim = 3", "dim = 5"), "grid.dim"),
        (MINIMAL + "\n[run]\ncfl = 2.0\n", "run.cfl"),
        (MINIMAL + "\n[run]\nrecord_every = 0\n", "run.record_every"),
        (MINIMAL + "\n[run]\nt_end = -1.0\n", "run.t_end"),
        (MINIMAL + '\n[run]\nseed = "a"\n', "run.seed"),
        (MINIMAL.replace("degree = 1", 'degree = 1\nkind = "closed"\nmode = [1, 0, 0]'), "form.mode"),
    ],
)
def test_validation_errors_name_the_field(text, field):
    with pytest.raises(ConfigError) as info:
        load_config(text)
    assert info.value.field == field


def test_syntax_error_has_line_and_column():
    with pytest.raises(ConfigError) as info:
        load_config("[grid]\ndim = 3\nN = = 16\n")
    assert info.value.line == 3 and info.value.column is not None
    assert "line 3" in str(info.value)


def test_missing_file_is_a_read_error(tmp_path):
    with pytest.raises(ConfigReadError):
        load_config(tmp_path / "absent.toml")


def test_file_and_text_agree(tmp_path):
    path = tmp_path / "c.toml"
    path.write_text(MINIMAL, encoding="utf-8")
    assert load_config(path) == load_config(MINIMAL)
    assert load_config(str(path)) == load_config(MINIMAL)


def test_overrides_and_echo():
    cfg = load_config(MINIMAL).with_overrides(seed=7, out_dir="elsewhere")
    assert isinstance(cfg, ExperimentConfig)
    echo = cfg.as_dict()
    assert echo["run"]["seed"] == 7 and echo["output"]["dir"] == "elsewhere"
    assert echo["form"] == {"degree": 1, "kind": "fourier_mode"}
    with pytest.raises(ConfigError):
        cfg.with_overrides(seed=-1)


def test_per_axis_lists():
    cfg = load_config(MINIMAL.replace("N = 16", "N = [8, 12, 16]\nL = [1.0, 2.0, 0.5]"))
    assert cfg.grid.points == (8, 12, 16)
    assert cfg.grid.spacing == (0.125, 2.0 / 12, 0.5 / 16)
