import json

import pytest

# Project
from hardy.config import load_config, apply_override
from hardy.artifacts import write_json
from hardy.exceptions import ConfigInvalidError


def _fields(e: ConfigInvalidError) -> list[str]:
    return [entry["field"] for entry in e.error_details["errors"]]


def _write(tmp_path, document: dict, name: str = "config.json") -> str:
    path = tmp_path / name
    path.write_text(json.dumps(document), encoding="utf-8")
    return str(path)


def test_defaults(settings):
    config = load_config()
    assert config.exponents == ("1/2", "1")
    assert config.dilation.matrix == ((2.0, 0.0), (0.0, 3.0))
    assert config.s_order == 2
    assert config.seed == 0
    assert config.atoms.count == 200
    assert config.atoms.i0_range == (-6, 6)
    assert config.threads == settings.ANISO_THREADS
    assert config.output_dir == settings.ANISO_OUTPUT_DIR
    assert config.dilation_object.b == pytest.approx(6.0)
    config.validate()


def test_precedence(tmp_path):
    path = _write(tmp_path, {"seed": 5, "atoms": {"count": 10, "r": 3}})
    config = load_config(path, overrides=["seed=7", "atoms.count=3"], seed=9, out=str(tmp_path / "out"), threads=2)
    assert config.seed == 9
    assert config.atoms.count == 3
    assert config.atoms.r == 3.0
    # untouched keys keep their defaults
    assert config.atoms.resolution == 64
    assert config.output_dir == str(tmp_path / "out")
    assert config.threads == 2


def test_errors_are_collected(tmp_path):
    path = _write(tmp_path, {"atoms": {"count": -1}, "exponents": ["0", "1"], "seed": -1, "colour": "red"})
    with pytest.raises(ConfigInvalidError) as e:
        load_config(path)
    fields = _fields(e.value)
    assert "atoms.count" in fields
    assert "exponents" in fields
    assert "seed" in fields
    assert "colour" in fields


def test_unreadable_file(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigInvalidError) as e:
        load_config(str(path))
    assert _fields(e.value) == ["config"]


def test_size_exponent_validation():
    config = load_config(overrides=["atoms.r=1.0"])
    with pytest.raises(ConfigInvalidError) as e:
        config.validate()
    assert _fields(e.value) == ["atoms.r"]


def test_moment_order_validation():
    config = load_config(overrides=["atoms.s=1"])
    with pytest.raises(ConfigInvalidError) as e:
        config.validate()
    assert _fields(e.value) == ["atoms.s"]
    assert load_config(overrides=["atoms.s=3"]).validate().s_order == 3


def test_non_expansive_matrix():
    config = load_config(overrides=['dilation.matrix=[["1", "1"], ["0", "1"]]'])
    with pytest.raises(ConfigInvalidError) as e:
        config.validate()
    entry = e.value.error_details["errors"][0]
    assert entry["field"] == "dilation.matrix"
    assert "NotExpansiveError" in entry["message"]


def test_hardy_exponents_only_for_hardy_experiments():
    config = load_config(overrides=['exponents=["2", "3/2"]', "atoms.r=4"])
    config.validate(hardy=False)
    with pytest.raises(ConfigInvalidError) as e:
        config.validate(hardy=True)
    assert _fields(e.value) == ["exponents"]


def test_exponent_dimension():
    config = load_config(overrides=['exponents=["1/2", "1", "1"]'])
    with pytest.raises(ConfigInvalidError) as e:
        config.validate()
    assert "exponents" in _fields(e.value)


def test_apply_override():
    document = {"atoms": {"count": 1}}
    apply_override(document, "atoms.i0_range=[-1, 1]")
    apply_override(document, "output_dir=/tmp/runs")
    assert document == {"atoms": {"count": 1, "i0_range": [-1, 1]}, "output_dir": "/tmp/runs"}
    with pytest.raises(ConfigInvalidError):
        apply_override(document, "atoms.count")
    with pytest.raises(ConfigInvalidError):
        apply_override(document, "output_dir.nested=1")


def test_echo_reloads_to_the_same_config(tmp_path):
    config = load_config(overrides=['dilation.matrix=[["2", "1"], ["0", "3"]]', "atoms.s=4"], seed=17)
    path = str(tmp_path / "echo.json")
    write_json(path, config.as_dict())
    reloaded = load_config(path)
    assert reloaded.as_dict() == config.as_dict()
    assert reloaded.s_order == 4
