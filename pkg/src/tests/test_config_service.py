"""
Tests pour la lecture et la validation des configurations.
"""
import json

import pytest

from core.exceptions import ConfigError
from models.experiment_config import LddmmParams, LinDynParams


def document(**overrides):
    base = {"kind": "lin-dyn", "params": {"depth": 2}, "seed": 3}
    base.update(overrides)
    return json.dumps(base)


def test_defaults_are_filled(config_service):
    config = config_service.parse_config('{"kind": "lddmm"}')
    assert config.params == LddmmParams()
    assert config.seed == 0
    assert config.output_dir == "results"


def test_bytes_are_accepted(config_service):
    config = config_service.parse_config(document().encode("utf-8"))
    assert config.params.depth == 2


def test_unknown_parameter_is_named(config_service):
    with pytest.raises(ConfigError) as error:
        config_service.parse_config(document(params={"etaa": 0.1}))
    assert "etaa" in str(error.value)
    assert error.value.field == "etaa"


def test_unknown_top_level_key(config_service):
    with pytest.raises(ConfigError) as error:
        config_service.parse_config(document(verbose=True))
    assert error.value.field == "verbose"


@pytest.mark.parametrize(
    "params",
    [
        {"eta": 0},
        {"eta": -1.0},
        {"depth": 0},
        {"depth": 2.5},
        {"steps": True},
        {"acceleration_depths": [1, 0]},
        {"eta": 0.5, "weight_decay": 1.0},
    ],
)
def test_constraint_violations(config_service, params):
    with pytest.raises(ConfigError):
        config_service.parse_config(document(params=params))


def test_kernel_width_bounds(config_service):
    with pytest.raises(ConfigError):
        config_service.parse_config('{"kind": "lddmm", "params": {"kernel_sigma": 3.0}}')


def test_complexity_state_dimension_checked(config_service):
    with pytest.raises(ConfigError):
        config_service.parse_config('{"kind": "complexity", "params": {"states": [[1, 0, 0]]}}')


@pytest.mark.parametrize(
    "params, field",
    [
        ({"omega0": {"XY": 1.0}}, "omega0"),
        ({"qubits": 2, "omega0": {"X": 1.0}, "perturbation": {"XI": 1e-6}}, "omega0"),
        ({"penalized": ["XX"]}, "penalized"),
        ({"weights": {"ZZ": 2.0}}, "weights"),
        ({"omega0": {}}, "omega0"),
        ({"omega0": {"Y": 0.0}}, "omega0"),
        ({"perturbation": {}}, "perturbation"),
        ({"perturbation": {"X": 1e-3}}, "perturbation"),
        # 1.5e-4 < 1e-4·‖Ω₀‖ en norme euclidienne, mais Z pèse q = 10
        ({"perturbation": {"Z": 1.5e-4}}, "perturbation"),
    ],
)
def test_curvature_inconsistencies_name_the_field(config_service, params, field):
    with pytest.raises(ConfigError) as error:
        config_service.parse_config(json.dumps({"kind": "curvature", "params": params}))
    assert error.value.field == field


def test_curvature_two_qubit_labels_accepted(config_service):
    config = config_service.parse_config(json.dumps({
        "kind": "curvature",
        "params": {"qubits": 2, "omega0": {"XI": 1.0, "ZZ": 0.5}, "perturbation": {"IY": 1e-6}},
    }))
    assert config.params.omega0 == {"XI": 1.0, "ZZ": 0.5}


def test_complexity_target_labels_checked(config_service):
    with pytest.raises(ConfigError) as error:
        config_service.parse_config('{"kind": "complexity", "params": {"targets": [{"X": 0.2}, {"XX": 0.5}]}}')
    assert error.value.field == "targets"


def test_lddmm_image_files_go_together(config_service):
    with pytest.raises(ConfigError) as error:
        config_service.parse_config('{"kind": "lddmm", "params": {"source_csv": "a.csv"}}')
    assert error.value.field == "target_csv"
    config = config_service.parse_config('{"kind": "lddmm", "params": {"source_csv": "a.csv", "target_csv": "b.csv"}}')
    assert (config.params.source_csv, config.params.target_csv) == ("a.csv", "b.csv")


@pytest.mark.parametrize("text", ["{", "[]", '{"params": {}}', '{"kind": "unknown"}', "\xff"])
def test_invalid_documents(config_service, text):
    with pytest.raises(ConfigError):
        config_service.parse_config(text)


def test_invalid_utf8(config_service):
    with pytest.raises(ConfigError):
        config_service.parse_config(b'{"kind": "\xff"}')


def test_canonical_form_round_trip(config_service):
    config = config_service.parse_config(document())
    again = config_service.parse_config(config.to_json())
    assert again == config
    assert again.config_hash() == config.config_hash()


def test_hash_ignores_number_spelling(config_service):
    first = config_service.parse_config(document(params={"eta": 1}))
    second = config_service.parse_config(document(params={"eta": 1.0}))
    assert first.config_hash() == second.config_hash()


def test_hash_ignores_output_dir(config_service):
    first = config_service.parse_config(document(output_dir="a"))
    second = config_service.parse_config(document(output_dir="b"))
    assert first.run_id == second.run_id
    assert first.run_id.startswith("lin-dyn-")
    assert len(first.run_id) == len("lin-dyn-") + 12


def test_hash_depends_on_seed(config_service):
    assert config_service.parse_config(document(seed=1)).config_hash() != config_service.parse_config(
        document(seed=2)
    ).config_hash()


def test_seed_precedence(config_service):
    config = config_service.parse_config(document(seed=3))

    resolved, source = config_service.resolve_seed(config, cli_seed=9, environ={"GEOLAB_SEED": "7"})
    assert (resolved.seed, source) == (9, "cli")

    resolved, source = config_service.resolve_seed(config, environ={"GEOLAB_SEED": "7"})
    assert (resolved.seed, source) == (7, "env")

    resolved, source = config_service.resolve_seed(config, environ={})
    assert (resolved.seed, source) == (3, "config")
    assert resolved is config


@pytest.mark.parametrize("raw", ["abc", "-1"])
def test_invalid_environment_seed(config_service, raw):
    config = config_service.parse_config(document())
    with pytest.raises(ConfigError):
        config_service.resolve_seed(config, environ={"GEOLAB_SEED": raw})


def test_load_missing_file(config_service, tmp_path):
    with pytest.raises(ConfigError):
        config_service.load(tmp_path / "absent.json")


def test_load_from_disk(config_service, tmp_path):
    path = tmp_path / "config.json"
    path.write_text(document(), encoding="utf-8")
    config = config_service.load(path)
    assert isinstance(config.params, LinDynParams)
    assert config.seed == 3
