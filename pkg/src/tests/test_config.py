"""
Tests for experiment configs, validation errors and presets.
"""

import json
import os

import pytest

from src.config.config import ExperimentConfig, list_presets, load_config, load_preset
from src.models.errors import ConfigError


def write_json_file(path, data) -> str:
    path.write_text(json.dumps(data))
    return str(path)


class TestDefaults:
    def test_defaults_fill_missing_fields(self, sa_config_factory):
        data = sa_config_factory()
        del data["block_size"]
        config = ExperimentConfig(data=data)
        assert config.get_block_size() == 16
        assert config.get_burn_in_fraction() == 0.5
        assert config.get_beta() == 0.5
        assert config.get_coupling()["variant"] == "shared-noise"
        assert config.get_trajectory_stride() is None

    def test_coupling_section_is_merged(self, sa_config_factory):
        config = ExperimentConfig(data=sa_config_factory(kind="coupling", coupling={"k": 3}))
        assert config.get_coupling()["k"] == 3
        assert config.get_coupling()["record_stride"] == 1

    def test_getters(self, sa_config_factory):
        config = ExperimentConfig(data=sa_config_factory())
        assert config.get_kind() == "rr-compare"
        assert config.get_alphas() == [0.1, 0.2, 0.4]
        assert config.get_steps() == 2000
        assert config.get_replicas() == 8
        assert config.get_seed() == 7
        assert config.get_threads() == 1


class TestValidation:
    @pytest.mark.parametrize("changes, field", [
        ({"kind": "sweep"}, "kind"),
        ({"alphas": []}, "alphas"),
        ({"alphas": [0.1, 0.0]}, "alphas[1]"),
        ({"alphas": [0.1, 0.6]}, "alphas[1]"),
        ({"steps": 0}, "steps"),
        ({"steps": 10.5}, "steps"),
        ({"replicas": 1}, "replicas"),
        ({"burn_in_fraction": 1.0}, "burn_in_fraction"),
        ({"beta": 0.0}, "beta"),
        ({"seed": -1}, "seed"),
        ({"threads": 0}, "threads"),
        ({"output_dir": ""}, "output_dir"),
        ({"colour": "blue"}, "colour"),
        ({"coupling": {"variant": "maximal"}}, "coupling.variant"),
        ({"coupling": {"k": 0}}, "coupling.k"),
        ({"coupling": {"stride": 2}}, "coupling.stride"),
        ({"trajectory_stride": 0}, "trajectory_stride"),
        ({"trajectory_stride": True}, "trajectory_stride"),
    ])
    def test_field_errors(self, sa_config_factory, changes, field):
        with pytest.raises(ConfigError) as info:
            ExperimentConfig(data=sa_config_factory(**changes))
        assert info.value.field == field
        assert field in str(info.value)

    def test_bias_sweep_allows_large_stepsizes(self, sa_config_factory):
        config = ExperimentConfig(data=sa_config_factory(kind="bias-sweep", alphas=[0.6, 1.0]))
        assert config.get_alphas() == [0.6, 1.0]

    def test_missing_dynamic(self, sa_config_factory):
        with pytest.raises(ConfigError) as info:
            ExperimentConfig(data=sa_config_factory(dynamic=None))
        assert info.value.field == "dynamic"

    def test_dynamic_type_must_fit_kind(self, sa_config_factory):
        with pytest.raises(ConfigError) as info:
            ExperimentConfig(data=sa_config_factory(kind="q-experiment"))
        assert info.value.field == "dynamic.type"

    def test_q_dynamic_needs_mdp(self, sa_config_factory):
        with pytest.raises(ConfigError) as info:
            ExperimentConfig(data=sa_config_factory(kind="q-experiment", dynamic={"type": "q"}))
        assert info.value.field == "dynamic.mdp"


class TestFiles:
    def test_syntax_error_reports_line(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{\n  "kind": "bias-sweep",\n  "steps": ,\n}\n')
        with pytest.raises(ConfigError) as info:
            ExperimentConfig(str(path))
        assert info.value.line == 3

    def test_top_level_must_be_object(self, tmp_path):
        path = tmp_path / "list.json"
        path.write_text("[1, 2]\n")
        with pytest.raises(ConfigError):
            ExperimentConfig(str(path))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            ExperimentConfig(str(tmp_path / "absent.json"))

    def test_save_and_reload(self, tmp_path, sa_config_factory):
        config = ExperimentConfig(data=sa_config_factory())
        path = str(tmp_path / "saved.json")
        config.save_config(path)
        assert ExperimentConfig(path).to_dict() == config.to_dict()

    def test_manifest_is_unwrapped(self, tmp_path, sa_config_factory):
        config = ExperimentConfig(data=sa_config_factory())
        path = write_json_file(tmp_path / "manifest.json",
                               {"version": "1.0.0", "seed": 7, "config": config.to_dict(), "outputs": {}})
        assert ExperimentConfig(path).to_dict() == config.to_dict()

    def test_relative_mdp_file_resolved_against_config(self, tmp_path, fixture_path):
        with open(fixture_path("mdp_type_b.txt"), encoding="utf-8") as f:
            (tmp_path / "model.txt").write_text(f.read())
        path = write_json_file(tmp_path / "q.json", {
            "kind": "q-experiment",
            "dynamic": {"type": "q", "mdp": {"file": "model.txt"}},
            "alphas": [0.1],
        })
        config = ExperimentConfig(path)
        assert config.get_dynamic()["mdp"]["file"] == os.path.normpath(str(tmp_path / "model.txt"))


class TestOverrides:
    def test_override_and_revalidate(self, sa_config_factory, tmp_path):
        config = ExperimentConfig(data=sa_config_factory())
        config.override(seed=11, output_dir=str(tmp_path / "other"), threads=4)
        assert config.get_seed() == 11
        assert config.get_threads() == 4
        assert config.get_output_dir() == str(tmp_path / "other")

    def test_invalid_override(self, sa_config_factory):
        config = ExperimentConfig(data=sa_config_factory())
        with pytest.raises(ConfigError) as info:
            config.override(threads=0)
        assert info.value.field == "threads"

    def test_to_dict_is_a_copy(self, sa_config_factory):
        config = ExperimentConfig(data=sa_config_factory())
        config.to_dict()["alphas"].append(0.3)
        assert config.get_alphas() == [0.1, 0.2, 0.4]


class TestPresets:
    def test_shipped_presets(self):
        assert {"fig5a", "fig5b", "fig5c", "ar1", "coupling-ratio", "coupling-shared",
                "smooth-baseline", "w2-convergence", "q-type-a-file"} <= set(list_presets())

    @pytest.mark.parametrize("name", list_presets())
    def test_every_preset_validates(self, name):
        assert load_preset(name).get_alphas()

    def test_preset_mdp_file_is_absolute(self, fixture_path):
        config = load_preset("q-type-a-file")
        assert config.get_dynamic()["mdp"]["file"] == os.path.normpath(fixture_path("mdp_type_a.txt"))

    @pytest.mark.parametrize("name, type_a", [("fig5b", True), ("fig5c", False)])
    def test_figure_presets_share_wide_gap_mdp(self, fixture_path, name, type_a):
        mdp = load_preset(name).get_dynamic()["mdp"]
        assert mdp["file"] == os.path.normpath(fixture_path("mdp_wide_gaps.txt"))
        assert mdp["type_a"] is type_a

    def test_unknown_preset(self):
        with pytest.raises(ConfigError) as info:
            load_preset("fig9")
        assert "fig5a" in str(info.value)

    def test_preset_takes_precedence(self, tmp_path):
        config = load_config(str(tmp_path / "absent.json"), preset="ar1")
        assert config.get_kind() == "bias-sweep"

    def test_json_round_trip_of_preset(self, tmp_path):
        config = load_preset("fig5a")
        path = str(tmp_path / "fig5a.json")
        config.save_config(path)
        with open(path, encoding="utf-8") as f:
            assert json.load(f)["alphas"] == [0.05, 0.1, 0.2, 0.4]
