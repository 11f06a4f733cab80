from pathlib import Path

import pytest

from core.settings import Settings, get_settings
from data.scene_loader import SceneConfigError, SceneLoader, load_scene
from domain.entities import Method, default_scene

ROOT = Path(__file__).resolve().parent.parent


def write_settings(tmp_path, content):
    path = tmp_path / "settings.yaml"
    path.write_text(content, encoding="utf-8")
    return path


def test_missing_settings_file_keeps_defaults(tmp_path):
    settings = Settings("absent.yaml", project_root=tmp_path)
    assert settings.search.sequence_length == 10
    assert settings.cito.segment_steps == 12
    assert settings.benchmark.methods == list(Method)
    assert settings.logs_dir == tmp_path.resolve() / "logs"
    assert settings.metadata["project_name"] == "dexplan"


def test_sections_override_defaults(tmp_path, monkeypatch):
    monkeypatch.delenv("DEXPLAN_LOG_LEVEL", raising=False)
    path = write_settings(tmp_path, """
logging:
  level: debug
search:
  sequence_length: 4
  unknown_key: 1
weights:
  pose: [1.0, 2.0, 3.0]
benchmark:
  methods: ["cito"]
  goals: 3
scene: "scenes/other.yaml"
""")
    settings = Settings(str(path), project_root=tmp_path)
    assert settings.search.sequence_length == 4
    assert settings.search.displacement_step == 0.02
    assert settings.weights.pose == (1.0, 2.0, 3.0)
    assert settings.benchmark.methods == [Method.CITO]
    assert settings.benchmark.goals == 3
    assert settings.log_level == "DEBUG"
    assert settings.scene_path == tmp_path.resolve() / "scenes" / "other.yaml"


def test_invalid_values_are_rejected(tmp_path):
    path = write_settings(tmp_path, "cito:\n  segment_steps: 1\n")
    with pytest.raises(ValueError):
        Settings(str(path), project_root=tmp_path)


def test_environment_overrides_log_level(tmp_path, monkeypatch):
    monkeypatch.setenv("DEXPLAN_LOG_LEVEL", "warning")
    path = write_settings(tmp_path, "logging:\n  level: INFO\n")
    assert Settings(str(path), project_root=tmp_path).log_level == "WARNING"


def test_get_settings_caches_per_file(tmp_path):
    path = write_settings(tmp_path, "search:\n  sequence_length: 5\n")
    first = get_settings(path)
    assert get_settings(path) is first
    assert first.search.sequence_length == 5


def test_repository_settings_file_is_valid():
    settings = Settings("config/settings.yaml", project_root=ROOT)
    assert settings.scene_path == ROOT / "config" / "scenes" / "default.yaml"
    assert settings.simulation.dt == pytest.approx(1e-3)
    assert settings.benchmark.goals == 60


def test_default_scene_file_matches_built_in_scene():
    assert load_scene(str(ROOT / "config" / "scenes" / "default.yaml")) == default_scene()


def test_scene_dict_round_trip():
    loader = SceneLoader()
    scene = default_scene(mass=0.08, friction_mu=0.5)
    assert loader.from_dict(loader.to_dict(scene)) == scene


def test_scene_partial_file_uses_defaults():
    loader = SceneLoader()
    scene = loader.from_dict(loader.parse_content("object:\n  mass: 0.2\ngravity: 1.62\n"))
    assert scene.mass == 0.2
    assert scene.gravity == 1.62
    assert scene.finger_bases == default_scene().finger_bases


def test_scene_errors():
    loader = SceneLoader()
    with pytest.raises(SceneConfigError):
        loader.parse_content("object: [unclosed\n")
    with pytest.raises(SceneConfigError):
        loader.parse_content("- just\n- a list\n")
    with pytest.raises(SceneConfigError):
        loader.from_dict({"fingers": [{"base": [0, 0], "links": [0.1, 0.1]}]})
    with pytest.raises(SceneConfigError):
        loader.from_dict({"object": {"mass": -1.0}})
    with pytest.raises(SceneConfigError):
        loader.from_dict({"joint_limits": [[-1.0, 1.0]] * 3})
    with pytest.raises(SceneConfigError):
        loader.load("does/not/exist.yaml")


@pytest.mark.parametrize("overrides", [
    {"friction_mu": 0.0},
    {"friction_mu": -0.3},
    {"corner_margin": 0.0},
    {"corner_margin": -0.01},
])
def test_scene_rejects_non_positive_friction_and_margin(overrides):
    with pytest.raises(ValueError):
        default_scene(**overrides)


def test_scene_file_rejects_zero_friction_and_margin():
    loader = SceneLoader()
    with pytest.raises(SceneConfigError):
        loader.from_dict({"object": {"friction_mu": 0.0}})
    with pytest.raises(SceneConfigError):
        loader.from_dict({"corner_margin": 0.0})
    assert default_scene(fingertip_radius=0.0).fingertip_radius == 0.0


def test_validate_structure_lists_problems():
    errors = SceneLoader().validate_structure({"fingers": [{"base": [0, 0]}], "start": {"contacts": [0.1]}})
    assert len(errors) == 2
