"""
Core Settings
Configuration globale de l'outil (planificateur, CITO, solveur, simulateur, banc d'essai)
"""
import os
from dataclasses import fields, replace
from pathlib import Path
from typing import Any, Dict, Optional

import yaml
from loguru import logger

from domain.entities import (
    BenchmarkConfig,
    CitoOptions,
    ControllerGains,
    CostWeights,
    SearchParams,
    SimOptions,
    SolverOptions,
)


class Settings:
    """Paramètres globaux de l'application"""

    # section YAML → attribut
    SECTIONS = {
        "search": "search",
        "cito": "cito",
        "weights": "weights",
        "solver": "solver",
        "simulation": "simulation",
        "controller": "controller",
        "benchmark": "benchmark",
    }

    def __init__(
        self,
        config_path: str = "config/settings.yaml",
        *,
        project_root: Optional[Path] = None,
    ):
        self.project_root = (project_root or Path.cwd()).resolve()
        path = Path(config_path)
        self.config_path = path if path.is_absolute() else self.project_root / path
        self.logs_dir = self.project_root / "logs"
        self.config_dir = self.project_root / "config"
        self.scene_path = self.config_dir / "scenes" / "default.yaml"

        self.search = SearchParams()
        self.cito = CitoOptions()
        self.weights = CostWeights()
        self.solver = SolverOptions()
        self.simulation = SimOptions()
        self.controller = ControllerGains()
        self.benchmark = BenchmarkConfig()
        self.log_level: str = "INFO"

        # Metadata
        self.metadata = {
            "version": "1.0.0",
            "project_name": "dexplan",
        }

        self._load_config()
        self.log_level = os.environ.get("DEXPLAN_LOG_LEVEL", self.log_level).upper()

    def _load_config(self) -> None:
        """Charge la configuration depuis le fichier YAML; les clés absentes gardent leurs valeurs par défaut"""
        if not self.config_path.exists():
            return
        try:
            with open(self.config_path, "r", encoding="utf-8") as f:
                config = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            logger.warning(f"Ignoring unreadable settings file {self.config_path}: {e}")
            return

        for section, attribute in self.SECTIONS.items():
            if section in config:
                setattr(self, attribute, self._merge(getattr(self, attribute), config[section], section))
        if "logging" in config:
            self.log_level = str(config["logging"].get("level", self.log_level))
        if "scene" in config:
            scene = Path(config["scene"])
            self.scene_path = scene if scene.is_absolute() else self.project_root / scene

    @staticmethod
    def _merge(current: Any, values: Dict[str, Any], section: str) -> Any:
        known = {f.name for f in fields(current)}
        unknown = set(values or {}) - known
        if unknown:
            logger.warning(f"Unknown keys in settings section '{section}': {sorted(unknown)}")
        updates = {k: (tuple(v) if isinstance(v, list) and k != "methods" else v)
                   for k, v in (values or {}).items() if k in known}
        return replace(current, **updates)

    def ensure_directories(self) -> None:
        """Crée les répertoires nécessaires s'ils n'existent pas"""
        self.logs_dir.mkdir(parents=True, exist_ok=True)
        self.config_dir.mkdir(parents=True, exist_ok=True)


_SETTINGS_CACHE: Dict[str, Settings] = {}


def get_settings(config_path: Path | str | None = None) -> Settings:
    """Fabrique paresseuse de Settings, une instance par fichier de configuration."""

    key = str(Path(config_path).resolve()) if config_path else "__default__"
    if key in _SETTINGS_CACHE:
        return _SETTINGS_CACHE[key]

    if config_path:
        path = Path(config_path).resolve()
        settings = Settings(str(path), project_root=Path.cwd())
    else:
        settings = Settings(project_root=Path.cwd())
    _SETTINGS_CACHE[key] = settings
    return settings
