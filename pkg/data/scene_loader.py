"""
Data Layer: Scene Loader
Lecture et validation des fichiers de scène YAML
"""
from typing import Any, Dict, List

import yaml
from loguru import logger

from core.file_manager import FileManagerError, file_manager
from domain.entities import N_FINGERS, N_JOINTS, ObjectPose, SceneConfig


class SceneConfigError(Exception):
    """Exception pour les fichiers de scène invalides"""
    pass


class SceneLoader:
    """
    Parseur des fichiers de scène.

    Toutes les clés sont optionnelles: les valeurs absentes reprennent celles de
    SceneConfig. Les clés inconnues sont signalées puis ignorées.
    """

    TOP_LEVEL = {"object", "gravity", "fingers", "joint_limits", "fingertip_radius",
                 "corner_margin", "hand", "start"}

    def parse_file(self, file_path: str) -> Dict[str, Any]:
        try:
            content = file_manager.read_file(file_path)
        except FileManagerError as e:
            raise SceneConfigError(f"Failed to read scene file: {e}") from e
        return self.parse_content(content)

    def parse_content(self, content: str) -> Dict[str, Any]:
        try:
            data = yaml.safe_load(content) or {}
        except yaml.YAMLError as e:
            raise SceneConfigError(f"Invalid YAML syntax: {e}") from e
        if not isinstance(data, dict):
            raise SceneConfigError("scene file must be a mapping")
        return data

    def load(self, file_path: str) -> SceneConfig:
        """
        Construit une SceneConfig à partir d'un fichier.

        Raises:
            SceneConfigError: Fichier illisible ou valeurs invalides
        """
        scene = self.from_dict(self.parse_file(file_path))
        logger.debug(f"Scene loaded from {file_path}")
        return scene

    def from_dict(self, data: Dict[str, Any]) -> SceneConfig:
        unknown = set(data) - self.TOP_LEVEL
        if unknown:
            logger.warning(f"Ignoring unknown scene keys: {sorted(unknown)}")
        try:
            return SceneConfig(**self._build_kwargs(data))
        except (TypeError, ValueError, KeyError) as e:
            raise SceneConfigError(f"Invalid scene: {e}") from e

    def _build_kwargs(self, data: Dict[str, Any]) -> Dict[str, Any]:
        kwargs: Dict[str, Any] = {}
        obj = data.get("object", {}) or {}
        for key, target in (("half_extents", "half_extents"), ("mass", "mass"), ("friction_mu", "friction_mu")):
            if key in obj:
                kwargs[target] = obj[key]
        for key in ("gravity", "fingertip_radius", "corner_margin"):
            if key in data:
                kwargs[key] = float(data[key])

        fingers = data.get("fingers")
        if fingers is not None:
            if len(fingers) != N_FINGERS:
                raise SceneConfigError(f"scene must define exactly {N_FINGERS} fingers, got {len(fingers)}")
            kwargs["finger_bases"] = [tuple(f["base"]) for f in fingers]
            kwargs["link_lengths"] = [tuple(f["links"]) for f in fingers]
            kwargs["elbow_branches"] = [int(f.get("elbow_branch", 1)) for f in fingers]

        limits = data.get("joint_limits")
        if limits is not None:
            kwargs["joint_limits"] = self._joint_limits(limits)

        hand = data.get("hand", {}) or {}
        for key in ("joint_inertia", "link_masses", "joint_damping"):
            if key in hand:
                kwargs[key] = hand[key]

        start = data.get("start", {}) or {}
        if "pose" in start:
            kwargs["start_pose"] = ObjectPose.from_array(start["pose"])
        if "contacts" in start:
            kwargs["start_contacts"] = tuple(start["contacts"])
        return kwargs

    @staticmethod
    def _joint_limits(limits: List[Any]) -> List[tuple]:
        if len(limits) == 2 and all(isinstance(v, (int, float)) for v in limits):
            return [tuple(float(v) for v in limits)] * N_JOINTS
        if len(limits) != N_JOINTS:
            raise SceneConfigError(f"joint_limits must hold one pair or {N_JOINTS} pairs")
        return [tuple(float(v) for v in pair) for pair in limits]

    def validate_structure(self, data: Dict[str, Any]) -> List[str]:
        """Liste des erreurs de structure (vide si valide)."""
        errors = []
        fingers = data.get("fingers", [])
        if not isinstance(fingers, list):
            errors.append("'fingers' must be a list")
        else:
            for i, finger in enumerate(fingers):
                if not isinstance(finger, dict) or "base" not in finger or "links" not in finger:
                    errors.append(f"finger {i} must define 'base' and 'links'")
        start = data.get("start", {})
        if isinstance(start, dict) and "contacts" in start and len(start["contacts"]) != N_FINGERS:
            errors.append(f"'start.contacts' must hold {N_FINGERS} arc lengths")
        return errors

    def to_dict(self, scene: SceneConfig) -> Dict[str, Any]:
        """Représentation YAML inverse de from_dict."""
        return {
            "object": {"half_extents": list(scene.half_extents), "mass": scene.mass,
                       "friction_mu": scene.friction_mu},
            "gravity": scene.gravity,
            "fingers": [
                {"base": list(b), "links": list(l), "elbow_branch": br}
                for b, l, br in zip(scene.finger_bases, scene.link_lengths, scene.elbow_branches)
            ],
            "joint_limits": [list(pair) for pair in scene.joint_limits],
            "fingertip_radius": scene.fingertip_radius,
            "corner_margin": scene.corner_margin,
            "hand": {"joint_inertia": scene.joint_inertia, "link_masses": list(scene.link_masses),
                     "joint_damping": scene.joint_damping},
            "start": {"pose": list(scene.start_pose.as_array()), "contacts": list(scene.start_contacts)},
        }


def load_scene(file_path: str) -> SceneConfig:
    return scene_loader.load(file_path)


# Instance globale du chargeur de scènes
scene_loader = SceneLoader()
