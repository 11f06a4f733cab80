"""
Core File Manager
Lecture/écriture des fichiers de scènes, plans, traces et résultats
"""
from pathlib import Path
from typing import Iterable, List, Union

PathLike = Union[str, Path]


class FileManagerError(Exception):
    """Exception générique pour les erreurs de FileManager"""
    pass


class FileManager:
    """
    Accès fichiers de l'outil: crée les répertoires parents à l'écriture et
    convertit les erreurs système en FileManagerError.
    """

    def read_file(self, file_path: PathLike) -> str:
        """
        Lit le contenu d'un fichier texte.

        Raises:
            FileManagerError: Si le fichier est absent ou illisible
        """
        path = Path(file_path)
        if not path.exists():
            raise FileManagerError(f"File not found: {file_path}")
        try:
            return path.read_text(encoding="utf-8")
        except OSError as e:
            raise FileManagerError(f"Error reading file {file_path}: {e}") from e

    def write_file(self, file_path: PathLike, content: str, *, append: bool = False) -> Path:
        """
        Écrit (ou ajoute) du texte, en créant les répertoires manquants.

        Returns:
            Le chemin écrit
        """
        path = Path(file_path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "a" if append else "w", encoding="utf-8") as f:
                f.write(content)
        except OSError as e:
            raise FileManagerError(f"Error writing file {file_path}: {e}") from e
        return path

    def write_lines(self, file_path: PathLike, lines: Iterable[str]) -> Path:
        return self.write_file(file_path, "".join(f"{line}\n" for line in lines))

    def ensure_dir(self, directory: PathLike) -> Path:
        path = Path(directory)
        try:
            path.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise FileManagerError(f"Cannot create directory {directory}: {e}") from e
        return path

    def file_exists(self, file_path: PathLike) -> bool:
        return Path(file_path).exists()

    def list_files(self, directory: PathLike, pattern: str = "*") -> List[str]:
        """Fichiers d'un répertoire correspondant au motif, triés."""
        path = Path(directory)
        if not path.exists():
            return []
        return sorted(str(f) for f in path.glob(pattern) if f.is_file())


# Instance globale du gestionnaire de fichiers
file_manager = FileManager()
