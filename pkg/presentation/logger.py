"""
Presentation Layer: Logger
Gestion des journaux avec Loguru et Rich
"""
from datetime import datetime
from pathlib import Path
from typing import Optional

from loguru import logger as loguru_logger
from rich.console import Console
from rich.logging import RichHandler

from core.file_manager import file_manager
from core.settings import get_settings

LEVELS = {"TRACE", "DEBUG", "INFO", "SUCCESS", "WARNING", "ERROR", "CRITICAL"}


class Logger:
    """
    Journalisation console (Rich) et fichier de session Markdown.

    Le niveau console vient des paramètres (DEXPLAN_LOG_LEVEL prioritaire); le
    fichier de session reçoit tout à partir de DEBUG.
    """

    def __init__(self, session_name: Optional[str] = None, logs_dir: Optional[Path] = None):
        settings = get_settings()
        self.session_name = session_name or f"session_{datetime.now().strftime('%Y%m%d_%H%M%S')}"
        self.logs_dir = Path(logs_dir) if logs_dir else settings.logs_dir
        self.log_file = self.logs_dir / f"{self.session_name}.md"
        self.console = Console()
        self.log_level = self._normalize(settings.log_level)
        self.rotation_bytes = 2 * 1024 * 1024  # 2 Mo
        self.retention_count = 5
        self._configured = False

    @staticmethod
    def _normalize(level: str) -> str:
        normalized = str(level or "INFO").upper()
        return normalized if normalized in LEVELS else "INFO"

    def setup(self) -> None:
        """Installe les sinks loguru (console Rich + fichier de session)"""
        loguru_logger.remove()
        loguru_logger.add(
            RichHandler(console=self.console, rich_tracebacks=True, show_path=False),
            format="{message}",
            level=self.log_level,
        )
        loguru_logger.add(
            str(self.log_file),
            format="{time:HH:mm:ss} | {level} | {name} | {message}",
            level="DEBUG",
            rotation=self.rotation_bytes,
            retention=self.retention_count,
        )
        self._configured = True

    def set_level(self, level: str) -> None:
        """Met à jour le niveau minimum de log affiché dans la console."""
        if not level:
            return
        self.log_level = self._normalize(level)
        self.setup()

    def log_header(self, title: str) -> None:
        self._write_markdown(f"# {title}\n")
        self.console.print(f"\n[bold cyan]{title}[/bold cyan]")

    def log_trial_start(self, goal_angle: float, method: str) -> None:
        self._write_markdown(
            f"\n## Essai {method} (θ_goal = {goal_angle:+.4f} rad)\n\n"
            f"**Heure:** {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}\n\n"
        )
        self.console.print(f"[bold green][START][/bold green] {method} θ_goal={goal_angle:+.4f}")

    def log_trial_complete(self, record) -> None:
        summary = (
            f"status={record.solver_status} total={record.total_time:.2f}s "
            f"objective={record.objective:.4g} dropped={record.dropped}"
        )
        self._write_markdown(f"\n### [OK] Terminé\n\n{summary}\n\n")
        self.console.print(f"[bold green][OK][/bold green] {record.method}: {summary}")

    def log_trial_fail(self, goal_angle: float, method: str, error: str) -> None:
        self._write_markdown(f"\n### [ERROR] Échec\n\n```\n{error}\n```\n\n")
        self.console.print(f"[bold red][ERROR][/bold red] {method} θ_goal={goal_angle:+.4f}: {error}")

    def log_info(self, message: str) -> None:
        self._write_markdown(f"[INFO] {message}\n")
        self.console.print(f"[blue][INFO][/blue] {message}")

    def log_warning(self, message: str) -> None:
        self._write_markdown(f"[WARN] {message}\n")
        self.console.print(f"[yellow][WARN][/yellow] {message}")

    def log_error(self, message: str) -> None:
        self._write_markdown(f"[ERROR] Erreur: {message}\n")
        self.console.print(f"[red][ERROR][/red] Erreur: {message}")

    def _write_markdown(self, content: str) -> None:
        """Écrit dans le fichier Markdown de session"""
        if not self._configured:
            return
        try:
            file_manager.write_file(self.log_file, content, append=True)
        except Exception:
            pass  # Ignore les erreurs d'écriture

    def get_log_file_path(self) -> str:
        return str(self.log_file)


# Instance globale du logger
app_logger = Logger()
