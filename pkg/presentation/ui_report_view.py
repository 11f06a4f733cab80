"""
Presentation Layer: UI Report View
Tableaux Rich pour les essais, résumés de campagne, exécutions et auto-tests
"""
from typing import Dict, Iterable, Sequence, Tuple

import pandas as pd
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from domain.entities import DERIVATIVE_ERROR, DerivativeReport, ExecutionReport, TrialRecord


class UIReportView:
    """
    Gestionnaire d'affichage des résultats avec Rich.
    """

    def __init__(self, console: Console = None):
        self.console = console or Console()

    def display_trial(self, record: TrialRecord) -> None:
        table = Table(show_header=False, box=None)
        table.add_column("Champ", style="dim")
        table.add_column("Valeur")
        for key, value in record.to_dict().items():
            table.add_row(key, f"{value:.6g}" if isinstance(value, float) else str(value))
        style = "green" if record.solver_status == "converged" else "yellow"
        self.console.print(Panel(table, title=f"[bold]{record.method}[/bold]", border_style=style))

    def display_summary(self, summary: pd.DataFrame, ratios: Dict[str, float]) -> None:
        table = Table(show_header=True, header_style="bold magenta")
        columns = ["method", "trials", "converged", "time_median", "time_mean", "time_iqr",
                   "objective_mean", "drop_rate", "mae_theta_mean"]
        for column in columns:
            table.add_column(column)
        for _, row in summary.iterrows():
            table.add_row(*[
                f"{row[c]:.4g}" if isinstance(row[c], float) else str(row[c]) for c in columns
            ])
        self.console.print(table)
        for method, ratio in ratios.items():
            self.console.print(f"[cyan][SUMMARY][/cyan] {method} / trajectotree mean time: {ratio:.2f}")

    def display_cost_ordering(self, ordering: pd.DataFrame) -> None:
        if ordering.empty:
            self.console.print("[cyan][SUMMARY][/cyan] cost ordering: no goal where trajectotree and cito both converged")
            return
        holds = int(ordering["holds"].astype(bool).sum())
        style = "green" if holds == len(ordering) else "red"
        self.console.print(
            f"[cyan][SUMMARY][/cyan] cost ordering trajectotree ≥ cito: [{style}]{holds}/{len(ordering)}[/{style}] goal(s)"
        )

    def display_execution(self, report: ExecutionReport) -> None:
        table = Table(show_header=True, header_style="bold magenta")
        for column in ("MAE x [m]", "MAE y [m]", "MAE θ [rad]", "dropped", "drop time [s]", "ticks"):
            table.add_column(column)
        table.add_row(
            f"{report.mae_x:.4g}", f"{report.mae_y:.4g}", f"{report.mae_theta:.4g}",
            "[red]yes[/red]" if report.dropped else "[green]no[/green]",
            "-" if not report.dropped else f"{report.drop_time:.3f}",
            str(report.times.size),
        )
        self.console.print(table)

    def display_derivatives(self, report: DerivativeReport, tol: float) -> None:
        table = Table(show_header=True, header_style="bold magenta", title="Dérivées vs différences finies")
        table.add_column("Bloc")
        table.add_column(f"Erreur {DERIVATIVE_ERROR}", justify="right")
        table.add_column("Ligne", justify="right")
        table.add_column("Colonne", justify="right")
        for block in report.blocks:
            style = "green" if block.error < tol else "red"
            table.add_row(block.block, f"[{style}]{block.error:.2e}[/{style}]", str(block.row), str(block.col))
        self.console.print(table)

    def display_checks(self, checks: Sequence[Tuple[str, bool, str]]) -> None:
        table = Table(show_header=True, header_style="bold magenta", title="Auto-tests")
        table.add_column("Test")
        table.add_column("Statut")
        table.add_column("Détail", style="dim")
        for name, ok, detail in checks:
            table.add_row(name, "[green]OK[/green]" if ok else "[red]ÉCHEC[/red]", detail)
        self.console.print(table)


# Instance globale de la vue
ui_report_view = UIReportView()
