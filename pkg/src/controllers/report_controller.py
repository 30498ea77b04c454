import io
from pathlib import Path

from rich.console import Console

from core.exceptions import ConfigError
from utils.csv_utils import write_csv
from utils.logging_utils import log_success
from views.components.rich_components import RichComponents, format_metric

SUMMARY_COLUMNS = ["kind", "config_hash", "run_id", "seed", "seed_source", "status", "tool_version", "metrics"]
SUMMARY_WIDTH = 200


class ReportController:
    """
    Contrôleur du rapport: synthèse de tous les runs d'un répertoire de sortie.

    Le registre est resynchronisé depuis les manifestes avant chaque rapport,
    si bien que le rapport est idempotent et fonctionne sur un répertoire copié.
    """

    def __init__(self, registry_factory, report_view):
        self.registry_factory = registry_factory
        self.view = report_view

    def summary_rows(self, records):
        """Une ligne par run; les métriques sont sérialisées en JSON trié."""
        return [
            {
                "kind": record.kind,
                "config_hash": record.config_hash,
                "run_id": record.id,
                "seed": record.seed,
                "seed_source": record.seed_source,
                "status": record.status,
                "tool_version": record.tool_version,
                "metrics": format_metric(record.metrics_dict),
            }
            for record in records
        ]

    def render_text(self, rows):
        """Rendu texte brut (sans couleurs) du tableau de synthèse."""
        console = Console(file=io.StringIO(), width=SUMMARY_WIDTH, color_system=None, record=True)
        console.print(RichComponents.create_summary_table(SUMMARY_COLUMNS, rows))
        return console.export_text()

    def report(self, directory):
        """
        Agrège les runs d'un répertoire dans summary.csv et summary.txt.

        Args:
            directory (str | Path): Répertoire de sortie

        Returns:
            list[dict]: Lignes de la synthèse, groupées par type puis triées par hash

        Raises:
            ConfigError: Si le répertoire n'existe pas ou ne contient aucun run
        """
        directory = Path(directory)
        if not directory.is_dir():
            raise ConfigError(f"Répertoire introuvable: {directory}", "directory")

        registry = self.registry_factory(directory)
        try:
            if registry.sync(directory) == 0:
                raise ConfigError(f"Aucun run_record.json trouvé dans {directory}", "directory")
            rows = self.summary_rows(registry.get_all_runs())
        finally:
            registry.close()

        write_csv(directory / "summary.csv", SUMMARY_COLUMNS, rows)
        (directory / "summary.txt").write_text(self.render_text(rows), encoding="utf-8")
        self.view.display_summary(SUMMARY_COLUMNS, rows, directory)

        log_success(action="report", message=f"Rapport de {len(rows)} run(s)", directory=str(directory))
        return rows
