from utils.date_utils import format_datetime, format_duration, from_iso
from views.base_view import BaseView
from views.components.rich_components import RichComponents


class RunView(BaseView):
    """Affichage du résultat d'un run."""

    def display_run(self, manifest):
        """
        Affiche l'identifiant, les métriques et les fichiers d'un run terminé.

        Args:
            manifest (dict): Contenu de run_record.json
        """
        started = from_iso(manifest["started_at"])
        finished = from_iso(manifest.get("finished_at"))

        self.header_title(f"Run {manifest['run_id']} ({manifest['kind']})")
        self.console.print(
            f"Graine {manifest['seed']} (source: {manifest['seed_source']}), "
            f"version {manifest['tool_version']}",
            style="cyan",
        )
        self.console.print(
            f"Démarré le {format_datetime(started)} UTC, durée {format_duration(started, finished)}",
            style="cyan",
        )
        self.console.print(RichComponents.create_metrics_table(manifest["metrics"]))
        self.console.print(RichComponents.create_files_table(manifest["files"]))
