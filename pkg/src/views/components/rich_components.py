import json

from rich.table import Table, box

from utils.csv_utils import format_value


def format_metric(value):
    """Valeur de métrique lisible (réels à 6 chiffres significatifs)."""
    if isinstance(value, float):
        return f"{value:.6g}"
    if isinstance(value, (dict, list)):
        return json.dumps(value, sort_keys=True)
    return format_value(value) or "-"


class RichComponents:
    """
    Composants d'affichage réutilisables basés sur la bibliothèque Rich.
    """

    @staticmethod
    def create_title_table(title_text, style="bold magenta"):
        """
        Crée un tableau pour afficher un titre encadré.

        Args:
            title_text (str): Le texte du titre à afficher
            style (str): Le style Rich à appliquer au titre

        Returns:
            Table: Un tableau Rich contenant le titre formaté
        """
        title_table = Table(
            show_header=False,
            show_footer=False,
            box=box.ROUNDED,
            style=style,
            padding=(0, 1),
            expand=False,
            border_style="magenta",
        )
        title_table.add_column()
        title_table.add_row(f"[{style}]{title_text}[/{style}]")
        return title_table

    @staticmethod
    def create_metrics_table(metrics):
        """
        Tableau clé/valeur des métriques d'un run (clés triées).

        Args:
            metrics (dict): Métriques du run

        Returns:
            Table: Le tableau Rich
        """
        metrics_table = Table(
            show_header=True,
            header_style="bold cyan",
            box=box.SIMPLE,
            expand=False,
            border_style="blue"
        )
        metrics_table.add_column("Métrique", style="bright_white")
        metrics_table.add_column("Valeur", style="bright_white", justify="right")
        for key in sorted(metrics):
            metrics_table.add_row(key, format_metric(metrics[key]))
        return metrics_table

    @staticmethod
    def create_files_table(files):
        files_table = Table(show_header=True, header_style="bold cyan", box=box.SIMPLE, expand=False)
        files_table.add_column("Fichiers produits", style="green")
        for name in files:
            files_table.add_row(name)
        return files_table

    @staticmethod
    def create_summary_table(columns, rows):
        """
        Tableau de synthèse du rapport.

        Args:
            columns (list[str]): En-têtes
            rows (list[dict]): Lignes déjà triées

        Returns:
            Table: Le tableau Rich
        """
        summary_table = Table(
            show_header=True,
            header_style="bold cyan",
            box=box.SIMPLE,
            expand=False,
            border_style="blue"
        )
        for column in columns:
            summary_table.add_column(column, style="dim" if column == "config_hash" else "bright_white")
        for row in rows:
            summary_table.add_row(*[format_metric(row[column]) for column in columns])
        return summary_table
