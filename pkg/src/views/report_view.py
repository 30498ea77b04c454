from utils.print_utils import PrintUtils
from views.base_view import BaseView
from views.components.rich_components import RichComponents


class ReportView(BaseView):
    """Affichage de la synthèse d'un répertoire de résultats."""

    def display_summary(self, columns, rows, directory):
        self.header_title(f"Synthèse de {directory}", color="magenta")
        self.console.print(RichComponents.create_summary_table(columns, rows))
        PrintUtils(self.console).print_success(
            f"{len(rows)} run(s) agrégé(s) dans summary.csv et summary.txt"
        )
