from rich.console import Console

from views.components.rich_components import RichComponents


class BaseView:
    """Vue de base: console Rich partagée et titre encadré."""

    def __init__(self, console=None):
        self.console = console or Console()

    def header_title(self, title_text, color="green"):
        """
        Crée et affiche un titre dans un tableau Rich formaté.

        Args:
            title_text (str): Le texte du titre à afficher
            color (str, optional): La couleur du titre. Défaut à "green"

        Returns:
            Table: Le tableau Rich créé
        """
        title_table = RichComponents.create_title_table(title_text, style=f"bold {color}")
        self.console.print(title_table)
        return title_table
