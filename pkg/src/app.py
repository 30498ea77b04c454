from controllers.experiment_controller import ExperimentController
from controllers.report_controller import ReportController
from core.logging import configure_sentry
from database.config import create_registry_engine, create_session_factory
from services.complexity_geometry_service import ComplexityGeometryService
from services.config_service import ConfigService
from services.experiment_service import ExperimentService
from services.lddmm_service import LddmmService
from services.linear_net_service import LinearNetService
from services.registry_service import RegistryService
from views.report_view import ReportView
from views.run_view import RunView


def open_registry(output_dir):
    """Ouvre le registre SQLite d'un répertoire de sortie (créé au besoin)."""
    engine = create_registry_engine(output_dir)
    return RegistryService(create_session_factory(engine)())


class GeoLab:
    """
    Classe principale du laboratoire GeoLab.

    Elle instancie les services de calcul, les vues et les contrôleurs, et
    expose les deux commandes de la CLI: run et report.
    """

    VERSION = "1.0.0"

    def __init__(self, console=None, registry_factory=open_registry, sentry=True):
        """
        Args:
            console (rich.console.Console, optional): Console des vues
            registry_factory (callable): output_dir -> RegistryService
            sentry (bool): Initialise Sentry (désactivé dans les tests)
        """
        if sentry:
            configure_sentry()

        # Services de calcul, sans état partagé entre runs
        self.config_service = ConfigService()
        self.linear_service = LinearNetService()
        self.lddmm_service = LddmmService()
        self.geometry_service = ComplexityGeometryService()
        self.experiment_service = ExperimentService(self.linear_service)

        self.run_view = RunView(console)
        self.report_view = ReportView(console)

        self.experiment_controller = ExperimentController(
            self.config_service,
            self.linear_service,
            self.lddmm_service,
            self.geometry_service,
            self.experiment_service,
            registry_factory,
            self.run_view,
            self.VERSION,
        )
        self.report_controller = ReportController(registry_factory, self.report_view)

    def run(self, config_path, seed=None, output_dir=None):
        return self.experiment_controller.run_file(config_path, seed, output_dir)

    def report(self, directory):
        return self.report_controller.report(directory)
