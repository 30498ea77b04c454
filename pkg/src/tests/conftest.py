import csv
import json

import numpy as np
import pytest
from click.testing import CliRunner
from rich.console import Console
from sqlalchemy import create_engine
from sqlalchemy.orm import sessionmaker

from app import GeoLab, open_registry
from database.config import Base
from services.complexity_geometry_service import ComplexityGeometryService
from services.config_service import ConfigService
from services.experiment_service import ExperimentService
from services.lddmm_service import LddmmService
from services.linear_net_service import LinearNetService
from services.registry_service import RegistryService


@pytest.fixture
def in_memory_db():
    """Crée une base de données SQLite en mémoire pour les tests."""
    engine = create_engine("sqlite:///:memory:")
    Base.metadata.create_all(engine)
    Session = sessionmaker(bind=engine)
    return Session()


@pytest.fixture
def registry_service(in_memory_db):
    """Registre des runs sur une base en mémoire."""
    return RegistryService(in_memory_db)


@pytest.fixture
def rng():
    """Générateur seedé: chaque test voit les mêmes tirages."""
    return np.random.default_rng(1234)


@pytest.fixture
def linear_service():
    return LinearNetService()


@pytest.fixture
def lddmm_service():
    return LddmmService()


@pytest.fixture
def geometry_service():
    return ComplexityGeometryService()


@pytest.fixture
def experiment_service(linear_service):
    return ExperimentService(linear_service)


@pytest.fixture
def config_service():
    return ConfigService()


@pytest.fixture
def output_dir(tmp_path):
    """Répertoire de sortie temporaire."""
    directory = tmp_path / "results"
    directory.mkdir()
    return directory


@pytest.fixture
def geolab_app():
    """Application sans Sentry, affichage dans un tampon."""
    return GeoLab(console=Console(record=True, width=160), registry_factory=open_registry, sentry=False)


@pytest.fixture
def cli_runner():
    return CliRunner()


@pytest.fixture
def write_config(tmp_path):
    """Écrit une configuration JSON et renvoie son chemin."""
    def write(document, name="config.json"):
        path = tmp_path / name
        path.write_text(json.dumps(document), encoding="utf-8")
        return path

    return write


@pytest.fixture
def read_table():
    """Relit une table CSV en liste de dictionnaires de chaînes."""
    def read(path):
        with open(path, newline="", encoding="utf-8") as handle:
            return list(csv.DictReader(handle))

    return read
