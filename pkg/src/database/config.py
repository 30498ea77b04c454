"""
Configuration de la base de données du registre des runs.

Le registre est une base SQLite `<output_dir>/geolab.db` qui indexe les
manifestes run_record.json. Aucune connexion n'est ouverte à l'import: l'engine
est créé pour un répertoire de sortie donné.
"""
from pathlib import Path

from sqlalchemy import create_engine
from sqlalchemy.orm import declarative_base, sessionmaker

REGISTRY_FILENAME = "geolab.db"

# Base est la classe dont héritent les tables du registre
Base = declarative_base()


def registry_url(output_dir):
    """URL SQLAlchemy du registre d'un répertoire de sortie."""
    return f"sqlite:///{Path(output_dir).resolve() / REGISTRY_FILENAME}"


def create_registry_engine(output_dir=None):
    """
    Crée l'engine du registre et s'assure que le schéma existe.

    Args:
        output_dir (str | Path, optional): Répertoire de sortie; sans répertoire,
            une base en mémoire est utilisée (tests)

    Returns:
        Engine: Engine SQLAlchemy prêt à l'emploi
    """
    url = "sqlite:///:memory:" if output_dir is None else registry_url(output_dir)
    engine = create_engine(url)
    Base.metadata.create_all(engine)
    return engine


def create_session_factory(engine):
    # Les changements ne sont validés que sur commit() explicite
    return sessionmaker(autocommit=False, autoflush=False, bind=engine)
