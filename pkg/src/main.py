import sys
from pathlib import Path

import click
from dotenv import load_dotenv

from app import GeoLab
from core.exceptions import ConfigError, DomainError, GeoLabError, NumericalFailure
from utils.print_utils import PrintUtils

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

load_dotenv(Path(__file__).parent / ".env")


def exit_code(error):
    """Code de sortie associé à une erreur du laboratoire."""
    if isinstance(error, ConfigError):
        return EXIT_CONFIG
    if isinstance(error, (NumericalFailure, DomainError)):
        return EXIT_NUMERICAL
    return 1


def execute(action, *args):
    print_utils = PrintUtils()
    try:
        action(*args)
    except GeoLabError as e:
        print_utils.print_error(f"Erreur: {e}")
        sys.exit(exit_code(e))
    sys.exit(EXIT_OK)


@click.group()
@click.version_option(version=GeoLab.VERSION, prog_name="geolab")
@click.pass_context
def geolab(ctx):
    """Laboratoire numérique: réseaux linéaires, LDDMM et géométrie de complexité."""
    ctx.obj = ctx.obj or GeoLab()


@geolab.command()
@click.argument("config", type=click.Path(dir_okay=False))
@click.option("--seed", type=int, default=None, help="Graine (prioritaire sur GEOLAB_SEED et le fichier).")
@click.option("--out", "output_dir", type=click.Path(file_okay=False), default=None,
              help="Répertoire de sortie (remplace output_dir du fichier).")
@click.pass_obj
def run(app, config, seed, output_dir):
    """Exécute l'expérience décrite par CONFIG (fichier JSON)."""
    execute(app.run, config, seed, output_dir)


@geolab.command()
@click.argument("directory", type=click.Path(file_okay=False))
@click.pass_obj
def report(app, directory):
    """Agrège les runs de DIRECTORY dans summary.csv et summary.txt."""
    execute(app.report, directory)


if __name__ == "__main__":
    geolab()
