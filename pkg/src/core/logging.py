import os

import sentry_sdk
from sentry_sdk.integrations.sqlalchemy import SqlalchemyIntegration

from utils.print_utils import PrintUtils


def configure_sentry():
    """
    Configure Sentry pour la journalisation des erreurs et des événements de calcul.

    Sans SENTRY_DSN, un avertissement est affiché et les captures deviennent
    sans effet (le SDK n'est pas initialisé).

    Returns:
        bool: True si Sentry a été initialisé
    """
    sentry_dsn = os.getenv("SENTRY_DSN")
    environment = os.getenv("ENVIRONMENT", "development")

    if not sentry_dsn:
        PrintUtils().print_warning(
            "Avertissement: SENTRY_DSN n'est pas défini. La journalisation distante est désactivée."
        )
        return False

    sentry_sdk.init(
        dsn=sentry_dsn,
        # Aucune donnée personnelle: les événements ne contiennent que des métriques de calcul
        send_default_pii=False,
        environment=environment,
        traces_sample_rate=float(os.getenv("SENTRY_TRACES_SAMPLE_RATE", "0.0")),
        # Le registre des runs passe par SQLAlchemy
        integrations=[SqlalchemyIntegration()],
    )
    return True


def capture_exception(exception):
    """Envoie une exception à Sentry avec sa stack trace."""
    sentry_sdk.capture_exception(exception)


def capture_message(message, level="info", extra=None):
    """
    Envoie un message à Sentry avec un niveau et des données supplémentaires.

    Args:
        message (str): Le message
        level (str): info, warning ou error
        extra (dict, optional): Données attachées à l'événement
    """
    with sentry_sdk.new_scope() as scope:
        for key, value in (extra or {}).items():
            scope.set_extra(key, value)
        scope.set_level(level)
        sentry_sdk.capture_message(message)


def set_run_context(run_id, kind, seed):
    """Étiquette les événements suivants avec l'identifiant du run en cours."""
    sentry_sdk.set_tag("run_id", run_id)
    sentry_sdk.set_tag("experiment_kind", kind)
    sentry_sdk.set_tag("seed", seed)


def clear_run_context():
    """Retire les étiquettes du run terminé."""
    for key in ("run_id", "experiment_kind", "seed"):
        sentry_sdk.set_tag(key, None)
