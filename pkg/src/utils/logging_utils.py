"""
Utilitaires de journalisation pour simplifier l'utilisation de Sentry dans le laboratoire.
"""
from core.logging import capture_exception as sentry_capture_exception
from core.logging import capture_message as sentry_capture_message


def _clean(extra_data):
    """Convertit les scalaires numpy en types Python pour la sérialisation Sentry."""
    cleaned = {}
    for key, value in extra_data.items():
        if hasattr(value, "item") and getattr(value, "ndim", 1) == 0:
            value = value.item()
        cleaned[key] = value
    return cleaned


def log_success(action, message, **extra_data):
    """
    Journalise un succès avec Sentry.

    Args:
        action (str): Type d'action (register, complexity_distance, run, etc.)
        message (str): Message descriptif
        **extra_data: Données supplémentaires à logger
    """
    extra = _clean(extra_data)
    extra["action"] = action
    extra["status"] = "success"

    sentry_capture_message(message=message, level="info", extra=extra)


def log_warning(action, message, **extra_data):
    """
    Journalise une situation anormale mais non fatale (flot non difféomorphe,
    recherche linéaire épuisée, ajustement dégénéré...).

    Args:
        action (str): Type d'action concernée
        message (str): Message descriptif
        **extra_data: Données supplémentaires à logger
    """
    extra = _clean(extra_data)
    extra["action"] = action
    extra["status"] = "warning"

    sentry_capture_message(message=message, level="warning", extra=extra)


def log_error(action, exception, **extra_data):
    """
    Journalise une erreur avec Sentry.

    Args:
        action (str): Type d'action lors de laquelle l'erreur s'est produite
        exception (Exception): L'exception à logger
        **extra_data: Données supplémentaires à logger
    """
    extra = _clean(extra_data)
    extra["action"] = action
    extra["status"] = "error"
    extra["error_type"] = type(exception).__name__

    # Logger d'abord les détails comme un message
    sentry_capture_message(
        message=f"Erreur pendant {action}: {str(exception)}",
        level="error",
        extra=extra,
    )

    # Puis capturer l'exception complète avec la stack trace
    sentry_capture_exception(exception)
