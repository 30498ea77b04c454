"""Utilitaires pour la manipulation et le formatage des dates des runs."""
from datetime import datetime, timezone

UTC = timezone.utc


def utc_now():
    """Date et heure courantes en UTC (sans microsecondes)."""
    return datetime.now(UTC).replace(microsecond=0)


def to_iso(datetime_obj):
    """
    Convertit une date en chaîne ISO 8601 (ex: 2025-04-01T12:00:00+00:00).

    Returns:
        str: La date formatée ou None si datetime_obj est None
    """
    if not datetime_obj:
        return None
    return datetime_obj.isoformat()


def from_iso(text):
    """Relit une date ISO 8601 produite par to_iso (None accepté)."""
    if not text:
        return None
    return datetime.fromisoformat(text)


def format_datetime(datetime_obj, format_str="%d/%m/%Y %H:%M"):
    """
    Formate une date pour l'affichage console.

    Args:
        datetime_obj: L'objet datetime à formater
        format_str (str): Format de date à utiliser (par défaut: JJ/MM/AAAA HH:MM)

    Returns:
        str: La date formatée ou "N/A" si datetime_obj est None
    """
    if not datetime_obj:
        return "N/A"
    return datetime_obj.strftime(format_str)


def format_duration(start, end):
    """Durée lisible entre deux dates (ex: "2 min 05 s")."""
    if not start or not end:
        return "N/A"
    seconds = int((end - start).total_seconds())
    minutes, seconds = divmod(seconds, 60)
    if minutes:
        return f"{minutes} min {seconds:02d} s"
    return f"{seconds} s"
