"""
Écriture des tableaux CSV des expériences.

Format: RFC 4180, fins de ligne LF, séparateur décimal '.', réels écrits avec
repr() pour que deux runs identiques produisent des fichiers identiques.
"""
import csv
import math
from pathlib import Path

import numpy as np


def format_value(value):
    """Représentation textuelle stable d'une cellule."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    if value is None:
        return ""
    return str(value)


def write_csv(path, columns, rows):
    """
    Écrit une table CSV.

    Args:
        path (str | Path): Fichier de destination
        columns (list[str]): En-tête
        rows (iterable[dict | sequence]): Lignes (dictionnaires indexés par
            colonne ou séquences dans l'ordre des colonnes)

    Returns:
        Path: Chemin écrit
    """
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            if isinstance(row, dict):
                row = [row.get(column) for column in columns]
            writer.writerow([format_value(value) for value in row])
    return path

