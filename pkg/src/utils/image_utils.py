"""
Lecture/écriture d'images de niveaux de gris pour le recalage.

Deux formats: CSV (en-tête rows,cols,spacing puis une ligne par rangée) pour
les valeurs exactes, PGM ASCII (P2) pour la visualisation.
"""
from pathlib import Path

import numpy as np

from core.exceptions import DomainError
from utils.csv_utils import format_value

PGM_MAX = 255


def write_image_csv(path, values, spacing=1.0):
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if values.ndim != 2:
        raise DomainError(f"Image 1D ou 2D attendue, reçu {values.ndim} dimensions")
    rows, cols = values.shape
    lines = ["rows,cols,spacing", f"{rows},{cols},{format_value(float(spacing))}"]
    lines += [",".join(format_value(float(v)) for v in row) for row in values]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return Path(path)


def read_image_csv(path):
    """
    Relit une image écrite par write_image_csv.

    Returns:
        tuple[np.ndarray, float]: Valeurs (rows × cols) et pas de grille
    """
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if len(lines) < 2 or lines[0].strip() != "rows,cols,spacing":
        raise DomainError(f"{path}: en-tête rows,cols,spacing attendu")
    rows, cols, spacing = lines[1].split(",")
    rows, cols = int(rows), int(cols)
    values = np.array([[float(v) for v in line.split(",")] for line in lines[2:2 + rows]])
    if values.shape != (rows, cols):
        raise DomainError(f"{path}: {rows}×{cols} valeurs attendues, reçu {values.shape}")
    return values, float(spacing)


def write_pgm(path, values, low=None, high=None):
    """
    Exporte une image en PGM ASCII, niveaux normalisés sur [low, high].

    Une image 1D est écrite comme une rangée unique.
    """
    values = np.atleast_2d(np.asarray(values, dtype=float))
    low = float(values.min()) if low is None else low
    high = float(values.max()) if high is None else high
    span = high - low
    if span <= 0:
        levels = np.zeros(values.shape, dtype=int)
    else:
        levels = np.clip(np.rint((values - low) / span * PGM_MAX), 0, PGM_MAX).astype(int)
    rows, cols = levels.shape
    lines = ["P2", f"{cols} {rows}", str(PGM_MAX)]
    lines += [" ".join(str(v) for v in row) for row in levels]
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")
    return Path(path)
