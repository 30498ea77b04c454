"""Écriture JSON déterministe (clés triées, scalaires numpy convertis)."""
import json
import math
from pathlib import Path

import numpy as np


def to_builtin(value):
    """Convertit récursivement les types numpy et les réels non finis."""
    if isinstance(value, dict):
        return {str(key): to_builtin(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_builtin(item) for item in value]
    if isinstance(value, np.ndarray):
        return to_builtin(value.tolist())
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        # JSON strict: pas de NaN/Infinity
        return None
    return value


def dumps(data):
    return json.dumps(to_builtin(data), sort_keys=True, indent=2) + "\n"


def write_json(path, data):
    path = Path(path)
    path.write_text(dumps(data), encoding="utf-8")
    return path


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))
