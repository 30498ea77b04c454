"""
Configuration des expériences.

Chaque type d'expérience a son bloc de paramètres (dataclass) avec des valeurs
par défaut documentées et un validateur par champ.
"""
import hashlib
import json
import math
from dataclasses import dataclass, field, fields

from validators import (
    BooleanValidator,
    ChoiceValidator,
    IntegerValidator,
    ListValidator,
    MappingValidator,
    RealValidator,
    StringValidator,
)

PAULI_LABELS_1 = ("X", "Y", "Z")
PAULI_LABELS_2 = tuple(a + b for a in "IXYZ" for b in "IXYZ" if a + b != "II")
PERTURBATION_RATIO = 1e-4

POSITIVE = RealValidator(0.0, strict=True)
NON_NEGATIVE = RealValidator(0.0)
COEFFICIENTS = MappingValidator(RealValidator(), keys=PAULI_LABELS_1 + PAULI_LABELS_2)


def pauli_labels(qubits):
    return PAULI_LABELS_1 if qubits == 1 else PAULI_LABELS_2


def foreign_label(labels, qubits):
    """Première étiquette qui n'est pas un générateur de su(2ⁿ), ou None."""
    allowed = pauli_labels(qubits)
    return next((label for label in labels if label not in allowed), None)


def metric_weights(qubits, q, penalized=None, weights=None):
    """
    Poids de la métrique décrite par une configuration.

    Même règle que la construction des métriques: `weights` l'emporte, sinon
    q sur les générateurs pénalisés (Z pour n=1, les termes à deux corps
    pour n=2).

    Returns:
        dict: Poids par étiquette
    """
    labels = pauli_labels(qubits)
    if weights is not None:
        return {label: float(weights.get(label, 1.0)) for label in labels}
    if penalized is None:
        penalized = ["Z"] if qubits == 1 else [label for label in labels if "I" not in label]
    return {label: float(q) if label in penalized else 1.0 for label in labels}


def metric_norm(coefficients, weights):
    """‖Σ c_k e_k‖_G sur la base orthonormée des chaînes de Pauli."""
    return math.sqrt(sum(weights[label] * value**2 for label, value in coefficients.items()))


def label_problem(qubits, **groups):
    """(champ, message) pour la première étiquette incompatible avec le nombre de qubits."""
    for name, labels in groups.items():
        label = foreign_label(labels or [], qubits)
        if label is not None:
            return name, f"{name}: générateur {label!r} incompatible avec {qubits} qubit(s)"
    return None


@dataclass
class LinDynParams:
    """Comparaison des dynamiques couche par couche / bout-à-bout sur une tâche linéaire."""

    dim: int = 4
    samples: int = 20
    depth: int = 3
    eta: float = 0.005
    weight_decay: float = 0.0
    steps: int = 200
    init_scale: float = 0.5
    acceleration_depths: list = field(default_factory=lambda: [1, 2, 3, 4])

    VALIDATORS = {
        "dim": IntegerValidator(1, 32),
        "samples": IntegerValidator(1),
        "depth": IntegerValidator(1, 16),
        "eta": POSITIVE,
        "weight_decay": NON_NEGATIVE,
        "steps": IntegerValidator(1),
        "init_scale": NON_NEGATIVE,
        "acceleration_depths": ListValidator(IntegerValidator(1, 16)),
    }

    def check(self):
        if self.eta * self.weight_decay * max([self.depth] + self.acceleration_depths) >= 1:
            return "eta", "eta*weight_decay*N doit rester < 1"
        return None


@dataclass
class LddmmParams:
    """
    Recalage d'une bosse (1D) ou d'une tache (2D) translatée, ou d'une paire identique.

    Avec `source_csv` et `target_csv`, les deux images sont lues depuis des
    fichiers CSV (une ligne: image 1D) et les paramètres synthétiques sont ignorés.
    """

    dims: int = 1
    size: int = 64
    spacing: float = 1.0
    image_width: float = 5.0
    shift: float = 1.5
    identity_pair: bool = False
    beta: float = 20000.0
    timesteps: int = 16
    eta: float = 0.02
    max_iters: int = 1000
    tol: float = 1e-8
    kernel_sigma: float = 2.0
    source_csv: str = None
    target_csv: str = None

    VALIDATORS = {
        "dims": ChoiceValidator((1, 2)),
        "size": IntegerValidator(8, 128),
        "spacing": POSITIVE,
        "image_width": POSITIVE,
        "shift": RealValidator(),
        "identity_pair": BooleanValidator(),
        "beta": POSITIVE,
        "timesteps": IntegerValidator(1),
        "eta": POSITIVE,
        "max_iters": IntegerValidator(1),
        "tol": POSITIVE,
        "kernel_sigma": RealValidator(0.5, 2.5),
        "source_csv": StringValidator(optional=True),
        "target_csv": StringValidator(optional=True),
    }

    def check(self):
        if (self.source_csv is None) != (self.target_csv is None):
            missing = "target_csv" if self.target_csv is None else "source_csv"
            return missing, "source_csv et target_csv vont ensemble"
        return None


@dataclass
class CurvatureParams:
    """
    Relevé de courbure sectionnelle et écart entre géodésiques voisines.

    Si `weights` est fourni, il définit la métrique (poids par générateur,
    1 par défaut); sinon les générateurs `penalized` reçoivent le poids q.
    """

    qubits: int = 1
    q: float = 10.0
    penalized: list = None
    weights: dict = None
    random_sections: int = 100
    omega0: dict = field(default_factory=lambda: {"Y": 2.0})
    perturbation: dict = field(default_factory=lambda: {"X": 1e-6})
    t_end: float = 6.0
    h: float = 0.01
    fit_floor: float = 10.0
    fit_ceiling: float = 1e5

    VALIDATORS = {
        "qubits": ChoiceValidator((1, 2)),
        "q": RealValidator(1.0),
        "penalized": ListValidator(ChoiceValidator(PAULI_LABELS_1 + PAULI_LABELS_2), optional=True),
        "weights": MappingValidator(RealValidator(1.0), keys=PAULI_LABELS_1 + PAULI_LABELS_2, optional=True),
        "random_sections": IntegerValidator(0),
        "omega0": COEFFICIENTS,
        "perturbation": COEFFICIENTS,
        "t_end": POSITIVE,
        "h": POSITIVE,
        "fit_floor": POSITIVE,
        "fit_ceiling": POSITIVE,
    }

    def check(self):
        if self.h > self.t_end:
            return "h", "h doit être ≤ t_end"
        if self.fit_floor >= self.fit_ceiling:
            return "fit_floor", "fit_floor doit être < fit_ceiling"
        problem = label_problem(
            self.qubits,
            omega0=self.omega0,
            perturbation=self.perturbation,
            penalized=self.penalized,
            weights=self.weights,
        )
        if problem:
            return problem

        weights = metric_weights(self.qubits, self.q, self.penalized, self.weights)
        speed = metric_norm(self.omega0, weights)
        size = metric_norm(self.perturbation, weights)
        if speed == 0:
            return "omega0", "la vitesse initiale omega0 est nulle"
        if size == 0:
            return "perturbation", "la perturbation est nulle"
        if size > PERTURBATION_RATIO * speed:
            return "perturbation", (
                f"‖perturbation‖_G = {size:.3e} dépasse {PERTURBATION_RATIO:g}·‖omega0‖_G = "
                f"{PERTURBATION_RATIO * speed:.3e}"
            )
        return None


@dataclass
class ComplexityParams:
    """
    Majorants de complexité d'unitaires cibles exp(Σ c_k e_k) et d'états réels.

    Sans cible explicite, `random_targets` générateurs de norme `target_norm`
    sont tirés à partir de la graine.
    """

    qubits: int = 1
    q: float = 1.0
    penalized: list = None
    weights: dict = None
    targets: list = field(default_factory=list)
    random_targets: int = 3
    target_norm: float = 0.7
    states: list = field(default_factory=list)
    restarts: int = 4
    h: float = 0.01

    VALIDATORS = {
        "qubits": ChoiceValidator((1, 2)),
        "q": RealValidator(1.0),
        "penalized": ListValidator(ChoiceValidator(PAULI_LABELS_1 + PAULI_LABELS_2), optional=True),
        "weights": MappingValidator(RealValidator(1.0), keys=PAULI_LABELS_1 + PAULI_LABELS_2, optional=True),
        "targets": ListValidator(COEFFICIENTS),
        "random_targets": IntegerValidator(0),
        "target_norm": POSITIVE,
        "states": ListValidator(ListValidator(RealValidator(), min_length=2)),
        "restarts": IntegerValidator(0),
        "h": RealValidator(0.0, 1.0, strict=True),
    }

    def check(self):
        dimension = 2**self.qubits
        for i, state in enumerate(self.states):
            if len(state) != dimension:
                return "states", f"states[{i}]: {dimension} amplitudes attendues"
            if not any(state):
                return "states", f"states[{i}]: vecteur nul"
        problem = label_problem(
            self.qubits,
            targets=[label for target in self.targets for label in target],
            penalized=self.penalized,
            weights=self.weights,
        )
        if problem:
            return problem
        if not self.targets and self.random_targets == 0 and not self.states:
            return "targets", "au moins une cible (targets, random_targets ou states) est requise"
        return None


@dataclass
class SensitivityParams:
    """Profil de sensibilité des couches d'un réseau rectifieur (et de sa variante résiduelle)."""

    dim: int = 10
    n_train: int = 500
    n_test: int = 500
    separation: float = 2.0
    depth: int = 6
    width: int = 32
    eta: float = 0.01
    steps: int = 3000
    tol: float = 1e-3
    repeats: int = 20
    seeds: int = 1
    residual: bool = True

    VALIDATORS = {
        "dim": IntegerValidator(1),
        "n_train": IntegerValidator(2),
        "n_test": IntegerValidator(2),
        "separation": POSITIVE,
        "depth": IntegerValidator(2, 32),
        "width": IntegerValidator(1),
        "eta": POSITIVE,
        "steps": IntegerValidator(1),
        "tol": NON_NEGATIVE,
        "repeats": IntegerValidator(1),
        "seeds": IntegerValidator(1),
        "residual": BooleanValidator(),
    }

    def check(self):
        return None


@dataclass
class ProbStudyParams:
    """Étude probabilité-complexité sur une tâche linéaire sous-déterminée."""

    dim: int = 4
    samples: int = 2
    test_samples: int = 100
    depth: int = 3
    eta: float = 0.01
    steps: int = 5000
    tol: float = 1e-8
    runs: int = 500
    bins: int = 8
    init_scale: float = 0.3
    measure: str = "net_complexity"
    min_converged: int = 50

    VALIDATORS = {
        "dim": IntegerValidator(1, 16),
        "samples": IntegerValidator(1),
        "test_samples": IntegerValidator(1),
        "depth": IntegerValidator(1, 8),
        "eta": POSITIVE,
        "steps": IntegerValidator(1),
        "tol": POSITIVE,
        "runs": IntegerValidator(1),
        "bins": IntegerValidator(1),
        "init_scale": NON_NEGATIVE,
        "measure": ChoiceValidator(("net_complexity", "path_length")),
        "min_converged": IntegerValidator(1),
    }

    def check(self):
        return None


PARAMS_BY_KIND = {
    "lin-dyn": LinDynParams,
    "lddmm": LddmmParams,
    "curvature": CurvatureParams,
    "complexity": ComplexityParams,
    "sensitivity": SensitivityParams,
    "prob-study": ProbStudyParams,
}


def params_to_dict(params):
    return {f.name: getattr(params, f.name) for f in fields(params)}


@dataclass
class ExperimentConfig:
    """
    Configuration complète d'un run.

    Attributes:
        kind (str): Type d'expérience
        params: Bloc de paramètres du type (valeurs par défaut remplies)
        seed (int): Graine de base
        output_dir (str): Répertoire de sortie
    """

    kind: str
    params: object
    seed: int = 0
    output_dir: str = "results"

    def to_dict(self):
        return {
            "kind": self.kind,
            "params": params_to_dict(self.params),
            "seed": self.seed,
            "output_dir": self.output_dir,
        }

    def to_json(self):
        """Forme canonique (clés triées) réinjectable dans parse_config."""
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def config_hash(self):
        """SHA-256 de la forme canonique, répertoire de sortie exclu."""
        content = self.to_dict()
        del content["output_dir"]
        canonical = json.dumps(content, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    @property
    def run_id(self):
        return f"{self.kind}-{self.config_hash()[:12]}"

