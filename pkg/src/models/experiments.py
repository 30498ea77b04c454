from dataclasses import dataclass, field

import numpy as np

from core.exceptions import DomainError

ACTIVATIONS = ("identity", "relu")


@dataclass
class DenseLayer:
    """
    Couche dense y = act(W a + b), avec saut résiduel optionnel a + act(W a + b).

    Attributes:
        weight (ndarray): Matrice sortie x entrée
        bias (ndarray | None): Biais (None pour une couche sans biais)
        activation (str): "identity" ou "relu"
        residual (bool): Ajoute l'entrée à la sortie (couche carrée requise)
    """

    weight: np.ndarray
    bias: np.ndarray = None
    activation: str = "relu"
    residual: bool = False

    def __post_init__(self):
        self.weight = np.array(self.weight, dtype=np.float64)
        if self.bias is not None:
            self.bias = np.array(self.bias, dtype=np.float64)
            if self.bias.shape != (self.weight.shape[0],):
                raise DomainError(f"Biais de forme {self.bias.shape} pour une couche {self.weight.shape}")
        if self.activation not in ACTIVATIONS:
            raise DomainError(f"Activation inconnue: {self.activation!r}")
        if self.residual and self.weight.shape[0] != self.weight.shape[1]:
            raise DomainError(f"Une couche résiduelle doit être carrée (reçu {self.weight.shape})")

    @property
    def fan_in(self):
        return self.weight.shape[1]

    def copy(self):
        bias = None if self.bias is None else self.bias.copy()
        return DenseLayer(self.weight.copy(), bias, self.activation, self.residual)


@dataclass
class MlpNet:
    """Perceptron multicouche entièrement connecté (éventuellement résiduel)."""

    layers: list = field(default_factory=list)

    def __post_init__(self):
        if not self.layers:
            raise DomainError("Un réseau doit avoir au moins une couche")
        for k in range(1, len(self.layers)):
            if self.layers[k].weight.shape[1] != self.layers[k - 1].weight.shape[0]:
                raise DomainError(f"Dimensions incompatibles entre les couches {k} et {k + 1}")

    @property
    def depth(self):
        return len(self.layers)

    def copy(self):
        return MlpNet([layer.copy() for layer in self.layers])

    def check_index(self, k):
        if not 0 <= k < self.depth:
            raise DomainError(f"Indice de couche {k} hors de [0, {self.depth - 1}]")


@dataclass(frozen=True)
class InitSnapshot:
    """Copie figée des poids à l'initialisation et graine utilisée."""

    weights: tuple
    biases: tuple
    seed: int

    @classmethod
    def capture(cls, net, seed):
        weights, biases = [], []
        for layer in net.layers:
            weight = layer.weight.copy()
            weight.setflags(write=False)
            weights.append(weight)
            bias = None
            if layer.bias is not None:
                bias = layer.bias.copy()
                bias.setflags(write=False)
            biases.append(bias)
        return cls(tuple(weights), tuple(biases), seed)


@dataclass
class TrainingResult:
    """Réseau entraîné, instantané d'initialisation et trace de la perte."""

    net: MlpNet
    snapshot: InitSnapshot
    losses: list

    @property
    def final_loss(self):
        return self.losses[-1]


@dataclass
class SensitivityProfile:
    """
    Dégradation par couche sous réinitialisation et re-tirage.

    Attributes:
        baseline_loss (float): Perte de test du modèle intact
        baseline_accuracy (float): Précision de test du modèle intact
        rows (list[dict]): layer, mode, mean_degradation, std, repeats, accuracy_drop
    """

    baseline_loss: float
    baseline_accuracy: float
    rows: list

    def degradations(self, mode):
        return [row["mean_degradation"] for row in self.rows if row["mode"] == mode]

    def flatness(self, mode="rerandomize"):
        """Rapport max/min des dégradations moyennes (None si le minimum est ≤ 0)."""
        values = self.degradations(mode)
        if not values or min(values) <= 0:
            return None
        return max(values) / min(values)


@dataclass
class ComplexityRun:
    """Une réplique de l'étude probabilité-complexité."""

    seed: int
    converged: bool
    test_error: float
    complexity: float
    steps: int


@dataclass
class ProbStudyResult:
    """
    Table des répliques, histogramme des complexités et ajustement log-linéaire.

    Attributes:
        runs (list[ComplexityRun]): Toutes les répliques, triées par graine
        bin_edges (ndarray): Bornes des classes
        counts (ndarray): Effectifs par classe
        slope, intercept, r2 (float | None): Ajustement de log(fréquence) vs C
        degenerate (bool): Vrai si une seule classe est peuplée
    """

    runs: list
    bin_edges: np.ndarray
    counts: np.ndarray
    slope: float
    intercept: float
    r2: float
    degenerate: bool

    @property
    def converged_runs(self):
        return [run for run in self.runs if run.converged]

    @property
    def bin_width(self):
        return float(self.bin_edges[1] - self.bin_edges[0])

    @property
    def populated_bins(self):
        return int(np.count_nonzero(self.counts))


@dataclass
class TrajectoryComparison:
    """Écart par pas entre la descente couche par couche et la mise à jour bout-à-bout."""

    deviation: np.ndarray
    loss_layers: np.ndarray
    loss_end_to_end: np.ndarray
