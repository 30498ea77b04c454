from dataclasses import dataclass, field

import numpy as np

from core.exceptions import DomainError
from core.numerics import as_matrix


@dataclass
class LinearNet:
    """
    Réseau linéaire profond W_N ... W_1.

    Les couches sont stockées dans l'ordre d'application: layers[0] = W_1
    (entrée d -> largeur cachée), layers[-1] = W_N (largeur cachée -> sortie k).
    """

    layers: list = field(default_factory=list)

    def __post_init__(self):
        if not self.layers:
            raise DomainError("Un réseau linéaire doit avoir au moins une couche")
        self.layers = [as_matrix(W) for W in self.layers]
        for j in range(1, len(self.layers)):
            # W_{j+1} doit consommer la sortie de W_j
            if self.layers[j].shape[1] != self.layers[j - 1].shape[0]:
                raise DomainError(
                    f"Dimensions incompatibles entre les couches {j} et {j + 1}: "
                    f"{self.layers[j - 1].shape} puis {self.layers[j].shape}"
                )

    @property
    def depth(self):
        return len(self.layers)

    @property
    def input_dim(self):
        return self.layers[0].shape[1]

    @property
    def output_dim(self):
        return self.layers[-1].shape[0]

    def copy(self):
        return LinearNet([W.copy() for W in self.layers])

    def __repr__(self):
        shapes = ", ".join(f"{W.shape[0]}x{W.shape[1]}" for W in self.layers)
        return f"<LinearNet(depth={self.depth}, layers=[{shapes}])>"


@dataclass
class Dataset:
    """
    Jeu d'entraînement plein lot.

    Attributes:
        inputs (ndarray): Matrice X de taille m x d (un exemple par ligne)
        targets (ndarray): Matrice Y de taille m x k
    """

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        self.inputs = as_matrix(self.inputs)
        self.targets = as_matrix(self.targets)
        if self.inputs.shape[0] < 1:
            raise DomainError("Le jeu de données doit contenir au moins un exemple")
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise DomainError(
                f"Nombre d'exemples incohérent: {self.inputs.shape[0]} entrées, "
                f"{self.targets.shape[0]} cibles"
            )

    @property
    def size(self):
        return self.inputs.shape[0]

    @property
    def input_dim(self):
        return self.inputs.shape[1]

    @property
    def output_dim(self):
        return self.targets.shape[1]


@dataclass(frozen=True)
class GdConfig:
    """
    Paramètres de la descente de gradient plein lot.

    Attributes:
        eta (float): Pas d'apprentissage η > 0
        weight_decay (float): Coefficient de régularisation λ ≥ 0
        steps (int): Nombre de pas
        tol (float): Arrêt anticipé quand la perte passe sous ce seuil (0: jamais)
    """

    eta: float
    weight_decay: float = 0.0
    steps: int = 1
    tol: float = 0.0

    def __post_init__(self):
        if self.tol < 0:
            raise DomainError(f"tol doit être positif ou nul (reçu {self.tol})")
        if not self.eta > 0:
            raise DomainError(f"eta doit être strictement positif (reçu {self.eta})")
        if self.weight_decay < 0:
            raise DomainError(f"weight_decay doit être positif ou nul (reçu {self.weight_decay})")
        if self.steps < 1:
            raise DomainError(f"steps doit être au moins 1 (reçu {self.steps})")

    def check_depth(self, depth):
        """Vérifie que le facteur de rétrécissement 1 - ηλN reste positif."""
        if self.eta * self.weight_decay * depth >= 1.0:
            raise DomainError(
                f"eta*weight_decay*N = {self.eta * self.weight_decay * depth:.3g} >= 1: "
                "le facteur de rétrécissement devient négatif"
            )
