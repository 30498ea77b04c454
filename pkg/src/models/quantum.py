"""
Types de la géométrie de complexité sur SU(2) et SU(4).

Les éléments de l'algèbre de Lie sont représentés par leurs coefficients sur
la base e_k = i·P_k/2, où P_k parcourt les chaînes de Pauli non triviales dans
l'ordre lexicographique de l'alphabet IXYZ.
"""
import itertools
from dataclasses import dataclass, field

import numpy as np

from core.exceptions import DomainError

PAULI = {
    "I": np.eye(2, dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}


@dataclass
class PauliBasis:
    """
    Base orthonormale de su(2ⁿ) formée des chaînes de Pauli, n ∈ {1, 2}.

    Attributes:
        qubits (int): Nombre de qubits
        labels (list[str]): Étiquettes ("X", "IZ", "XY", ...)
        body_counts (list[int]): Nombre de facteurs non triviaux par générateur
        generators (ndarray): Matrices e_k, forme (D, 2ⁿ, 2ⁿ)
        structure (ndarray): Constantes de structure c[i, j, k] = ⟨e_k, [e_i, e_j]⟩
    """

    qubits: int
    labels: list = field(init=False)
    body_counts: list = field(init=False)
    generators: np.ndarray = field(init=False, repr=False)
    structure: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.qubits not in (1, 2):
            raise DomainError(f"Seuls 1 ou 2 qubits sont pris en charge (reçu {self.qubits})")

        self.labels, self.body_counts, matrices = [], [], []
        for letters in itertools.product("IXYZ", repeat=self.qubits):
            label = "".join(letters)
            if label == "I" * self.qubits:
                continue
            matrix = PAULI[letters[0]]
            for letter in letters[1:]:
                matrix = np.kron(matrix, PAULI[letter])
            self.labels.append(label)
            self.body_counts.append(sum(letter != "I" for letter in letters))
            matrices.append(0.5j * matrix)
        self.generators = np.array(matrices)

        # [e_i, e_j] pour toutes les paires, puis projection sur la base
        products = np.einsum("iab,jbc->ijac", self.generators, self.generators)
        commutators = products - products.transpose(1, 0, 2, 3)
        self.structure = np.stack(
            [[self.coefficients(commutators[i, j]) for j in range(self.size)] for i in range(self.size)]
        )

    @property
    def size(self):
        return len(self.labels)

    @property
    def dimension(self):
        """Dimension 2ⁿ de l'espace de Hilbert."""
        return 2**self.qubits

    def inner(self, A, B):
        """Produit scalaire (4/2ⁿ) Re tr(A†B), pour lequel les e_k sont orthonormés."""
        return float(4.0 / self.dimension * np.real(np.trace(A.conj().T @ B)))

    def coefficients(self, A):
        """Coordonnées d'une matrice anti-hermitienne sur la base (partie sans trace)."""
        return np.array([self.inner(e, A) for e in self.generators])

    def matrix(self, coefficients):
        """Matrice Σ c_k e_k."""
        return np.tensordot(np.asarray(coefficients, dtype=np.float64), self.generators, axes=1)

    def bracket(self, X, Y):
        """Coordonnées du commutateur [X, Y]."""
        return np.einsum("i,j,ijk->k", X, Y, self.structure)

    def index(self, label):
        try:
            return self.labels.index(label)
        except ValueError:
            raise DomainError(f"Générateur inconnu: {label!r} (attendus: {', '.join(self.labels)})")


@dataclass
class PenaltyMetric:
    """
    Métrique invariante diagonale sur l'algèbre: ⟨X, Y⟩_G = Σ w_k X_k Y_k.

    Des poids tous égaux à 1 redonnent la métrique bi-invariante.
    """

    basis: PauliBasis
    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.array(self.weights, dtype=np.float64)
        if self.weights.shape != (self.basis.size,):
            raise DomainError(f"{self.basis.size} poids attendus, reçu {self.weights.shape}")
        if np.any(self.weights < 1.0) or not np.all(np.isfinite(self.weights)):
            raise DomainError("Tous les poids de pénalité doivent être finis et ≥ 1")

    @property
    def penalty(self):
        """Plus grand poids (q pour une métrique à deux niveaux)."""
        return float(self.weights.max())

    def inner(self, X, Y):
        return float(np.sum(self.weights * X * Y))

    def norm(self, X):
        return float(np.sqrt(max(self.inner(X, X), 0.0)))

    def lower(self, X):
        """Moment M = G·Ω."""
        return self.weights * X

    def raise_index(self, M):
        """Vitesse Ω = G⁻¹·M."""
        return M / self.weights


@dataclass
class GeodesicPath:
    """
    Géodésique issue de l'identité.

    Attributes:
        omega0 (ndarray): Vitesse initiale (coordonnées)
        times (ndarray): Instants échantillonnés
        unitaries (list[ndarray]): U(t) aux instants échantillonnés
        velocities (list[ndarray]): Ω(t) aux mêmes instants
        length (float): sqrt(⟨Ω₀, GΩ₀⟩)·t_end
    """

    omega0: np.ndarray
    times: np.ndarray
    unitaries: list
    velocities: list
    length: float

    @property
    def endpoint(self):
        return self.unitaries[-1]


@dataclass
class PureState:
    """Vecteur d'état normé de dimension 2ⁿ."""

    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.array(self.amplitudes, dtype=np.complex128).reshape(-1)
        if not np.all(np.isfinite(self.amplitudes)):
            raise DomainError("L'état contient des amplitudes non finies")
        if abs(np.linalg.norm(self.amplitudes) - 1.0) > 1e-12:
            raise DomainError(f"État non normé (norme {np.linalg.norm(self.amplitudes):.15f})")

    @classmethod
    def normalized(cls, amplitudes):
        vector = np.array(amplitudes, dtype=np.complex128).reshape(-1)
        norm = np.linalg.norm(vector)
        if norm == 0:
            raise DomainError("Impossible de normer le vecteur nul")
        return cls(vector / norm)

    @classmethod
    def reference(cls, qubits):
        """État produit |0…0⟩."""
        vector = np.zeros(2**qubits, dtype=np.complex128)
        vector[0] = 1.0
        return cls(vector)

    @property
    def dimension(self):
        return self.amplitudes.size


@dataclass
class ComplexityEstimate:
    """
    Majorant de complexité obtenu par tir.

    Attributes:
        distance (float): Plus petite longueur parmi les tirs convergés
        omega0 (ndarray): Vitesse initiale correspondante
        endpoint_error (float): Erreur de bout du tir retenu
        converged_shots (int): Nombre de tirs convergés
        shots (int): Nombre total de tirs
    """

    distance: float
    omega0: np.ndarray
    endpoint_error: float
    converged_shots: int
    shots: int


@dataclass
class DeviationCurve:
    """Écart normalisé ‖U₁(t) − U₂(t)‖_F / ‖δ‖_G entre deux géodésiques voisines."""

    times: np.ndarray
    values: np.ndarray


@dataclass
class CurvatureSurvey:
    """
    Courbures sectionnelles d'une métrique.

    Attributes:
        rows (list[dict]): section_id, generator_i, generator_j, q, K
        fraction_negative (float): Part des sections de courbure < 0
        minimum (float): Plus petite courbure observée
        maximum (float): Plus grande courbure observée
    """

    rows: list
    fraction_negative: float
    minimum: float
    maximum: float
