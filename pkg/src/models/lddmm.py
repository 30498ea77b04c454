"""
Types de données du recalage difféomorphe: grille, images, champs de vitesse,
difféomorphismes et opérateur noyau.
"""
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.fft

from core.exceptions import DomainError

MIN_NODES = 8
MAX_NODES = 128
# Bornes de la largeur du noyau gaussien (en unités de grille)
MIN_KERNEL_SIGMA = 0.5
MAX_KERNEL_SIGMA = 2.5


@dataclass(frozen=True)
class Grid:
    """
    Grille régulière 1D ou 2D.

    Attributes:
        sizes (tuple[int]): Nombre de noeuds par axe (8 à 128)
        spacing (tuple[float]): Pas physique par axe
    """

    sizes: tuple
    spacing: tuple = None

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.sizes)
        spacing = tuple(float(s) for s in self.spacing) if self.spacing is not None else (1.0,) * len(sizes)
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "spacing", spacing)

        if len(sizes) not in (1, 2):
            raise DomainError(f"Seules les grilles 1D et 2D sont prises en charge (reçu {len(sizes)}D)")
        if len(spacing) != len(sizes):
            raise DomainError("Un pas par axe est attendu")
        for n in sizes:
            if not MIN_NODES <= n <= MAX_NODES:
                raise DomainError(f"Taille d'axe {n} hors de [{MIN_NODES}, {MAX_NODES}]")
        for s in spacing:
            if not s > 0:
                raise DomainError(f"Pas de grille non positif: {s}")

    @property
    def dims(self):
        return len(self.sizes)

    @property
    def node_volume(self):
        return float(np.prod(self.spacing))

    def coordinates(self):
        """Coordonnées physiques des noeuds, tableau de forme (dims, *sizes)."""
        axes = [np.arange(n) * h for n, h in zip(self.sizes, self.spacing)]
        return np.stack(np.meshgrid(*axes, indexing="ij"))

    def vector_shape(self):
        return (self.dims,) + self.sizes


@dataclass
class Image:
    """Image scalaire échantillonnée aux noeuds d'une grille."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.array(self.values, dtype=np.float64)
        if self.values.shape != self.grid.sizes:
            raise DomainError(f"Image de forme {self.values.shape} sur une grille {self.grid.sizes}")
        if not np.all(np.isfinite(self.values)):
            raise DomainError("L'image contient des valeurs non finies")


@dataclass
class VelocityField:
    """
    Champ de vitesse dépendant du temps u_t, discrétisé en T pas.

    values a la forme (T, dims, *sizes): values[k] est le champ sur
    l'intervalle [k/T, (k+1)/T].
    """

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.array(self.values, dtype=np.float64)
        if self.values.ndim != self.grid.dims + 2 or self.values.shape[1:] != self.grid.vector_shape():
            raise DomainError(
                f"Champ de forme {self.values.shape} incompatible avec la grille {self.grid.sizes}"
            )
        if self.values.shape[0] < 1:
            raise DomainError("Un champ de vitesse doit avoir au moins un pas de temps")
        if not np.all(np.isfinite(self.values)):
            raise DomainError("Le champ de vitesse contient des valeurs non finies")

    @classmethod
    def zeros(cls, grid, timesteps):
        return cls(grid, np.zeros((timesteps,) + grid.vector_shape()))

    @property
    def timesteps(self):
        return self.values.shape[0]

    @property
    def dt(self):
        return 1.0 / self.timesteps


@dataclass
class DiffeoMap:
    """
    Transformation x -> x + displacement(x) sur une grille.

    Attributes:
        grid (Grid): La grille support
        displacement (ndarray): Déplacement, forme (dims, *sizes)
        diffeomorphic (bool | None): Indicateur posé par integrate_flow
            (déterminant jacobien > 0 en tout noeud), None si non évalué
    """

    grid: Grid
    displacement: np.ndarray
    diffeomorphic: bool = None

    def __post_init__(self):
        self.displacement = np.array(self.displacement, dtype=np.float64)
        if self.displacement.shape != self.grid.vector_shape():
            raise DomainError(
                f"Déplacement de forme {self.displacement.shape} sur une grille {self.grid.sizes}"
            )

    @classmethod
    def identity(cls, grid):
        return cls(grid, np.zeros(grid.vector_shape()), True)

    @classmethod
    def from_positions(cls, grid, positions):
        return cls(grid, positions - grid.coordinates())

    def positions(self):
        return self.grid.coordinates() + self.displacement


@dataclass
class KernelOp:
    """
    Noyau de lissage gaussien K = L^{-1}, diagonal dans le domaine de Fourier.

    La largeur sigma est exprimée en unités de grille; la borne haute limite
    l'amplification de L (1/K̂) aux hautes fréquences pour garder ⟨u, Lu⟩
    exploitable en double précision.
    """

    grid: Grid
    sigma: float
    multiplier: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not MIN_KERNEL_SIGMA <= self.sigma <= MAX_KERNEL_SIGMA:
            raise DomainError(
                f"Largeur de noyau {self.sigma} hors de [{MIN_KERNEL_SIGMA}, {MAX_KERNEL_SIGMA}] unités de grille"
            )
        squared = np.zeros(self.grid.sizes)
        for axis, n in enumerate(self.grid.sizes):
            omega = 2.0 * np.pi * scipy.fft.fftfreq(n)
            shape = [1] * self.grid.dims
            shape[axis] = n
            squared = squared + omega.reshape(shape) ** 2
        self.multiplier = np.exp(-0.5 * self.sigma**2 * squared)

    def _filter(self, values, factor):
        axes = tuple(range(-self.grid.dims, 0))
        spectrum = scipy.fft.fftn(values, axes=axes) * factor
        return np.real(scipy.fft.ifftn(spectrum, axes=axes))

    def smooth(self, values):
        """Applique K à un champ dont les derniers axes sont ceux de la grille."""
        return self._filter(values, self.multiplier)

    def sharpen(self, values):
        """Applique L = K^{-1}."""
        return self._filter(values, 1.0 / self.multiplier)

    def inner(self, a, b):
        """Produit scalaire discret ⟨a, b⟩ = Σ a·b ΔV."""
        return float(np.sum(a * b) * self.grid.node_volume)

    def norm_sq(self, u):
        """⟨u, Lu⟩ pour un champ de vitesse à un instant donné."""
        return self.inner(u, self.sharpen(u))


@dataclass(frozen=True)
class RegConfig:
    """
    Paramètres du recalage par descente de gradient.

    Attributes:
        beta (float): Poids du terme d'attache aux données
        timesteps (int): Nombre T de pas de temps du champ
        eta (float): Pas initial de la descente
        max_iters (int): Nombre maximal d'itérations
        tol (float): Seuil sur la décroissance relative de l'énergie
        kernel_sigma (float): Largeur du noyau en unités de grille
        max_halvings (int): Nombre maximal de divisions du pas par itération
    """

    beta: float = 1.0
    timesteps: int = 16
    eta: float = 0.1
    max_iters: int = 200
    tol: float = 1e-6
    kernel_sigma: float = 2.0
    max_halvings: int = 20

    def __post_init__(self):
        for name in ("beta", "eta", "tol", "kernel_sigma"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} doit être strictement positif (reçu {getattr(self, name)})")
        for name in ("timesteps", "max_iters", "max_halvings"):
            if getattr(self, name) < 1:
                raise DomainError(f"{name} doit être au moins 1 (reçu {getattr(self, name)})")


class EnergyTerms(NamedTuple):
    """Décomposition de l'énergie: total = cinétique + attache aux données."""

    total: float
    kinetic: float
    matching: float


@dataclass
class FlowResult:
    """
    Transformations produites par l'intégration d'un champ de vitesse.

    Attributes:
        forward (list[DiffeoMap]): φ_{0,t_k} pour k = 0..T
        reverse (list[DiffeoMap]): φ_{t_k,1} pour k = 0..T
        inverse (list[DiffeoMap]): φ_{t_k,0} pour k = 0..T (utilisées pour déformer I0)
    """

    forward: list
    reverse: list
    inverse: list

    @property
    def endpoint(self):
        return self.forward[-1]


@dataclass
class Registration:
    """Résultat d'un recalage."""

    velocity: VelocityField
    phi: DiffeoMap
    energy_trace: list
    ep_residual: float
    gradient_residual: float
    iterations: int
    converged: bool
    path_length: float

    @property
    def final_energy(self):
        return self.energy_trace[-1]
