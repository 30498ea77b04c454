"""
Noyaux numériques partagés par tout le laboratoire.

Ce module regroupe les fonctions matricielles (puissance fractionnaire, logarithme
principal, exponentielle), l'intégrateur RK4 à pas fixe et l'oracle de gradient
par différences finies qui sert de vérificateur indépendant pour chaque gradient
analytique du dépôt.

Toutes les fonctions sont pures et déterministes.
"""
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from core.exceptions import DomainError, IntegrationBlowupError

# Tolérances par défaut
SYMMETRY_TOL = 1e-10
PSD_CLAMP = 1e-12
FD_EPS = 1e-5


def as_matrix(data):
    """
    Convertit des données en matrice numpy double précision (réelle ou complexe).

    Args:
        data: Tableau 2D (liste imbriquée ou ndarray)

    Returns:
        ndarray: Copie de la matrice en float64 ou complex128

    Raises:
        DomainError: Si l'entrée n'est pas 2D ou contient NaN/Inf
    """
    M = np.array(data)
    if M.ndim != 2:
        raise DomainError(f"Une matrice 2D est attendue, reçu {M.ndim} dimension(s)")
    M = M.astype(np.complex128 if np.iscomplexobj(M) else np.float64)
    if not np.all(np.isfinite(M)):
        raise DomainError("La matrice contient des valeurs non finies (NaN/Inf)")
    return M


def _require_square(M, name):
    if M.shape[0] != M.shape[1]:
        raise DomainError(f"{name}: matrice carrée attendue, reçu {M.shape}")


def fractional_power(M, p):
    """
    Puissance fractionnaire M^p d'une matrice symétrique semi-définie positive.

    Calculée par décomposition spectrale Q diag(λ^p) Qᵀ. Les valeurs propres
    légèrement négatives (bruit d'arrondi des itérés de descente) sont ramenées
    à 0. Convention 0^0 = 1, donc M^0 = I même pour M = 0.

    Args:
        M: Matrice symétrique semi-définie positive
        p (float): Exposant dans [0, 1]

    Returns:
        ndarray: La matrice M^p

    Raises:
        DomainError: Si p est hors de [0, 1], si M n'est pas symétrique
                     ou si une valeur propre est franchement négative
    """
    M = as_matrix(M)
    _require_square(M, "fractional_power")
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"Exposant {p} hors de l'intervalle [0, 1]")

    scale = max(1.0, float(np.max(np.abs(M)))) if M.size else 1.0
    asymmetry = float(np.max(np.abs(M - M.T))) if M.size else 0.0
    if asymmetry > SYMMETRY_TOL * scale:
        raise DomainError(f"Matrice non symétrique (écart {asymmetry:.3e})")

    n = M.shape[0]
    if p == 0.0:
        return np.eye(n)

    eigvals, Q = scipy.linalg.eigh(0.5 * (M + M.T))
    floor = -PSD_CLAMP * max(1.0, float(np.max(np.abs(eigvals))))
    if np.any(eigvals < floor):
        raise DomainError(f"Valeur propre négative {eigvals.min():.3e} pour une matrice supposée PSD")
    eigvals = np.clip(eigvals, 0.0, None)
    return (Q * eigvals**p) @ Q.T


def principal_log(M):
    """
    Logarithme principal d'une matrice dont le spectre évite ]-∞, 0].

    Args:
        M: Matrice carrée inversible

    Returns:
        ndarray: X tel que expm(X) = M (réel si M est réelle)

    Raises:
        DomainError: Si une valeur propre se trouve sur le demi-axe réel négatif
                     (ou en 0), en nommant la valeur propre fautive
    """
    M = as_matrix(M)
    _require_square(M, "principal_log")

    eigvals = scipy.linalg.eigvals(M)
    scale = max(1.0, float(np.max(np.abs(eigvals))))
    for lam in eigvals:
        if abs(lam.imag) <= 1e-12 * scale and lam.real <= 1e-14 * scale:
            raise DomainError(
                f"Valeur propre {lam.real:.6g}{lam.imag:+.2g}j sur le demi-axe réel négatif: "
                "logarithme principal non défini"
            )

    X = scipy.linalg.logm(M)
    if not np.iscomplexobj(M):
        X = np.real(X)
    return X


def expm(X):
    """Exponentielle matricielle (scaling-and-squaring de Padé)."""
    return scipy.linalg.expm(as_matrix(X))


@dataclass(frozen=True)
class OdeState:
    """Un échantillon de trajectoire: temps, état (vecteur plat) et pas utilisé."""

    time: float
    state: np.ndarray
    h: float

    def __post_init__(self):
        if not self.h > 0:
            raise DomainError(f"Le pas h doit être strictement positif (reçu {self.h})")


def rk4_integrate(f, x0, t_end, h=None, project=None, project_every=10):
    """
    Intègre ẋ = f(t, x) par Runge-Kutta classique d'ordre 4 à pas fixe.

    Le dernier pas est raccourci si nécessaire pour que le temps final soit
    exactement t_end.

    Args:
        f (callable): Champ de vecteurs f(t, x) -> ndarray de même forme que x
        x0 (OdeState): État initial (son pas sert de valeur par défaut pour h)
        t_end (float): Temps final
        h (float, optional): Pas d'intégration
        project (callable, optional): Projection appliquée à l'état tous les
            `project_every` pas (ex: re-unitarisation)
        project_every (int): Période de la projection

    Returns:
        list[OdeState]: La trajectoire complète, état initial compris

    Raises:
        DomainError: Si h n'est pas dans ]0, t_end - t0]
        IntegrationBlowupError: Si l'état devient non fini
    """
    h = x0.h if h is None else h
    t0 = float(x0.time)
    span = t_end - t0
    if h <= 0:
        raise DomainError(f"Le pas h doit être strictement positif (reçu {h})")
    if span < 0:
        raise DomainError(f"t_end={t_end} précède le temps initial {t0}")

    x = np.array(x0.state, copy=True)
    trajectory = [OdeState(t0, x.copy(), h)]
    if span == 0:
        return trajectory
    if h > span:
        raise DomainError(f"Le pas h={h} dépasse la durée d'intégration {span}")

    n_steps = math.ceil(span / h - 1e-9)
    t = t0
    for step in range(1, n_steps + 1):
        t_next = t0 + step * h if step < n_steps else t_end
        dt = t_next - t

        k1 = f(t, x)
        k2 = f(t + 0.5 * dt, x + 0.5 * dt * k1)
        k3 = f(t + 0.5 * dt, x + 0.5 * dt * k2)
        k4 = f(t + dt, x + dt * k3)
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = t_next

        if not np.all(np.isfinite(x)):
            raise IntegrationBlowupError(step, t)
        if project is not None and step % project_every == 0:
            x = project(x)

        trajectory.append(OdeState(t, x, dt))

    return trajectory


def fd_gradient(f, x, eps=FD_EPS):
    """
    Gradient par différences centrées (f(x+εe_i) - f(x-εe_i)) / 2ε.

    Args:
        f (callable): Fonction scalaire d'un tableau
        x: Point d'évaluation (tableau de forme quelconque)
        eps (float): Pas des différences finies

    Returns:
        ndarray: Gradient de même forme que x
    """
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat_x = x.reshape(-1)
    flat_grad = grad.reshape(-1)
    for i in range(flat_x.size):
        original = flat_x[i]
        flat_x[i] = original + eps
        f_plus = f(x.copy())
        flat_x[i] = original - eps
        f_minus = f(x.copy())
        flat_x[i] = original
        flat_grad[i] = (f_plus - f_minus) / (2.0 * eps)
    return grad
