"""
Hiérarchie des exceptions du laboratoire GeoLab.

Deux familles sont distinguées car la CLI les traduit en codes de sortie différents:
- ConfigError: la configuration est invalide (code 2)
- NumericalFailure: le calcul lui-même a échoué (code 3)

DomainError signale la violation d'une précondition d'une opération numérique.
Elle hérite aussi de ValueError pour rester compatible avec le code appelant
qui attrape les erreurs de valeur classiques.
"""


class GeoLabError(Exception):
    """Classe de base de toutes les erreurs du laboratoire."""


class ConfigError(GeoLabError):
    """
    Configuration d'expérience invalide.

    Args:
        message (str): Description de l'erreur
        field (str, optional): Nom du champ fautif (clé inconnue ou borne violée)
    """

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class DomainError(GeoLabError, ValueError):
    """Précondition d'une opération numérique non respectée."""


class NumericalFailure(GeoLabError):
    """Échec numérique pendant une expérience (divergence, non-convergence...)."""


class IntegrationBlowupError(NumericalFailure):
    """L'état de l'intégrateur est devenu non fini."""

    def __init__(self, step, time=None):
        super().__init__(f"Explosion de l'intégration au pas {step} (t={time})")
        self.step = step
        self.time = time


class NoConvergenceError(NumericalFailure):
    """Aucun tir n'a atteint la cible avec la tolérance demandée."""

    def __init__(self, best_error, tolerance):
        super().__init__(
            f"Aucun tir convergé: meilleure erreur de bout {best_error:.3e} > {tolerance:.1e}"
        )
        self.best_error = best_error
        self.tolerance = tolerance


class TrainingDivergedError(NumericalFailure):
    """La perte d'entraînement a dépassé le seuil de divergence."""

    def __init__(self, step, loss):
        super().__init__(f"Entraînement divergé au pas {step} (perte={loss:.3e})")
        self.step = step
        self.loss = loss


class InsufficientDataError(NumericalFailure):
    """Trop peu de répliques convergées pour ajuster une loi."""

    def __init__(self, converged, required):
        super().__init__(
            f"Seulement {converged} répliques convergées, il en faut au moins {required}"
        )
        self.converged = converged
        self.required = required
