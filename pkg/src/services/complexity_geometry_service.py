import numpy as np
import scipy.linalg
import scipy.optimize
import scipy.stats

from core.exceptions import DomainError, NoConvergenceError
from core.numerics import OdeState, principal_log, rk4_integrate
from models.quantum import (
    ComplexityEstimate,
    CurvatureSurvey,
    DeviationCurve,
    GeodesicPath,
    PauliBasis,
    PenaltyMetric,
    PureState,
)
from utils.logging_utils import log_error, log_success, log_warning


class ComplexityGeometryService:
    """
    Service de géométrie de complexité sur les petits groupes unitaires.

    Conventions:
    - les géodésiques partent de l'identité avec U̇ = U·Ω (vitesse du corps)
      et suivent le système d'Euler-Arnold M = GΩ, Ṁ = [M, Ω]
    - la connexion de Levi-Civita est obtenue par la formule de Koszul sur
      les champs invariants; le signe du crochet des champs invariants à
      droite est l'opposé de celui de l'algèbre, ce qui ne change pas la
      courbure sectionnelle
    - les distances renvoyées sont des majorants: le tir multi-départs ne
      certifie pas la minimalité globale
    """

    ENDPOINT_TOL = 1e-4
    STATE_TOL = 1e-6
    UNITARITY_TOL = 1e-10
    AREA_TOL = 1e-14
    PROJECT_EVERY = 10

    def __init__(self, invariance="right"):
        """
        Args:
            invariance (str): "right" ou "left", côté d'invariance de la métrique
                utilisée pour la connexion
        """
        if invariance not in ("right", "left"):
            raise DomainError(f"Invariance inconnue: {invariance!r}")
        self.bracket_sign = -1.0 if invariance == "right" else 1.0
        self._bases = {}

    # --- Algèbre et métriques --------------------------------------------

    def basis(self, qubits):
        if qubits not in self._bases:
            self._bases[qubits] = PauliBasis(qubits)
        return self._bases[qubits]

    def penalty_metric(self, basis, q, penalized=None):
        """
        Métrique à deux niveaux: poids q sur les générateurs pénalisés, 1 ailleurs.

        Par défaut les générateurs à deux corps sont pénalisés pour n=2, et
        le générateur Z pour n=1.

        Args:
            basis (PauliBasis): La base
            q (float): Pénalité ≥ 1
            penalized (list[str], optional): Étiquettes des générateurs pénalisés
        """
        if q < 1:
            raise DomainError(f"La pénalité q doit être ≥ 1 (reçu {q})")
        if penalized is None:
            if basis.qubits == 1:
                penalized = ["Z"]
            else:
                penalized = [label for label, body in zip(basis.labels, basis.body_counts) if body == 2]
        weights = np.ones(basis.size)
        for label in penalized:
            weights[basis.index(label)] = q
        return PenaltyMetric(basis, weights)

    def from_weights(self, basis, weights):
        """
        Métrique diagonale arbitraire.

        Args:
            weights (dict | list): Poids par étiquette (1 par défaut) ou liste complète
        """
        if isinstance(weights, dict):
            values = np.ones(basis.size)
            for label, weight in weights.items():
                values[basis.index(label)] = weight
            return PenaltyMetric(basis, values)
        return PenaltyMetric(basis, weights)

    def bracket(self, basis, X, Y):
        """Commutateur [X, Y] exprimé sur la base de Pauli."""
        return basis.bracket(np.asarray(X, dtype=np.float64), np.asarray(Y, dtype=np.float64))

    # --- Courbure ---------------------------------------------------------

    def _invariant_bracket(self, metric, X, Y):
        return self.bracket_sign * metric.basis.bracket(X, Y)

    def connection(self, metric, X, Y):
        """
        Dérivée covariante ∇_X Y de champs invariants (formule de Koszul).

        2⟨∇_X Y, Z⟩ = ⟨[X,Y], Z⟩ − ⟨[Y,Z], X⟩ + ⟨[Z,X], Y⟩
        """
        c = self.bracket_sign * metric.basis.structure
        w = metric.weights
        first = w * np.einsum("i,j,ijk->k", X, Y, c)
        second = np.einsum("j,jmk,k->m", Y, c, w * X)
        third = np.einsum("i,mik,k->m", X, c, w * Y)
        return 0.5 * (first - second + third) / w

    def curvature_tensor(self, metric, X, Y, Z):
        """R(X,Y)Z = ∇_X∇_Y Z − ∇_Y∇_X Z − ∇_{[X,Y]} Z."""
        return (
            self.connection(metric, X, self.connection(metric, Y, Z))
            - self.connection(metric, Y, self.connection(metric, X, Z))
            - self.connection(metric, self._invariant_bracket(metric, X, Y), Z)
        )

    def sectional_curvature(self, metric, X, Y):
        """
        Courbure sectionnelle du plan engendré par X et Y.

        Args:
            metric (PenaltyMetric): La métrique
            X, Y (ndarray): Coordonnées de deux éléments de l'algèbre

        Returns:
            float: ⟨R(X,Y)Y, X⟩ / (|X|²|Y|² − ⟨X,Y⟩²)

        Raises:
            DomainError: Si X et Y sont (presque) colinéaires
        """
        X = np.asarray(X, dtype=np.float64)
        Y = np.asarray(Y, dtype=np.float64)
        area = metric.inner(X, X) * metric.inner(Y, Y) - metric.inner(X, Y) ** 2
        if area < self.AREA_TOL:
            raise DomainError(f"Section dégénérée (aire² = {area:.3e})")
        return metric.inner(self.curvature_tensor(metric, X, Y, Y), X) / area

    def random_section(self, metric, rng):
        """Paire G-orthonormée aléatoire (Gram-Schmidt)."""
        X = rng.standard_normal(metric.basis.size)
        X = X / metric.norm(X)
        Y = rng.standard_normal(metric.basis.size)
        Y = Y - metric.inner(X, Y) * X
        return X, Y / metric.norm(Y)

    def curvature_survey(self, metric, random_sections, rng):
        """
        Courbure de toutes les sections engendrées par deux générateurs, puis
        de sections aléatoires.

        Args:
            metric (PenaltyMetric): La métrique
            random_sections (int): Nombre de sections aléatoires
            rng (numpy.random.Generator): Générateur seedé

        Returns:
            CurvatureSurvey: Lignes et statistiques
        """
        basis = metric.basis
        rows = []
        unit = np.eye(basis.size)
        for i in range(basis.size):
            for j in range(i + 1, basis.size):
                value = self.sectional_curvature(metric, unit[i], unit[j])
                rows.append({
                    "section_id": len(rows),
                    "generator_i": basis.labels[i],
                    "generator_j": basis.labels[j],
                    "q": metric.penalty,
                    "K": value,
                })
        for _ in range(random_sections):
            X, Y = self.random_section(metric, rng)
            rows.append({
                "section_id": len(rows),
                "generator_i": "random",
                "generator_j": "random",
                "q": metric.penalty,
                "K": self.sectional_curvature(metric, X, Y),
            })

        values = np.array([row["K"] for row in rows])
        return CurvatureSurvey(
            rows=rows,
            fraction_negative=float(np.mean(values < 0)),
            minimum=float(values.min()),
            maximum=float(values.max()),
        )

    # --- Géodésiques ------------------------------------------------------

    def _unpack(self, metric, state):
        d = metric.basis.dimension
        U = state[: d * d].reshape(d, d)
        M = np.real(state[d * d:])
        return U, M

    def _geodesic_field(self, metric):
        basis = metric.basis

        def field(t, state):
            U, M = self._unpack(metric, state)
            omega = metric.raise_index(M)
            dU = U @ basis.matrix(omega)
            dM = basis.bracket(M, omega)
            return np.concatenate([dU.reshape(-1), dM.astype(np.complex128)])

        return field

    def _reunitarize(self, metric):
        d = metric.basis.dimension

        def project(state):
            U = state[: d * d].reshape(d, d)
            W, _ = scipy.linalg.polar(U)
            return np.concatenate([W.reshape(-1), state[d * d:]])

        return project

    def geodesic_shoot(self, metric, omega0, t_end=1.0, h=0.01):
        """
        Intègre la géodésique issue de l'identité avec la vitesse initiale Ω₀.

        U est ré-unitarisé par projection polaire tous les 10 pas.

        Args:
            metric (PenaltyMetric): La métrique
            omega0 (ndarray): Vitesse initiale
            t_end (float): Temps final
            h (float): Pas RK4

        Returns:
            GeodesicPath: La trajectoire échantillonnée à chaque pas

        Raises:
            IntegrationBlowupError: Si l'intégration diverge
        """
        omega0 = np.asarray(omega0, dtype=np.float64)
        if omega0.shape != (metric.basis.size,):
            raise DomainError(f"Vitesse initiale de forme {omega0.shape}, attendu ({metric.basis.size},)")
        d = metric.basis.dimension
        start = np.concatenate([
            np.eye(d, dtype=np.complex128).reshape(-1),
            metric.lower(omega0).astype(np.complex128),
        ])
        trajectory = rk4_integrate(
            self._geodesic_field(metric),
            OdeState(0.0, start, h),
            t_end,
            h,
            project=self._reunitarize(metric),
            project_every=self.PROJECT_EVERY,
        )

        unitaries, velocities = [], []
        for sample in trajectory:
            U, M = self._unpack(metric, sample.state)
            unitaries.append(U.copy())
            velocities.append(metric.raise_index(M))
        return GeodesicPath(
            omega0=omega0,
            times=np.array([sample.time for sample in trajectory]),
            unitaries=unitaries,
            velocities=velocities,
            length=metric.norm(omega0) * t_end,
        )

    def _endpoint(self, metric, omega0, h):
        return self.geodesic_shoot(metric, omega0, 1.0, h).endpoint

    # --- Distances --------------------------------------------------------

    def _check_unitary(self, U, dimension):
        U = np.asarray(U, dtype=np.complex128)
        if U.shape != (dimension, dimension):
            raise DomainError(f"Unitaire de forme {U.shape}, attendu ({dimension}, {dimension})")
        defect = np.linalg.norm(U.conj().T @ U - np.eye(dimension))
        if defect > self.UNITARITY_TOL:
            raise DomainError(f"Matrice non unitaire (‖U†U − I‖ = {defect:.3e})")
        return U

    def _log_initializations(self, basis, U_target):
        """Logarithmes principaux de U·ω pour les racines d-ièmes de l'unité ω."""
        d = basis.dimension
        starts = []
        for j in range(d):
            try:
                log = principal_log(U_target * np.exp(2j * np.pi * j / d))
            except DomainError:
                continue
            starts.append(basis.coefficients(log))
        return starts

    def _shots(self, starts, restarts, size, scale, seed):
        shots = list(starts)
        for i in range(restarts):
            rng = np.random.default_rng(seed + i)
            shots.append(scale * rng.standard_normal(size) / np.sqrt(size))
        return shots

    def _select(self, metric, candidates):
        """Plus courte longueur, ex æquo départagés par l'ordre lexicographique de Ω₀."""
        return min(candidates, key=lambda c: (round(metric.norm(c[0]), 12), tuple(c[0])))

    def complexity_distance(self, metric, U_target, restarts=4, seed=0, h=0.01):
        """
        Majorant de la distance géodésique entre l'identité et U_target.

        Méthode de tir: minimise ‖U(1; Ω₀) − e^{iθ}U_target‖_F, la phase globale
        θ étant alignée sur la trace, depuis les logarithmes principaux de la
        cible (à une racine de l'unité près) et des départs aléatoires seedés.

        Args:
            metric (PenaltyMetric): La métrique
            U_target (ndarray): Unitaire cible
            restarts (int): Nombre de départs aléatoires
            seed (int): Graine de base (départ i: seed + i)
            h (float): Pas RK4

        Returns:
            ComplexityEstimate: Plus petite longueur parmi les tirs convergés

        Raises:
            NoConvergenceError: Si aucun tir n'atteint l'erreur de bout 1e-4
        """
        basis = metric.basis
        try:
            U_target = self._check_unitary(U_target, basis.dimension)
            d = basis.dimension

            def residual(omega0):
                U = self._endpoint(metric, omega0, h)
                overlap = np.trace(U_target.conj().T @ U)
                phase = np.exp(1j * np.angle(overlap)) if abs(overlap) > 0 else 1.0
                diff = (U - phase * U_target).reshape(-1)
                return np.concatenate([diff.real, diff.imag])

            starts = self._log_initializations(basis, U_target)
            scale = max([metric.norm(s) for s in starts] + [1.0])
            shots = self._shots(starts, restarts, basis.size, scale, seed)

            converged, best_error = [], np.inf
            for omega in shots:
                if np.linalg.norm(residual(omega)) < self.ENDPOINT_TOL:
                    solution = np.asarray(omega, dtype=np.float64)
                else:
                    fit = scipy.optimize.least_squares(
                        residual, omega, method="lm", xtol=1e-12, ftol=1e-12, gtol=1e-12
                    )
                    solution = fit.x
                error = float(np.linalg.norm(residual(solution)))
                best_error = min(best_error, error)
                if error < self.ENDPOINT_TOL:
                    converged.append((solution, error))

            if not converged:
                raise NoConvergenceError(best_error, self.ENDPOINT_TOL)

            omega0, error = self._select(metric, converged)
            estimate = ComplexityEstimate(
                distance=metric.norm(omega0),
                omega0=omega0,
                endpoint_error=error,
                converged_shots=len(converged),
                shots=len(shots),
            )
            log_success(
                action="complexity_distance",
                message=f"Distance majorée par {estimate.distance:.6f} ({len(converged)}/{len(shots)} tirs convergés)",
                distance=estimate.distance,
                endpoint_error=error,
                dimension=d,
            )
            return estimate

        except Exception as e:
            log_error(action="complexity_distance", exception=e, qubits=basis.qubits, q=metric.penalty)
            raise

    def _rotation_generator(self, basis, psi):
        """
        Générateur de la rotation plane amenant |0…0⟩ sur ψ (à une phase près).

        C'est la géodésique bi-invariante de l'espace des états; elle sert de
        point de départ au tir.
        """
        reference = np.zeros(basis.dimension, dtype=np.complex128)
        reference[0] = 1.0
        overlap = psi[0]
        aligned = psi * np.exp(-1j * np.angle(overlap)) if abs(overlap) > 0 else psi
        cos_theta = min(abs(overlap), 1.0)
        orthogonal = aligned - cos_theta * reference
        sin_theta = np.linalg.norm(orthogonal)
        if sin_theta < 1e-15:
            return np.zeros(basis.size)
        direction = orthogonal / sin_theta
        theta = np.arctan2(sin_theta, cos_theta)
        A = theta * (np.outer(direction, reference.conj()) - np.outer(reference, direction.conj()))
        return basis.coefficients(A)

    def state_complexity(self, metric, psi, restarts=4, seed=0, h=0.01):
        """
        Majorant de la complexité d'un état: plus courte géodésique U avec
        U|0…0⟩ = ψ à une phase près.

        Chaque tir minimise ½|Ω₀|²_G + μ(1 − F) avec μ croissant jusqu'à 1e8
        (F = |⟨ψ|U(1)|0…0⟩|²), puis projette exactement sur la contrainte par
        moindres carrés. Un tir est accepté si 1 − F < 1e-6.

        Args:
            metric (PenaltyMetric): La métrique
            psi (PureState): L'état cible
            restarts (int): Nombre de départs aléatoires
            seed (int): Graine de base
            h (float): Pas RK4

        Returns:
            ComplexityEstimate: Le meilleur tir accepté

        Raises:
            NoConvergenceError: Si aucun tir n'est accepté
        """
        basis = metric.basis
        try:
            if psi.dimension != basis.dimension:
                raise DomainError(f"État de dimension {psi.dimension} pour {basis.qubits} qubit(s)")
            target = psi.amplitudes

            def column(omega0):
                return self._endpoint(metric, omega0, h)[:, 0]

            def infidelity(omega0):
                return 1.0 - abs(np.vdot(target, column(omega0))) ** 2

            if infidelity(np.zeros(basis.size)) < self.STATE_TOL:
                return ComplexityEstimate(0.0, np.zeros(basis.size), 0.0, 1, 1)

            def residual(omega0):
                phi = column(omega0)
                overlap = np.vdot(target, phi)
                phase = np.exp(1j * np.angle(overlap)) if abs(overlap) > 0 else 1.0
                diff = phi - phase * target
                return np.concatenate([diff.real, diff.imag])

            start = self._rotation_generator(basis, target)
            shots = self._shots([start], restarts, basis.size, max(metric.norm(start), 1.0), seed)

            accepted, best_error = [], np.inf
            for omega in shots:
                x = np.asarray(omega, dtype=np.float64)
                for mu in 10.0 ** np.arange(0, 9):
                    fit = scipy.optimize.minimize(
                        lambda w, mu=mu: 0.5 * metric.inner(w, w) + mu * infidelity(w),
                        x,
                        method="BFGS",
                        options={"gtol": 1e-9, "maxiter": 200},
                    )
                    x = fit.x
                projected = scipy.optimize.least_squares(residual, x, method="lm", xtol=1e-14, ftol=1e-14)
                x = projected.x
                error = float(infidelity(x))
                best_error = min(best_error, error)
                if error < self.STATE_TOL:
                    accepted.append((x, error))

            if not accepted:
                raise NoConvergenceError(best_error, self.STATE_TOL)

            omega0, error = self._select(metric, accepted)
            log_success(
                action="state_complexity",
                message=f"Complexité d'état majorée par {metric.norm(omega0):.6f}",
                distance=metric.norm(omega0),
                infidelity=error,
            )
            return ComplexityEstimate(metric.norm(omega0), omega0, error, len(accepted), len(shots))

        except Exception as e:
            log_error(action="state_complexity", exception=e, qubits=basis.qubits, q=metric.penalty)
            raise

    # --- Sensibilité ------------------------------------------------------

    def jacobi_deviation(self, metric, omega0, perturbation, t_end, h=0.01):
        """
        Écart entre deux géodésiques de vitesses initiales Ω₀ et Ω₀ + δ.

        Approximation par différences finies du champ de Jacobi:
        ‖U₁(t) − U₂(t)‖_F / ‖δ‖_G à chaque pas.

        Raises:
            DomainError: Si ‖δ‖_G > 1e-4 ‖Ω₀‖_G ou δ = 0
        """
        omega0 = np.asarray(omega0, dtype=np.float64)
        perturbation = np.asarray(perturbation, dtype=np.float64)
        size = metric.norm(perturbation)
        if size == 0 or size > 1e-4 * metric.norm(omega0):
            raise DomainError(
                f"Perturbation de norme {size:.3e} hors de ]0, 1e-4·‖Ω₀‖_G] "
                f"(‖Ω₀‖_G = {metric.norm(omega0):.3e})"
            )
        first = self.geodesic_shoot(metric, omega0, t_end, h)
        second = self.geodesic_shoot(metric, omega0 + perturbation, t_end, h)
        values = np.array([
            np.linalg.norm(a - b) / size for a, b in zip(first.unitaries, second.unitaries)
        ])
        return DeviationCurve(times=first.times, values=values)

    def fit_log_growth(self, curve, floor, ceiling):
        """
        Ajuste log(écart) = a·t + b sur la fenêtre floor ≤ écart ≤ ceiling.

        Returns:
            tuple[float, float, float]: (pente, ordonnée à l'origine, R²)

        Raises:
            DomainError: Si la fenêtre contient moins de 3 points
        """
        mask = (curve.values >= floor) & (curve.values <= ceiling) & (curve.times > 0)
        if np.count_nonzero(mask) < 3:
            log_warning(
                action="fit_log_growth",
                message="Fenêtre d'ajustement trop courte",
                points=int(np.count_nonzero(mask)),
            )
            raise DomainError(f"Seulement {np.count_nonzero(mask)} points dans la fenêtre [{floor}, {ceiling}]")
        fit = scipy.stats.linregress(curve.times[mask], np.log(curve.values[mask]))
        return float(fit.slope), float(fit.intercept), float(fit.rvalue**2)

    def composition_sensitivity(self, unitaries, perturbed_first):
        """
        Amplification d'une perturbation du premier facteur d'un produit d'unitaires.

        Returns:
            float: ‖U_n…U_2 U_1' − U_n…U_1‖_F / ‖U_1' − U_1‖_F (vaut 1: la
                composition unitaire est une isométrie)
        """
        if not unitaries:
            raise DomainError("Au moins un facteur est requis")
        tail = np.eye(unitaries[0].shape[0], dtype=np.complex128)
        for U in unitaries[1:]:
            tail = U @ tail
        change = np.linalg.norm(perturbed_first - unitaries[0])
        if change == 0:
            raise DomainError("La perturbation du premier facteur est nulle")
        return float(np.linalg.norm(tail @ perturbed_first - tail @ unitaries[0]) / change)
