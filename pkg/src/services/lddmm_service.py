import itertools

import numpy as np

from core.exceptions import DomainError
from models.lddmm import (
    DiffeoMap,
    EnergyTerms,
    FlowResult,
    Image,
    KernelOp,
    Registration,
    VelocityField,
)
from utils.logging_utils import log_error, log_success, log_warning


class Stencil:
    """
    Poids d'interpolation (bi)linéaire de la grille en un ensemble de points.

    Les points hors du domaine sont ramenés sur le bord le plus proche; la
    dérivée de l'interpolant est alors nulle selon l'axe concerné.
    """

    def __init__(self, grid, points):
        self.grid = grid
        dims = grid.dims
        indices, fractions, inside = [], [], []
        for axis in range(dims):
            n = grid.sizes[axis]
            c = points[axis] / grid.spacing[axis]
            inside.append(((c > 0) & (c < n - 1)).astype(np.float64))
            c = np.clip(c, 0.0, n - 1)
            i = np.minimum(np.floor(c).astype(np.intp), n - 2)
            indices.append(i)
            fractions.append(c - i)

        self.corners = []
        for offsets in itertools.product((0, 1), repeat=dims):
            index = tuple(indices[axis] + offsets[axis] for axis in range(dims))
            factors = [fractions[axis] if offsets[axis] else 1.0 - fractions[axis] for axis in range(dims)]
            weight = np.prod(factors, axis=0)
            slopes = []
            for axis in range(dims):
                slope = (1.0 if offsets[axis] else -1.0) * inside[axis] / grid.spacing[axis]
                for other in range(dims):
                    if other != axis:
                        slope = slope * factors[other]
                slopes.append(slope)
            self.corners.append((index, weight, slopes))

    def sample(self, values):
        """Interpole un champ (..., *sizes) aux points: résultat (..., *points)."""
        return sum(weight * values[(Ellipsis,) + index] for index, weight, _ in self.corners)

    def sample_gradient(self, values):
        """Gradient de l'interpolant: résultat (dims, ..., *points)."""
        return np.stack([
            sum(slopes[axis] * values[(Ellipsis,) + index] for index, _, slopes in self.corners)
            for axis in range(self.grid.dims)
        ])

    def scatter(self, values):
        """Transposée de sample pour un champ vectoriel (C, *points) -> (C, *sizes)."""
        out = np.zeros((values.shape[0],) + self.grid.sizes)
        for index, weight, _ in self.corners:
            for component in range(values.shape[0]):
                np.add.at(out[component], index, weight * values[component])
        return out


class LddmmService:
    """
    Service de recalage difféomorphe (LDDMM) par descente de gradient sur u.

    Conventions de discrétisation, T pas de temps de durée Δt = 1/T:
    - les transformations inverses ψ_k = φ_{t_k,0} sont obtenues par schéma
      semi-lagrangien: ψ_{k+1}(x) = ψ_k(x − Δt u_k(x)), et l'image déformée
      est J = I0∘ψ_T
    - les transformations directes φ_{0,t_k} suivent les caractéristiques:
      φ_{0,k+1} = (id + Δt u_k)∘φ_{0,k}; le déplacement rapporté est φ_{0,1}
    - le gradient est celui de l'énergie discrète (adjoint exact du schéma),
      ce qui le rend vérifiable par différences finies.
    """

    def kernel(self, grid, cfg):
        return KernelOp(grid, cfg.kernel_sigma)

    # --- Transformations -------------------------------------------------

    def _inverse_maps(self, u):
        """Déplacements de ψ_0..ψ_T et stencils des points de départ y_k."""
        grid = u.grid
        x = grid.coordinates()
        displacements = [np.zeros(grid.vector_shape())]
        stencils = []
        for k in range(u.timesteps):
            y = x - u.dt * u.values[k]
            stencil = Stencil(grid, y)
            displacements.append(y + stencil.sample(displacements[-1]) - x)
            stencils.append(stencil)
        return displacements, stencils

    def inverse_endpoint(self, u):
        """Transformation ψ_T = φ_{1,0} utilisée pour déformer l'image source."""
        displacements, _ = self._inverse_maps(u)
        return DiffeoMap(u.grid, displacements[-1])

    def integrate_flow(self, u):
        """
        Intègre le flot d'un champ de vitesse.

        Args:
            u (VelocityField): Le champ

        Returns:
            FlowResult: Transformations directes φ_{0,t}, inverses φ_{t,0} et
                de transport φ_{t,1}; la transformation finale porte
                l'indicateur de difféomorphisme
        """
        grid = u.grid
        x = grid.coordinates()
        dt = u.dt

        forward = [DiffeoMap.identity(grid)]
        positions = x.copy()
        for k in range(u.timesteps):
            positions = positions + dt * Stencil(grid, positions).sample(u.values[k])
            forward.append(DiffeoMap.from_positions(grid, positions))

        reverse = [DiffeoMap.identity(grid)]
        for k in range(u.timesteps - 1, -1, -1):
            start = x + dt * u.values[k]
            displacement = start + Stencil(grid, start).sample(reverse[0].displacement) - x
            reverse.insert(0, DiffeoMap(grid, displacement))

        displacements, _ = self._inverse_maps(u)
        inverse = [DiffeoMap(grid, d) for d in displacements]

        endpoint = forward[-1]
        endpoint.diffeomorphic = bool(np.all(self.jacobian_determinant(endpoint) > 0))
        if not endpoint.diffeomorphic:
            log_warning(
                action="integrate_flow",
                message="Transformation finale non difféomorphe (déterminant jacobien ≤ 0)",
                min_jacobian=float(self.jacobian_determinant(endpoint).min()),
            )
        return FlowResult(forward=forward, reverse=reverse, inverse=inverse)

    def jacobian_determinant(self, phi):
        """Déterminant jacobien nodal de x -> x + déplacement (différences centrées)."""
        positions = phi.positions()
        spacing = phi.grid.spacing
        if phi.grid.dims == 1:
            return np.gradient(positions[0], spacing[0])
        d00 = np.gradient(positions[0], spacing[0], axis=0)
        d01 = np.gradient(positions[0], spacing[1], axis=1)
        d10 = np.gradient(positions[1], spacing[0], axis=0)
        d11 = np.gradient(positions[1], spacing[1], axis=1)
        return d00 * d11 - d01 * d10

    def warp(self, image, phi):
        """
        Rééchantillonne une image: (I∘φ)(x) = I(x + déplacement(x)).

        Raises:
            DomainError: Si l'image et la transformation n'ont pas la même grille
        """
        self._check_grid(image.grid, phi.grid)
        return Image(image.grid, Stencil(image.grid, phi.positions()).sample(image.values))

    def sample_displacement(self, phi, point):
        """Déplacement de φ interpolé en un point physique."""
        points = np.array(point, dtype=np.float64).reshape((phi.grid.dims,) + (1,) * phi.grid.dims)
        values = Stencil(phi.grid, points).sample(phi.displacement)
        return values.reshape(phi.grid.dims)

    # --- Énergie et gradients --------------------------------------------

    def energy(self, u, I0, I1, cfg):
        """
        Énergie discrète du recalage.

        cinétique = Σ_k ½ Δt ⟨u_k, L u_k⟩ et attache = β Σ_noeuds (I0∘ψ_T − I1)² ΔV.

        Returns:
            EnergyTerms: (total, cinétique, attache)
        """
        self._check_inputs(u, I0, I1)
        kernel = self.kernel(u.grid, cfg)
        kinetic = sum(0.5 * u.dt * kernel.norm_sq(u.values[k]) for k in range(u.timesteps))

        displacements, _ = self._inverse_maps(u)
        warped = Stencil(u.grid, u.grid.coordinates() + displacements[-1]).sample(I0.values)
        matching = cfg.beta * float(np.sum((warped - I1.values) ** 2)) * u.grid.node_volume
        return EnergyTerms(kinetic + matching, kinetic, matching)

    def endpoint_matching_gradient(self, psi, I0, I1, cfg):
        """Gradient du terme d'attache par rapport à la transformation finale: 2β(I0∘ψ − I1)∇I0∘ψ."""
        self._check_grid(psi.grid, I0.grid)
        stencil = Stencil(psi.grid, psi.positions())
        residual = stencil.sample(I0.values) - I1.values
        return 2.0 * cfg.beta * residual * stencil.sample_gradient(I0.values)

    def _transported_momenta(self, u, I0, I1, cfg, preconditioned=True):
        """
        Moments m_k (par unité de volume) ramenés à chaque pas de temps.

        Le moment final est le gradient du terme d'attache par rapport à ψ_T;
        il est ramené vers k par la transposée de l'interpolation puis par la
        jacobienne transposée de ψ_k. Sans préconditionnement le moment final
        est utilisé tel quel à chaque pas.
        """
        grid = u.grid
        displacements, stencils = self._inverse_maps(u)
        endpoint = DiffeoMap(grid, displacements[-1])
        momentum = self.endpoint_matching_gradient(endpoint, I0, I1, cfg)
        if not preconditioned:
            return [momentum] * u.timesteps

        # λ en variables nodales (non divisées par ΔV)
        adjoint = momentum * grid.node_volume
        momenta = [None] * u.timesteps
        for k in range(u.timesteps - 1, -1, -1):
            stencil = stencils[k]
            jacobian = stencil.sample_gradient(displacements[k])
            transported = adjoint + np.einsum("ba...,a...->b...", jacobian, adjoint)
            momenta[k] = transported / grid.node_volume
            adjoint = stencil.scatter(adjoint)
        return momenta

    def l2_gradient(self, u, I0, I1, cfg):
        """
        Gradient exact de l'énergie discrète par rapport aux valeurs de u.

        Returns:
            VelocityField: Δt ΔV (L u_k − m_k) pour chaque pas k
        """
        self._check_inputs(u, I0, I1)
        kernel = self.kernel(u.grid, cfg)
        momenta = self._transported_momenta(u, I0, I1, cfg)
        scale = u.dt * u.grid.node_volume
        values = np.stack([
            scale * (kernel.sharpen(u.values[k]) - momenta[k]) for k in range(u.timesteps)
        ])
        return VelocityField(u.grid, values)

    def gradient(self, u, I0, I1, cfg, preconditioned=True):
        """
        Gradient de l'énergie pour la métrique de V: u_k − K★m_k.

        C'est le gradient L² lissé par le noyau, renormalisé par Δt ΔV. Avec
        preconditioned=False, le noyau et le transport par la jacobienne sont
        remplacés par l'identité: la partie attache devient le gradient brut
        du terme d'attache par rapport à la transformation finale.

        Args:
            u (VelocityField): Champ courant
            I0 (Image): Image source
            I1 (Image): Image cible
            cfg (RegConfig): Paramètres
            preconditioned (bool): Active le lissage et le transport

        Returns:
            VelocityField: Le gradient
        """
        self._check_inputs(u, I0, I1)
        kernel = self.kernel(u.grid, cfg)
        momenta = self._transported_momenta(u, I0, I1, cfg, preconditioned)
        smooth = kernel.smooth if preconditioned else (lambda m: m)
        values = np.stack([u.values[k] - smooth(momenta[k]) for k in range(u.timesteps)])
        return VelocityField(u.grid, values)

    def descent_step(self, u, g, eta):
        """Un pas u <- u − η g sans recherche linéaire (g: gradient déjà évalué en u)."""
        return VelocityField(u.grid, u.values - eta * g.values)

    def path_length(self, u, kernel):
        """Longueur Σ_k sqrt(⟨L u_k, u_k⟩) Δt du chemin de difféomorphismes."""
        return float(sum(np.sqrt(max(kernel.norm_sq(u.values[k]), 0.0)) * u.dt for k in range(u.timesteps)))

    def euler_poincare_residual(self, u, I0, I1, cfg):
        """
        Écart à la condition d'optimalité L u_k = m_k (moment transporté).

        Returns:
            tuple[float, float]: (norme duale de L u − m, norme L² du gradient V)
        """
        kernel = self.kernel(u.grid, cfg)
        g = self.gradient(u, I0, I1, cfg)
        dual = sum(u.dt * kernel.norm_sq(g.values[k]) for k in range(u.timesteps))
        plain = sum(u.dt * kernel.inner(g.values[k], g.values[k]) for k in range(u.timesteps))
        return float(np.sqrt(max(dual, 0.0))), float(np.sqrt(plain))

    # --- Recalage ----------------------------------------------------------

    def register(self, I0, I1, cfg, preconditioned=True):
        """
        Recale I0 sur I1 par descente de gradient avec recherche linéaire.

        Le pas est divisé par deux tant que l'énergie augmente (au plus
        cfg.max_halvings fois) et la valeur réduite est conservée pour les
        itérations suivantes. Arrêt quand la décroissance relative passe sous
        cfg.tol, quand l'énergie est nulle ou après cfg.max_iters itérations.

        Args:
            I0 (Image): Image source (déformée)
            I1 (Image): Image cible
            cfg (RegConfig): Paramètres
            preconditioned (bool): Utilise le gradient de la métrique de V

        Returns:
            Registration: Champ final, transformation φ_{0,1}, trace d'énergie,
                résidus d'optimalité et indicateurs
        """
        try:
            self._check_grid(I0.grid, I1.grid)
            u = VelocityField.zeros(I0.grid, cfg.timesteps)
            current = self.energy(u, I0, I1, cfg)
            trace = [current]
            eta = cfg.eta
            converged = False
            iterations = 0

            while iterations < cfg.max_iters:
                if current.total == 0.0:
                    converged = True
                    break
                g = self.gradient(u, I0, I1, cfg, preconditioned)
                candidate, energy = None, None
                for _ in range(cfg.max_halvings + 1):
                    candidate = self.descent_step(u, g, eta)
                    energy = self.energy(candidate, I0, I1, cfg)
                    if energy.total <= current.total:
                        break
                    eta *= 0.5
                else:
                    log_warning(
                        action="register",
                        message="Recherche linéaire épuisée: aucun pas ne fait décroître l'énergie",
                        iteration=iterations,
                        eta=eta,
                        energy=current.total,
                    )
                    break

                iterations += 1
                decrease = (current.total - energy.total) / current.total
                u, current = candidate, energy
                trace.append(current)
                if decrease < cfg.tol:
                    converged = True
                    break

            flow = self.integrate_flow(u)
            ep_residual, gradient_residual = self.euler_poincare_residual(u, I0, I1, cfg)
            result = Registration(
                velocity=u,
                phi=flow.endpoint,
                energy_trace=trace,
                ep_residual=ep_residual,
                gradient_residual=gradient_residual,
                iterations=iterations,
                converged=converged,
                path_length=self.path_length(u, self.kernel(u.grid, cfg)),
            )

            log_success(
                action="register",
                message=f"Recalage terminé en {iterations} itérations (énergie {current.total:.3e})",
                iterations=iterations,
                converged=converged,
                total_energy=current.total,
                diffeomorphic=flow.endpoint.diffeomorphic,
            )
            return result

        except Exception as e:
            log_error(action="register", exception=e, grid=str(I0.grid.sizes), beta=cfg.beta)
            raise

    # --- Images synthétiques ---------------------------------------------

    def gaussian_image(self, grid, center, width, amplitude=1.0):
        """
        Bosse gaussienne (1D) ou tache (2D) centrée en un point physique.

        Args:
            grid (Grid): Grille support
            center (float | tuple): Centre physique
            width (float): Écart-type physique
            amplitude (float): Hauteur du pic
        """
        center = np.atleast_1d(np.array(center, dtype=np.float64))
        if center.size != grid.dims:
            raise DomainError(f"Centre de dimension {center.size} sur une grille {grid.dims}D")
        x = grid.coordinates()
        squared = sum((x[axis] - center[axis]) ** 2 for axis in range(grid.dims))
        return Image(grid, amplitude * np.exp(-squared / (2.0 * width**2)))

    def _check_grid(self, a, b):
        if a != b:
            raise DomainError(f"Grilles incompatibles: {a.sizes}/{a.spacing} et {b.sizes}/{b.spacing}")

    def _check_inputs(self, u, I0, I1):
        self._check_grid(u.grid, I0.grid)
        self._check_grid(I0.grid, I1.grid)
