import shutil
from pathlib import Path

import numpy as np

from core.exceptions import ConfigError, DomainError
from core.logging import clear_run_context, set_run_context
from core.numerics import expm
from database.config import REGISTRY_FILENAME
from models.lddmm import Grid, Image, RegConfig
from models.linear_net import GdConfig
from models.quantum import PureState
from utils.csv_utils import write_csv
from utils.date_utils import to_iso, utc_now
from utils.image_utils import read_image_csv, write_image_csv, write_pgm
from utils.json_utils import to_builtin, write_json
from utils.logging_utils import log_error, log_success, log_warning

MANIFEST_NAME = "run_record.json"
METRICS_NAME = "metrics.json"


class ExperimentController:
    """
    Contrôleur d'exécution des expériences.

    Il résout la graine, délègue le calcul au service propriétaire, écrit les
    artefacts du type d'expérience puis le manifeste, et indexe le run dans le
    registre. En cas d'échec, le répertoire du run est supprimé avant que
    l'erreur ne remonte.
    """

    def __init__(self, config_service, linear_service, lddmm_service, geometry_service,
                 experiment_service, registry_factory, run_view, tool_version):
        """
        Args:
            config_service (ConfigService): Lecture des configurations
            linear_service (LinearNetService): Réseaux linéaires
            lddmm_service (LddmmService): Recalage difféomorphe
            geometry_service (ComplexityGeometryService): Géométrie de complexité
            experiment_service (ExperimentService): Études empiriques
            registry_factory (callable): output_dir -> RegistryService
            run_view (RunView): Affichage du résultat
            tool_version (str): Version enregistrée dans les manifestes
        """
        self.config_service = config_service
        self.linear = linear_service
        self.lddmm = lddmm_service
        self.geometry = geometry_service
        self.experiments = experiment_service
        self.registry_factory = registry_factory
        self.view = run_view
        self.tool_version = tool_version
        self.handlers = {
            "lin-dyn": self.run_lin_dyn,
            "lddmm": self.run_lddmm,
            "curvature": self.run_curvature,
            "complexity": self.run_complexity,
            "sensitivity": self.run_sensitivity,
            "prob-study": self.run_prob_study,
        }

    def run_file(self, config_path, cli_seed=None, output_dir=None, environ=None):
        """
        Lit une configuration depuis un fichier puis exécute le run.

        Raises:
            ConfigError: Configuration invalide (code de sortie 2)
            NumericalFailure | DomainError: Échec du calcul (code de sortie 3)
        """
        config = self.config_service.load(config_path)
        config, seed_source = self.config_service.resolve_seed(config, cli_seed, environ)
        if output_dir is not None:
            config.output_dir = str(output_dir)
        manifest = self.run(config, seed_source)
        self.view.display_run(manifest)
        return manifest

    def run(self, config, seed_source="config"):
        """
        Exécute une expérience et écrit ses artefacts dans <output_dir>/<run_id>/.

        Args:
            config (ExperimentConfig): Configuration validée
            seed_source (str): Origine de la graine ("config", "env" ou "cli")

        Returns:
            dict: Le manifeste run_record.json écrit
        """
        run_id = config.run_id
        output_dir = Path(config.output_dir)
        run_dir = output_dir / run_id
        registry = None
        set_run_context(run_id, config.kind, config.seed)
        try:
            if run_dir.exists():
                shutil.rmtree(run_dir)
            run_dir.mkdir(parents=True)
            started = utc_now()

            metrics, files = self.handlers[config.kind](config, run_dir)
            write_json(run_dir / METRICS_NAME, metrics)
            files = sorted(files + [METRICS_NAME, MANIFEST_NAME])

            manifest = {
                "run_id": run_id,
                "kind": config.kind,
                "config_hash": config.config_hash(),
                "seed": config.seed,
                "seed_source": seed_source,
                "tool_version": self.tool_version,
                "started_at": to_iso(started),
                "finished_at": to_iso(utc_now()),
                "status": "success",
                "metrics": to_builtin(metrics),
                "files": files,
                "config": config.to_dict(),
            }
            write_json(run_dir / MANIFEST_NAME, manifest)

            registry = self.registry_factory(output_dir)
            registry.upsert(manifest, run_dir)

            log_success(
                action="run",
                message=f"Run {run_id} terminé",
                run_id=run_id,
                kind=config.kind,
                seed=config.seed,
            )
            return manifest

        except Exception as e:
            # Pas de run partiel: le rapport n'agrège que des runs complets
            shutil.rmtree(run_dir, ignore_errors=True)
            if registry is None and (output_dir / REGISTRY_FILENAME).exists():
                registry = self.registry_factory(output_dir)
            if registry is not None:
                registry.delete(run_id)
            log_error(action="run", exception=e, run_id=run_id, kind=config.kind, seed=config.seed)
            raise

        finally:
            if registry is not None:
                registry.close()
            clear_run_context()

    # --- Dynamiques linéaires ---------------------------------------------

    def run_lin_dyn(self, config, run_dir):
        p = config.params
        rng = np.random.default_rng(config.seed)
        train, _, _ = self.experiments.linear_task(rng, p.dim, p.samples, 1)
        We0 = np.eye(p.dim) + p.init_scale * rng.standard_normal((p.dim, p.dim)) / np.sqrt(p.dim)
        cfg = GdConfig(eta=p.eta, weight_decay=p.weight_decay, steps=p.steps)

        comparison = self.experiments.trajectory_compare(We0, train, cfg, p.depth, p.steps)
        write_csv(
            run_dir / "trajectory.csv",
            ["step", "deviation", "loss_layers", "loss_end_to_end"],
            [
                [step, comparison.deviation[step], comparison.loss_layers[step], comparison.loss_end_to_end[step]]
                for step in range(p.steps + 1)
            ],
        )

        rows = self.experiments.acceleration_study(We0, train, cfg, p.acceleration_depths, p.steps)
        write_csv(run_dir / "acceleration.csv", ["step", "depth", "loss"], rows)

        final_losses = {f"depth_{row['depth']}": row["loss"] for row in rows if row["step"] == p.steps}
        metrics = {
            "initial_balancedness_defect": self.linear.balancedness_defect(self.linear.balanced_init(We0, p.depth)),
            "final_deviation": comparison.deviation[-1],
            "max_deviation": comparison.deviation.max(),
            "final_loss_layers": comparison.loss_layers[-1],
            "final_loss_end_to_end": comparison.loss_end_to_end[-1],
            "acceleration_final_loss": final_losses,
        }
        return metrics, ["trajectory.csv", "acceleration.csv"]

    # --- Recalage ---------------------------------------------------------

    def _load_image(self, path, name):
        try:
            values, spacing = read_image_csv(path)
        except (OSError, ValueError) as e:
            raise ConfigError(f"{name}: impossible de lire l'image {path} ({e})", name)
        if values.shape[0] == 1:
            values = values[0]
        return Image(Grid(values.shape, (spacing,) * values.ndim), values)

    def _image_pair(self, p):
        """
        Images source et cible du recalage.

        Returns:
            tuple: (source, cible, point de lecture du déplacement, décalage attendu ou None)
        """
        if p.source_csv is not None:
            source = self._load_image(p.source_csv, "source_csv")
            target = self._load_image(p.target_csv, "target_csv")
            if source.grid != target.grid:
                raise DomainError(
                    f"Images sur des grilles différentes: {source.grid.sizes} pas {source.grid.spacing} "
                    f"contre {target.grid.sizes} pas {target.grid.spacing}"
                )
            grid = source.grid
            center = np.array([0.5 * (n - 1) * h for n, h in zip(grid.sizes, grid.spacing)])
            return source, target, center, None

        grid = Grid((p.size,) * p.dims, (p.spacing,) * p.dims)
        center = np.full(p.dims, 0.5 * (p.size - 1) * p.spacing)
        target_center = center.copy()
        if not p.identity_pair:
            target_center[0] += p.shift * p.spacing

        width = p.image_width * p.spacing
        source = self.lddmm.gaussian_image(grid, center, width)
        target = self.lddmm.gaussian_image(grid, target_center, width)
        return source, target, center, 0.0 if p.identity_pair else p.shift

    def run_lddmm(self, config, run_dir):
        p = config.params
        source, target, center, expected_shift = self._image_pair(p)
        grid = source.grid
        spacing = grid.spacing[0]
        cfg = RegConfig(
            beta=p.beta,
            timesteps=p.timesteps,
            eta=p.eta,
            max_iters=p.max_iters,
            tol=p.tol,
            kernel_sigma=p.kernel_sigma,
        )

        result = self.lddmm.register(source, target, cfg)
        warped = self.lddmm.warp(source, self.lddmm.inverse_endpoint(result.velocity))

        write_csv(
            run_dir / "energy.csv",
            ["iteration", "total", "kinetic", "matching"],
            [[i, e.total, e.kinetic, e.matching] for i, e in enumerate(result.energy_trace)],
        )
        low = min(source.values.min(), target.values.min())
        high = max(source.values.max(), target.values.max())
        for name, image in (("source", source), ("target", target), ("warped", warped)):
            write_pgm(run_dir / f"{name}.pgm", image.values, low, high)
        write_image_csv(run_dir / "warped.csv", warped.values, spacing)
        self._write_displacement(run_dir / "displacement.csv", result.phi)

        energy = result.final_energy
        recovered = self.lddmm.sample_displacement(result.phi, center)[0] / spacing
        min_jacobian = float(self.lddmm.jacobian_determinant(result.phi).min())
        metrics = {
            "total_energy": energy.total,
            "kinetic_energy": energy.kinetic,
            "matching_energy": energy.matching,
            "iterations": result.iterations,
            "converged": result.converged,
            "path_length": result.path_length,
            "ep_residual": result.ep_residual,
            "gradient_residual": result.gradient_residual,
            "recovered_shift": float(recovered),
            "expected_shift": expected_shift,
            "diffeomorphic": bool(result.phi.diffeomorphic),
            "min_jacobian": min_jacobian,
        }
        registration = dict(metrics)
        registration["energy_monotone"] = bool(
            all(b.total <= a.total for a, b in zip(result.energy_trace, result.energy_trace[1:]))
        )
        registration["grid"] = {"sizes": list(grid.sizes), "spacing": list(grid.spacing)}
        write_json(run_dir / "registration.json", registration)

        files = ["energy.csv", "source.pgm", "target.pgm", "warped.pgm", "warped.csv",
                 "displacement.csv", "registration.json"]
        return metrics, files

    def _write_displacement(self, path, phi):
        grid = phi.grid
        x = grid.coordinates()
        if grid.dims == 1:
            rows = [[i, x[0, i], phi.displacement[0, i]] for i in range(grid.sizes[0])]
            return write_csv(path, ["i", "x", "displacement"], rows)
        rows = [
            [i, j, x[0, i, j], x[1, i, j], phi.displacement[0, i, j], phi.displacement[1, i, j]]
            for i in range(grid.sizes[0])
            for j in range(grid.sizes[1])
        ]
        return write_csv(path, ["i", "j", "x", "y", "displacement_x", "displacement_y"], rows)

    # --- Géométrie de complexité ------------------------------------------

    def _metric(self, p):
        basis = self.geometry.basis(p.qubits)
        if p.weights is not None:
            return self.geometry.from_weights(basis, p.weights)
        return self.geometry.penalty_metric(basis, p.q, p.penalized)

    def _vector(self, basis, coefficients):
        vector = np.zeros(basis.size)
        for label, value in coefficients.items():
            vector[basis.index(label)] = value
        return vector

    def run_curvature(self, config, run_dir):
        p = config.params
        metric = self._metric(p)
        basis = metric.basis
        rng = np.random.default_rng(config.seed)

        survey = self.geometry.curvature_survey(metric, p.random_sections, rng)
        write_csv(run_dir / "curvature.csv", ["section_id", "generator_i", "generator_j", "q", "K"], survey.rows)

        omega0 = self._vector(basis, p.omega0)
        perturbation = self._vector(basis, p.perturbation)
        curve = self.geometry.jacobi_deviation(metric, omega0, perturbation, p.t_end, p.h)
        write_csv(run_dir / "deviation.csv", ["t", "deviation"], zip(curve.times, curve.values))

        try:
            slope, _, r2 = self.geometry.fit_log_growth(curve, p.fit_floor, p.fit_ceiling)
        except DomainError:
            slope = r2 = None

        half = int(np.argmin(np.abs(curve.times - 0.5 * curve.times[-1])))
        path = self.geometry.geodesic_shoot(metric, omega0, p.t_end, p.h)
        speeds = np.array([metric.inner(v, v) for v in path.velocities])
        unitarity = max(
            float(np.linalg.norm(U.conj().T @ U - np.eye(basis.dimension))) for U in path.unitaries
        )

        metrics = {
            "sections": len(survey.rows),
            "fraction_negative": survey.fraction_negative,
            "min_curvature": survey.minimum,
            "max_curvature": survey.maximum,
            "growth_slope": slope,
            "growth_r2": r2,
            "doubling_ratio": float(curve.values[-1] / curve.values[half]) if curve.values[half] > 0 else None,
            "final_deviation": float(curve.values[-1]),
            "energy_drift": float(np.max(np.abs(speeds - speeds[0])) / speeds[0]) if speeds[0] > 0 else 0.0,
            "unitarity_defect": unitarity,
            "composition_ratio": self._composition_ratio(basis, rng),
        }
        return metrics, ["curvature.csv", "deviation.csv"]

    def _composition_ratio(self, basis, rng, factors=10):
        unitaries = [expm(basis.matrix(rng.standard_normal(basis.size))) for _ in range(factors)]
        nudge = expm(basis.matrix(1e-6 * rng.standard_normal(basis.size)))
        return self.geometry.composition_sensitivity(unitaries, nudge @ unitaries[0])

    def run_complexity(self, config, run_dir):
        p = config.params
        metric = self._metric(p)
        basis = metric.basis
        rng = np.random.default_rng(config.seed)

        generators = [(f"target{i}", self._vector(basis, c)) for i, c in enumerate(p.targets)]
        for i in range(p.random_targets):
            direction = rng.standard_normal(basis.size)
            generators.append((f"random{i}", p.target_norm * direction / np.linalg.norm(direction)))

        rows = []
        for target_id, coefficients in generators:
            estimate = self.geometry.complexity_distance(
                metric, expm(basis.matrix(coefficients)), p.restarts, config.seed, p.h
            )
            rows.append({
                "target_id": target_id,
                "distance": estimate.distance,
                "endpoint_error": estimate.endpoint_error,
                "reference_length": metric.norm(coefficients),
            })
        for i, amplitudes in enumerate(p.states):
            estimate = self.geometry.state_complexity(
                metric, PureState.normalized(amplitudes), p.restarts, config.seed, p.h
            )
            rows.append({
                "target_id": f"state{i}",
                "distance": estimate.distance,
                "endpoint_error": estimate.endpoint_error,
                "reference_length": None,
            })
        write_csv(run_dir / "complexity.csv", ["target_id", "distance", "endpoint_error", "reference_length"], rows)

        gaps = [row["reference_length"] - row["distance"] for row in rows if row["reference_length"] is not None]
        metrics = {
            "targets": len(generators),
            "states": len(p.states),
            "max_distance": max(row["distance"] for row in rows),
            "max_endpoint_error": max(row["endpoint_error"] for row in rows),
            # > 0 quand le tir trouve plus court que le sous-groupe à un paramètre
            "max_reference_gap": max(gaps) if gaps else None,
            "min_reference_gap": min(gaps) if gaps else None,
        }
        return metrics, ["complexity.csv"]

    # --- Études empiriques --------------------------------------------------

    def run_sensitivity(self, config, run_dir):
        p = config.params
        cfg = GdConfig(eta=p.eta, steps=p.steps, tol=p.tol)
        variants = [("plain", False)] + ([("residual", True)] if p.residual else [])
        widths = [p.dim] + [p.width] * (p.depth - 1) + [1]

        rows = []
        per_variant = {name: [] for name, _ in variants}
        baselines = {name: [] for name, _ in variants}
        for s in range(p.seeds):
            seed = config.seed + s
            rng = np.random.default_rng(seed)
            train, test = self.experiments.mixture_task(rng, p.dim, p.n_train, p.n_test, p.separation)
            for name, residual in variants:
                net = self.experiments.init_mlp(widths, rng, residual=residual)
                trained = self.experiments.train(net, train, cfg, seed)
                profile = self.experiments.sensitivity_profile(trained.net, trained.snapshot, test, p.repeats, seed)
                per_variant[name].append(profile.degradations("rerandomize"))
                baselines[name].append(profile.baseline_accuracy)
                for row in profile.rows:
                    rows.append(dict(row, network=name, seed=seed))

        write_csv(
            run_dir / "sensitivity.csv",
            ["network", "seed", "layer", "mode", "mean_degradation", "std", "repeats", "accuracy_drop"],
            rows,
        )

        third = max(1, p.depth // 3)
        metrics = {}
        for name, profiles in per_variant.items():
            mean_profile = np.mean(profiles, axis=0)
            bottom = float(np.mean(mean_profile[:third]))
            top = float(np.mean(mean_profile[-third:]))
            positive = mean_profile.min() > 0
            metrics[name] = {
                "bottom_third_degradation": bottom,
                "top_third_degradation": top,
                "bottom_exceeds_top": bottom > top,
                "flatness": float(mean_profile.max() / mean_profile.min()) if positive else None,
                "baseline_accuracy": float(np.mean(baselines[name])),
            }
        if not metrics["plain"]["bottom_exceeds_top"]:
            log_warning(
                action="sensitivity",
                message="Les couches basses ne sont pas plus sensibles que les couches hautes",
                bottom=metrics["plain"]["bottom_third_degradation"],
                top=metrics["plain"]["top_third_degradation"],
            )
        return metrics, ["sensitivity.csv"]

    def run_prob_study(self, config, run_dir):
        p = config.params
        rng = np.random.default_rng(config.seed)
        train, test, _ = self.experiments.linear_task(rng, p.dim, p.samples, p.test_samples)
        cfg = GdConfig(eta=p.eta, steps=p.steps, tol=p.tol)

        result = self.experiments.prob_complexity_study(
            train, test, cfg, p.depth, p.runs, p.bins,
            seed=config.seed, init_scale=p.init_scale, measure=p.measure, min_converged=p.min_converged,
        )
        write_csv(
            run_dir / "runs.csv",
            ["seed", "converged", "C", "test_error", "steps"],
            [[r.seed, r.converged, r.complexity, r.test_error, r.steps] for r in result.runs],
        )
        fit = {
            "slope": result.slope,
            "intercept": result.intercept,
            "r2": result.r2,
            "bins": p.bins,
            "bin_edges": result.bin_edges,
            "counts": result.counts,
            "degenerate": result.degenerate,
        }
        write_json(run_dir / "fit.json", fit)

        metrics = {
            "runs": p.runs,
            "converged_runs": len(result.converged_runs),
            "populated_bins": result.populated_bins,
            "slope": result.slope,
            "r2": result.r2,
            "degenerate": result.degenerate,
        }
        return metrics, ["runs.csv", "fit.json"]
