import numpy as np
import scipy.stats

from core.exceptions import DomainError, InsufficientDataError, TrainingDivergedError
from models.experiments import (
    ComplexityRun,
    DenseLayer,
    InitSnapshot,
    MlpNet,
    ProbStudyResult,
    SensitivityProfile,
    TrainingResult,
    TrajectoryComparison,
)
from models.linear_net import Dataset
from utils.logging_utils import log_error, log_success, log_warning

DIVERGENCE_THRESHOLD = 1e6
MIN_CONVERGED_RUNS = 50


class ExperimentService:
    """
    Service des études empiriques: sensibilité des couches, loi
    probabilité-complexité et comparaison des dynamiques linéaires.

    Les répliques sont exécutées séquentiellement; la réplique j utilise la
    graine seed_base + j, si bien que les résultats ne dépendent pas de
    l'ordre d'exécution.
    """

    def __init__(self, linear_service):
        """
        Args:
            linear_service (LinearNetService): Service des réseaux linéaires
        """
        self.linear = linear_service

    # --- Réseaux multicouches --------------------------------------------

    def init_std(self, fan_in, activation, residual=False, depth=1):
        """
        Écart-type d'initialisation: variance 2/fan_in (relu) ou 1/fan_in (identité).

        Pour une couche résiduelle, l'écart-type de la branche est divisé par
        la profondeur du réseau.
        """
        std = np.sqrt((2.0 if activation == "relu" else 1.0) / fan_in)
        return std / depth if residual else std

    def init_mlp(self, widths, rng, activation="relu", residual=False, bias=True):
        """
        Construit un réseau initialisé aléatoirement.

        La dernière couche est linéaire. Les couches cachées carrées reçoivent
        un saut résiduel si residual est vrai; leur branche est initialisée
        avec un écart-type divisé par le nombre de couches.

        Args:
            widths (list[int]): Largeurs [entrée, cachées..., sortie]
            rng (numpy.random.Generator): Générateur seedé
            activation (str): Activation des couches cachées
            residual (bool): Active les sauts résiduels
            bias (bool): Ajoute des biais (initialisés à 0)
        """
        if len(widths) < 2:
            raise DomainError("Au moins une entrée et une sortie sont requises")
        layers = []
        for k, (fan_in, fan_out) in enumerate(zip(widths[:-1], widths[1:])):
            last = k == len(widths) - 2
            act = "identity" if last else activation
            skip = residual and not last and fan_in == fan_out
            std = self.init_std(fan_in, act, skip, len(widths) - 1)
            layers.append(DenseLayer(
                weight=rng.standard_normal((fan_out, fan_in)) * std,
                bias=np.zeros(fan_out) if bias else None,
                activation=act,
                residual=skip,
            ))
        return MlpNet(layers)

    def forward(self, net, inputs):
        """
        Propagation avant.

        Returns:
            tuple[ndarray, list]: Sortie (m x k) et cache (entrée, pré-activation) par couche
        """
        activations = inputs
        cache = []
        for layer in net.layers:
            z = activations @ layer.weight.T
            if layer.bias is not None:
                z = z + layer.bias
            out = np.maximum(z, 0.0) if layer.activation == "relu" else z
            if layer.residual:
                out = activations + out
            cache.append((activations, z))
            activations = out
        return activations, cache

    def _scale(self, data, reduction):
        if reduction == "sum":
            return 1.0
        if reduction == "mean":
            return 1.0 / data.size
        raise DomainError(f"Réduction inconnue: {reduction!r}")

    def loss(self, net, data, reduction="mean"):
        output, _ = self.forward(net, data.inputs)
        return float(self._scale(data, reduction) * np.sum((output - data.targets) ** 2))

    def accuracy(self, net, data):
        """Précision de classification (signe pour une sortie, argmax sinon)."""
        output, _ = self.forward(net, data.inputs)
        if data.output_dim == 1:
            return float(np.mean(np.sign(output[:, 0]) == np.sign(data.targets[:, 0])))
        return float(np.mean(np.argmax(output, axis=1) == np.argmax(data.targets, axis=1)))

    def backprop(self, net, data, reduction="mean"):
        """
        Gradients de la perte quadratique par rétropropagation.

        Returns:
            list[tuple[ndarray, ndarray | None]]: (∂L/∂W, ∂L/∂b) par couche
        """
        output, cache = self.forward(net, data.inputs)
        upstream = 2.0 * self._scale(data, reduction) * (output - data.targets)
        grads = [None] * net.depth
        for k in range(net.depth - 1, -1, -1):
            layer = net.layers[k]
            activations, z = cache[k]
            local = upstream * (z > 0) if layer.activation == "relu" else upstream
            weight_grad = local.T @ activations
            bias_grad = local.sum(axis=0) if layer.bias is not None else None
            grads[k] = (weight_grad, bias_grad)
            downstream = local @ layer.weight
            upstream = downstream + upstream if layer.residual else downstream
        return grads

    def train(self, net, data, cfg, seed, reduction="mean"):
        """
        Descente de gradient plein lot.

        L'instantané d'initialisation est pris avant le premier pas; la
        régularisation ne porte que sur les poids.

        Args:
            net (MlpNet): Réseau initialisé (non modifié)
            data (Dataset): Données d'entraînement
            cfg (GdConfig): Pas, régularisation, nombre de pas et seuil d'arrêt
            seed (int): Graine ayant servi à l'initialisation (enregistrée)
            reduction (str): "mean" ou "sum"

        Returns:
            TrainingResult: Réseau entraîné, instantané et trace de la perte

        Raises:
            TrainingDivergedError: Si la perte dépasse 1e6 ou devient non finie
        """
        snapshot = InitSnapshot.capture(net, seed)
        current = net.copy()
        losses = [self.loss(current, data, reduction)]
        shrink = 1.0 - cfg.eta * cfg.weight_decay

        for step in range(1, cfg.steps + 1):
            if losses[-1] < cfg.tol:
                break
            grads = self.backprop(current, data, reduction)
            for layer, (weight_grad, bias_grad) in zip(current.layers, grads):
                layer.weight = shrink * layer.weight - cfg.eta * weight_grad
                if bias_grad is not None:
                    layer.bias = layer.bias - cfg.eta * bias_grad
            value = self.loss(current, data, reduction)
            if not np.isfinite(value) or value > DIVERGENCE_THRESHOLD:
                log_error(
                    action="train",
                    exception=TrainingDivergedError(step, value),
                    seed=seed,
                    eta=cfg.eta,
                )
                raise TrainingDivergedError(step, value)
            losses.append(value)

        return TrainingResult(net=current, snapshot=snapshot, losses=losses)

    def reset_layer(self, net, snapshot, k):
        """Remet la couche k à sa valeur d'initialisation; les autres couches sont inchangées."""
        net.check_index(k)
        model = net.copy()
        model.layers[k].weight = np.array(snapshot.weights[k])
        if snapshot.biases[k] is not None:
            model.layers[k].bias = np.array(snapshot.biases[k])
        return model

    def rerandomize_layer(self, net, k, rng):
        """Retire la couche k selon la loi d'initialisation (biais remis à 0)."""
        net.check_index(k)
        model = net.copy()
        layer = model.layers[k]
        std = self.init_std(layer.fan_in, layer.activation, layer.residual, model.depth)
        layer.weight = rng.standard_normal(layer.weight.shape) * std
        if layer.bias is not None:
            layer.bias = np.zeros_like(layer.bias)
        return model

    def sensitivity_profile(self, net, snapshot, data_test, repeats, seed=0, reduction="mean"):
        """
        Dégradation de la perte et de la précision de test couche par couche.

        Pour chaque couche: réinitialisation à l'instantané (déterministe) et
        re-tirage répété `repeats` fois, la graine du tirage j de la couche k
        étant seed + k·repeats + j. Aucun ré-entraînement n'est effectué.

        Returns:
            SensitivityProfile: Profil avec la ligne de base
        """
        if repeats < 1:
            raise DomainError(f"repeats doit être au moins 1 (reçu {repeats})")
        base_loss = self.loss(net, data_test, reduction)
        base_accuracy = self.accuracy(net, data_test)
        rows = []
        for k in range(net.depth):
            model = self.reset_layer(net, snapshot, k)
            rows.append({
                "layer": k + 1,
                "mode": "reset",
                "mean_degradation": self.loss(model, data_test, reduction) - base_loss,
                "std": 0.0,
                "repeats": 1,
                "accuracy_drop": base_accuracy - self.accuracy(model, data_test),
            })

            losses, drops = [], []
            for j in range(repeats):
                rng = np.random.default_rng(seed + k * repeats + j)
                model = self.rerandomize_layer(net, k, rng)
                losses.append(self.loss(model, data_test, reduction) - base_loss)
                drops.append(base_accuracy - self.accuracy(model, data_test))
            rows.append({
                "layer": k + 1,
                "mode": "rerandomize",
                "mean_degradation": float(np.mean(losses)),
                "std": float(np.std(losses)),
                "repeats": repeats,
                "accuracy_drop": float(np.mean(drops)),
            })
        return SensitivityProfile(base_loss, base_accuracy, rows)

    def mixture_task(self, rng, dim=10, n_train=500, n_test=500, separation=1.0):
        """
        Classification de deux gaussiennes de moyennes ±μ (‖μ‖ = separation),
        cibles ±1.

        Returns:
            tuple[Dataset, Dataset]: Données d'entraînement et de test
        """
        direction = rng.standard_normal(dim)
        mean = separation * direction / np.linalg.norm(direction)

        def sample(count):
            labels = np.where(np.arange(count) % 2 == 0, 1.0, -1.0)
            inputs = labels[:, None] * mean + rng.standard_normal((count, dim))
            return Dataset(inputs, labels[:, None])

        return sample(n_train), sample(n_test)

    # --- Dynamiques linéaires --------------------------------------------

    def trajectory_compare(self, We0, data, cfg, depth, steps):
        """
        Compare pas à pas la descente couche par couche (depuis balanced_init)
        et la mise à jour bout-à-bout.

        Returns:
            TrajectoryComparison: ‖W_N…W_1 − W_e‖_F et pertes des deux dynamiques,
                du pas 0 au pas `steps`
        """
        net = self.linear.balanced_init(We0, depth)
        We = np.array(We0, dtype=np.float64)
        deviation, loss_layers, loss_end_to_end = [], [], []
        for step in range(steps + 1):
            product = self.linear.end_to_end(net)
            deviation.append(float(np.linalg.norm(product - We)))
            loss_layers.append(self.linear.matrix_loss(product, data))
            loss_end_to_end.append(self.linear.matrix_loss(We, data))
            if step == steps:
                break
            net = self.linear.gd_step_layers(net, data, cfg)
            We = self.linear.gd_step_end_to_end(We, data, cfg, depth)

        return TrajectoryComparison(
            deviation=np.array(deviation),
            loss_layers=np.array(loss_layers),
            loss_end_to_end=np.array(loss_end_to_end),
        )

    def acceleration_study(self, We0, data, cfg, depths, steps):
        """
        Perte de la mise à jour bout-à-bout pour plusieurs profondeurs depuis
        le même W_e(0) (la profondeur 1 est le modèle linéaire classique).

        Returns:
            list[dict]: Lignes step, depth, loss
        """
        rows = []
        for depth in depths:
            We = np.array(We0, dtype=np.float64)
            for step in range(steps + 1):
                rows.append({"step": step, "depth": depth, "loss": self.linear.matrix_loss(We, data)})
                if step < steps:
                    We = self.linear.gd_step_end_to_end(We, data, cfg, depth)
        return rows

    def linear_task(self, rng, dim, samples, test_samples, truth_scale=0.5):
        """
        Tâche de régression linéaire sous-déterminée si samples < dim.

        La matrice vérité est I + truth_scale·bruit/√dim.

        Returns:
            tuple[Dataset, Dataset, ndarray]: Apprentissage, test et matrice vérité
        """
        truth = np.eye(dim) + truth_scale * rng.standard_normal((dim, dim)) / np.sqrt(dim)
        train_inputs = rng.standard_normal((samples, dim))
        test_inputs = rng.standard_normal((test_samples, dim))
        return (
            Dataset(train_inputs, train_inputs @ truth.T),
            Dataset(test_inputs, test_inputs @ truth.T),
            truth,
        )

    def replica_init(self, dim, depth, init_scale, seed):
        """Réseau équilibré de profondeur `depth` dont le produit vaut I + init_scale·Z/√dim."""
        rng = np.random.default_rng(seed)
        start = np.eye(dim) + init_scale * rng.standard_normal((dim, dim)) / np.sqrt(dim)
        return self.linear.balanced_init(start, depth)

    def _complexity_replica(self, train, test, cfg, depth, init_scale, seed, measure):
        net = self.replica_init(train.input_dim, depth, init_scale, seed)
        path = 0.0
        loss = self.linear.loss(net, train)
        steps = 0
        while steps < cfg.steps and loss >= cfg.tol:
            updated = self.linear.gd_step_layers(net, train, cfg)
            path += float(np.sqrt(sum(np.linalg.norm(a - b) ** 2 for a, b in zip(updated.layers, net.layers))))
            net = updated
            steps += 1
            loss = self.linear.loss(net, train)
            if not np.isfinite(loss) or loss > DIVERGENCE_THRESHOLD:
                break

        We = self.linear.end_to_end(net)
        test_error = float(np.mean(np.sum((test.inputs @ We.T - test.targets) ** 2, axis=1)))
        converged = bool(np.isfinite(loss) and loss < cfg.tol)
        complexity = None
        if converged:
            if measure == "path_length":
                complexity = path
            else:
                try:
                    complexity = self.linear.net_complexity(We)
                except DomainError:
                    converged = False
        return ComplexityRun(seed=seed, converged=converged, test_error=test_error, complexity=complexity, steps=steps)

    def complexity_histogram(self, values, bins):
        """
        Histogramme des complexités en `bins` classes.

        Des valeurs toutes égales (à 1e-6 relatif près) donnent une classe
        unique centrée sur leur valeur, quel que soit `bins`.
        """
        values = np.asarray(values, dtype=np.float64)
        low, high = float(values.min()), float(values.max())
        if high - low <= 1e-6 * max(1.0, abs(high)):
            return np.histogram(values, bins=1, range=(low - 0.5, high + 0.5))
        return np.histogram(values, bins=bins, range=(low, high))

    def prob_complexity_study(self, train, test, cfg, depth, runs, bins, seed=0,
                              init_scale=0.3, measure="net_complexity", min_converged=MIN_CONVERGED_RUNS):
        """
        Étude de la relation entre la probabilité d'atteindre un minimum et sa complexité.

        Entraîne `runs` répliques depuis des initialisations équilibrées
        indépendantes (factorisation de I + bruit, graine seed + j), calcule
        la complexité des répliques convergées, les classe en `bins` classes
        et ajuste log(fréquence relative) contre le centre de classe sur les
        classes peuplées.

        Args:
            train, test (Dataset): Données d'apprentissage et de test
            cfg (GdConfig): Pas, nombre maximal de pas et seuil de convergence
            depth (int): Profondeur des réseaux
            runs (int): Nombre de répliques
            bins (int): Nombre de classes
            seed (int): Graine de base
            init_scale (float): Amplitude du bruit autour de l'identité
            measure (str): "net_complexity" ou "path_length"
            min_converged (int): Nombre minimal de répliques convergées

        Returns:
            ProbStudyResult: Table, histogramme et ajustement (dégénéré si une seule classe)

        Raises:
            InsufficientDataError: Si moins de min_converged répliques convergent
        """
        try:
            if measure not in ("net_complexity", "path_length"):
                raise DomainError(f"Mesure de complexité inconnue: {measure!r}")
            table = [
                self._complexity_replica(train, test, cfg, depth, init_scale, seed + j, measure)
                for j in range(runs)
            ]
            values = [run.complexity for run in table if run.converged]
            if len(values) < min_converged:
                raise InsufficientDataError(len(values), min_converged)

            counts, edges = self.complexity_histogram(values, bins)
            centers = 0.5 * (edges[:-1] + edges[1:])
            populated = counts > 0
            slope = intercept = r2 = None
            degenerate = int(np.count_nonzero(populated)) < 2
            if degenerate:
                log_warning(
                    action="prob_complexity_study",
                    message="Toutes les répliques convergées tombent dans une seule classe",
                    converged=len(values),
                )
            else:
                frequencies = counts[populated] / len(values)
                fit = scipy.stats.linregress(centers[populated], np.log(frequencies))
                slope, intercept = float(fit.slope), float(fit.intercept)
                r2 = float(fit.rvalue**2)

            log_success(
                action="prob_complexity_study",
                message=f"{len(values)}/{runs} répliques convergées, pente {slope}",
                converged=len(values),
                runs=runs,
                slope=slope,
                r2=r2,
            )
            return ProbStudyResult(
                runs=table,
                bin_edges=edges,
                counts=counts,
                slope=slope,
                intercept=intercept,
                r2=r2,
                degenerate=degenerate,
            )

        except Exception as e:
            log_error(action="prob_complexity_study", exception=e, runs=runs, seed=seed)
            raise
