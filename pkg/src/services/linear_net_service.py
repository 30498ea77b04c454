import numpy as np
import scipy.linalg

from core.exceptions import DomainError
from core.numerics import as_matrix, fractional_power, principal_log
from models.linear_net import LinearNet


class LinearNetService:
    """
    Service responsable des réseaux linéaires profonds et de leur dynamique.

    Il regroupe:
    - le produit bout-à-bout W_e = W_N ... W_1 et la perte quadratique
    - la descente de gradient couche par couche (paramétrisation profonde)
    - la mise à jour préconditionnée équivalente sur W_e seul
    - l'initialisation équilibrée par SVD et la mesure de complexité du réseau

    Toutes les méthodes sont pures: elles ne modifient jamais le réseau reçu
    et renvoient de nouveaux objets.
    """

    # Seuil relatif sous lequel une valeur singulière est considérée nulle
    SINGULAR_TOL = 1e-12

    def end_to_end(self, net):
        """
        Calcule la matrice bout-à-bout W_e = W_N ... W_1 (de droite à gauche).

        Args:
            net (LinearNet): Le réseau

        Returns:
            ndarray: La matrice k x d
        """
        We = net.layers[0]
        for W in net.layers[1:]:
            We = W @ We
        return We

    def matrix_loss(self, We, data):
        """Perte quadratique Σ_i ‖W x_i − y_i‖² d'une matrice bout-à-bout."""
        residual = data.inputs @ We.T - data.targets
        return float(np.sum(residual**2))

    def loss(self, net, data):
        """
        Perte quadratique plein lot du réseau.

        Args:
            net (LinearNet): Le réseau
            data (Dataset): Le jeu de données

        Returns:
            float: Σ_i ‖W_e x_i − y_i‖²

        Raises:
            DomainError: Si les dimensions du réseau et des données diffèrent
        """
        self._check_dimensions(net.input_dim, net.output_dim, data)
        return self.matrix_loss(self.end_to_end(net), data)

    def loss_gradient(self, We, data):
        """
        Gradient en forme close de la perte linéaire: 2 Σ_i (W x_i − y_i) x_iᵀ.

        Args:
            We (ndarray): Matrice k x d
            data (Dataset): Le jeu de données

        Returns:
            ndarray: Gradient de même forme que We
        """
        We = as_matrix(We)
        self._check_dimensions(We.shape[1], We.shape[0], data)
        residual = data.inputs @ We.T - data.targets
        return 2.0 * residual.T @ data.inputs

    def layer_gradients(self, net, data):
        """
        Gradients de la perte par rapport à chaque couche.

        Pour la couche j: (W_N ... W_{j+1})ᵀ · ∇L(W_e) · (W_{j-1} ... W_1)ᵀ.

        Args:
            net (LinearNet): Le réseau
            data (Dataset): Le jeu de données

        Returns:
            list[ndarray]: Un gradient par couche, dans l'ordre des couches
        """
        self._check_dimensions(net.input_dim, net.output_dim, data)
        layers = net.layers
        depth = len(layers)

        # below[j] = W_j ... W_1 (produit des j premières couches)
        below = [np.eye(net.input_dim)]
        for W in layers:
            below.append(W @ below[-1])
        # above[j] = W_N ... W_{j+1}
        above = [None] * (depth + 1)
        above[depth] = np.eye(net.output_dim)
        for j in range(depth - 1, -1, -1):
            above[j] = above[j + 1] @ layers[j]

        G = self.loss_gradient(below[depth], data)
        return [above[j + 1].T @ G @ below[j].T for j in range(depth)]

    def gd_step_layers(self, net, data, cfg):
        """
        Un pas de descente de gradient simultané sur toutes les couches.

        W_j <- (1 − ηλ) W_j − η ∂L/∂W_j, tous les gradients étant évalués
        sur les poids d'avant le pas.

        Args:
            net (LinearNet): Le réseau courant
            data (Dataset): Le jeu de données
            cfg (GdConfig): Pas et régularisation

        Returns:
            LinearNet: Le nouveau réseau
        """
        cfg.check_depth(net.depth)
        grads = self.layer_gradients(net, data)
        shrink = 1.0 - cfg.eta * cfg.weight_decay
        return LinearNet([shrink * W - cfg.eta * g for W, g in zip(net.layers, grads)])

    def gd_step_end_to_end(self, We, data, cfg, depth):
        """
        Mise à jour préconditionnée de la matrice bout-à-bout seule.

        W_e <- (1 − ηλN) W_e − η Σ_{j=1..N} [W_e W_eᵀ]^{(j−1)/N} ∇L(W_e) [W_eᵀ W_e]^{(N−j)/N}

        La convention 0^0 = I de fractional_power fait de W_e = 0 un point fixe
        dès que N ≥ 2.

        Args:
            We (ndarray): Matrice bout-à-bout courante
            data (Dataset): Le jeu de données
            cfg (GdConfig): Pas et régularisation
            depth (int): Profondeur N du réseau simulé

        Returns:
            ndarray: La nouvelle matrice bout-à-bout

        Raises:
            DomainError: Si ηλN ≥ 1 ou si les puissances fractionnaires échouent
        """
        if depth < 1:
            raise DomainError(f"La profondeur doit être au moins 1 (reçu {depth})")
        cfg.check_depth(depth)
        We = as_matrix(We)
        G = self.loss_gradient(We, data)
        left = We @ We.T
        right = We.T @ We

        update = np.zeros_like(We)
        for j in range(1, depth + 1):
            update += (
                fractional_power(left, (j - 1) / depth)
                @ G
                @ fractional_power(right, (depth - j) / depth)
            )
        return (1.0 - cfg.eta * cfg.weight_decay * depth) * We - cfg.eta * update

    def balanced_init(self, We_target, depth):
        """
        Factorise une matrice cible en un réseau équilibré de profondeur N.

        Avec We = U Σ Vᵀ (SVD réduite): W_1 = Σ^{1/N} Vᵀ, W_j = Σ^{1/N} pour
        1 < j < N et W_N = U Σ^{1/N}. La largeur cachée vaut min(d, k). Le signe
        de chaque vecteur singulier est fixé pour que la plus grande composante
        (en valeur absolue) du vecteur de gauche soit positive.

        Args:
            We_target (ndarray): Matrice k x d à factoriser
            depth (int): Profondeur N ≥ 1

        Returns:
            LinearNet: Réseau équilibré tel que end_to_end = We_target
        """
        if depth < 1:
            raise DomainError(f"La profondeur doit être au moins 1 (reçu {depth})")
        We = as_matrix(We_target)
        if depth == 1:
            return LinearNet([We.copy()])

        U, s, Vt = scipy.linalg.svd(We, full_matrices=False)
        for i in range(U.shape[1]):
            pivot = np.argmax(np.abs(U[:, i]))
            if U[pivot, i] < 0:
                U[:, i] = -U[:, i]
                Vt[i, :] = -Vt[i, :]

        root = np.diag(s ** (1.0 / depth))
        layers = [root @ Vt]
        layers.extend(root.copy() for _ in range(depth - 2))
        layers.append(U @ root)
        return LinearNet(layers)

    def balancedness_defect(self, net):
        """
        Écart maximal à la condition d'équilibre W_{j+1}ᵀ W_{j+1} = W_j W_jᵀ.

        Returns:
            float: max_j ‖W_{j+1}ᵀ W_{j+1} − W_j W_jᵀ‖_F (0 pour N = 1)
        """
        defect = 0.0
        for lower, upper in zip(net.layers[:-1], net.layers[1:]):
            defect = max(defect, float(np.linalg.norm(upper.T @ upper - lower @ lower.T)))
        return defect

    def net_complexity(self, We):
        """
        Distance à l'identité de la transformation réalisée par le réseau.

        Décomposition polaire We = Q P (Q rotation, P symétrique définie positive)
        puis sqrt(‖log Q‖_F² + ‖log P‖_F²).

        Args:
            We (ndarray): Matrice carrée inversible

        Returns:
            float: La complexité (0 pour l'identité)

        Raises:
            DomainError: Matrice non carrée, singulière, ou renversant l'orientation
        """
        We = as_matrix(We)
        if We.shape[0] != We.shape[1]:
            raise DomainError(f"La complexité n'est définie que pour une matrice carrée (reçu {We.shape})")

        singular_values = scipy.linalg.svdvals(We)
        if singular_values.min() <= self.SINGULAR_TOL * max(1.0, singular_values.max()):
            raise DomainError("Matrice bout-à-bout singulière: décomposition polaire non inversible")

        Q, P = scipy.linalg.polar(We, side="right")
        if np.linalg.det(Q) < 0:
            raise DomainError("Transformation renversant l'orientation (det Q < 0)")

        rotation = principal_log(Q)
        stretch = principal_log(P)
        return float(np.sqrt(np.linalg.norm(rotation) ** 2 + np.linalg.norm(stretch) ** 2))

    def _check_dimensions(self, input_dim, output_dim, data):
        if data.input_dim != input_dim or data.output_dim != output_dim:
            raise DomainError(
                f"Dimensions incohérentes: réseau {input_dim}->{output_dim}, "
                f"données {data.input_dim}->{data.output_dim}"
            )
