"""
Tests pour le service des réseaux linéaires (LinearNetService).
"""
import numpy as np
import pytest

from core.exceptions import DomainError
from core.numerics import expm, fd_gradient
from models.linear_net import Dataset, GdConfig, LinearNet


@pytest.fixture
def square_task(rng):
    """Régression 4 -> 4 sur 20 exemples."""
    truth = np.eye(4) + 0.3 * rng.standard_normal((4, 4))
    inputs = rng.standard_normal((20, 4))
    return Dataset(inputs, inputs @ truth.T)


def test_end_to_end_order(linear_service, rng):
    """layers[0] est appliquée en premier: W_e = W_2 W_1."""
    W1 = rng.standard_normal((3, 4))
    W2 = rng.standard_normal((2, 3))
    We = linear_service.end_to_end(LinearNet([W1, W2]))
    assert We.shape == (2, 4)
    assert np.allclose(We, W2 @ W1)


def test_incompatible_layers_rejected(rng):
    with pytest.raises(DomainError):
        LinearNet([rng.standard_normal((3, 4)), rng.standard_normal((2, 2))])


def test_loss_gradient_matches_finite_differences(linear_service, square_task, rng):
    We = rng.standard_normal((4, 4))
    analytic = linear_service.loss_gradient(We, square_task)
    numeric = fd_gradient(lambda W: linear_service.matrix_loss(W, square_task), We)
    assert np.linalg.norm(analytic - numeric) / np.linalg.norm(analytic) < 1e-6


def test_layer_gradients_match_finite_differences(linear_service, square_task, rng):
    net = LinearNet([np.eye(4) + 0.2 * rng.standard_normal((4, 4)) for _ in range(3)])
    grads = linear_service.layer_gradients(net, square_task)
    for j in range(net.depth):
        def loss_of_layer(W, j=j):
            layers = [L.copy() for L in net.layers]
            layers[j] = W
            return linear_service.loss(LinearNet(layers), square_task)

        numeric = fd_gradient(loss_of_layer, net.layers[j])
        assert np.linalg.norm(grads[j] - numeric) / np.linalg.norm(grads[j]) < 1e-4


def test_single_layer_update_is_plain_gradient_descent(linear_service):
    """N = 1, λ = 0: la mise à jour bout-à-bout est la descente de gradient classique."""
    for seed in range(20):
        rng = np.random.default_rng(seed)
        inputs = rng.standard_normal((10, 3))
        data = Dataset(inputs, rng.standard_normal((10, 2)))
        We = rng.standard_normal((2, 3))
        cfg = GdConfig(eta=0.01)
        expected = We - 0.01 * linear_service.loss_gradient(We, data)
        assert np.max(np.abs(linear_service.gd_step_end_to_end(We, data, cfg, 1) - expected)) <= 1e-14


def test_single_layer_update_with_weight_decay(linear_service, square_task, rng):
    We = rng.standard_normal((4, 4))
    cfg = GdConfig(eta=0.01, weight_decay=0.5)
    expected = (1 - 0.005) * We - 0.01 * linear_service.loss_gradient(We, square_task)
    assert np.allclose(linear_service.gd_step_end_to_end(We, square_task, cfg, 1), expected, atol=1e-14)


def test_zero_matrix_is_fixed_point_for_deep_networks(linear_service, square_task):
    cfg = GdConfig(eta=0.01)
    for depth in (2, 3):
        assert np.array_equal(linear_service.gd_step_end_to_end(np.zeros((4, 4)), square_task, cfg, depth), np.zeros((4, 4)))


def test_weight_decay_bound_checked(linear_service, square_task):
    cfg = GdConfig(eta=0.5, weight_decay=1.0)
    with pytest.raises(DomainError):
        linear_service.gd_step_end_to_end(np.eye(4), square_task, cfg, 2)


def test_layer_step_matches_single_layer_update(linear_service, square_task, rng):
    We = rng.standard_normal((4, 4))
    cfg = GdConfig(eta=0.003, weight_decay=0.1)
    layered = linear_service.gd_step_layers(LinearNet([We]), square_task, cfg)
    assert np.array_equal(layered.layers[0], linear_service.gd_step_end_to_end(We, square_task, cfg, 1))


@pytest.mark.parametrize("depth", [1, 2, 3, 4])
def test_balanced_init_reproduces_target(linear_service, rng, depth):
    We = rng.standard_normal((4, 4))
    net = linear_service.balanced_init(We, depth)
    assert net.depth == depth
    assert np.allclose(linear_service.end_to_end(net), We, atol=1e-12)
    assert linear_service.balancedness_defect(net) < 1e-12


def test_balanced_init_rectangular_target(linear_service, rng):
    We = rng.standard_normal((2, 5))
    net = linear_service.balanced_init(We, 3)
    assert net.layers[0].shape == (2, 5)
    assert np.allclose(linear_service.end_to_end(net), We, atol=1e-12)


def test_layerwise_and_end_to_end_agree_to_second_order(experiment_service, square_task, rng):
    """Depuis une initialisation équilibrée, l'écart après un pas est quadratique en η."""
    We0 = np.eye(4) + 0.2 * rng.standard_normal((4, 4))
    large = experiment_service.trajectory_compare(We0, square_task, GdConfig(eta=1e-3), 3, 1).deviation[1]
    small = experiment_service.trajectory_compare(We0, square_task, GdConfig(eta=5e-4), 3, 1).deviation[1]
    assert 3.5 < large / small < 4.5


def test_net_complexity_of_identity_is_zero(linear_service):
    assert linear_service.net_complexity(np.eye(3)) == pytest.approx(0.0, abs=1e-12)


def test_net_complexity_of_rotation(linear_service):
    A = np.array([[0.0, -0.4, 0.1], [0.4, 0.0, -0.2], [-0.1, 0.2, 0.0]])
    assert linear_service.net_complexity(expm(A)) == pytest.approx(np.linalg.norm(A), abs=1e-10)


def test_net_complexity_of_stretch(linear_service):
    assert linear_service.net_complexity(np.diag([np.e, 1.0])) == pytest.approx(1.0, abs=1e-12)


def test_net_complexity_conjugation_invariance(linear_service, rng):
    We = np.eye(3) + 0.1 * rng.standard_normal((3, 3))
    Q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    assert linear_service.net_complexity(Q @ We @ Q.T) == pytest.approx(linear_service.net_complexity(We), abs=1e-10)


@pytest.mark.parametrize(
    "matrix",
    [
        np.diag([1.0, 0.0]),
        np.diag([-1.0, 1.0]),
        np.ones((2, 3)),
    ],
)
def test_net_complexity_rejects_invalid_matrices(linear_service, matrix):
    with pytest.raises(DomainError):
        linear_service.net_complexity(matrix)


def test_loss_dimension_mismatch(linear_service, square_task):
    with pytest.raises(DomainError):
        linear_service.loss(LinearNet([np.eye(3)]), square_task)


def test_layerwise_descent_decreases_loss_with_small_step(linear_service, square_task, rng):
    net = linear_service.balanced_init(np.eye(4) + 0.2 * rng.standard_normal((4, 4)), 2)
    cfg = GdConfig(eta=1e-3)
    losses = [linear_service.loss(net, square_task)]
    for _ in range(500):
        net = linear_service.gd_step_layers(net, square_task, cfg)
        losses.append(linear_service.loss(net, square_task))
    assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))
    assert losses[-1] < 0.5 * losses[0]


def test_balancedness_defect_is_first_order_in_step(linear_service, square_task, rng):
    """Le flot conserve l'équilibre; la descente ne le perd qu'au plus à l'ordre η (horizon ηK fixé)."""
    start = linear_service.balanced_init(np.eye(4) + 0.2 * rng.standard_normal((4, 4)), 3)
    defects = []
    for eta, steps in ((4e-4, 250), (2e-4, 500)):
        net = start
        for _ in range(steps):
            net = linear_service.gd_step_layers(net, square_task, GdConfig(eta=eta))
        defects.append(linear_service.balancedness_defect(net))
    assert defects[1] < defects[0]
    assert defects[0] / defects[1] > 1.7
