"""
Tests pour le service des études empiriques (ExperimentService).
"""
import numpy as np
import pytest

from core.exceptions import DomainError, InsufficientDataError, TrainingDivergedError
from core.numerics import fd_gradient
from models.experiments import InitSnapshot
from models.linear_net import Dataset, GdConfig, LinearNet


@pytest.fixture
def small_task(experiment_service, rng):
    return experiment_service.mixture_task(rng, dim=4, n_train=40, n_test=40, separation=2.0)


@pytest.fixture
def small_net(experiment_service, rng):
    return experiment_service.init_mlp([4, 8, 8, 1], rng)


def test_init_mlp_layout(experiment_service, rng):
    net = experiment_service.init_mlp([4, 8, 8, 1], rng, residual=True)
    assert net.depth == 3
    assert [layer.residual for layer in net.layers] == [False, True, False]
    assert net.layers[-1].activation == "identity"
    assert np.all(net.layers[0].bias == 0)


def test_mixture_task_labels(experiment_service, rng):
    train, test = experiment_service.mixture_task(rng, dim=3, n_train=10, n_test=6)
    assert train.inputs.shape == (10, 3) and test.inputs.shape == (6, 3)
    assert set(np.unique(train.targets)) == {-1.0, 1.0}
    assert train.targets.sum() == 0


@pytest.mark.parametrize("residual", [False, True])
def test_backprop_matches_finite_differences(experiment_service, small_task, residual):
    rng = np.random.default_rng(11)
    net = experiment_service.init_mlp([4, 8, 8, 1], rng, residual=residual)
    for layer in net.layers:
        layer.bias = 0.1 * rng.standard_normal(layer.bias.shape)
    train, _ = small_task
    grads = experiment_service.backprop(net, train)

    for k, (weight_grad, bias_grad) in enumerate(grads):
        def loss_of_weight(W, k=k):
            model = net.copy()
            model.layers[k].weight = W
            return experiment_service.loss(model, train)

        def loss_of_bias(b, k=k):
            model = net.copy()
            model.layers[k].bias = b
            return experiment_service.loss(model, train)

        numeric = fd_gradient(loss_of_weight, net.layers[k].weight)
        assert np.linalg.norm(weight_grad - numeric) <= 1e-4 * max(np.linalg.norm(numeric), 1e-8)
        numeric = fd_gradient(loss_of_bias, net.layers[k].bias)
        assert np.linalg.norm(bias_grad - numeric) <= 1e-4 * max(np.linalg.norm(numeric), 1e-8)


def test_sum_reduction_scales_loss(experiment_service, small_net, small_task):
    train, _ = small_task
    assert experiment_service.loss(small_net, train, "sum") == pytest.approx(
        train.size * experiment_service.loss(small_net, train, "mean")
    )
    with pytest.raises(DomainError):
        experiment_service.loss(small_net, train, "median")


def test_train_reduces_loss_and_keeps_snapshot(experiment_service, small_net, small_task):
    train, _ = small_task
    before = [layer.weight.copy() for layer in small_net.layers]
    result = experiment_service.train(small_net, train, GdConfig(eta=0.05, steps=100), seed=5)

    assert result.final_loss < result.losses[0]
    assert result.snapshot.seed == 5
    assert not result.snapshot.weights[0].flags.writeable
    for original, layer, frozen in zip(before, small_net.layers, result.snapshot.weights):
        assert np.array_equal(original, layer.weight)
        assert np.array_equal(original, frozen)


def test_train_divergence_raises(experiment_service, small_net, small_task):
    train, _ = small_task
    with pytest.raises(TrainingDivergedError):
        experiment_service.train(small_net, train, GdConfig(eta=1e3, steps=50), seed=0)


def test_reset_layer_restores_initialization(experiment_service, small_net, small_task):
    train, _ = small_task
    result = experiment_service.train(small_net, train, GdConfig(eta=0.05, steps=20), seed=0)
    model = experiment_service.reset_layer(result.net, result.snapshot, 1)
    assert np.array_equal(model.layers[1].weight, small_net.layers[1].weight)
    assert np.array_equal(model.layers[0].weight, result.net.layers[0].weight)
    assert np.array_equal(model.layers[2].weight, result.net.layers[2].weight)


def test_reset_of_untrained_network_is_identity(experiment_service, small_net, small_task):
    _, test = small_task
    snapshot = InitSnapshot.capture(small_net, 0)
    model = experiment_service.reset_layer(small_net, snapshot, 0)
    assert experiment_service.loss(model, test) == experiment_service.loss(small_net, test)


def test_layer_index_checked(experiment_service, small_net, rng):
    with pytest.raises(DomainError):
        experiment_service.rerandomize_layer(small_net, 3, rng)


def test_sensitivity_profile_rows_and_determinism(experiment_service, small_net, small_task):
    train, test = small_task
    result = experiment_service.train(small_net, train, GdConfig(eta=0.05, steps=50), seed=0)
    first = experiment_service.sensitivity_profile(result.net, result.snapshot, test, repeats=3, seed=2)
    second = experiment_service.sensitivity_profile(result.net, result.snapshot, test, repeats=3, seed=2)

    assert len(first.rows) == 2 * result.net.depth
    assert first.rows == second.rows
    resets = [row for row in first.rows if row["mode"] == "reset"]
    assert all(row["std"] == 0.0 and row["repeats"] == 1 for row in resets)
    assert [row["layer"] for row in resets] == [1, 2, 3]
    assert len(first.degradations("rerandomize")) == 3


def test_trajectory_compare_single_layer_is_exact(experiment_service, rng):
    train, _, _ = experiment_service.linear_task(rng, 3, 10, 5)
    We0 = np.eye(3) + 0.2 * rng.standard_normal((3, 3))
    comparison = experiment_service.trajectory_compare(We0, train, GdConfig(eta=0.01), 1, 20)
    assert len(comparison.deviation) == 21
    assert np.all(comparison.deviation == 0.0)
    assert np.array_equal(comparison.loss_layers, comparison.loss_end_to_end)


def test_acceleration_study_rows(experiment_service, rng):
    train, _, _ = experiment_service.linear_task(rng, 3, 10, 5)
    rows = experiment_service.acceleration_study(np.eye(3), train, GdConfig(eta=0.005), [1, 2], 10)
    assert len(rows) == 2 * 11
    plain = [row["loss"] for row in rows if row["depth"] == 1]
    assert plain[-1] < plain[0]
    assert rows[11]["depth"] == 2 and rows[11]["step"] == 0
    assert rows[11]["loss"] == rows[0]["loss"]


def test_complexity_histogram_is_a_partition(experiment_service, rng):
    values = rng.exponential(size=100)
    for bins in (4, 8):
        counts, edges = experiment_service.complexity_histogram(values, bins)
        assert counts.sum() == 100
        assert len(edges) == bins + 1


def test_complexity_histogram_single_value(experiment_service):
    counts, _ = experiment_service.complexity_histogram([2.0] * 10, 5)
    assert np.count_nonzero(counts) == 1


def test_prob_study_table_and_histogram(experiment_service):
    inputs = np.array([[1.0, 0.5]])
    train = Dataset(inputs, inputs @ np.diag([1.2, 0.9]).T)
    test = Dataset(np.eye(2), np.diag([1.2, 0.9]))
    cfg = GdConfig(eta=0.05, steps=2000, tol=1e-8)

    result = experiment_service.prob_complexity_study(
        train, test, cfg, depth=2, runs=12, bins=4, seed=100, measure="path_length", min_converged=1
    )
    assert [run.seed for run in result.runs] == list(range(100, 112))
    assert result.counts.sum() == len(result.converged_runs)
    assert all(run.complexity >= 0 for run in result.converged_runs)
    assert all(run.complexity is None for run in result.runs if not run.converged)


def test_prob_study_unique_minimum_is_degenerate(experiment_service, rng):
    """Problème surdéterminé de profondeur 1: toutes les répliques atteignent le même minimum."""
    truth = np.diag([1.5, 0.8])
    inputs = rng.standard_normal((10, 2))
    train = Dataset(inputs, inputs @ truth.T)
    cfg = GdConfig(eta=0.01, steps=3000, tol=1e-20)

    result = experiment_service.prob_complexity_study(train, train, cfg, depth=1, runs=6, bins=4, min_converged=6)
    assert result.degenerate
    assert result.slope is None and result.r2 is None
    assert result.populated_bins == 1


def test_prob_study_insufficient_runs(experiment_service, rng):
    train, test, _ = experiment_service.linear_task(rng, 2, 1, 5)
    with pytest.raises(InsufficientDataError):
        experiment_service.prob_complexity_study(train, test, GdConfig(eta=0.01, steps=5), 2, runs=3, bins=2, min_converged=5)


def test_prob_study_rejects_unknown_measure(experiment_service, rng):
    train, test, _ = experiment_service.linear_task(rng, 2, 1, 5)
    with pytest.raises(DomainError):
        experiment_service.prob_complexity_study(train, test, GdConfig(eta=0.01), 2, runs=3, bins=2, measure="volume")


def test_rerandomize_redraws_only_one_layer(experiment_service, small_net):
    model = experiment_service.rerandomize_layer(small_net, 1, np.random.default_rng(8))
    redrawn = model.layers[1].weight
    assert np.max(np.abs(redrawn - small_net.layers[1].weight)) > 0
    assert np.array_equal(model.layers[0].weight, small_net.layers[0].weight)
    assert np.array_equal(model.layers[2].weight, small_net.layers[2].weight)

    sigma = experiment_service.init_std(8, "relu")
    assert abs(redrawn.mean()) < 3 * sigma / np.sqrt(redrawn.size)

    again = experiment_service.rerandomize_layer(small_net, 1, np.random.default_rng(8))
    assert np.array_equal(again.layers[1].weight, redrawn)


def test_complexity_histogram_round_off_spread_is_one_class(experiment_service):
    """Des complexités égales au bruit d'arrondi près forment une classe unique."""
    values = 2.0 + np.array([0.0, 1e-13, -2e-13, 5e-14, 0.0, 3e-13])
    counts, edges = experiment_service.complexity_histogram(values, 4)
    assert counts.tolist() == [6]
    assert len(edges) == 2
    assert edges[0] < values.min() and values.max() < edges[1]


def test_residual_branch_init_is_scaled_by_depth(experiment_service):
    widths = [4, 16, 16, 16, 1]
    plain = experiment_service.init_mlp(widths, np.random.default_rng(3))
    residual = experiment_service.init_mlp(widths, np.random.default_rng(3), residual=True)

    assert [layer.residual for layer in residual.layers] == [False, True, True, False]
    assert np.array_equal(residual.layers[0].weight, plain.layers[0].weight)
    assert np.allclose(residual.layers[1].weight, plain.layers[1].weight / 4)
    assert np.array_equal(residual.layers[3].weight, plain.layers[3].weight)

    redrawn = experiment_service.rerandomize_layer(residual, 2, np.random.default_rng(5)).layers[2].weight
    sigma = experiment_service.init_std(16, "relu", residual=True, depth=4)
    assert 0.7 * sigma < redrawn.std() < 1.3 * sigma


def test_deep_residual_net_trains_without_diverging(experiment_service, small_task):
    """Un réseau résiduel de six couches s'entraîne au même pas qu'un réseau peu profond."""
    train, _ = small_task
    net = experiment_service.init_mlp([4, 8, 8, 8, 8, 8, 1], np.random.default_rng(21), residual=True)
    result = experiment_service.train(net, train, GdConfig(eta=0.05, steps=100), seed=21)
    assert np.all(np.isfinite(result.losses))
    assert result.final_loss < result.losses[0]


def test_replica_init_is_balanced(experiment_service, linear_service):
    net = experiment_service.replica_init(3, 3, 0.3, seed=4)
    start = np.eye(3) + 0.3 * np.random.default_rng(4).standard_normal((3, 3)) / np.sqrt(3)
    assert net.depth == 3
    assert np.allclose(linear_service.end_to_end(net), start, atol=1e-12)
    assert linear_service.balancedness_defect(net) < 1e-12


def test_train_on_linear_layer_matches_layerwise_step(experiment_service, linear_service, rng):
    """Une couche linéaire sans biais entraînée par rétropropagation suit gd_step_layers."""
    inputs = rng.standard_normal((12, 3))
    data = Dataset(inputs, rng.standard_normal((12, 2)))
    net = experiment_service.init_mlp([3, 2], rng, activation="identity", bias=False)
    linear = LinearNet([net.layers[0].weight])

    expected = linear
    for _ in range(5):
        expected = linear_service.gd_step_layers(expected, data, GdConfig(eta=0.01))

    summed = experiment_service.train(net, data, GdConfig(eta=0.01, steps=5), seed=0, reduction="sum")
    assert np.allclose(summed.net.layers[0].weight, expected.layers[0], atol=1e-12)

    # perte moyenne: même trajectoire avec un pas multiplié par m
    averaged = experiment_service.train(net, data, GdConfig(eta=0.01 * data.size, steps=5), seed=0)
    assert np.allclose(averaged.net.layers[0].weight, expected.layers[0], atol=1e-10)


def test_training_is_reproducible_from_seed(experiment_service, small_task):
    train, _ = small_task
    weights = []
    for _ in range(2):
        net = experiment_service.init_mlp([4, 8, 8, 1], np.random.default_rng(77))
        result = experiment_service.train(net, train, GdConfig(eta=0.05, steps=30), seed=77)
        weights.append([layer.weight for layer in result.net.layers])
    for first, second in zip(*weights):
        assert np.array_equal(first, second)


def test_reset_lower_layer_when_only_top_moved(experiment_service, small_net, small_task):
    """Si seule la dernière couche a bougé, remettre la première ne change rien."""
    _, test = small_task
    snapshot = InitSnapshot.capture(small_net, 0)
    moved = small_net.copy()
    moved.layers[-1].weight = moved.layers[-1].weight + 0.1

    model = experiment_service.reset_layer(moved, snapshot, 0)
    for original, layer in zip(moved.layers, model.layers):
        assert np.array_equal(original.weight, layer.weight)
    assert experiment_service.loss(model, test) == experiment_service.loss(moved, test)
