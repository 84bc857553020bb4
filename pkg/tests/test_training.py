import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from affectmap.data import SignalDataset, synth_gaussian_dataset
from affectmap.errors import InsufficientDataError, TrainingDivergedError
from affectmap.manifold import ManifoldSpec, linear_chain_margins
from affectmap.network import default_layers, dense, init_network, EmbeddingNetwork
from affectmap.training import (
    MiniBatch,
    TrainConfig,
    Triplet,
    continue_train,
    dataset_loss,
    loss_gradient,
    negative_loss,
    positive_loss,
    sample_triplets,
    total_loss,
    train,
    write_loss_csv,
)


def identity_network(d):
    """Network whose embeddings equal its inputs (single dense, W=I, b=0)."""
    params = np.concatenate([np.eye(d).ravel(), np.zeros(d)])
    return EmbeddingNetwork((dense(d, d),), params, rng_seed=0)


def two_state_dataset(counts=(3, 3), d=2, seed=0):
    rng = np.random.default_rng(seed)
    signals = rng.normal(size=(sum(counts), d))
    labels = np.repeat(np.arange(len(counts)), counts)
    return SignalDataset(signals, labels, len(counts), "synthetic")


class TestTriplets:
    def test_same_state_negative_rejected(self):
        x = np.zeros(2)
        with pytest.raises(ValueError):
            Triplet(x, x, x, anchor_state=1, negative_state=1)

    def test_minibatch_shape_checks(self):
        a = np.zeros((2, 3))
        with pytest.raises(ValueError):
            MiniBatch(a, a, np.zeros((3, 3)), np.zeros(2, int), np.ones(2, int))

    def test_minibatch_round_trip(self):
        batch = sample_triplets(two_state_dataset(), 4, seed=1)
        rebuilt = MiniBatch.from_triplets(list(batch.triplets()))
        assert np.array_equal(rebuilt.anchors, batch.anchors)
        assert np.array_equal(rebuilt.negative_states, batch.negative_states)


class TestSampleTriplets:
    def test_forced_positive_choice(self):
        # state A has 2 samples, state B only 1: anchors always come from A
        # and the positive is forced to be the other A sample
        signals = np.array([[0.0], [1.0], [5.0]])
        ds = SignalDataset(signals, np.array([0, 0, 1]), 2, "synthetic")
        batch = sample_triplets(ds, 8, seed=3)
        assert np.all(batch.anchor_states == 0)
        assert np.all(batch.negative_states == 1)
        for t in batch.triplets():
            assert {float(t.anchor[0]), float(t.positive[0])} == {0.0, 1.0}
            assert float(t.negative[0]) == 5.0

    def test_single_state_insufficient(self):
        ds = SignalDataset(np.zeros((4, 2)), np.zeros(4, int), 1, "synthetic")
        with pytest.raises(InsufficientDataError):
            sample_triplets(ds, 4, seed=0)

    def test_no_pairable_state_insufficient(self):
        ds = SignalDataset(np.zeros((2, 2)), np.array([0, 1]), 2, "synthetic")
        with pytest.raises(InsufficientDataError):
            sample_triplets(ds, 4, seed=0)

    def test_deterministic(self):
        ds = two_state_dataset((5, 5))
        a = sample_triplets(ds, 6, seed=42)
        b = sample_triplets(ds, 6, seed=42)
        assert np.array_equal(a.anchors, b.anchors)
        assert np.array_equal(a.negatives, b.negatives)

    def test_anchor_state_uniformity(self):
        ds = synth_gaussian_dataset(4, 50, 4, 2.0, seed=0)
        batch = sample_triplets(ds, 10_000, seed=7)
        counts = np.bincount(batch.anchor_states, minlength=4)
        assert np.all(np.abs(counts - 2500) <= 150)

    def test_anchor_differs_from_positive(self):
        # continuous signals are pairwise distinct, so drawing the
        # anchor-positive pair without replacement means distinct vectors
        ds = two_state_dataset((4, 4))
        batch = sample_triplets(ds, 64, seed=5)
        assert not np.any(np.all(batch.anchors == batch.positives, axis=1))
        assert np.all(batch.anchor_states != batch.negative_states)


class TestLossFunctions:
    def test_positive_loss_zero_when_collapsed(self):
        e = np.random.default_rng(0).normal(size=(5, 2))
        assert positive_loss(e, e) == 0.0

    def test_positive_loss_pythagoras(self):
        assert positive_loss(np.array([[0.0, 0.0]]), np.array([[3.0, 4.0]])) == 25.0

    def test_positive_loss_mean_of_squares(self):
        a = np.array([[0.0, 0.0], [0.0, 0.0]])
        p = np.array([[1.0, 0.0], [3.0, 0.0]])
        assert positive_loss(a, p) == 5.0

    def test_negative_loss_zero_at_exact_margin(self):
        m = linear_chain_margins(2, 1.0)
        a = np.array([[0.0, 0.0]])
        n = np.array([[1.0, 0.0]])
        assert negative_loss(a, n, m, [0], [1]) == 0.0

    def test_negative_loss_collapsed_pair(self):
        m = linear_chain_margins(3, 2.0)  # margin(0, 2) = 4
        a = np.array([[1.0, 1.0]])
        assert negative_loss(a, a, m, [0], [2]) == 16.0

    def test_negative_loss_arithmetic(self):
        m = linear_chain_margins(3, 1.0)  # margins 1 and 2
        a = np.zeros((2, 2))
        n = np.array([[2.0, 0.0], [2.0, 0.0]])
        got = negative_loss(a, n, m, [0, 0], [1, 2])
        assert got == pytest.approx(0.5)

    def test_negative_loss_label_out_of_range(self):
        m = linear_chain_margins(2, 1.0)
        a = np.zeros((1, 2))
        with pytest.raises(ValueError):
            negative_loss(a, a, m, [0], [5])
        with pytest.raises(ValueError):
            negative_loss(a, a, m, [-1], [1])

    @settings(max_examples=50, deadline=None)
    @given(
        arrays(np.float64, (4, 3), elements=st.floats(-50, 50)),
        arrays(np.float64, (4, 3), elements=st.floats(-50, 50)),
    )
    def test_losses_nonnegative(self, a, b):
        m = linear_chain_margins(2, 1.0)
        assert positive_loss(a, b) >= 0.0
        assert negative_loss(a, b, m, [0, 0, 1, 1], [1, 1, 0, 0]) >= 0.0


def _margin_realizing_batch():
    """Batch whose identity-network embeddings sit exactly at the margins."""
    m = linear_chain_margins(2, 1.0)
    anchors = np.array([[0.0, 0.0], [1.0, 0.0]])
    positives = anchors.copy()
    negatives = np.array([[1.0, 0.0], [0.0, 0.0]])
    batch = MiniBatch(anchors, positives, negatives,
                      np.array([0, 1]), np.array([1, 0]))
    return batch, m


class TestTotalLossAndGradient:
    def test_weighted_sum(self):
        # Lp = 1, Ln = 4 by construction; with weights (2, 0.5) -> 4.0,
        # with weights (1, 1) -> 5.0
        m = linear_chain_margins(2, 1.0)
        anchors = np.array([[0.0, 0.0], [0.0, 0.0]])
        positives = np.array([[1.0, 0.0], [0.0, 1.0]])
        negatives = np.array([[3.0, 0.0], [-3.0, 0.0]])
        batch = MiniBatch(anchors, positives, negatives,
                          np.array([0, 0]), np.array([1, 1]))
        net = identity_network(2)
        assert total_loss(batch, net, m, TrainConfig(lambda_p=2.0, lambda_n=0.5)) \
            == pytest.approx(4.0)
        assert total_loss(batch, net, m, TrainConfig()) == pytest.approx(5.0)

    def test_zero_at_global_minimum(self):
        batch, m = _margin_realizing_batch()
        net = identity_network(2)
        assert total_loss(batch, net, m, TrainConfig()) == 0.0
        grad = loss_gradient(batch, net, m, TrainConfig())
        assert np.linalg.norm(grad) < 1e-9

    def test_anchor_equals_negative_no_nan(self):
        m = linear_chain_margins(2, 1.0)
        x = np.array([[0.5, 0.5]])
        batch = MiniBatch(x, x, x.copy(), np.array([0]), np.array([1]))
        net = identity_network(2)
        loss = total_loss(batch, net, m, TrainConfig())
        assert loss == pytest.approx(1.0)  # Ln = margin^2, Lp = 0
        grad = loss_gradient(batch, net, m, TrainConfig())
        assert np.all(np.isfinite(grad))
        assert np.linalg.norm(grad) == 0.0  # margin-term gradient defined as 0

    def test_lambda_scaling(self):
        ds = two_state_dataset((4, 4), d=3, seed=2)
        batch = sample_triplets(ds, 4, seed=1)
        m = linear_chain_margins(2, 1.0)
        net = init_network(default_layers(3, 2, hidden=(8,), dropout_rate=0.0), 3)
        base_cfg = TrainConfig(lambda_p=1.0, lambda_n=1.0)
        scaled_cfg = TrainConfig(lambda_p=2.0, lambda_n=2.0)
        l1 = total_loss(batch, net, m, base_cfg)
        l2 = total_loss(batch, net, m, scaled_cfg)
        assert l2 == pytest.approx(2.0 * l1, rel=1e-12)
        g1 = loss_gradient(batch, net, m, base_cfg)
        g2 = loss_gradient(batch, net, m, scaled_cfg)
        assert np.allclose(g2, 2.0 * g1, rtol=1e-12)

    def test_isometry_invariance_at_embedding_level(self):
        from affectmap.training import _embedding_loss_and_grad

        rng = np.random.default_rng(11)
        m = linear_chain_margins(3, 1.0)
        cfg = TrainConfig()
        for _ in range(100):
            b = 4
            a = rng.normal(size=(b, 2))
            p = rng.normal(size=(b, 2))
            n = rng.normal(size=(b, 2))
            a_s = rng.integers(0, 3, b)
            n_s = (a_s + 1 + rng.integers(0, 2, b)) % 3
            theta = rng.uniform(0, 2 * np.pi)
            q = np.array([[np.cos(theta), -np.sin(theta)],
                          [np.sin(theta), np.cos(theta)]])
            t = rng.normal(size=2)
            base = _embedding_loss_and_grad(a, p, n, m, a_s, n_s, cfg)[0]
            moved = _embedding_loss_and_grad(
                a @ q.T + t, p @ q.T + t, n @ q.T + t, m, a_s, n_s, cfg
            )[0]
            assert abs(base - moved) < 1e-9

    def test_matches_finite_differences(self):
        from affectmap.network import gradient_check
        from affectmap.training import make_triplet_loss_closure

        rng = np.random.default_rng(17)
        d, b = 6, 8
        m = linear_chain_margins(3, 1.0)
        a_s = rng.integers(0, 3, b)
        n_s = (a_s + 1 + rng.integers(0, 2, b)) % 3
        net = init_network(default_layers(d, 2, hidden=(16,), dropout_rate=0.0), 23)
        stacked = rng.normal(size=(3 * b, d))
        closure = make_triplet_loss_closure(m, a_s, n_s, TrainConfig())
        report = gradient_check(net, stacked, closure)
        assert report.max_rel_error < 1e-5

    def test_descent_sanity_sgd(self):
        # a small enough SGD step never increases the loss on the same batch
        rng = np.random.default_rng(29)
        m = linear_chain_margins(2, 1.0)
        cfg = TrainConfig(optimizer="sgd", learning_rate=1e-6)
        for trial in range(100):
            ds = two_state_dataset((4, 4), d=3, seed=trial)
            batch = sample_triplets(ds, 4, seed=trial)
            net = init_network(
                default_layers(3, 2, hidden=(8,), dropout_rate=0.0), trial
            )
            before = total_loss(batch, net, m, cfg)
            grad = loss_gradient(batch, net, m, cfg)
            stepped = net.with_params(net.params - cfg.learning_rate * grad)
            after = total_loss(batch, stepped, m, cfg)
            assert after <= before + 1e-15


class TestTrainConfig:
    def test_defaults_match_reference_settings(self):
        cfg = TrainConfig()
        assert cfg.batch_size == 32
        assert cfg.lambda_p == 1.0 and cfg.lambda_n == 1.0
        assert cfg.epochs == 10
        assert (cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps) == (0.9, 0.999, 1e-8)

    def test_lambda_positive_required(self):
        with pytest.raises(ValueError):
            TrainConfig(lambda_p=0.0)
        with pytest.raises(ValueError):
            TrainConfig(lambda_n=-1.0)

    def test_unknown_optimizer_rejected(self):
        with pytest.raises(ValueError):
            TrainConfig(optimizer="lbfgs")


def small_spec(s=2, d=4):
    return ManifoldSpec.from_names(
        "toy", [f"s{i}" for i in range(s)], linear_chain_margins(s, 1.0), 2, d
    )


class TestTrain:
    def test_epochs_zero_returns_init_with_means(self):
        ds = synth_gaussian_dataset(2, 20, 4, 3.0, seed=0)
        spec = small_spec()
        net = init_network(default_layers(4, 2, hidden=(8,)), 1)
        model = train(ds, spec, TrainConfig(epochs=0, seed=1), net)
        assert np.array_equal(model.network.params, net.params)
        assert model.state_means.shape == (2, 2)
        assert np.all(np.isfinite(model.state_means))
        assert model.history == ()

    def test_deterministic_given_seeds(self):
        ds = synth_gaussian_dataset(2, 40, 4, 3.0, seed=0)
        spec = small_spec()
        cfg = TrainConfig(epochs=2, seed=5)
        a = train(ds, spec, cfg, init_network(default_layers(4, 2, hidden=(8,)), 5))
        b = train(ds, spec, cfg, init_network(default_layers(4, 2, hidden=(8,)), 5))
        assert np.array_equal(a.network.params, b.network.params)
        assert np.array_equal(a.state_means, b.state_means)
        assert a.history == b.history

    def test_loss_decreases_over_epochs(self):
        ds = synth_gaussian_dataset(3, 60, 6, 4.0, seed=2)
        spec = ManifoldSpec.from_names(
            "toy3", ["a", "b", "c"], linear_chain_margins(3, 1.0), 2, 6
        )
        cfg = TrainConfig(epochs=5, seed=3)
        model = train(ds, spec, cfg, init_network(default_layers(6, 2, hidden=(32,)), 3))
        assert model.history[-1].total < model.history[0].total

    def test_insufficient_samples_per_state(self):
        signals = np.random.default_rng(0).normal(size=(3, 4))
        ds = SignalDataset(signals, np.array([0, 0, 1]), 2, "synthetic")
        with pytest.raises(InsufficientDataError):
            train(ds, small_spec(), TrainConfig(epochs=1),
                  init_network(default_layers(4, 2, hidden=(8,)), 0))

    def test_width_mismatch_rejected(self):
        ds = synth_gaussian_dataset(2, 10, 5, 3.0, seed=0)
        with pytest.raises(ValueError):
            train(ds, small_spec(d=4), TrainConfig(),
                  init_network(default_layers(4, 2, hidden=(8,)), 0))

    def test_divergence_reported_with_step(self):
        ds = synth_gaussian_dataset(2, 40, 4, 3.0, seed=0)
        cfg = TrainConfig(epochs=1, seed=1, learning_rate=1e18, optimizer="sgd")
        with pytest.raises(TrainingDivergedError) as exc:
            with np.errstate(all="ignore"):
                train(ds, small_spec(), cfg,
                      init_network(default_layers(4, 2, hidden=(8,)), 1))
        assert exc.value.step >= 0

    def test_covariances_computed(self):
        ds = synth_gaussian_dataset(2, 30, 4, 3.0, seed=4)
        model = train(ds, small_spec(), TrainConfig(epochs=1, seed=2),
                      init_network(default_layers(4, 2, hidden=(8,)), 2))
        assert model.state_covariances.shape == (2, 2, 2)
        assert np.allclose(
            model.state_covariances, np.transpose(model.state_covariances, (0, 2, 1))
        )


class TestContinueTrain:
    def _trained(self):
        ds = synth_gaussian_dataset(2, 40, 4, 3.0, seed=0)
        spec = small_spec()
        cfg = TrainConfig(epochs=2, seed=5)
        net = init_network(default_layers(4, 2, hidden=(8,)), 5)
        return ds, spec, cfg, train(ds, spec, cfg, net)

    def test_epochs_zero_is_noop_on_params(self):
        ds, spec, cfg, model = self._trained()
        cont = continue_train(model, ds, TrainConfig(epochs=0, seed=9))
        assert np.array_equal(cont.network.params, model.network.params)

    def test_unknown_state_labels_rejected(self):
        ds, spec, cfg, model = self._trained()
        bigger = synth_gaussian_dataset(3, 10, 4, 3.0, seed=1)
        with pytest.raises(ValueError):
            continue_train(model, bigger, TrainConfig(epochs=1))

    def test_history_extends(self):
        ds, spec, cfg, model = self._trained()
        cont = continue_train(model, ds, TrainConfig(epochs=2, seed=9))
        epochs = [h.epoch for h in cont.history]
        assert epochs == [1, 2, 3, 4]

    def test_dataset_loss_deterministic(self):
        ds, spec, cfg, model = self._trained()
        a = dataset_loss(model, ds, cfg, seed=13)
        b = dataset_loss(model, ds, cfg, seed=13)
        assert a == b


class TestLossCsv:
    def test_line_format(self, tmp_path):
        ds = synth_gaussian_dataset(2, 40, 4, 3.0, seed=0)
        model = train(ds, small_spec(), TrainConfig(epochs=2, seed=1),
                      init_network(default_layers(4, 2, hidden=(8,)), 1))
        path = tmp_path / "loss.csv"
        write_loss_csv(model.history, path)
        lines = path.read_text().strip().split("\n")
        assert len(lines) == 2
        for i, line in enumerate(lines, start=1):
            fields = line.split(",")
            assert fields[0] == "epoch"
            assert int(fields[1]) == i
            total, lp, ln = map(float, fields[2:])
            assert total == pytest.approx(lp + ln)
