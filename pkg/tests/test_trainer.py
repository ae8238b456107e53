"""Loss, optimizer, batching and the per-trait training loop."""

import math

import numpy as np
import pytest

from hyperpersona import autodiff as ad
from hyperpersona.autodiff import backward, zero_grads
from hyperpersona.embeddings import hash_embed
from hyperpersona.errors import ConfigurationError, NumericError
from hyperpersona.hiergraph import LevelConfig, to_hiergraph
from hyperpersona.hypergraph import build_hypergraph
from hyperpersona.model import batch_graphs, forward, forward_batch, init_params, ModelConfig
from hyperpersona.rng import RngStream
from hyperpersona.segmenter import segment
from hyperpersona.synth import SyntheticSpec, make_synthetic_corpus
from hyperpersona.trainer import (
    AdamW,
    TrainConfig,
    bce_loss,
    evaluate_accuracy,
    make_batches,
    predict,
    train_trait,
)

DIM = 8


def _graphs_from_corpus(records, dim=DIM, seed=5, level=LevelConfig.FULL):
    graphs, labels = [], []
    for record in records:
        doc = segment(record.id, record.text)
        graphs.append(to_hiergraph(build_hypergraph(doc, hash_embed(doc, dim, seed)), level))
        labels.append(record.labels.openness)
    return graphs, np.array(labels, dtype=np.float64)


class TestBceLoss:
    def test_logit_zero_label_one(self):
        loss = bce_loss(ad.tensor([[0.0]]), [1.0])
        assert loss.item() == pytest.approx(math.log(2.0), abs=1e-12)

    def test_logit_zero_label_zero(self):
        loss = bce_loss(ad.tensor([[0.0]]), [0.0])
        assert loss.item() == pytest.approx(math.log(2.0), abs=1e-12)

    def test_logit_two_label_one(self):
        loss = bce_loss(ad.tensor([[2.0]]), [1.0])
        assert loss.item() == pytest.approx(0.126928, abs=1e-6)

    def test_huge_logit_no_overflow(self):
        loss = bce_loss(ad.tensor([[1000.0]]), [1.0])
        assert loss.item() == pytest.approx(0.0, abs=1e-12)
        loss = bce_loss(ad.tensor([[-1000.0]]), [0.0])
        assert loss.item() == pytest.approx(0.0, abs=1e-12)

    def test_equals_textbook_form(self):
        # textbook form evaluated in high precision; float64 would lose ~1e-9
        # to cancellation in 1 - sigmoid(x) near |x| = 20
        import mpmath

        mpmath.mp.dps = 40
        stream = RngStream(3)
        logits = stream.uniform_signed(500) * 20
        labels = (stream.uniforms(500) > 0.5).astype(np.float64)
        stable = bce_loss(ad.tensor(logits.reshape(-1, 1)), labels).item()
        terms = []
        for x, y in zip(logits, labels):
            p = 1 / (1 + mpmath.e ** (-mpmath.mpf(float(x))))
            terms.append(-(y * mpmath.log(p) + (1 - y) * mpmath.log(1 - p)))
        textbook = float(mpmath.fsum(terms) / len(terms))
        assert abs(stable - textbook) < 1e-10

    def test_gradient_is_sigmoid_minus_label(self):
        logits = ad.param(np.array([[0.5], [-1.0], [2.0]]))
        labels = np.array([1.0, 0.0, 1.0])
        backward(bce_loss(logits, labels))
        expected = (1.0 / (1.0 + np.exp(-logits.data.reshape(-1))) - labels) / 3.0
        np.testing.assert_allclose(logits.grad.reshape(-1), expected, atol=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(Exception):
            bce_loss(ad.tensor([[0.0], [1.0]]), [1.0])

    def test_bad_label(self):
        with pytest.raises(ConfigurationError):
            bce_loss(ad.tensor([[0.0]]), [0.5])


class TestAdamW:
    def test_zero_grad_zero_decay_no_change(self):
        p = ad.param(np.array([1.0, -2.0]))
        p.grad = np.zeros(2)
        opt = AdamW([p], lr=0.1, weight_decay=0.0)
        opt.step()
        np.testing.assert_array_equal(p.data, [1.0, -2.0])

    def test_first_step_moves_by_learning_rate(self):
        p = ad.param(np.array([1.0]))
        p.grad = np.array([1.0])
        opt = AdamW([p], lr=0.1, weight_decay=0.0)
        opt.step()
        assert p.data[0] == pytest.approx(0.9, abs=1e-7)

    def test_decoupled_decay_only(self):
        p = ad.param(np.array([2.0]))
        p.grad = np.array([0.0])
        opt = AdamW([p], lr=0.1, weight_decay=0.5)
        opt.step()
        # shrink by exactly lr*wd*theta
        assert p.data[0] == pytest.approx(2.0 - 0.1 * 0.5 * 2.0, abs=1e-12)

    def test_nan_gradient_aborts_atomically(self):
        p = ad.param(np.array([1.0]))
        q = ad.param(np.array([1.0]))
        p.grad = np.array([np.nan])
        q.grad = np.array([1.0])
        opt = AdamW([q, p], lr=0.1)
        with pytest.raises(NumericError):
            opt.step()
        np.testing.assert_array_equal(q.data, [1.0])  # untouched
        assert opt.step_count == 0

    def test_moments_converge_on_constant_gradient(self):
        p = ad.param(np.array([0.0]))
        opt = AdamW([p], lr=0.01)
        for _ in range(50):
            p.grad = np.array([1.0])
            opt.step()
        # steady descent: ~lr per step against unit gradient
        assert p.data[0] == pytest.approx(-0.5, abs=0.02)


class TestMakeBatches:
    def _tiny_graphs(self, n):
        records, _ = make_synthetic_corpus(SyntheticSpec(num_docs=max(n, 20), seed=2))
        graphs, labels = _graphs_from_corpus(records[:n])
        return graphs, labels

    def test_sizes(self):
        graphs, labels = self._tiny_graphs(10)
        batches = make_batches(graphs, labels, 8, RngStream(1))
        assert [b[0].num_graphs for b in batches] == [8, 2]

    def test_same_seed_same_order(self):
        graphs, labels = self._tiny_graphs(10)
        a = make_batches(graphs, labels, 4, RngStream(9))
        b = make_batches(graphs, labels, 4, RngStream(9))
        assert [x[0].doc_ids for x in a] == [x[0].doc_ids for x in b]

    def test_batched_matches_sequential(self):
        graphs, labels = self._tiny_graphs(6)
        params = init_params(ModelConfig(feature_dim=DIM, hidden_dims=(6, 5), head_dim=4),
                             RngStream(3))
        batch = batch_graphs(graphs)
        batched = forward_batch(batch, params, RngStream(0), "eval").data.reshape(-1)
        for i, graph in enumerate(graphs):
            single = forward(graph, params, RngStream(0), "eval").item()
            assert abs(batched[i] - single) < 1e-6

    def test_empty_rejected(self):
        with pytest.raises(ConfigurationError):
            make_batches([], [], 4, RngStream(0))


class TestTrainTrait:
    def test_config_validation(self):
        with pytest.raises(ConfigurationError):
            TrainConfig(epochs=0)
        with pytest.raises(ConfigurationError):
            TrainConfig(batch_size=0)
        with pytest.raises(ConfigurationError):
            TrainConfig(dropout=1.0)

    def test_tau_schedule(self):
        config = TrainConfig(epochs=11, tau_start=1.0, tau_end=0.1)
        assert config.tau_at(0) == pytest.approx(1.0)
        assert config.tau_at(10) == pytest.approx(0.1)
        assert config.tau_at(5) == pytest.approx(math.sqrt(0.1), rel=1e-9)
        constant = TrainConfig(epochs=5, tau_start=0.7)
        assert constant.tau_at(3) == 0.7

    def test_single_class_rejected(self):
        records, _ = make_synthetic_corpus(SyntheticSpec(num_docs=20, seed=3))
        graphs, _ = _graphs_from_corpus(records[:4])
        with pytest.raises(ConfigurationError, match="single class"):
            train_trait(graphs, [True, True, True, True], TrainConfig(epochs=1), "openness")

    def test_learns_planted_signal(self):
        records, _ = make_synthetic_corpus(
            SyntheticSpec(num_docs=40, seed=11, concentrate_positives=0.0,
                          positive_occurrences=(6, 8), negative_occurrences=(0, 0),
                          words_per_sentence=16)
        )
        graphs, labels = _graphs_from_corpus(records, dim=24, seed=5)
        config = TrainConfig(epochs=40, batch_size=8, learning_rate=3e-3,
                             seed=1, dropout=0.0)
        params, history = train_trait(graphs, labels, config, "openness")
        accuracy = evaluate_accuracy(params, graphs, labels)
        assert accuracy >= 0.95
        assert history.train_loss[-1] < history.train_loss[0]
        assert len(history.train_loss) == 40
        assert len(history.wall_clock) == 40

    def test_seed_reproducibility_bit_exact(self):
        records, _ = make_synthetic_corpus(SyntheticSpec(num_docs=24, seed=5))
        graphs, labels = _graphs_from_corpus(records)
        config = TrainConfig(epochs=2, batch_size=8, seed=77, hidden_dims=(6, 5), head_dim=4)
        params_a, history_a = train_trait(graphs, labels, config, "openness")
        params_b, history_b = train_trait(graphs, labels, config, "openness")
        for (_, a), (_, b) in zip(params_a.named_parameters(), params_b.named_parameters()):
            np.testing.assert_array_equal(a.data, b.data)
        assert history_a.train_loss == history_b.train_loss

    def test_history_includes_eval_accuracy(self):
        records, _ = make_synthetic_corpus(SyntheticSpec(num_docs=30, seed=6))
        graphs, labels = _graphs_from_corpus(records)
        config = TrainConfig(epochs=2, batch_size=8, seed=1, hidden_dims=(6, 5), head_dim=4)
        _, history = train_trait(
            graphs[:24], labels[:24], config, "openness",
            eval_graphs=graphs[24:], eval_labels=labels[24:],
        )
        assert history.eval_accuracy is not None
        assert len(history.eval_accuracy) == 2


class TestPredict:
    def _trained(self):
        records, _ = make_synthetic_corpus(SyntheticSpec(num_docs=20, seed=8))
        graphs, labels = _graphs_from_corpus(records)
        config = TrainConfig(epochs=1, batch_size=8, seed=1, hidden_dims=(6, 5), head_dim=4)
        params, _ = train_trait(graphs, labels, config, "openness")
        return params, graphs

    def test_probability_matches_logit(self):
        params, graphs = self._trained()
        logit = forward(graphs[0], params, RngStream(0), "eval").item()
        prob, label = predict(params, graphs[0])
        assert prob == pytest.approx(1.0 / (1.0 + math.exp(-logit)), abs=1e-12)
        assert label == (prob >= 0.5)

    def test_negative_logit_probability(self):
        # sigmoid(-3) ~ 0.0474
        assert 1.0 / (1.0 + math.exp(3.0)) == pytest.approx(0.0474, abs=1e-4)

    def test_eval_determinism(self):
        params, graphs = self._trained()
        assert predict(params, graphs[0]) == predict(params, graphs[0])
