"""Classifier: config, backbone, pretraining posts, fine-tuning freeze."""

import numpy as np
import pytest

from cdnet.classifier import (BaseClassifier, TrainConfig, build_small_cnn,
                              finetune, predict, pretrain, train_ce)
from cdnet.diffusion import linear_schedule
from cdnet.losses import UncertaintyWeights
from cdnet.reverse import generate_contrastive_sets, train_all_chains
from cdnet.seeding import derive_rng
from cdnet.simgen import SimConfig, generate_sim_dataset


def snapshot(params):
    return [p.values.copy() for p in params]


def identical(params, snap):
    return all(np.array_equal(p.values, s) for p, s in zip(params, snap))


# --- TrainConfig -------------------------------------------------------------

def test_config_defaults_and_roundtrip():
    cfg = TrainConfig()
    assert cfg.epochs_pretrain == 100 and cfg.epochs_finetune == 50
    assert cfg.batch_size == 16 and cfg.learning_rate == 1e-3
    assert cfg.margin == 1.0 and cfg.temperature == 0.1
    assert cfg.t_steps == 5 and (cfg.beta_min, cfg.beta_max) == (0.05, 0.3)
    assert cfg.noise_std == 0.25 and cfg.chain_epochs == 200
    assert TrainConfig.from_dict(cfg.to_dict()) == cfg


@pytest.mark.parametrize("bad", [
    dict(epochs_pretrain=0), dict(batch_size=-1), dict(t_steps=0),
    dict(learning_rate=-0.1), dict(temperature=0.0), dict(epsilon_snn=0.0),
    dict(beta_min=0.4, beta_max=0.3), dict(beta_max=1.0), dict(beta_min=0.0),
    dict(noise_std=-0.1), dict(margin=-1.0), dict(epochs_finetune=2.5),
])
def test_config_validation(bad):
    with pytest.raises(ValueError):
        TrainConfig(**bad)


# --- Backbone ---------------------------------------------------------------

def test_build_shapes_and_prediction():
    clf = build_small_cnn(32, embedding_dim=8, rng=derive_rng(0, "clf"))
    x = np.random.default_rng(0).normal(size=32)
    emb = clf.embed(x)
    assert emb.shape == (1, 8)
    logits = clf.forward(x)
    assert logits.shape == (1, 2)
    label, probs = predict(clf, x)
    assert label in (0, 1) and probs.shape == (2,)


def test_build_rejects_short_input():
    with pytest.raises(ValueError, match=">= 8"):
        build_small_cnn(7, rng=derive_rng(0, "clf"))


def test_build_same_seed_identical():
    a = build_small_cnn(16, rng=derive_rng(3, "clf"))
    b = build_small_cnn(16, rng=derive_rng(3, "clf"))
    assert identical(a.parameters(), snapshot(b.parameters()))


def test_embed_then_head_matches_forward():
    clf = build_small_cnn(24, rng=derive_rng(1, "clf"))
    x = np.random.default_rng(4).normal(size=(5, 24))
    via_parts = clf.logits_from_embedding(clf.embed(x)).values
    assert np.array_equal(via_parts, clf.forward(x).values)


def test_predict_tie_breaks_to_label_zero():
    clf = build_small_cnn(16, rng=derive_rng(2, "clf"))
    clf.head_w.values[...] = 0.0
    clf.head_b.values[...] = 1.3
    label, probs = predict(clf, np.zeros(16))
    assert label == 0
    np.testing.assert_allclose(probs, [0.5, 0.5], atol=1e-15)


def test_predict_extreme_logits():
    clf = build_small_cnn(16, rng=derive_rng(2, "clf"))
    clf.head_w.values[...] = 0.0
    clf.head_b.values[...] = (0.0, 10.0)
    label, probs = predict(clf, np.zeros(16))
    assert label == 1 and probs[1] > 0.9999


def test_predict_probabilities_normalized():
    clf = build_small_cnn(16, rng=derive_rng(6, "clf"))
    rng = np.random.default_rng(8)
    for _ in range(10):
        _, probs = predict(clf, rng.normal(size=16))
        assert abs(probs.sum() - 1.0) < 1e-12


def test_predict_length_mismatch():
    clf = build_small_cnn(16, rng=derive_rng(0, "clf"))
    with pytest.raises(ValueError, match="length"):
        predict(clf, np.zeros(17))


# --- Easy-data pipeline fixture ----------------------------------------------

EASY = SimConfig(noise_level=0, similarity_level=0, multimodality_level=5,
                 n_per_class=20, length=64, seed=0)


@pytest.fixture(scope="module")
def easy_sets():
    dataset = generate_sim_dataset(EASY)
    config = TrainConfig(t_steps=3, chain_epochs=60, epochs_pretrain=60,
                         epochs_finetune=30, batch_size=8, seed=0)
    schedule = linear_schedule(config.t_steps, config.beta_min, config.beta_max)
    chains = train_all_chains(dataset, schedule, config, seed=1)
    sets = generate_contrastive_sets(dataset, chains, schedule,
                                     config.noise_std, seed=2)
    return dataset, config, sets


@pytest.fixture(scope="module")
def pretrained(easy_sets):
    dataset, config, sets = easy_sets
    clf = build_small_cnn(EASY.length, rng=derive_rng(5, "clf"))
    weights = UncertaintyWeights()
    log = pretrain(clf, sets, weights, config)
    return dataset, config, clf, weights, log


def accuracy(clf, split):
    hits = sum(predict(clf, s.values)[0] == s.label for s in split)
    return hits / len(split)


# --- Pretraining -------------------------------------------------------------

def test_pretrain_logs_one_report_per_epoch(pretrained):
    _, config, _, _, log = pretrained
    assert len(log) == config.epochs_pretrain
    for report in log:
        assert np.isfinite(report.l_total)
        assert report.l_ce >= 0 and report.l_triplet >= 0


def test_pretrain_composite_decreases(pretrained):
    _, config, _, _, log = pretrained
    decile = max(1, config.epochs_pretrain // 10)
    first = np.mean([r.l_total for r in log[:decile]])
    last = np.mean([r.l_total for r in log[-decile:]])
    assert last < first


def test_pretrain_easy_anchor_accuracy(pretrained):
    dataset, _, clf, _, _ = pretrained
    assert accuracy(clf, dataset.train) >= 0.9


def test_pretrain_moves_sigmas(pretrained):
    _, _, _, weights, _ = pretrained
    assert any(abs(p.item()) > 1e-3 for p in weights.parameters())


def test_pretrain_lr_zero_changes_nothing(easy_sets):
    _, config, sets = easy_sets
    clf = build_small_cnn(EASY.length, rng=derive_rng(7, "clf"))
    weights = UncertaintyWeights()
    frozen = TrainConfig(**{**config.to_dict(),
                            "learning_rate": 0.0, "epochs_pretrain": 1})
    before = snapshot(clf.parameters() + weights.parameters())
    log = pretrain(clf, sets, weights, frozen)
    assert len(log) == 1 and np.isfinite(log[0].l_total)
    assert identical(clf.parameters() + weights.parameters(), before)


def test_pretrain_determinism(easy_sets):
    _, config, sets = easy_sets
    short = TrainConfig(**{**config.to_dict(), "epochs_pretrain": 3})
    results = []
    for _ in range(2):
        clf = build_small_cnn(EASY.length, rng=derive_rng(9, "clf"))
        pretrain(clf, sets, UncertaintyWeights(), short)
        results.append(snapshot(clf.parameters()))
    assert all(np.array_equal(a, b) for a, b in zip(*results))


def test_pretrain_batch_larger_than_data(easy_sets):
    _, config, sets = easy_sets
    clf = build_small_cnn(EASY.length, rng=derive_rng(0, "clf"))
    big = TrainConfig(**{**config.to_dict(), "batch_size": len(sets) + 1})
    with pytest.raises(ValueError, match="batch_size"):
        pretrain(clf, sets, UncertaintyWeights(), big)


def test_pretrain_inconsistent_length(easy_sets):
    _, config, sets = easy_sets
    clf = build_small_cnn(32, rng=derive_rng(0, "clf"))  # wrong M
    with pytest.raises(ValueError, match="length"):
        pretrain(clf, sets, UncertaintyWeights(), config)


# --- Fine-tuning --------------------------------------------------------------

def test_finetune_freeze_contract_and_accuracy(pretrained):
    dataset, config, clf, _, _ = pretrained
    before_body = snapshot(clf.body_parameters())
    before_head = snapshot(clf.head_parameters())
    acc_before = accuracy(clf, dataset.test)
    finetune(clf, dataset.train, config)
    assert identical(clf.body_parameters(), before_body), "body moved"
    assert not identical(clf.head_parameters(), before_head), "head never moved"
    acc_after = accuracy(clf, dataset.test)
    assert acc_after >= acc_before - 0.05


def test_finetune_lr_zero_keeps_head(pretrained):
    dataset, config, clf, _, _ = pretrained
    frozen = TrainConfig(**{**config.to_dict(), "learning_rate": 0.0})
    before = snapshot(clf.parameters())
    finetune(clf, dataset.train, frozen)
    assert identical(clf.parameters(), before)


def test_finetune_accepts_dataset_object(pretrained):
    dataset, config, clf, _, _ = pretrained
    short = TrainConfig(**{**config.to_dict(), "epochs_finetune": 1})
    finetune(clf, dataset, short)  # Dataset, not a list


# --- CE baseline ---------------------------------------------------------------

def test_train_ce_learns_easy_data():
    dataset = generate_sim_dataset(EASY)
    config = TrainConfig(epochs_pretrain=40, epochs_finetune=20, batch_size=8,
                         seed=3)
    clf = build_small_cnn(EASY.length, rng=derive_rng(11, "clf"))
    train_ce(clf, dataset.train, config)
    assert accuracy(clf, dataset.train) >= 0.9


def test_train_ce_respects_explicit_epochs():
    dataset = generate_sim_dataset(EASY)
    config = TrainConfig(batch_size=8, seed=3, learning_rate=0.0)
    clf = build_small_cnn(EASY.length, rng=derive_rng(12, "clf"))
    before = snapshot(clf.parameters())
    train_ce(clf, dataset.train, config, epochs=2)
    assert identical(clf.parameters(), before)
