import json

import numpy as np
import pytest

from stability_meter.classifiers import (
    DecisionTree,
    IncrementalNaiveBayes,
    LearnerParams,
    PredictionFramework,
    StaticModel,
    UpdatePolicy,
    WindowRetrainModel,
)
from stability_meter.errors import NotReadyError
from stability_meter.prefixing import AttributeSchema, BucketConfig, EncodedSample

from oracles import nb_posterior_scores


def _sample(features, label=None, bucket=2):
    return EncodedSample(bucket=bucket, features=tuple(features), label=label)


# ---------------------------------------------------------------------------
# incremental naive Bayes
# ---------------------------------------------------------------------------


def test_nb_trained_on_one_class_predicts_that_class_everywhere():
    model = IncrementalNaiveBayes(bucket=2, numeric_mask=(False, False))
    for features in [(1, 2), (3, 4), (1, 4)]:
        model.observe_label(_sample(features, label=1))
    assert model.predict(_sample((9, 9))) == 1
    assert model.predict(_sample((1, 2))) == 1


def test_nb_exact_tie_breaks_toward_zero():
    model = IncrementalNaiveBayes(bucket=2, numeric_mask=(False, False))
    model.observe_label(_sample((1, 2), label=0))
    model.observe_label(_sample((1, 2), label=1))
    assert model.predict(_sample((1, 2))) == 0


def test_nb_unlabeled_update_is_a_contract_error():
    model = IncrementalNaiveBayes(bucket=2, numeric_mask=(False,))
    with pytest.raises(ValueError):
        model.observe_label(_sample((1,), label=None))


def test_nb_predict_before_any_training_raises():
    model = IncrementalNaiveBayes(bucket=2, numeric_mask=(False,))
    assert not model.is_ready
    with pytest.raises(NotReadyError):
        model.predict(_sample((1,)))


def test_nb_matches_hand_recomputed_posterior_on_holdout():
    rng = np.random.default_rng(11)
    train = [
        (tuple(int(v) for v in rng.integers(1, 4, size=3)), int(rng.integers(0, 2)))
        for _ in range(20)
    ]
    model = IncrementalNaiveBayes(bucket=2, numeric_mask=(False, False, False))
    for features, label in train:
        model.observe_label(_sample(features, label=label))
    for held_out in [(1, 1, 1), (3, 2, 1), (2, 2, 2), (9, 1, 3)]:
        scores = nb_posterior_scores(train, held_out)
        expected = int(scores[1] > scores[0])
        assert model.predict(_sample(held_out)) == expected


def test_nb_counts_equal_batch_recount_within_memory():
    rng = np.random.default_rng(5)
    model = IncrementalNaiveBayes(bucket=2, numeric_mask=(False, False), memory=500)
    history = []
    for _ in range(100):
        features = tuple(int(v) for v in rng.integers(0, 3, size=2))
        label = int(rng.integers(0, 2))
        history.append((features, label))
        model.observe_label(_sample(features, label=label))
    assert model.version == 100
    expected_class = [sum(1 for _, y in history if y == c) for c in (0, 1)]
    assert model._class_counts == expected_class
    for index in range(2):
        for value, entry in model._counts[index].items():
            for label in (0, 1):
                recount = sum(
                    1 for f, y in history if float(f[index]) == value and y == label
                )
                assert entry[label] == recount


def test_nb_counts_cover_only_the_memory_window():
    model = IncrementalNaiveBayes(bucket=2, numeric_mask=(False,), memory=10)
    for i in range(25):
        model.observe_label(_sample((i % 4,), label=i % 2))
    assert sum(model._class_counts) == 10
    assert len(model._window) == 10
    # decision follows the window: feed a burst of one class
    for _ in range(10):
        model.observe_label(_sample((0,), label=1))
    assert model.predict(_sample((0,))) == 1


def test_nb_numeric_features_use_grace_deciles():
    model = IncrementalNaiveBayes(bucket=2, numeric_mask=(False, True))
    rng = np.random.default_rng(3)
    grace = []
    for _ in range(60):
        features = (int(rng.integers(0, 3)), float(rng.uniform(0, 100)))
        label = int(features[1] > 50)
        grace.append((features, label))
        model.observe_label(_sample(features, label=label))
    assert not model.is_ready  # nothing counted until the bins are frozen
    model.finish_grace()
    assert model.is_ready
    bins = {1: model._bins[1]}
    for probe in [(0, 5.0), (1, 95.0), (2, 55.0)]:
        scores = nb_posterior_scores(
            grace, probe, bins=bins, numeric_mask=[False, True]
        )
        assert model.predict(_sample(probe)) == int(scores[1] > scores[0])


def test_models_reject_samples_of_the_wrong_width():
    nb = IncrementalNaiveBayes(bucket=2, numeric_mask=(False, False))
    with pytest.raises(ValueError, match="schema mismatch"):
        nb.observe_label(_sample((1,), label=0))
    static = StaticModel(bucket=3, numeric_mask=(False, False, False))
    with pytest.raises(ValueError, match="schema mismatch"):
        static.observe_label(_sample((1, 2), label=0, bucket=3))


def test_nb_version_counts_updates():
    model = IncrementalNaiveBayes(bucket=2, numeric_mask=(False,))
    before = model.version
    model.observe_label(_sample((1,), label=1))
    assert model.version == before + 1
    prediction = model.predict(_sample((1,)))
    assert model.version == before + 1  # predict does not mutate
    assert prediction == 1


# ---------------------------------------------------------------------------
# decision tree
# ---------------------------------------------------------------------------


def test_tree_pure_window_predicts_constant():
    tree = DecisionTree(max_depth=3, min_leaf=1).fit(
        [(1, 1)] * 6, [1] * 6, numeric_mask=(False, False)
    )
    assert tree.predict((1, 1)) == 1
    assert tree.predict((7, 7)) == 1


def test_tree_solves_xor_with_depth_two():
    features = [(0, 0), (0, 1), (1, 0), (1, 1)]
    labels = [0, 1, 1, 0]
    tree = DecisionTree(max_depth=2, min_leaf=1).fit(
        features, labels, numeric_mask=(False, False)
    )
    assert [tree.predict(f) for f in features] == labels


def test_tree_is_deterministic_bit_for_bit():
    rng = np.random.default_rng(17)
    features = [tuple(map(float, rng.uniform(0, 1, size=3))) for _ in range(80)]
    labels = [int(f[0] + f[2] > 1.0) for f in features]
    mask = (True, True, True)
    first = DecisionTree(max_depth=4, min_leaf=2).fit(features, labels, mask)
    second = DecisionTree(max_depth=4, min_leaf=2).fit(features, labels, mask)
    assert json.dumps(first.to_dict(), sort_keys=True) == json.dumps(
        second.to_dict(), sort_keys=True
    )


def test_tree_min_leaf_blocks_tiny_splits():
    features = [(0,), (1,), (0,), (1,)]
    labels = [0, 1, 0, 1]
    tree = DecisionTree(max_depth=3, min_leaf=5).fit(features, labels, (False,))
    assert tree.root.prediction is not None  # single leaf, no split possible


def test_tree_separable_numeric_data_fits_perfectly():
    rng = np.random.default_rng(23)
    features = [(float(rng.uniform(0, 1)), float(rng.uniform(0, 1))) for _ in range(40)]
    labels = [int(f[0] > 0.5) for f in features]
    tree = DecisionTree(max_depth=6, min_leaf=5).fit(features, labels, (True, True))
    assert all(tree.predict(f) == y for f, y in zip(features, labels))


def test_tree_leaf_tie_breaks_toward_zero():
    tree = DecisionTree(max_depth=1, min_leaf=1).fit(
        [(0,), (0,)], [0, 1], numeric_mask=(False,)
    )
    assert tree.predict((0,)) == 0


# ---------------------------------------------------------------------------
# window-retrain model
# ---------------------------------------------------------------------------


def _labeled_stream(n, rng):
    for _ in range(n):
        features = (int(rng.integers(0, 2)), int(rng.integers(0, 3)))
        yield _sample(features, label=int(features[0]))


def test_window_retrain_memory_never_exceeds_capacity():
    rng = np.random.default_rng(2)
    model = WindowRetrainModel(bucket=2, numeric_mask=(False, False), train_window=50)
    model.finish_grace()  # empty window: nothing to train on yet
    assert not model.is_ready
    for sample in _labeled_stream(200, rng):
        model.observe_label(sample)
        assert model.window_size <= 50
    assert model.is_ready


def test_window_retrain_same_window_gives_identical_trees():
    rng = np.random.default_rng(9)
    samples = list(_labeled_stream(60, rng))
    model = WindowRetrainModel(bucket=2, numeric_mask=(False, False), train_window=100)
    for sample in samples:
        model.observe_label(sample)
    model.retrain()
    first = json.dumps(model.tree_dict(), sort_keys=True)
    version = model.version
    model.retrain()
    assert json.dumps(model.tree_dict(), sort_keys=True) == first
    assert model.version == version + 1


def test_window_retrain_empty_window_is_not_ready():
    model = WindowRetrainModel(bucket=2, numeric_mask=(False,))
    with pytest.raises(NotReadyError):
        model.retrain()
    with pytest.raises(NotReadyError):
        model.predict(_sample((1,)))


def test_window_retrain_cadence_throttles_retraining():
    rng = np.random.default_rng(4)
    model = WindowRetrainModel(
        bucket=2, numeric_mask=(False, False), train_window=100, retrain_every=5
    )
    for sample in _labeled_stream(10, rng):
        model.observe_label(sample)
    model.finish_grace()
    base = model.version
    for sample in _labeled_stream(9, rng):
        model.observe_label(sample)
    assert model.version == base + 1  # one retrain after 5 labels, next at 10
    predicted = model.predict(_sample((1, 0)))
    assert predicted in (0, 1)


# ---------------------------------------------------------------------------
# static model
# ---------------------------------------------------------------------------


def test_static_model_trains_once_and_freezes():
    rng = np.random.default_rng(8)
    model = StaticModel(bucket=2, numeric_mask=(False, False))
    for sample in _labeled_stream(200, rng):
        model.observe_label(sample)
    model.finish_grace()
    assert model.version == 1
    snapshot = json.dumps(model.tree_dict(), sort_keys=True)
    probes = [_sample((i % 2, i % 3)) for i in range(6)]
    before = [model.predict(p) for p in probes]
    # post-grace labels with inverted outcomes must change nothing
    for sample in _labeled_stream(100, rng):
        model.observe_label(_sample(sample.features, label=1 - sample.label))
    assert model.version == 1
    assert json.dumps(model.tree_dict(), sort_keys=True) == snapshot
    assert [model.predict(p) for p in probes] == before


def test_static_second_training_call_is_a_contract_error():
    model = StaticModel(bucket=2, numeric_mask=(False,))
    model.train([((0,), 0), ((1,), 1)] * 3)
    with pytest.raises(ValueError):
        model.train([((0,), 0)])


def test_static_predict_before_training_raises():
    model = StaticModel(bucket=2, numeric_mask=(False,))
    with pytest.raises(NotReadyError):
        model.predict(_sample((0,)))


# ---------------------------------------------------------------------------
# framework assembly
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "policy,kind",
    [
        ("incremental", IncrementalNaiveBayes),
        ("window-retrain", WindowRetrainModel),
        ("static", StaticModel),
    ],
)
def test_framework_builds_one_model_per_bucket(policy, kind):
    buckets = BucketConfig(k_min=2, k_max=5)
    schema = AttributeSchema(names=("amount",), numeric=(True,))
    framework = PredictionFramework.build(policy, buckets, schema, LearnerParams())
    assert sorted(framework.models) == [2, 3, 4, 5]
    assert all(isinstance(model, kind) for model in framework.models.values())
    assert framework.policy is UpdatePolicy(policy)
    assert framework.model(3).bucket == 3
