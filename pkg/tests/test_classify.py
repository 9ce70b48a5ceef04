import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from csihdfm.classify import (
    ClassifierSpec,
    FeatureSet,
    classify,
    evaluate,
    knn_predict,
    knn_predict_many,
    linear_train,
    read_features,
    softmax_loss_and_grad,
    split,
    write_features,
)


def _blobs(seed, n=40, d=3, gap=10.0):
    rng = np.random.default_rng(seed)
    x = np.vstack([rng.standard_normal((n, d)), rng.standard_normal((n, d)) + gap])
    return FeatureSet(x, ["A"] * n + ["B"] * n)


def test_split_counts_and_disjoint():
    fs = FeatureSet(np.arange(300.0)[:, None], ["a"] * 100 + ["b"] * 100 + ["c"] * 100)
    train, test = split(fs, 0.25, seed=1)
    assert len(train) == 225 and len(test) == 75
    for label in "abc":
        assert test.labels.count(label) == 25 and train.labels.count(label) == 75
    ids = set(train.sample_ids) | set(test.sample_ids)
    assert ids == set(fs.sample_ids) and not set(train.sample_ids) & set(test.sample_ids)


def test_split_deterministic():
    fs = _blobs(0)
    a, b = split(fs, 0.25, 7), split(fs, 0.25, 7)
    assert a[1].sample_ids == b[1].sample_ids
    assert split(fs, 0.25, 8)[1].sample_ids != a[1].sample_ids


def test_split_two_per_class():
    fs = FeatureSet(np.zeros((4, 1)), ["a", "a", "b", "b"])
    train, test = split(fs, 0.5)
    assert sorted(train.labels) == ["a", "b"] and sorted(test.labels) == ["a", "b"]


def test_split_errors():
    fs = FeatureSet(np.zeros((3, 1)), ["a", "a", "b"])
    with pytest.raises(ValueError):
        split(fs, 0.25)
    with pytest.raises(ValueError):
        split(_blobs(0), 1.0)


def test_featureset_validation():
    with pytest.raises(ValueError):
        FeatureSet(np.zeros((2, 1)), ["a"])
    with pytest.raises(ValueError):
        FeatureSet(np.zeros((1, 1)), ["z"], ["a"])


def test_knn_nearest_point():
    train = FeatureSet(np.array([[0, 0], [1, 0], [10, 0]]), ["A", "A", "B"])
    assert knn_predict(train, [0.4, 0], k=1) == "A"
    assert knn_predict(train, [9, 0], k=1) == "B"


def test_knn_full_tie_goes_to_earliest_label():
    train = FeatureSet(np.array([[5.0], [0.0], [6.0], [1.0]]), ["B", "A", "B", "A"], ["B", "A"])
    assert knn_predict(train, [0.0], k=4) == "B"
    train = FeatureSet(train.features, train.labels, ["A", "B"])
    assert knn_predict(train, [6.0], k=4) == "A"


def test_knn_distance_tie_lower_index():
    train = FeatureSet(np.array([[1.0], [-1.0]]), ["B", "A"])
    assert knn_predict(train, [0.0], k=1) == "B"


def test_knn_separated_blobs():
    report, _ = classify(_blobs(3), ClassifierSpec("knn", k=5), 0.25, seed=0)
    assert report.accuracy == 1.0


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-3, 1e3), st.integers(0, 1000))
def test_knn_scale_invariant(scale, seed):
    fs = _blobs(seed % 7, n=10, gap=1.0)
    q = np.random.default_rng(seed).standard_normal((5, 3))
    scaled = FeatureSet(fs.features * scale, fs.labels)
    assert knn_predict_many(fs, q, 3) == knn_predict_many(scaled, q * scale, 3)


def test_knn_errors():
    fs = _blobs(0, n=2)
    with pytest.raises(ValueError):
        knn_predict(fs, [0, 0, 0], k=5)
    with pytest.raises(ValueError):
        knn_predict(fs, [0, 0, 0], k=0)


def test_linear_separable_train_accuracy():
    fs = _blobs(1, gap=4.0)
    model = linear_train(fs, epochs=50, seed=0)
    assert model.predict(fs.features) == fs.labels


def test_linear_identical_features():
    fs = FeatureSet(np.ones((40, 2)), ["A"] * 20 + ["B"] * 20)
    report, _ = classify(fs, ClassifierSpec("linear", epochs=20), 0.5, seed=0)
    assert report.accuracy == 0.5


def test_linear_deterministic():
    fs = _blobs(2, gap=1.0)
    a = linear_train(fs, epochs=10, seed=4)
    b = linear_train(fs, epochs=10, seed=4)
    assert a.weights.tobytes() == b.weights.tobytes()


def test_linear_single_class():
    with pytest.raises(ValueError):
        linear_train(FeatureSet(np.zeros((3, 2)), ["A"] * 3))


def test_softmax_gradient_finite_difference():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((5, 4))
    y = np.array([0, 2, 1, 2, 0])
    w = rng.standard_normal((3, 4))
    b = rng.standard_normal(3)
    _, gw, gb = softmax_loss_and_grad(w, b, x, y, l2=0.1)
    h = 1e-6
    num_w = np.zeros_like(w)
    for idx in np.ndindex(w.shape):
        wp, wm = w.copy(), w.copy()
        wp[idx] += h
        wm[idx] -= h
        num_w[idx] = (softmax_loss_and_grad(wp, b, x, y, 0.1)[0] - softmax_loss_and_grad(wm, b, x, y, 0.1)[0]) / (2 * h)
    num_b = np.zeros_like(b)
    for i in range(3):
        bp, bm = b.copy(), b.copy()
        bp[i] += h
        bm[i] -= h
        num_b[i] = (softmax_loss_and_grad(w, bp, x, y, 0.1)[0] - softmax_loss_and_grad(w, bm, x, y, 0.1)[0]) / (2 * h)
    np.testing.assert_allclose(gw, num_w, rtol=1e-5, atol=1e-9)
    np.testing.assert_allclose(gb, num_b, rtol=1e-5, atol=1e-9)


def test_evaluate_hand_example():
    preds = [("A", "A"), ("A", "A"), ("B", "A"), ("B", "B")]
    r = evaluate(preds, ["A", "B"])
    np.testing.assert_array_equal(r.confusion, [[2, 0], [1, 1]])
    assert r.accuracy == 0.75
    assert r.macro_precision == pytest.approx((2 / 3 + 1) / 2)
    assert r.macro_recall == pytest.approx(0.75)
    assert r.macro_f1 == pytest.approx((0.8 + 2 / 3) / 2)


def test_evaluate_perfect_and_single():
    r = evaluate([("a", "a"), ("b", "b"), ("c", "c")], ["a", "b", "c"])
    assert r.accuracy == r.macro_precision == r.macro_recall == r.macro_f1 == 1.0
    np.testing.assert_array_equal(r.confusion, np.eye(3))
    assert evaluate([("a", "a")] * 4, ["a"]).accuracy == 1.0


def test_evaluate_empty_column_and_errors():
    r = evaluate([("a", "b"), ("b", "b")], ["a", "b"])
    assert r.precision[0] == 0.0 and r.f1[0] == 0.0
    with pytest.raises(ValueError):
        evaluate([("a", "z")], ["a", "b"])
    with pytest.raises(ValueError):
        evaluate([], ["a"])


pairs = st.lists(st.tuples(st.sampled_from("abc"), st.sampled_from("abc")), min_size=1, max_size=40)


@settings(max_examples=100)
@given(pairs, st.permutations("abc"))
def test_macro_metrics_permutation_invariant(preds, perm):
    relabel = dict(zip("abc", perm))
    r1 = evaluate(preds, list("abc"))
    r2 = evaluate([(relabel[t], relabel[p]) for t, p in preds], list("abc"))
    for name in ("accuracy", "macro_precision", "macro_recall", "macro_f1"):
        assert getattr(r1, name) == pytest.approx(getattr(r2, name), abs=1e-12)


@settings(max_examples=100)
@given(pairs, pairs)
def test_confusion_additive(p1, p2):
    labels = list("abc")
    total = evaluate(p1 + p2, labels).confusion
    np.testing.assert_array_equal(total, evaluate(p1, labels).confusion + evaluate(p2, labels).confusion)


@settings(max_examples=100)
@given(st.lists(st.sampled_from("abc"), min_size=6, max_size=6), st.integers(1, 5))
def test_balanced_accuracy_equals_mean_recall(predicted, reps):
    truth = list("aabbcc") * reps
    r = evaluate(list(zip(truth, predicted * reps)), list("abc"))
    assert r.accuracy == pytest.approx(r.macro_recall, abs=1e-12)
    assert 0 <= r.macro_f1 <= 1 and r.confusion.sum() == len(truth)


def test_classify_deterministic_reports(tmp_path):
    fs = _blobs(5, gap=1.5)
    spec = ClassifierSpec("linear", epochs=20)
    a, rows_a = classify(fs, spec, seed=3)
    b, rows_b = classify(fs, spec, seed=3)
    a.write_csv(tmp_path / "a.csv")
    b.write_csv(tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert rows_a == rows_b
    assert "macro_f1" in a.to_text()


def test_feature_csv_round_trip(tmp_path):
    fs = FeatureSet(np.random.default_rng(0).standard_normal((6, 4)), list("aabbcc"), sample_ids=[f"s{i}" for i in range(6)])
    write_features(fs, tmp_path / "f.csv")
    back = read_features(tmp_path / "f.csv")
    assert back.features.tobytes() == fs.features.tobytes()
    assert back.labels == fs.labels and back.sample_ids == fs.sample_ids


def test_classifier_spec_validation():
    with pytest.raises(ValueError):
        ClassifierSpec("svm")
