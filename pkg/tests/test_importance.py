import numpy as np
import pytest

from iotguard import knn
from iotguard.features import FEATURE_NAMES, FeatureVector, LabeledSample
from iotguard.importance import permutation_importance
from iotguard.labels import EmptyTestSet, TrafficClass

C = TrafficClass


def diversity_only(n, seed):
    """Classes differ only in ip_diversity; packet_count is small noise, the rest constant."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        cls = C(i % 4)
        vals = np.zeros(6)
        vals[1] = 50.0
        vals[3] = rng.random() * 0.01
        vals[5] = 0.2 * int(cls) + 0.05
        out.append(LabeledSample(FeatureVector.from_array(vals), cls))
    return out


@pytest.fixture(scope="module")
def report():
    model = knn.fit(diversity_only(200, 1), normalize=False)
    return permutation_importance(model, diversity_only(80, 2), repeats=5, seed=3)


def test_separating_feature_dominates(report):
    assert report.baseline_accuracy == 1.0
    assert report.as_dict()["ip_diversity"] > 0.9


def test_constant_feature_has_no_importance(report):
    assert report.as_dict()["tcp_pct"] == 0.0


def test_fractions_sum_to_one(report):
    assert report.relative.sum() == pytest.approx(1.0)
    assert np.all(report.relative >= 0)


def test_seeded():
    model = knn.fit(diversity_only(100, 1))
    test = diversity_only(40, 5)
    a = permutation_importance(model, test, repeats=3, seed=7)
    b = permutation_importance(model, test, repeats=3, seed=7)
    assert np.array_equal(a.relative, b.relative)


def test_nothing_matters_gives_uniform():
    # every row identical: shuffling a column changes nothing
    model = knn.fit_arrays(np.zeros((20, 6)), np.arange(20) % 2, k=1)
    test = [LabeledSample(FeatureVector.from_array(np.zeros(6)), C.SWITCH_TRIGGER)] * 10
    rep = permutation_importance(model, test, repeats=2)
    assert np.allclose(rep.relative, 1 / 6)


def test_csv(report):
    lines = report.to_csv().splitlines()
    assert lines[0] == "feature,raw_drop,relative_importance"
    assert [ln.split(",")[0] for ln in lines[1:]] == list(FEATURE_NAMES)


def test_errors():
    model = knn.fit(diversity_only(20, 1))
    with pytest.raises(EmptyTestSet):
        permutation_importance(model, [])
    with pytest.raises(ValueError):
        permutation_importance(model, diversity_only(8, 2), repeats=0)
