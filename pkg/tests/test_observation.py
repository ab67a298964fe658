import numpy as np
import pytest

from app.models.observation import CoreTypeException, FeatureVector, blind
from tests.conftest import make_track


def test_renormalizing_a_unit_vector_changes_nothing():
    rng = np.random.default_rng(0)
    for _ in range(200):
        v = FeatureVector(np.abs(rng.standard_normal(64)))
        assert FeatureVector(v.values) == v


def test_vector_is_scaled_to_unit_norm():
    v = FeatureVector([3.0, 4.0])
    assert v.values == pytest.approx([0.6, 0.8])


@pytest.mark.parametrize("values", [[], [0.0, 0.0], [1.0, -0.5], [np.nan, 1.0]])
def test_invalid_vectors_are_rejected(values):
    with pytest.raises(CoreTypeException):
        FeatureVector(values)


def test_blind_drops_labels_only():
    stream = [make_track("C1", 0.0, seq=0, label="p1"), make_track("C2", 5.0, seq=1, label="p2")]
    unlabeled = blind(stream)
    assert [t.label for t in unlabeled] == [None, None]
    assert [t.ref for t in unlabeled] == [t.ref for t in stream]
