import math

import numpy as np
import pytest

from sedkit.core import ClassMask, ClassVocabulary, ValidationError
from sedkit.losses import (
    LossWeights,
    PredictionPair,
    ema_update,
    interpolation_consistency,
    masked_bce,
    mean_teacher_mse,
    pseudo_bce,
    total_loss,
)

VOCAB = ClassVocabulary()


def scalar_bce(p, y, eps=1e-7):
    p = min(max(p, eps), 1 - eps)
    return -(y * math.log(p) + (1 - y) * math.log(1 - p))


class TestBce:
    def test_exact_match(self):
        y = np.random.default_rng(0).integers(0, 2, (20, 5)).astype(float)
        assert masked_bce(y, y, np.ones(5, bool)) < 1e-6

    def test_half(self):
        assert masked_bce(np.full((3, 4), 0.5), np.zeros((3, 4)), np.ones(4, bool)) == pytest.approx(math.log(2))

    def test_desed_columns_only(self):
        rng = np.random.default_rng(1)
        pred, target = rng.random((10, len(VOCAB))), rng.random((10, len(VOCAB)))
        mask = ClassMask.for_domain(VOCAB, "desed").valid
        cols = VOCAB.domain_indices("desed")
        assert masked_bce(pred, target, mask) == pytest.approx(masked_bce(pred[:, cols], target[:, cols], np.ones(len(cols), bool)), abs=1e-12)

    def test_empty_mask(self):
        assert masked_bce(np.zeros((2, 3)), np.ones((2, 3)), np.zeros(3, bool)) == 0.0

    def test_pseudo_oracle(self):
        rng = np.random.default_rng(2)
        pred, target = rng.random((4, 3)), rng.random((4, 3))
        ref = sum(scalar_bce(pred[i, j], target[i, j]) for i in range(4) for j in range(3)) / 12
        assert abs(pseudo_bce(pred, target) - ref) < 1e-9

    def test_pseudo_half(self):
        assert pseudo_bce(np.full((2, 2), 0.5), np.full((2, 2), 0.5)) == pytest.approx(math.log(2))

    def test_shape_mismatch(self):
        with pytest.raises(ValidationError):
            pseudo_bce(np.zeros((2, 2)), np.zeros((2, 3)))


class TestConsistency:
    def test_equal(self):
        p = PredictionPair(np.full((4, 2), 0.3), np.full(2, 0.3))
        assert mean_teacher_mse(p, p) == 0.0

    def test_opposite(self):
        assert mean_teacher_mse(PredictionPair(np.ones((4, 2)), np.ones(2)), PredictionPair(np.zeros((4, 2)), np.zeros(2))) == 1.0

    def test_equal_weighting(self):
        s = PredictionPair(np.full((3, 2), 0.2), np.full(2, 0.4))
        t = PredictionPair(np.zeros((3, 2)), np.zeros(2))
        assert mean_teacher_mse(s, t) == pytest.approx(0.10)

    def test_interpolation(self):
        zero = PredictionPair(np.zeros((2, 2)), np.zeros(2))
        one = PredictionPair(np.ones((2, 2)), np.ones(2))
        half = PredictionPair(np.full((2, 2), 0.5), np.full(2, 0.5))
        assert interpolation_consistency(one, one, zero, 1.0) == 0.0
        assert interpolation_consistency(half, zero, one, 0.5) == 0.0
        assert interpolation_consistency(zero, zero, one, 0.5) == pytest.approx(0.25)


class TestTotal:
    def test_all_zero(self):
        assert total_loss({"maestro": 3.0}, LossWeights(), 1, 1).total == 0.0

    def test_single_weight(self):
        assert total_loss({"weak": 0.7}, LossWeights(w_weak=1.0), 2, 1).total == pytest.approx(0.7)

    def test_pseudo_outside_i2s1(self):
        out = total_loss({"pseudo": 2.0}, LossWeights(w_pseudo=1.0), 1, 1)
        assert out.total == 0.0
        assert "pseudo" not in out.terms
        assert out.warnings

    def test_pseudo_at_i2s1(self):
        out = total_loss({"pseudo": 2.0}, LossWeights(w_pseudo=0.5), 1, 2)
        assert out.total == 1.0
        assert out.terms["pseudo"]["weighted"] == 1.0

    def test_negative_weight(self):
        with pytest.raises(ValidationError):
            LossWeights(w_ssl=-1.0)


class TestEma:
    def test_extremes(self):
        t, s = np.zeros(5), np.ones(5)
        np.testing.assert_array_equal(ema_update(t, s, 1.0), t)
        np.testing.assert_array_equal(ema_update(t, s, 0.0), s)
        np.testing.assert_allclose(ema_update(t, s, 0.999), 0.001)

    def test_length_mismatch(self):
        with pytest.raises(ValidationError):
            ema_update(np.zeros(3), np.zeros(4))
