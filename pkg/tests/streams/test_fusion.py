"""Tests for predictions, clip aggregation and late fusion."""

import numpy as np
import pytest

from sdtd.models.configs import FusionConfig, StreamKind
from sdtd.models.exceptions import ConfigError, DataError, ShapeError
from sdtd.streams.fusion import Prediction, aggregate_clip, fuse_streams, parse_fusion_weights


def random_prediction(rng, k=5):
    p = rng.random(k)
    return Prediction(p / p.sum())


class TestPrediction:
    """Test the simplex contract."""

    def test_valid(self):
        """Test label is the argmax."""
        assert Prediction(np.array([0.2, 0.5, 0.3])).label == 1

    def test_tie_goes_to_lowest_index(self):
        """Test tie breaking."""
        assert Prediction(np.full(4, 0.25)).label == 0

    def test_not_normalized(self):
        """Test sums away from one are rejected."""
        with pytest.raises(DataError, match="simplex"):
            Prediction(np.array([0.5, 0.6]))

    def test_negative(self):
        """Test negative entries are rejected."""
        with pytest.raises(DataError):
            Prediction(np.array([1.5, -0.5]))

    def test_shape(self):
        """Test that a prediction is a vector."""
        with pytest.raises(ShapeError):
            Prediction(np.ones((2, 2)) / 4)


class TestAggregateClip:
    """Test step averaging."""

    def test_identical_steps(self):
        """Test identical steps give the same vector."""
        p = Prediction(np.array([0.1, 0.9]))
        np.testing.assert_allclose(aggregate_clip([p, p, p]).probs, p.probs)

    def test_opposites(self):
        """Test (1, 0) and (0, 1) average to one half each."""
        result = aggregate_clip([Prediction(np.array([1.0, 0.0])), Prediction(np.array([0.0, 1.0]))])
        np.testing.assert_allclose(result.probs, [0.5, 0.5])

    def test_class_count_mismatch(self):
        """Test mixed class counts."""
        with pytest.raises(ShapeError):
            aggregate_clip([Prediction(np.array([1.0, 0.0])), Prediction(np.array([1.0, 0.0, 0.0]))])

    def test_empty(self):
        """Test that there is nothing to average without steps."""
        with pytest.raises(DataError, match="no predictions"):
            aggregate_clip([])
        with pytest.raises(DataError, match="no streams"):
            fuse_streams({})


class TestFuseStreams:
    """Test weighted late fusion."""

    def test_single_stream(self):
        """Test one stream is returned unchanged whatever its weight."""
        p = Prediction(np.array([0.3, 0.7]))
        np.testing.assert_allclose(fuse_streams({StreamKind.SDTD: p}, {"sdtd": 5.0}).probs, p.probs)

    def test_identical_inputs(self):
        """Test uniform fusion of equal predictions is the identity."""
        p = Prediction(np.array([0.2, 0.3, 0.5]))
        fused = fuse_streams({k: p for k in StreamKind})
        np.testing.assert_allclose(fused.probs, p.probs)

    def test_weighted(self):
        """Test a heavier stream dominates."""
        a = Prediction(np.array([1.0, 0.0]))
        b = Prediction(np.array([0.0, 1.0]))
        fused = fuse_streams({StreamKind.SPATIAL: a, StreamKind.SDTD: b}, FusionConfig(sdtd=3.0))
        np.testing.assert_allclose(fused.probs, [0.25, 0.75])

    def test_scaling_invariance(self):
        """Test argmax does not change when all weights scale together."""
        rng = np.random.default_rng(0)
        for _ in range(30):
            preds = {k: random_prediction(rng) for k in StreamKind}
            weights = {k: float(w) for k, w in zip(StreamKind, rng.uniform(0.1, 3.0, 3))}
            scale = float(rng.uniform(0.01, 100.0))
            scaled = {k: w * scale for k, w in weights.items()}
            assert fuse_streams(preds, weights).label == fuse_streams(preds, scaled).label

    def test_missing_weight(self):
        """Test a stream without a weight."""
        p = Prediction(np.array([1.0, 0.0]))
        with pytest.raises(ConfigError, match="temporal"):
            fuse_streams({StreamKind.TEMPORAL: p}, {StreamKind.SPATIAL: 1.0})

    def test_nonpositive_weight(self):
        """Test zero weights are rejected."""
        p = Prediction(np.array([1.0, 0.0]))
        with pytest.raises(ConfigError, match="positive"):
            fuse_streams({StreamKind.SPATIAL: p}, {StreamKind.SPATIAL: 0.0})

    def test_class_mismatch(self):
        """Test streams must agree on K."""
        with pytest.raises(ShapeError):
            fuse_streams(
                {StreamKind.SPATIAL: Prediction(np.array([1.0, 0.0])), StreamKind.SDTD: Prediction(np.ones(3) / 3)}
            )


class TestParseFusionWeights:
    """Test the weight list syntax."""

    def test_parse(self):
        """Test explicit and implicit weights."""
        weights = parse_fusion_weights("spatial=1, temporal=0.5,sdtd")
        assert weights == {StreamKind.SPATIAL: 1.0, StreamKind.TEMPORAL: 0.5, StreamKind.SDTD: 1.0}

    def test_unknown_stream(self):
        """Test an unknown stream name."""
        with pytest.raises(ConfigError, match="bad fusion entry"):
            parse_fusion_weights("depth=1")

    def test_bad_number(self):
        """Test a weight that is not a number."""
        with pytest.raises(ConfigError):
            parse_fusion_weights("sdtd=heavy")
