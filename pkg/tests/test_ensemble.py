import sys

import numpy as np
import pytest

from oracles import logit_mean_naive
from sedkit.core import ValidationError
from sedkit.dsp import align_sequence
from sedkit.ensemble import EnsembleSpec, average_logits, logit, make_pseudo_labels, sigmoid
from sedkit.ingest import PosteriorGrid, list_posterior_dir, read_posteriors, write_posterior_dir

NAMES = ("Speech", "Dog")


def grid(scores, hop=0.064, clip="c"):
    return PosteriorGrid(clip, hop, np.asarray(scores, dtype=np.float32), NAMES)


class TestAverage:
    def test_symmetric_pair(self):
        out = average_logits([grid([[0.7311, 0.2689]]), grid([[0.2689, 0.7311]])])
        np.testing.assert_allclose(out.scores, 0.5, atol=1e-4)

    def test_single_member(self):
        s = np.random.default_rng(0).random((6, 2))
        np.testing.assert_allclose(average_logits([grid(s)]).scores, s, atol=1e-6)

    def test_equal_members(self):
        s = np.random.default_rng(1).random((6, 2))
        np.testing.assert_allclose(average_logits([grid(s)] * 3).scores, s, atol=1e-6)

    def test_weighted_oracle(self):
        rng = np.random.default_rng(2)
        members = [rng.random((4, 2)) for _ in range(3)]
        w = [0.2, 1.0, 3.0]
        out = average_logits([grid(m) for m in members], w).scores
        for t in range(4):
            for c in range(2):
                ps = [float(np.float32(m[t, c])) for m in members]
                assert abs(out[t, c] - logit_mean_naive(ps, w)) < 1e-6

    def test_resampled_member(self):
        rng = np.random.default_rng(3)
        coarse, fine = rng.random((5, 2)), rng.random((10, 2))
        out = average_logits([grid(coarse, 0.128), grid(fine, 0.064)])
        assert out.num_frames == 5 and out.frame_hop == 0.128
        manual = sigmoid(0.5 * logit(np.float32(coarse)) + 0.5 * logit(align_sequence(np.float32(fine), 5, "linear")))
        np.testing.assert_allclose(out.scores, manual, atol=1e-6)

    def test_logit_sigmoid_inverse(self):
        p = np.linspace(0.01, 0.99, 50)
        np.testing.assert_allclose(sigmoid(logit(p)), p, atol=1e-12)

    def test_class_order_mismatch(self):
        other = PosteriorGrid("c", 0.064, np.zeros((2, 2), np.float32), ("Dog", "Speech"))
        with pytest.raises(ValidationError):
            average_logits([grid(np.zeros((2, 2))), other])


class TestPseudoLabels:
    def _members(self, tmp_path, clips):
        dirs = []
        for k in range(2):
            rng = np.random.default_rng(k)
            d = tmp_path / f"m{k}"
            write_posterior_dir({c: grid(rng.random((8, 2)), clip=c) for c in clips}, d)
            dirs.append(d)
        return dirs

    def test_one_file_per_clip(self, tmp_path):
        dirs = self._members(tmp_path, ["a", "b", "c"])
        paths = make_pseudo_labels(EnsembleSpec(tuple(dirs)), ["a", "b", "c"], tmp_path / "out")
        assert len(paths) == 3
        assert list_posterior_dir(tmp_path / "out") == ["a", "b", "c"]

    def test_empty_manifest(self, tmp_path):
        dirs = self._members(tmp_path, ["a"])
        assert make_pseudo_labels(EnsembleSpec(tuple(dirs)), [], tmp_path / "out") == []
        assert (tmp_path / "out").is_dir()

    def test_missing_member_clip(self, tmp_path):
        dirs = self._members(tmp_path, ["a"])
        with pytest.raises(ValidationError, match="b"):
            make_pseudo_labels(EnsembleSpec(tuple(dirs)), ["a", "b"], tmp_path / "out")

    @pytest.mark.skipif(sys.platform == "win32", reason="fork start method")
    def test_jobs_independent(self, tmp_path):
        dirs = self._members(tmp_path, ["a", "b", "c"])
        make_pseudo_labels(EnsembleSpec(tuple(dirs)), ["a", "b", "c"], tmp_path / "one", jobs=1)
        make_pseudo_labels(EnsembleSpec(tuple(dirs)), ["a", "b", "c"], tmp_path / "two", jobs=2)
        for c in "abc":
            assert (tmp_path / "one" / f"{c}.sedp").read_bytes() == (tmp_path / "two" / f"{c}.sedp").read_bytes()

    def test_weights_validated(self):
        with pytest.raises(ValidationError):
            EnsembleSpec(("a", "b"), (1.0,))
