import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import mcclish, pauc_enumerate, psds_bruteforce
from sedkit.core import ClassVocabulary, Event, ValidationError
from sedkit.ingest import PosteriorGrid
from sedkit.metrics import (
    ClassCurve,
    PsdsParams,
    class_roc_area,
    class_roc_sweep,
    default_thresholds,
    match_events,
    mpauc,
    partial_auc,
    psds,
    psds_from_scored,
    rank_score,
    segmentize,
    segmentize_events,
    selection_score,
    staircase_area,
)

VOCAB = ClassVocabulary()


def ev(*rows):
    return [Event(*r) for r in rows]


class TestMatching:
    def test_exact(self):
        c = match_events({"a": ev((1, 2, 0))}, {"a": ev((1, 2, 0))}, 1)
        assert (c.tp[0], c.fp[0]) == (1, 0)

    def test_no_overlap(self):
        c = match_events({"a": ev((5, 6, 0))}, {"a": ev((1, 2, 0))}, 1)
        assert (c.tp[0], c.fp[0]) == (0, 1)

    def test_partial_coverage(self):
        c = match_events({"a": ev((1.0, 1.6, 0))}, {"a": ev((1.0, 2.0, 0))}, 1)
        assert (c.tp[0], c.fp[0]) == (0, 0)

    def test_other_class_is_fp(self):
        c = match_events({"a": ev((1, 2, 1))}, {"a": ev((1, 2, 0))}, 2)
        assert c.fp[1] == 1 and c.tp[0] == 0

    def test_split_detections_cover(self):
        c = match_events({"a": ev((0, 0.5, 0), (0.5, 1.0, 0))}, {"a": ev((0, 1, 0))}, 1)
        assert (c.tp[0], c.fp[0]) == (1, 0)

    def test_unknown_clip(self):
        with pytest.raises(ValidationError):
            match_events({"zz": []}, {"a": []}, 1)


class TestPsds:
    gts = {"a": ev((1.0, 3.0, 0), (5.0, 6.0, 1)), "b": ev((0.0, 2.0, 0), (4.0, 9.0, 1))}

    def test_perfect(self):
        res = psds({0.5: self.gts}, self.gts, 0.1, 2)
        assert res.score == 1.0

    def test_empty(self):
        res = psds({0.5: {}}, self.gts, 0.1, 2)
        assert res.score == 0.0

    def test_toy_reference(self):
        dets = {
            0.3: {"a": ev((1, 3, 0), (5, 6, 1), (7, 8, 0)), "b": ev((0.1, 2, 0), (4, 6, 1), (10, 11, 1))},
            0.7: {"a": ev((1, 3, 0)), "b": ev((4, 9, 1))},
        }
        # brute-force matching + numeric integration over a 360 s corpus
        assert psds(dets, self.gts, 0.1, 2).score == pytest.approx(0.5, abs=1e-9)

    def test_class_without_gt_excluded(self):
        res = psds({0.5: self.gts}, self.gts, 0.1, 3)
        assert res.included == [0, 1]
        assert res.score == 1.0

    def test_alpha_ct_rejected(self):
        with pytest.raises(ValidationError):
            PsdsParams(alpha_ct=1.0)

    def test_thresholds(self):
        t = default_thresholds()
        assert len(t) == 50 and t[0] == 0.01 and t[-1] == 0.99

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_random_vs_oracle(self, seed):
        rng = np.random.default_rng(seed)
        gts, scored = {}, {}
        for k in range(3):
            g = [Event(float(s), float(s + rng.integers(1, 4)), int(rng.integers(0, 2))) for s in rng.choice(40, 3, replace=False) * 3.0]
            gts[f"c{k}"] = g
            d = [Event(e.onset + rng.uniform(-0.5, 0.5) + 0.5, e.offset + rng.uniform(-0.5, 0.5), e.class_id, float(rng.random())) for e in g]
            d += [Event(float(x), float(x) + 1.0, int(rng.integers(0, 2)), float(rng.random())) for x in rng.uniform(0, 110, 2)]
            scored[f"c{k}"] = [e for e in d if e.offset > e.onset]
        taus = (0.2, 0.5, 0.8)
        dets = {t: {c: [e for e in v if e.confidence >= t] for c, v in scored.items()} for t in taus}
        tup = lambda m: {c: [(e.onset, e.offset, e.class_id) for e in v] for c, v in m.items()}
        ref = psds_bruteforce({t: tup(d) for t, d in dets.items()}, tup(gts), 0.1, 2)
        assert psds(dets, gts, 0.1, 2, PsdsParams(thresholds=taus)).score == pytest.approx(ref, abs=1e-6)

    def test_from_scored_matches_manual(self):
        scored = {"a": ev((1, 3, 0, 0.9), (5, 6, 1, 0.4)), "b": ev((0, 2, 0, 0.6), (4, 9, 1, 0.8))}
        durations = {"a": 180.0, "b": 180.0}
        p = PsdsParams(thresholds=(0.3, 0.5, 0.7))
        manual = psds({t: {c: [e for e in v if e.confidence >= t] for c, v in scored.items()} for t in p.thresholds}, self.gts, 0.1, 2, p)
        assert psds_from_scored(scored, self.gts, durations, 2, p).score == manual.score


class TestStaircase:
    def test_single_curve(self):
        c = ClassCurve(np.array([0.0, 50.0]), np.array([0.5, 1.0]))
        assert staircase_area([c], 100.0) == pytest.approx(0.75)

    def test_nondecreasing(self):
        c = ClassCurve(np.array([10.0, 20.0, 30.0]), np.array([0.8, 0.4, 0.9]))
        v = c.at(np.linspace(0, 50, 200))
        assert np.all(np.diff(v) >= 0)

    def test_std_penalty(self):
        a = ClassCurve(np.array([0.0]), np.array([1.0]))
        b = ClassCurve(np.array([0.0]), np.array([0.0]))
        assert staircase_area([a, b], 100.0, alpha_st=1.0) == 0.0


class TestRocSweep:
    def test_sweep_matches_matching(self):
        rng = np.random.default_rng(5)
        gts = {c: np.array([[s, s + 2.0] for s in (1.0, 6.0, 12.0)]) for c in ("x", "y")}
        dets = {c: np.array([[s + rng.uniform(-0.3, 0.3), s + 2 + rng.uniform(-0.3, 0.3), rng.random()] for s in (1.0, 6.0, 12.0, 17.0)]) for c in ("x", "y")}
        thr, tp, fp, n_gt = class_roc_sweep(dets, gts)
        for t, a, b in zip(thr, tp, fp):
            d_ev = {c: [Event(r[0], r[1], 0) for r in dets[c] if r[2] >= t] for c in dets}
            g_ev = {c: [Event(r[0], r[1], 0) for r in gts[c]] for c in gts}
            counts = match_events(d_ev, g_ev, 1)
            assert (counts.tp[0], counts.fp[0]) == (a, b)
        assert n_gt == 6

    def test_area_perfect(self):
        gts = {"x": np.array([[1.0, 2.0]])}
        dets = {"x": np.array([[1.0, 2.0, 0.9]])}
        assert class_roc_area(dets, gts, 1.0) == 1.0


class TestPauc:
    def test_perfect(self):
        res = mpauc({"a": (np.array([0.9, 0.8, 0.1, 0.2]), np.array([1, 1, 0, 0], bool))})
        assert res.score == 1.0

    def test_constant(self):
        res = mpauc({"a": (np.full(10, 0.3), np.array([1, 0] * 5, bool))})
        assert res.score == pytest.approx(0.5, abs=1e-12)

    def test_six_segments(self):
        s, y = [0.9, 0.8, 0.7, 0.6, 0.55, 0.1], [1, 0, 1, 0, 1, 0]
        assert partial_auc(np.array(s), np.array(y, bool), 0.1) == pytest.approx(0.03333333333333333, abs=1e-12)
        res = mpauc({"a": (np.array(s), np.array(y, bool))})
        assert res.score == pytest.approx(0.6491228070175439, abs=1e-12)

    def test_unstandardized(self):
        s, y = np.array([0.9, 0.8, 0.7, 0.6, 0.55, 0.1]), np.array([1, 0, 1, 0, 1, 0], bool)
        assert mpauc({"a": (s, y)}, standardize=False).score == pytest.approx(0.3333333333333333)

    def test_excluded_class(self):
        res = mpauc({"a": (np.array([0.1, 0.9]), np.array([0, 1], bool)), "b": (np.array([0.2]), np.array([1], bool))})
        assert res.excluded == ["b"]
        assert res.score == 1.0

    @settings(max_examples=80, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.sampled_from([0.05, 0.1, 0.3, 1.0]))
    def test_oracle(self, seed, max_fpr):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(4, 40))
        scores = np.round(rng.random(n), int(rng.integers(1, 3)))
        labels = rng.random(n) < 0.4
        labels[0], labels[1] = True, False
        assert abs(partial_auc(scores, labels, max_fpr) - pauc_enumerate(scores, labels, max_fpr)) < 1e-9

    def test_sklearn_agreement(self):
        from sklearn.metrics import roc_auc_score

        rng = np.random.default_rng(11)
        for _ in range(30):
            labels = rng.random(60) < 0.3
            labels[:2] = [True, False]
            scores = np.round(rng.random(60), 2)
            ours = mpauc({"a": (scores, labels)}).score
            assert ours == pytest.approx(roc_auc_score(labels, scores, max_fpr=0.1), abs=1e-9)

    def test_monotone_transform_invariant(self):
        rng = np.random.default_rng(3)
        s, y = rng.random(50), rng.random(50) < 0.5
        a = mpauc({"a": (s, y)}).score
        b = mpauc({"a": (np.exp(3 * s), y)}).score
        assert a == pytest.approx(b, abs=1e-12)


class TestSegmentize:
    names = ("Dog", "Speech")

    def grid(self, value=0.7, n=50):
        return {"a": PosteriorGrid("a", 0.1, np.full((n, 2), value), self.names)}

    def test_short_event(self):
        seg = segmentize({"a": ev((0.2, 0.4, VOCAB.index("Dog")))}, self.grid(), VOCAB)
        assert seg["Dog"][1].tolist() == [True, False, False, False, False]

    def test_boundary_event(self):
        seg = segmentize({"a": ev((1.0, 2.0, VOCAB.index("Dog")))}, self.grid(), VOCAB)
        assert seg["Dog"][1].tolist() == [False, True, False, False, False]

    def test_constant_scores(self):
        seg = segmentize({"a": []}, self.grid(0.7), VOCAB)
        np.testing.assert_allclose(seg["Speech"][0], 0.7)

    def test_max_within_segment(self):
        s = np.zeros((20, 2))
        s[3, 0] = 0.9
        seg = segmentize({"a": []}, {"a": PosteriorGrid("a", 0.1, s, self.names)}, VOCAB)
        assert seg["Dog"][0].tolist() == [0.9, 0.0]

    def test_from_events(self):
        dog = VOCAB.index("Dog")
        seg = segmentize_events({"a": ev((0.0, 1.0, dog))}, {"a": ev((0.5, 1.5, dog, 0.4))}, ["Dog"], VOCAB, {"a": 3.0})
        assert seg["Dog"][0].tolist() == [0.4, 0.4, 0.0]
        assert seg["Dog"][1].tolist() == [True, False, False]


class TestScores:
    def test_rank(self):
        assert rank_score(0.702, 0.493) == pytest.approx(1.195, abs=1e-12)
        assert abs(rank_score(0.735, 0.569) - 1.303) <= 0.002
        assert rank_score(0.0, 0.0) == 0.0
        assert rank_score(0.702, 0.493) == 0.702 + 0.493

    def test_selection(self):
        assert selection_score(0.5, 0.5, 0.7) == pytest.approx(1.7)
        assert selection_score(0, 0, 0) == 0

    @settings(max_examples=200)
    @given(st.lists(st.floats(0, 1), min_size=3, max_size=3), st.permutations([0, 1, 2]))
    def test_selection_commutative(self, xs, perm):
        assert selection_score(*xs) == selection_score(*[xs[i] for i in perm])
        assert selection_score(*xs) == math.fsum(xs)
