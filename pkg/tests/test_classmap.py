import itertools

import numpy as np
import pytest

from sedkit.classmap import (
    CrossMap,
    extend_class_mask,
    map_desed_to_maestro,
    map_maestro_to_desed,
    map_weak_desed_to_maestro,
    map_weak_maestro_to_desed,
)
from sedkit.core import ClassMask, ClassVocabulary, LabelTensor, ValidationError
from sedkit.ingest import PosteriorGrid, WeakLabels

VOCAB = ClassVocabulary()
NAMES = VOCAB.names


def frame(domain, **values):
    v = np.zeros(len(NAMES))
    for k, x in values.items():
        v[NAMES.index(k)] = x
    return LabelTensor(v, NAMES, domain)


class TestMaestroToDesed:
    def test_confidence_copied(self):
        out = map_maestro_to_desed(frame("maestro", people_talking=0.8), CrossMap())
        assert out.values[NAMES.index("Speech")] == 0.8

    def test_zeros_unchanged(self):
        x = frame("maestro")
        np.testing.assert_array_equal(map_maestro_to_desed(x, CrossMap()).values, x.values)

    def test_max_over_sources(self):
        out = map_maestro_to_desed(frame("maestro", people_talking=0.3, children_voices=0.9), CrossMap())
        assert out.values[NAMES.index("Speech")] == 0.9

    def test_two_source_enumeration(self):
        levels = [0.0, 0.25, 0.5, 0.75, 1.0]
        for a, b, s in itertools.product(levels, repeat=3):
            out = map_maestro_to_desed(frame("maestro", people_talking=a, announcement=b, Speech=s), CrossMap())
            assert out.values[NAMES.index("Speech")] == max(a, b, s)

    def test_rejects_desed_clip(self):
        with pytest.raises(ValidationError):
            map_maestro_to_desed(frame("desed"), CrossMap())

    def test_grid_needs_domain(self):
        g = PosteriorGrid("c", 0.1, np.zeros((2, len(NAMES))), NAMES)
        with pytest.raises(ValidationError):
            map_maestro_to_desed(g, CrossMap())
        assert map_maestro_to_desed(g, CrossMap(), domain="maestro").scores.shape == (2, len(NAMES))


class TestDesedToMaestro:
    def test_dishes_present(self):
        out = map_desed_to_maestro(frame("desed", Dishes=1.0), CrossMap())
        assert out.values[NAMES.index("cutlery_and_dishes")] == 1.0

    def test_below_threshold(self):
        out = map_desed_to_maestro(frame("desed", Speech=0.4), CrossMap(), presence_threshold=0.5)
        assert out.values[NAMES.index("people_talking")] == 0.0

    def test_weak_labels(self):
        weak = WeakLabels("a", frozenset({VOCAB.index("Speech")}))
        out = map_weak_desed_to_maestro(weak, CrossMap(), VOCAB)
        assert out.classes == {VOCAB.index("Speech"), VOCAB.index("people_talking")}

    def test_weak_reverse(self):
        weak = WeakLabels("a", frozenset({VOCAB.index("announcement")}))
        out = map_weak_maestro_to_desed(weak, CrossMap(), VOCAB)
        assert VOCAB.index("Speech") in out.classes


class TestMask:
    def test_maestro_mask_gains_speech(self):
        m = extend_class_mask(ClassMask.for_domain(VOCAB, "maestro"), "maestro", CrossMap())
        assert "Speech" in m.valid_names()
        assert "Dog" not in m.valid_names()

    def test_desed_mask_gains_cutlery(self):
        m = extend_class_mask(ClassMask.for_domain(VOCAB, "desed"), "desed", CrossMap())
        assert "cutlery_and_dishes" in m.valid_names()

    def test_empty_map(self):
        m = ClassMask.for_domain(VOCAB, "desed")
        assert extend_class_mask(m, "desed", CrossMap.empty()) == m


class TestCrossMapConfig:
    def test_json_roundtrip(self, tmp_path):
        CrossMap().to_json(tmp_path / "m.json")
        assert CrossMap.from_json(tmp_path / "m.json") == CrossMap()

    def test_wrong_direction(self):
        with pytest.raises(ValidationError):
            CrossMap((("Speech", "people_talking"),), ()).check(VOCAB)
