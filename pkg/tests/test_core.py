import json

import pytest

from sedkit.core import (
    ClassMask,
    ClassVocabulary,
    ClipMeta,
    Event,
    Manifest,
    ValidationError,
    dedup,
    validate_events,
)


def _manifest(rows):
    return Manifest(tuple(ClipMeta(cid, 10.0, subset, "maestro" if subset == "maestro" else "desed") for cid, subset in rows))


class TestVocabulary:
    def test_union_order(self):
        v = ClassVocabulary()
        assert len(v) == 10 + 17
        assert v.names[0] == "Alarm_bell_ringing"
        assert v.domain_of("Speech") == "desed"
        assert v.domain_of("cutlery_and_dishes") == "maestro"

    def test_unknown_class(self):
        with pytest.raises(ValidationError):
            ClassVocabulary().index("Horse")

    def test_duplicates_rejected(self):
        with pytest.raises(ValidationError):
            ClassVocabulary(("A", "B"), ("B",))

    def test_from_json(self, tmp_path):
        p = tmp_path / "v.json"
        p.write_text(json.dumps({"desed_classes": ["A"], "maestro_classes": ["b", "c"]}))
        v = ClassVocabulary.from_json(p)
        assert v.names == ("A", "b", "c")
        assert v.domain_indices("maestro") == [1, 2]


class TestClipMeta:
    def test_domain_consistency(self):
        with pytest.raises(ValidationError):
            ClipMeta("x", 10.0, "maestro", "desed")
        with pytest.raises(ValidationError):
            ClipMeta("x", 10.0, "desed_weak", "maestro")

    def test_positive_duration(self):
        with pytest.raises(ValidationError):
            ClipMeta("x", 0.0, "desed_weak", "desed")


class TestDedup:
    def test_unlabeled_loses_to_strong(self):
        m = _manifest([("a", "desed_unlabeled"), ("b", "desed_unlabeled"), ("c", "desed_unlabeled"), ("b", "desed_real_strong")])
        out, report = dedup(m, [("desed_unlabeled", "desed_real_strong", {"b"})])
        assert out.ids("desed_unlabeled") == {"a", "c"}
        assert out.ids("desed_real_strong") == {"b"}
        assert report.removed["desed_unlabeled"] == 1

    def test_empty_overlap_is_identity(self):
        m = _manifest([("a", "desed_weak"), ("b", "desed_real_strong")])
        out, report = dedup(m, [])
        assert out == m
        assert all(v == 0 for v in report.removed.values())

    def test_test_set_wins(self):
        m = _manifest([("x", "desed_real_strong"), ("y", "desed_real_strong"), ("y", "test")])
        out, report = dedup(m, [("desed_real_strong", "test", {"y"})])
        assert out.ids("desed_real_strong") == {"x"}
        assert report.removed["desed_real_strong"] == 1
        assert out.ids("test") == {"y"}

    def test_idempotent(self):
        m = _manifest([("a", "desed_weak"), ("a", "test")])
        pairs = [("desed_weak", "test", {"a"})]
        once, _ = dedup(m, pairs)
        twice, report = dedup(once, pairs)
        assert once == twice
        assert sum(report.removed.values()) == 0

    def test_stale_id_rejected(self):
        m = _manifest([("a", "desed_weak")])
        with pytest.raises(ValidationError):
            dedup(m, [("desed_weak", "test", {"zzz"})])

    def test_equal_priority_rejected(self):
        m = _manifest([("a", "desed_real_strong"), ("a", "desed_synth_strong")])
        with pytest.raises(ValidationError):
            dedup(m, [("desed_real_strong", "desed_synth_strong", {"a"})])

    def test_manifest_json_roundtrip(self, tmp_path):
        m = _manifest([("a", "desed_weak"), ("b", "maestro")])
        m.to_json(tmp_path / "m.json")
        assert Manifest.from_json(tmp_path / "m.json") == m


class TestValidateEvents:
    clip = ClipMeta("a.wav", 10.0, "desed_real_strong", "desed")

    def test_ok(self):
        assert validate_events([Event(0.0, 1.0, 8)], self.clip) == []

    def test_inverted(self):
        (msg,) = validate_events([Event(2.0, 1.0, 3)], self.clip)
        assert "onset ≥ offset" in msg

    def test_overrun(self):
        (msg,) = validate_events([Event(9.5, 10.5, 3)], self.clip)
        assert "offset exceeds duration" in msg

    def test_bad_class(self):
        assert validate_events([Event(0.0, 1.0, 99)], self.clip, num_classes=27)


class TestClassMask:
    def test_for_domain(self):
        v = ClassVocabulary()
        m = ClassMask.for_domain(v, "desed")
        assert m.valid_names() == set(v.desed_classes)
