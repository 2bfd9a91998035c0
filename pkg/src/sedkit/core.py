"""Shared domain types: class vocabularies, clip metadata, events and manifests."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

DESED_CLASSES = (
    "Alarm_bell_ringing",
    "Blender",
    "Cat",
    "Dishes",
    "Dog",
    "Electric_shaver_toothbrush",
    "Frying",
    "Running_water",
    "Speech",
    "Vacuum_cleaner",
)

MAESTRO_CLASSES = (
    "cutlery_and_dishes",
    "furniture_dragging",
    "people_talking",
    "children_voices",
    "coffee_machine",
    "footsteps",
    "large_vehicle",
    "car",
    "brakes_squeaking",
    "cash_register_beeping",
    "announcement",
    "shopping_cart",
    "metro_leaving",
    "metro_approaching",
    "door_opens_closes",
    "wind_blowing",
    "birds_singing",
)

# subset of MAESTRO classes scored by mpAUC
MAESTRO_EVAL_CLASSES = (
    "birds_singing",
    "car",
    "people_talking",
    "footsteps",
    "children_voices",
    "wind_blowing",
    "brakes_squeaking",
    "large_vehicle",
    "cutlery_and_dishes",
    "metro_approaching",
    "metro_leaving",
)

SUBSETS = (
    "maestro",
    "desed_real_strong",
    "desed_synth_strong",
    "desed_weak",
    "desed_unlabeled",
    "desed_external_strong",
    "test",
)
DOMAINS = ("desed", "maestro")

STRONG_SUBSETS = frozenset(
    {"maestro", "desed_real_strong", "desed_synth_strong", "desed_external_strong"}
)

# higher wins when a clip appears in two subsets
_PRIORITY = {
    "test": 3,
    "maestro": 2,
    "desed_real_strong": 2,
    "desed_synth_strong": 2,
    "desed_external_strong": 2,
    "desed_weak": 1,
    "desed_unlabeled": 0,
}


class ValidationError(ValueError):
    """Input data violates a documented invariant."""


@dataclass(frozen=True)
class ClassVocabulary:
    """Ordered DESED and MAESTRO class names; union order is DESED then MAESTRO."""

    desed_classes: tuple[str, ...] = DESED_CLASSES
    maestro_classes: tuple[str, ...] = MAESTRO_CLASSES
    _index: Mapping[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "desed_classes", tuple(self.desed_classes))
        object.__setattr__(self, "maestro_classes", tuple(self.maestro_classes))
        names = self.desed_classes + self.maestro_classes
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise ValidationError(f"duplicate class names in vocabulary: {dup}")
        object.__setattr__(self, "_index", {n: i for i, n in enumerate(names)})

    @property
    def names(self) -> tuple[str, ...]:
        return self.desed_classes + self.maestro_classes

    def __len__(self) -> int:
        return len(self._index)

    def __contains__(self, name: object) -> bool:
        return name in self._index

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise ValidationError(f"unknown class {name!r}") from None

    def name(self, idx: int) -> str:
        if not 0 <= idx < len(self):
            raise ValidationError(f"class index {idx} out of range")
        return self.names[idx]

    def domain_of(self, name: str) -> str:
        self.index(name)
        return "desed" if name in self.desed_classes else "maestro"

    def domain_indices(self, domain: str) -> list[int]:
        group = self.desed_classes if domain == "desed" else self.maestro_classes
        return [self._index[n] for n in group]

    @classmethod
    def from_json(cls, path: str | Path) -> "ClassVocabulary":
        doc = json.loads(Path(path).read_text())
        return cls(tuple(doc["desed_classes"]), tuple(doc["maestro_classes"]))


@dataclass(frozen=True)
class ClipMeta:
    clip_id: str
    duration: float
    subset: str
    domain: str

    def __post_init__(self):
        if self.subset not in SUBSETS:
            raise ValidationError(f"unknown subset {self.subset!r}")
        if self.domain not in DOMAINS:
            raise ValidationError(f"unknown domain {self.domain!r}")
        if not self.duration > 0:
            raise ValidationError(f"clip {self.clip_id}: duration must be positive")
        if self.subset == "maestro" and self.domain != "maestro":
            raise ValidationError(f"clip {self.clip_id}: maestro subset needs maestro domain")
        if self.subset.startswith("desed") and self.domain != "desed":
            raise ValidationError(f"clip {self.clip_id}: {self.subset} needs desed domain")


@dataclass(frozen=True, order=True)
class Event:
    onset: float
    offset: float
    class_id: int
    confidence: float = 1.0

    @property
    def duration(self) -> float:
        return self.offset - self.onset


EventList = list[Event]


@dataclass(frozen=True, eq=False)
class LabelTensor:
    """Strong (T x C) or weak (C,) targets of one clip, columns named by ``class_names``."""

    values: np.ndarray
    class_names: tuple[str, ...]
    domain: str

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "class_names", tuple(self.class_names))
        if values.ndim not in (1, 2) or values.shape[-1] != len(self.class_names):
            raise ValidationError("label tensor must be (C,) or (T, C) matching class_names")
        if self.domain not in DOMAINS:
            raise ValidationError(f"unknown domain {self.domain!r}")

    def with_values(self, values: np.ndarray) -> "LabelTensor":
        return LabelTensor(values, self.class_names, self.domain)


@dataclass(frozen=True, eq=False)
class ClassMask:
    """Per-class validity: False marks a class whose labels may be missing for this clip."""

    valid: np.ndarray
    class_names: tuple[str, ...]

    def __post_init__(self):
        valid = np.asarray(self.valid, dtype=bool)
        object.__setattr__(self, "valid", valid)
        object.__setattr__(self, "class_names", tuple(self.class_names))
        if valid.shape != (len(self.class_names),):
            raise ValidationError("mask length must equal number of classes")

    @classmethod
    def for_domain(cls, vocab: ClassVocabulary, domain: str) -> "ClassMask":
        valid = np.zeros(len(vocab), dtype=bool)
        valid[vocab.domain_indices(domain)] = True
        return cls(valid, vocab.names)

    def valid_names(self) -> set[str]:
        return {n for n, v in zip(self.class_names, self.valid) if v}

    def __eq__(self, other):
        if not isinstance(other, ClassMask):
            return NotImplemented
        return self.class_names == other.class_names and bool(np.array_equal(self.valid, other.valid))


@dataclass(frozen=True)
class Manifest:
    entries: tuple[ClipMeta, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        seen: set[tuple[str, str]] = set()
        for e in self.entries:
            key = (e.subset, e.clip_id)
            if key in seen:
                raise ValidationError(f"duplicate clip {e.clip_id!r} in subset {e.subset}")
            seen.add(key)

    def ids(self, subset: str) -> set[str]:
        return {e.clip_id for e in self.entries if e.subset == subset}

    def subset(self, subset: str) -> list[ClipMeta]:
        return [e for e in self.entries if e.subset == subset]

    def total_duration(self, subset: str) -> float:
        return sum(e.duration for e in self.entries if e.subset == subset)

    def durations(self) -> dict[str, float]:
        return {e.clip_id: e.duration for e in self.entries}

    def to_json(self, path: str | Path) -> None:
        rows = [
            {"clip_id": e.clip_id, "duration_sec": e.duration, "subset": e.subset, "domain": e.domain}
            for e in self.entries
        ]
        Path(path).write_text(json.dumps(rows, indent=1) + "\n")

    @classmethod
    def from_json(cls, path: str | Path) -> "Manifest":
        rows = json.loads(Path(path).read_text())
        if isinstance(rows, dict):
            rows = rows["entries"]
        return cls(
            tuple(
                ClipMeta(r["clip_id"], float(r["duration_sec"]), r["subset"], r["domain"])
                for r in rows
            )
        )


@dataclass(frozen=True)
class DedupReport:
    removed: Mapping[str, int]
    removed_ids: Mapping[str, tuple[str, ...]]

    def to_dict(self) -> dict:
        return {"removed": dict(self.removed), "removed_ids": {k: list(v) for k, v in self.removed_ids.items()}}


def _loser(subset_a: str, subset_b: str) -> str:
    for s in (subset_a, subset_b):
        if s not in _PRIORITY:
            raise ValidationError(f"unknown subset {s!r}")
    pa, pb = _PRIORITY[subset_a], _PRIORITY[subset_b]
    if pa == pb:
        raise ValidationError(f"no removal rule between {subset_a} and {subset_b}")
    return subset_b if pa > pb else subset_a


def dedup(
    manifest: Manifest, overlap_pairs: Iterable[tuple[str, str, Iterable[str]]]
) -> tuple[Manifest, DedupReport]:
    """Remove clips shared between two subsets from the lower-priority one.

    Priority is test > strong > weak > unlabeled. An id found in neither
    subset is an error since it points to a stale overlap list; an id already
    gone from the losing subset is skipped, which keeps the operation
    idempotent.
    """
    drop: dict[str, set[str]] = {}
    for subset_a, subset_b, shared in overlap_pairs:
        loser = _loser(subset_a, subset_b)
        ids_a, ids_b = manifest.ids(subset_a), manifest.ids(subset_b)
        for cid in shared:
            if cid not in ids_a and cid not in ids_b:
                raise ValidationError(
                    f"overlap id {cid!r} found in neither {subset_a} nor {subset_b}"
                )
            if cid in (ids_a if loser == subset_a else ids_b):
                drop.setdefault(loser, set()).add(cid)

    kept = tuple(e for e in manifest.entries if e.clip_id not in drop.get(e.subset, ()))
    report = DedupReport(
        removed={s: len(drop.get(s, ())) for s in SUBSETS},
        removed_ids={s: tuple(sorted(drop.get(s, ()))) for s in SUBSETS},
    )
    return Manifest(kept), report


def read_id_list(path: str | Path) -> list[str]:
    return [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]


def validate_events(
    events: Sequence[Event], clip: ClipMeta, num_classes: int | None = None
) -> list[str]:
    """Return every invariant violation in ``events``; an empty list means ok."""
    problems = []
    for i, ev in enumerate(events):
        if ev.onset < 0:
            problems.append(f"event {i}: onset < 0")
        if ev.onset >= ev.offset:
            problems.append(f"event {i}: onset ≥ offset")
        if ev.offset > clip.duration:
            problems.append(f"event {i}: offset exceeds duration")
        if ev.class_id < 0 or (num_classes is not None and ev.class_id >= num_classes):
            problems.append(f"event {i}: unknown class {ev.class_id}")
        if not 0.0 <= ev.confidence <= 1.0:
            problems.append(f"event {i}: confidence outside [0, 1]")
    return problems
