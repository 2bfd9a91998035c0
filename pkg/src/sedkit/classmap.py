"""Cross-dataset class mapping between DESED and MAESTRO targets or posteriors."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import TypeVar, Union

import numpy as np

from .core import ClassMask, ClassVocabulary, LabelTensor, ValidationError
from .ingest import PosteriorGrid, WeakLabels

Mappable = TypeVar("Mappable", LabelTensor, PosteriorGrid)


@dataclass(frozen=True)
class CrossMap:
    maestro_to_desed: tuple[tuple[str, str], ...] = (
        ("people_talking", "Speech"),
        ("children_voices", "Speech"),
        ("announcement", "Speech"),
        ("cutlery_and_dishes", "Dishes"),
    )
    desed_to_maestro: tuple[tuple[str, str], ...] = (
        ("Dishes", "cutlery_and_dishes"),
        ("Speech", "people_talking"),
    )

    def __post_init__(self):
        object.__setattr__(self, "maestro_to_desed", tuple(tuple(p) for p in self.maestro_to_desed))
        object.__setattr__(self, "desed_to_maestro", tuple(tuple(p) for p in self.desed_to_maestro))
        for src, dst in self.maestro_to_desed + self.desed_to_maestro:
            if src == dst:
                raise ValidationError(f"class {src!r} mapped onto itself")

    def check(self, vocab: ClassVocabulary) -> None:
        for src, dst in self.maestro_to_desed:
            if vocab.domain_of(src) != "maestro" or vocab.domain_of(dst) != "desed":
                raise ValidationError(f"maestro->desed pair ({src}, {dst}) crosses the wrong way")
        for src, dst in self.desed_to_maestro:
            if vocab.domain_of(src) != "desed" or vocab.domain_of(dst) != "maestro":
                raise ValidationError(f"desed->maestro pair ({src}, {dst}) crosses the wrong way")

    @classmethod
    def empty(cls) -> "CrossMap":
        return cls((), ())

    @classmethod
    def from_json(cls, path: str | Path) -> "CrossMap":
        rows = json.loads(Path(path).read_text())
        m2d, d2m = [], []
        for r in rows:
            direction = r["direction"]
            if direction == "maestro_to_desed":
                m2d.append((r["source"], r["target"]))
            elif direction == "desed_to_maestro":
                d2m.append((r["source"], r["target"]))
            else:
                raise ValidationError(f"unknown mapping direction {direction!r}")
        return cls(tuple(m2d), tuple(d2m))

    def to_json(self, path: str | Path) -> None:
        rows = [{"source": s, "target": t, "direction": "maestro_to_desed"} for s, t in self.maestro_to_desed]
        rows += [{"source": s, "target": t, "direction": "desed_to_maestro"} for s, t in self.desed_to_maestro]
        Path(path).write_text(json.dumps(rows, indent=1) + "\n")


def _unpack(x: Union[LabelTensor, PosteriorGrid]) -> tuple[np.ndarray, tuple[str, ...]]:
    if isinstance(x, LabelTensor):
        return x.values, x.class_names
    return x.scores, x.class_names


def _repack(x: Mappable, values: np.ndarray) -> Mappable:
    if isinstance(x, LabelTensor):
        return x.with_values(values)
    return x.with_scores(values.astype(x.scores.dtype))


def _check_domain(x, domain: str | None, expected: str) -> None:
    actual = x.domain if isinstance(x, LabelTensor) else domain
    if actual is None:
        raise ValidationError("posterior grids need an explicit clip domain")
    if domain is not None and isinstance(x, LabelTensor) and domain != x.domain:
        raise ValidationError(f"domain argument {domain!r} contradicts tensor domain {x.domain!r}")
    if actual != expected:
        raise ValidationError(f"mapping expects a {expected} clip, got {actual}")


def _col(names: tuple[str, ...], name: str) -> int:
    try:
        return names.index(name)
    except ValueError:
        raise ValidationError(f"mapped class {name!r} absent from tensor") from None


def map_maestro_to_desed(targets: Mappable, cross_map: CrossMap, domain: str | None = None) -> Mappable:
    """Raise each DESED target to the highest confidence among its MAESTRO sources."""
    _check_domain(targets, domain, "maestro")
    values, names = _unpack(targets)
    out = values.copy()
    for src, dst in cross_map.maestro_to_desed:
        s, d = _col(names, src), _col(names, dst)
        out[..., d] = np.maximum(out[..., d], values[..., s])
    return _repack(targets, out)


def map_desed_to_maestro(
    targets: Mappable, cross_map: CrossMap, presence_threshold: float = 0.5, domain: str | None = None
) -> Mappable:
    """Set mapped MAESTRO classes to 1 wherever the DESED source is present."""
    _check_domain(targets, domain, "desed")
    values, names = _unpack(targets)
    out = values.copy()
    for src, dst in cross_map.desed_to_maestro:
        s, d = _col(names, src), _col(names, dst)
        present = values[..., s] >= presence_threshold
        out[..., d] = np.where(present, 1.0, out[..., d])
    return _repack(targets, out)


def map_weak_desed_to_maestro(weak: WeakLabels, cross_map: CrossMap, vocab: ClassVocabulary) -> WeakLabels:
    names = {vocab.name(i) for i in weak.classes}
    for src, dst in cross_map.desed_to_maestro:
        vocab.index(src)
        if src in names:
            names.add(dst)
    return WeakLabels(weak.clip_id, frozenset(vocab.index(n) for n in names))


def map_weak_maestro_to_desed(weak: WeakLabels, cross_map: CrossMap, vocab: ClassVocabulary) -> WeakLabels:
    names = {vocab.name(i) for i in weak.classes}
    for src, dst in cross_map.maestro_to_desed:
        vocab.index(dst)
        if src in names:
            names.add(dst)
    return WeakLabels(weak.clip_id, frozenset(vocab.index(n) for n in names))


def extend_class_mask(mask: ClassMask, domain: str, cross_map: CrossMap) -> ClassMask:
    """Mark mapped target classes as valid so their targets enter the loss."""
    pairs = cross_map.maestro_to_desed if domain == "maestro" else cross_map.desed_to_maestro
    valid = mask.valid.copy()
    for _, dst in pairs:
        valid[_col(mask.class_names, dst)] = True
    return ClassMask(valid, mask.class_names)
