"""On-disk artifacts: event tables, weak labels, durations and SEDP posterior files.

SEDP v1 layout: one UTF-8 JSON header line
``{"clip_id", "frame_hop_sec", "num_frames", "num_classes", "class_names"}``
followed by ``\\n`` and a row-major little-endian float32 payload of
``num_frames * num_classes`` values. A posterior directory holds one
``<clip_id>.sedp`` file per clip.
"""
from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .core import ClassVocabulary, Event, EventList, ValidationError

EVENTS_HEADER = "filename\tonset\toffset\tevent_label"
SCORED_HEADER = EVENTS_HEADER + "\tscore"
SEDP_SUFFIX = ".sedp"


@dataclass(frozen=True, eq=False)
class PosteriorGrid:
    clip_id: str
    frame_hop: float
    scores: np.ndarray
    class_names: tuple[str, ...]

    def __post_init__(self):
        scores = np.asarray(self.scores)
        if scores.ndim != 2 or scores.shape[0] < 1:
            raise ValidationError(f"{self.clip_id}: scores must be a non-empty T x C matrix")
        if scores.shape[1] != len(self.class_names):
            raise ValidationError(
                f"{self.clip_id}: {scores.shape[1]} score columns vs {len(self.class_names)} class names"
            )
        if not self.frame_hop > 0:
            raise ValidationError(f"{self.clip_id}: frame_hop must be positive")
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "class_names", tuple(self.class_names))

    @property
    def num_frames(self) -> int:
        return self.scores.shape[0]

    @property
    def duration(self) -> float:
        return self.num_frames * self.frame_hop

    def column(self, name: str) -> np.ndarray:
        return self.scores[:, self.class_names.index(name)]

    def with_scores(self, scores: np.ndarray) -> "PosteriorGrid":
        return PosteriorGrid(self.clip_id, self.frame_hop, scores, self.class_names)

    def reorder(self, class_names: Sequence[str]) -> "PosteriorGrid":
        cols = [self.class_names.index(n) for n in class_names]
        return PosteriorGrid(self.clip_id, self.frame_hop, self.scores[:, cols], tuple(class_names))

    def __eq__(self, other):
        if not isinstance(other, PosteriorGrid):
            return NotImplemented
        return (
            self.clip_id == other.clip_id
            and self.frame_hop == other.frame_hop
            and self.class_names == other.class_names
            and self.scores.shape == other.scores.shape
            and bool(np.array_equal(self.scores, other.scores))
        )


@dataclass(frozen=True)
class WeakLabels:
    clip_id: str
    classes: frozenset[int]


def atomic_write(path: str | Path, data: bytes) -> None:
    """Write via a temp file in the same directory and rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x: float) -> str:
    return repr(float(x))


# -- events -------------------------------------------------------------------


def parse_events(text: str, vocab: ClassVocabulary, source: str = "<events>") -> dict[str, EventList]:
    lines = text.splitlines()
    if not lines or lines[0] not in (EVENTS_HEADER, SCORED_HEADER):
        raise ValidationError(f"{source}: expected header {EVENTS_HEADER!r}")
    scored = lines[0] == SCORED_HEADER
    ncol = 5 if scored else 4
    out: dict[str, EventList] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cols = line.split("\t")
        if len(cols) != ncol:
            raise ValidationError(f"{source}:{lineno}: expected {ncol} columns, got {len(cols)}")
        fname = cols[0]
        if not fname:
            raise ValidationError(f"{source}:{lineno}: empty filename")
        events = out.setdefault(fname, [])
        if cols[1] == cols[2] == cols[3] == "":
            # clip listed without events
            continue
        try:
            onset, offset = float(cols[1]), float(cols[2])
            conf = float(cols[4]) if scored else 1.0
        except ValueError:
            raise ValidationError(f"{source}:{lineno}: malformed number") from None
        if not (np.isfinite(onset) and np.isfinite(offset)) or onset < 0 or offset <= onset:
            raise ValidationError(f"{source}:{lineno}: need 0 <= onset < offset, got {onset}, {offset}")
        if not 0.0 <= conf <= 1.0:
            raise ValidationError(f"{source}:{lineno}: score {conf} outside [0, 1]")
        if cols[3] not in vocab:
            raise ValidationError(f"{source}:{lineno}: unknown class {cols[3]!r}")
        events.append(Event(onset, offset, vocab.index(cols[3]), conf))
    return out


def read_events(path: str | Path, vocab: ClassVocabulary) -> dict[str, EventList]:
    return parse_events(Path(path).read_text(encoding="utf-8"), vocab, str(path))


def format_events(
    events: Mapping[str, Sequence[Event]], vocab: ClassVocabulary, scored: bool | None = None
) -> str:
    """Serialize events; rows are sorted by (filename, onset, class name).

    ``scored=None`` adds the score column only when some confidence is not 1.
    """
    if scored is None:
        scored = any(ev.confidence != 1.0 for evs in events.values() for ev in evs)
    rows = [SCORED_HEADER if scored else EVENTS_HEADER]
    for fname in sorted(events):
        evs = events[fname]
        if not evs:
            rows.append(f"{fname}\t\t\t" + ("\t" if scored else ""))
            continue
        for ev in sorted(evs, key=lambda e: (e.onset, vocab.name(e.class_id), e.offset, e.confidence)):
            row = f"{fname}\t{_fmt(ev.onset)}\t{_fmt(ev.offset)}\t{vocab.name(ev.class_id)}"
            if scored:
                row += f"\t{_fmt(ev.confidence)}"
            rows.append(row)
    return "\n".join(rows) + "\n"


def write_events(
    events: Mapping[str, Sequence[Event]],
    path: str | Path,
    vocab: ClassVocabulary,
    scored: bool | None = None,
) -> None:
    atomic_write(path, format_events(events, vocab, scored).encode("utf-8"))


# -- weak labels and durations ------------------------------------------------


def read_weak_labels(path: str | Path, vocab: ClassVocabulary) -> dict[str, WeakLabels]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != "filename\tevent_labels":
        raise ValidationError(f"{path}: expected header 'filename\\tevent_labels'")
    out = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cols = line.split("\t")
        if len(cols) != 2:
            raise ValidationError(f"{path}:{lineno}: expected 2 columns")
        names = [n for n in cols[1].split(",") if n]
        for n in names:
            if n not in vocab:
                raise ValidationError(f"{path}:{lineno}: unknown class {n!r}")
        out[cols[0]] = WeakLabels(cols[0], frozenset(vocab.index(n) for n in names))
    return out


def write_weak_labels(labels: Mapping[str, WeakLabels], path: str | Path, vocab: ClassVocabulary) -> None:
    rows = ["filename\tevent_labels"]
    for cid in sorted(labels):
        names = [vocab.name(i) for i in sorted(labels[cid].classes)]
        rows.append(f"{cid}\t{','.join(names)}")
    atomic_write(path, ("\n".join(rows) + "\n").encode("utf-8"))


def read_durations(path: str | Path) -> dict[str, float]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != "filename\tduration":
        raise ValidationError(f"{path}: expected header 'filename\\tduration'")
    out = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cols = line.split("\t")
        try:
            dur = float(cols[1])
        except (IndexError, ValueError):
            raise ValidationError(f"{path}:{lineno}: malformed duration row") from None
        if not dur > 0:
            raise ValidationError(f"{path}:{lineno}: duration must be positive")
        out[cols[0]] = dur
    return out


def write_durations(durations: Mapping[str, float], path: str | Path) -> None:
    rows = ["filename\tduration"] + [f"{k}\t{_fmt(durations[k])}" for k in sorted(durations)]
    atomic_write(path, ("\n".join(rows) + "\n").encode("utf-8"))


# -- posteriors ---------------------------------------------------------------


def _check_range(scores: np.ndarray, clip_id: str) -> None:
    if not np.all((scores >= 0.0) & (scores <= 1.0)):
        raise ValidationError(
            f"{clip_id}: posterior outside [0, 1] (logits written where probabilities expected?)"
        )


def encode_posteriors(grid: PosteriorGrid) -> bytes:
    scores = np.ascontiguousarray(grid.scores, dtype="<f4")
    _check_range(scores, grid.clip_id)
    header = {
        "clip_id": grid.clip_id,
        "frame_hop_sec": grid.frame_hop,
        "num_frames": int(scores.shape[0]),
        "num_classes": int(scores.shape[1]),
        "class_names": list(grid.class_names),
    }
    return json.dumps(header).encode("utf-8") + b"\n" + scores.tobytes()


def decode_posteriors(data: bytes, source: str = "<sedp>") -> PosteriorGrid:
    nl = data.find(b"\n")
    if nl < 0:
        raise ValidationError(f"{source}: missing SEDP header line")
    try:
        header = json.loads(data[:nl].decode("utf-8"))
        t, c = int(header["num_frames"]), int(header["num_classes"])
        names = tuple(header["class_names"])
        hop = float(header["frame_hop_sec"])
        clip_id = str(header["clip_id"])
    except (ValueError, KeyError, TypeError) as exc:
        raise ValidationError(f"{source}: bad SEDP header ({exc})") from None
    payload = data[nl + 1:]
    if len(payload) != t * c * 4:
        raise ValidationError(f"{source}: payload is {len(payload)} bytes, expected {t * c * 4}")
    scores = np.frombuffer(payload, dtype="<f4").reshape(t, c).astype(np.float32)
    _check_range(scores, clip_id)
    return PosteriorGrid(clip_id, hop, scores, names)


def write_posteriors(grid: PosteriorGrid, path: str | Path) -> None:
    atomic_write(path, encode_posteriors(grid))


def read_posteriors(path: str | Path) -> PosteriorGrid:
    return decode_posteriors(Path(path).read_bytes(), str(path))


def posterior_path(directory: str | Path, clip_id: str) -> Path:
    return Path(directory) / f"{clip_id}{SEDP_SUFFIX}"


def list_posterior_dir(directory: str | Path) -> list[str]:
    """Clip ids stored in a posterior directory, sorted."""
    return sorted(p.name[: -len(SEDP_SUFFIX)] for p in Path(directory).glob(f"*{SEDP_SUFFIX}"))


def read_posterior_dir(directory: str | Path) -> dict[str, PosteriorGrid]:
    return {cid: read_posteriors(posterior_path(directory, cid)) for cid in list_posterior_dir(directory)}


def write_posterior_dir(grids: Mapping[str, PosteriorGrid], directory: str | Path) -> None:
    Path(directory).mkdir(parents=True, exist_ok=True)
    for cid in sorted(grids):
        write_posteriors(grids[cid], posterior_path(directory, cid))
