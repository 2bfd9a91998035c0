"""Frame posteriors to event lists: thresholded median filtering and sound event bounding boxes."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .core import Event, EventList, ValidationError
from .ingest import PosteriorGrid


@dataclass(frozen=True)
class MedianFilterParams:
    filter_len: Mapping[str, float]

    def __post_init__(self):
        for cls, length in self.filter_len.items():
            if not length > 0:
                raise ValidationError(f"median filter length for {cls} must be positive")

    def frames(self, cls: str, hop: float) -> int:
        n = max(1, int(round(self.filter_len[cls] / hop)))
        return n if n % 2 else n + 1


@dataclass(frozen=True)
class SebbClassParams:
    step_filter_len: float
    merge_thre_rel: float
    merge_thre_abs: float

    def step_frames(self, hop: float) -> int:
        """Even step-filter length in frames."""
        return 2 * max(1, int(round(self.step_filter_len / hop / 2)))

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.step_filter_len, self.merge_thre_rel, self.merge_thre_abs)


@dataclass(frozen=True)
class SebbParams:
    per_class: Mapping[str, SebbClassParams]

    def __getitem__(self, cls: str) -> SebbClassParams:
        try:
            return self.per_class[cls]
        except KeyError:
            raise ValidationError(f"no SEBB parameters for class {cls!r}") from None

    @classmethod
    def uniform(cls, classes: Sequence[str], params: SebbClassParams) -> "SebbParams":
        return cls({c: params for c in classes})

    def to_dict(self) -> dict:
        return {
            c: {"step_filter_len": p.step_filter_len, "merge_thre_rel": p.merge_thre_rel, "merge_thre_abs": p.merge_thre_abs}
            for c, p in sorted(self.per_class.items())
        }


def load_params(path: str | Path) -> MedianFilterParams | SebbParams:
    """Read a params file: class -> {filter_len} or {step_filter_len, merge_thre_rel, merge_thre_abs}."""
    doc = json.loads(Path(path).read_text())
    if all("filter_len" in v for v in doc.values()):
        return MedianFilterParams({c: float(v["filter_len"]) for c, v in doc.items()})
    try:
        return SebbParams(
            {c: SebbClassParams(float(v["step_filter_len"]), float(v["merge_thre_rel"]), float(v["merge_thre_abs"]))
             for c, v in doc.items()}
        )
    except KeyError as exc:
        raise ValidationError(f"{path}: missing parameter {exc}") from None


def _runs(active: np.ndarray) -> list[tuple[int, int]]:
    """Maximal runs of True as half-open [start, end) frame ranges."""
    padded = np.concatenate([[False], active, [False]]).astype(np.int8)
    d = np.diff(padded)
    return list(zip(np.flatnonzero(d == 1).tolist(), np.flatnonzero(d == -1).tolist()))


def majority_filter(active: np.ndarray, window: int) -> np.ndarray:
    """Median of a binary sequence over an odd centered window truncated at the edges."""
    n = active.size
    half = window // 2
    csum = np.concatenate([[0], np.cumsum(active.astype(np.int64))])
    idx = np.arange(n)
    lo, hi = np.maximum(idx - half, 0), np.minimum(idx + half + 1, n)
    ones = csum[hi] - csum[lo]
    return 2 * ones > (hi - lo)


def median_filter_events(grid: PosteriorGrid, threshold: float, params: MedianFilterParams) -> dict[int, EventList]:
    """Binarize at ``threshold``, majority-filter per class and turn runs into events.

    Returns class column index -> events; confidence is the mean posterior over the run.
    """
    if not 0.0 < threshold < 1.0:
        raise ValidationError("threshold must lie in (0, 1)")
    out: dict[int, EventList] = {}
    for c, name in enumerate(grid.class_names):
        y = grid.scores[:, c].astype(np.float64)
        smooth = majority_filter(y >= threshold, params.frames(name, grid.frame_hop))
        out[c] = [
            Event(s * grid.frame_hop, e * grid.frame_hop, c, float(np.clip(y[s:e].mean(), 0.0, 1.0)))
            for s, e in _runs(smooth)
        ]
    return out


# -- sound event bounding boxes ------------------------------------------------


def step_filter(y: np.ndarray, n: int) -> np.ndarray:
    """delta[t] = mean(y[t:t+n/2]) - mean(y[t-n/2:t]) for boundaries t = 0..T, zero padded."""
    h = n // 2
    t_len = y.size
    csum = np.concatenate([[0.0], np.cumsum(y, dtype=np.float64)])
    t = np.arange(t_len + 1)
    right = csum[np.minimum(t + h, t_len)] - csum[t]
    left = csum[t] - csum[np.maximum(t - h, 0)]
    delta = (right - left) / h
    # cumsum rounding leaves ~1e-16 residue on flat tracks; it must not create change points
    delta[np.abs(delta) < 1e-10] = 0.0
    return delta


def _extrema(delta: np.ndarray, sign: int) -> np.ndarray:
    """Strict local maxima of sign*delta with sign*delta > 0; a flat top counts once at its middle."""
    x = sign * delta
    n = x.size
    out = []
    i = 0
    while i < n:
        j = i
        while j + 1 < n and x[j + 1] == x[i]:
            j += 1
        left = x[i - 1] if i > 0 else -np.inf
        right = x[j + 1] if j + 1 < n else -np.inf
        if x[i] > 0 and x[i] > left and x[i] > right:
            out.append((i + j) // 2)
        i = j + 1
    return np.asarray(out, dtype=int)


@dataclass(frozen=True)
class SebbCandidates:
    """Change-point segmentation of one class track, before merging."""

    segments: list[tuple[int, int]]  # [start, end) frames of candidate boxes
    csum: np.ndarray

    def mean(self, start: int, end: int) -> float:
        return (self.csum[end] - self.csum[start]) / (end - start)


def sebb_candidates(y: np.ndarray, step_frames: int) -> SebbCandidates:
    """Candidate boxes: each starts at an onset change point and ends at the next change point."""
    if step_frames < 2 or step_frames % 2:
        raise ValidationError("step filter needs an even length of at least 2 frames")
    y = np.asarray(y, dtype=np.float64)
    delta = step_filter(y, step_frames)
    onsets = _extrema(delta, +1)
    offsets = _extrema(delta, -1)
    bounds = sorted([(int(t), 1) for t in onsets] + [(int(t), -1) for t in offsets])
    segments = []
    for k, (t, kind) in enumerate(bounds):
        if kind != 1:
            continue
        end = bounds[k + 1][0] if k + 1 < len(bounds) else y.size
        if end > t:
            segments.append((t, end))
    if not bounds and y.size:
        # no change point anywhere: the whole clip is one box
        segments.append((0, y.size))
    csum = np.concatenate([[0.0], np.cumsum(y)])
    return SebbCandidates(segments, csum)


def sebb_merge(cand: SebbCandidates, merge_thre_rel: float, merge_thre_abs: float) -> list[tuple[int, int, float]]:
    """Greedy left-to-right merge of neighbouring boxes.

    Boxes A and B with gap G merge iff mean(G) >= max(abs, min(conf_A, conf_B) / rel).
    Directly adjacent boxes use the weaker box confidence as the gap score.
    """
    out: list[tuple[int, int, float]] = []
    for start, end in cand.segments:
        conf = cand.mean(start, end)
        if out:
            ps, pe, pconf = out[-1]
            weaker = min(pconf, conf)
            gap = cand.mean(pe, start) if start > pe else weaker
            if gap >= max(merge_thre_abs, weaker / merge_thre_rel):
                out[-1] = (ps, end, cand.mean(ps, end))
                continue
        out.append((start, end, conf))
    return out


def sebb_track(y: np.ndarray, hop: float, params: SebbClassParams) -> list[tuple[float, float, float]]:
    """SEBB on a single class track, returning (onset, offset, confidence) in seconds."""
    cand = sebb_candidates(y, params.step_frames(hop))
    return [
        (s * hop, e * hop, float(np.clip(c, 0.0, 1.0)))
        for s, e, c in sebb_merge(cand, params.merge_thre_rel, params.merge_thre_abs)
    ]


def sebb_events(grid: PosteriorGrid, params: SebbParams) -> dict[int, EventList]:
    """Threshold-free event boxes with confidences, class column index -> events."""
    out: dict[int, EventList] = {}
    for c, name in enumerate(grid.class_names):
        out[c] = [Event(on, off, c, conf) for on, off, conf in sebb_track(grid.scores[:, c], grid.frame_hop, params[name])]
    return out


def events_at_threshold(events: Sequence[Event], tau: float) -> EventList:
    if not 0.0 <= tau <= 1.0:
        raise ValidationError("threshold must lie in [0, 1]")
    return [ev for ev in events if ev.confidence >= tau]


def flatten(per_class: Mapping[int, EventList], class_ids: Sequence[int] | None = None) -> EventList:
    """Merge per-class event lists into one list sorted by onset, remapping class ids if given."""
    out = []
    for c, evs in per_class.items():
        cid = c if class_ids is None else class_ids[c]
        out.extend(Event(e.onset, e.offset, cid, e.confidence) for e in evs)
    return sorted(out, key=lambda e: (e.onset, e.class_id, e.offset))
