"""Detection metrics: intersection-based PSDS, segment-based partial AUC, rank scores."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .core import ClassVocabulary, Event, EventList, ValidationError
from .ingest import PosteriorGrid

log = logging.getLogger(__name__)


def default_thresholds() -> tuple[float, ...]:
    return tuple((2 * k - 1) / 100 for k in range(1, 51))


@dataclass(frozen=True)
class PsdsParams:
    rho_dtc: float = 0.7
    rho_gtc: float = 0.7
    alpha_st: float = 1.0
    alpha_ct: float = 0.0
    e_max: float = 100.0
    thresholds: tuple[float, ...] = field(default_factory=default_thresholds)

    def __post_init__(self):
        object.__setattr__(self, "thresholds", tuple(float(t) for t in self.thresholds))
        if not (0 < self.rho_dtc <= 1 and 0 < self.rho_gtc <= 1):
            raise ValidationError("intersection criteria must lie in (0, 1]")
        if self.alpha_st < 0 or self.alpha_ct < 0:
            raise ValidationError("alpha parameters must be non-negative")
        if self.alpha_ct != 0:
            raise ValidationError("cross-trigger cost is not supported; alpha_ct must be 0")
        if not self.e_max > 0:
            raise ValidationError("e_max must be positive")
        t = self.thresholds
        if any(b <= a for a, b in zip(t, t[1:])) or any(not 0 < x < 1 for x in t):
            raise ValidationError("thresholds must be strictly increasing within (0, 1)")


@dataclass
class MatchCounts:
    tp: np.ndarray
    fp: np.ndarray
    n_gt: np.ndarray


def _by_class(events: Sequence[Event]) -> dict[int, np.ndarray]:
    out: dict[int, list] = {}
    for ev in events:
        out.setdefault(ev.class_id, []).append((ev.onset, ev.offset, ev.confidence))
    return {c: np.asarray(v, dtype=np.float64).reshape(-1, 3) for c, v in out.items()}


def _intersections(dets: np.ndarray, gts: np.ndarray) -> np.ndarray:
    lo = np.maximum(dets[:, None, 0], gts[None, :, 0])
    hi = np.minimum(dets[:, None, 1], gts[None, :, 1])
    return np.maximum(hi - lo, 0.0)


def _check_clips(dets: Mapping, gts: Mapping) -> None:
    unknown = sorted(set(dets) - set(gts))
    if unknown:
        raise ValidationError(f"detections for clips without ground truth/duration: {unknown[:5]}")


def match_events(
    dets: Mapping[str, Sequence[Event]],
    gts: Mapping[str, Sequence[Event]],
    num_classes: int,
    rho_dtc: float = 0.7,
    rho_gtc: float = 0.7,
) -> MatchCounts:
    """Per-class TP/FP counts under the detection and ground-truth intersection criteria."""
    _check_clips(dets, gts)
    tp = np.zeros(num_classes, dtype=np.int64)
    fp = np.zeros(num_classes, dtype=np.int64)
    n_gt = np.zeros(num_classes, dtype=np.int64)
    for clip in sorted(gts):
        g_by = _by_class(gts[clip])
        d_by = _by_class(dets.get(clip, ()))
        for c, g in g_by.items():
            n_gt[c] += len(g)
        for c, d in d_by.items():
            g = g_by.get(c, np.zeros((0, 3)))
            inter = _intersections(d, g)
            valid = inter.sum(axis=1) / (d[:, 1] - d[:, 0]) >= rho_dtc
            fp[c] += int((~valid).sum())
            if len(g):
                covered = inter[valid].sum(axis=0) / (g[:, 1] - g[:, 0])
                tp[c] += int((covered >= rho_gtc).sum())
    return MatchCounts(tp, fp, n_gt)


@dataclass
class ClassCurve:
    efpr: np.ndarray
    tpr: np.ndarray

    def at(self, e: np.ndarray) -> np.ndarray:
        """Staircase ROC value max{tpr_k : efpr_k <= e}, 0 where no point qualifies."""
        order = np.argsort(self.efpr, kind="stable")
        x = self.efpr[order]
        best = np.maximum.accumulate(self.tpr[order]) if x.size else x
        idx = np.searchsorted(x, e, side="right") - 1
        return np.where(idx >= 0, best[np.maximum(idx, 0)] if x.size else 0.0, 0.0)


def staircase_area(curves: Sequence[ClassCurve], e_max: float, alpha_st: float = 0.0) -> float:
    """(1/e_max) * integral over [0, e_max] of max(0, mean_c r_c(e) - alpha_st * std_c r_c(e))."""
    if not curves:
        raise ValidationError("no classes to aggregate")
    cuts = np.unique(np.concatenate([[0.0]] + [c.efpr[c.efpr < e_max] for c in curves]))
    values = np.stack([c.at(cuts) for c in curves])
    eff = values.mean(axis=0)
    if alpha_st:
        eff = eff - alpha_st * values.std(axis=0)
    eff = np.maximum(eff, 0.0)
    widths = np.diff(np.concatenate([cuts, [e_max]]))
    return float(np.sum(widths * eff) / e_max)


@dataclass
class PsdsResult:
    score: float
    curves: dict[int, ClassCurve]
    included: list[int]


def psds(
    dets_by_threshold: Mapping[float, Mapping[str, Sequence[Event]]],
    gts: Mapping[str, Sequence[Event]],
    total_duration_hours: float,
    num_classes: int,
    params: PsdsParams = PsdsParams(),
) -> PsdsResult:
    """PSDS over the given operating points (one detection set per threshold)."""
    if not dets_by_threshold:
        raise ValidationError("need at least one threshold")
    if not total_duration_hours > 0:
        raise ValidationError("total duration must be positive")
    points: dict[int, list[tuple[float, float]]] = {c: [] for c in range(num_classes)}
    n_gt = None
    for tau in sorted(dets_by_threshold):
        counts = match_events(dets_by_threshold[tau], gts, num_classes, params.rho_dtc, params.rho_gtc)
        n_gt = counts.n_gt
        for c in range(num_classes):
            if counts.n_gt[c]:
                points[c].append((counts.fp[c] / total_duration_hours, counts.tp[c] / counts.n_gt[c]))
    included = [c for c in range(num_classes) if n_gt[c] > 0]
    if not included:
        raise ValidationError("no class has ground-truth events")
    curves = {
        c: ClassCurve(np.array([p[0] for p in points[c]]), np.array([p[1] for p in points[c]]))
        for c in included
    }
    score = staircase_area([curves[c] for c in included], params.e_max, params.alpha_st)
    return PsdsResult(score, curves, included)


def detections_at_thresholds(
    scored: Mapping[str, Sequence[Event]], thresholds: Sequence[float]
) -> dict[float, dict[str, EventList]]:
    return {
        float(t): {clip: [e for e in evs if e.confidence >= t] for clip, evs in scored.items()}
        for t in thresholds
    }


def psds_from_scored(
    scored: Mapping[str, Sequence[Event]],
    gts: Mapping[str, Sequence[Event]],
    durations: Mapping[str, float],
    num_classes: int,
    params: PsdsParams = PsdsParams(),
) -> PsdsResult:
    """PSDS of confidence-carrying events, swept over ``params.thresholds``."""
    hours = sum(durations[c] for c in gts) / 3600.0
    return psds(detections_at_thresholds(scored, params.thresholds), gts, hours, num_classes, params)


def class_roc_sweep(
    dets: Mapping[str, np.ndarray],
    gts: Mapping[str, np.ndarray],
    rho_dtc: float = 0.7,
    rho_gtc: float = 0.7,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    """TP/FP counts of one class at every distinct detection confidence.

    ``dets[clip]`` rows are (onset, offset, confidence), ``gts[clip]`` rows
    (onset, offset). Returns (thresholds descending, tp, fp, n_gt) where
    counts at threshold t use detections with confidence >= t. A detection's
    DTC validity does not depend on other detections, so each FP enters at
    its own confidence and each GT becomes a TP at the confidence where its
    accumulated valid coverage first reaches ``rho_gtc``.
    """
    _check_clips(dets, gts)
    fp_conf, tp_conf, all_conf = [], [], []
    n_gt = 0
    for clip in sorted(gts):
        g = np.asarray(gts[clip], dtype=np.float64).reshape(-1, 2)
        n_gt += len(g)
        d = np.asarray(dets.get(clip, np.zeros((0, 3))), dtype=np.float64).reshape(-1, 3)
        if not len(d):
            continue
        all_conf.append(d[:, 2])
        inter = _intersections(d, g) if len(g) else np.zeros((len(d), 0))
        valid = inter.sum(axis=1) / (d[:, 1] - d[:, 0]) >= rho_dtc
        fp_conf.append(d[~valid, 2])
        if not len(g):
            continue
        vd, vi = d[valid], inter[valid]
        order = np.argsort(-vd[:, 2], kind="stable")
        conf_sorted = vd[order, 2]
        cover = np.cumsum(vi[order], axis=0) / (g[:, 1] - g[:, 0])
        for j in range(len(g)):
            hit = np.flatnonzero(cover[:, j] >= rho_gtc)
            if hit.size:
                tp_conf.append([conf_sorted[hit[0]]])
    cat = lambda xs: np.concatenate(xs) if xs else np.zeros(0)
    thresholds = np.unique(cat(all_conf))[::-1]
    neg_fp = np.sort(-cat(fp_conf))
    neg_tp = np.sort(-cat(tp_conf))
    fp = np.searchsorted(neg_fp, -thresholds, side="right")
    tp = np.searchsorted(neg_tp, -thresholds, side="right")
    return thresholds, tp, fp, n_gt


def class_roc_area(
    dets: Mapping[str, np.ndarray],
    gts: Mapping[str, np.ndarray],
    total_duration_hours: float,
    params: PsdsParams = PsdsParams(),
) -> float:
    """Normalized area under one class's staircase ROC up to ``e_max``."""
    _, tp, fp, n_gt = class_roc_sweep(dets, gts, params.rho_dtc, params.rho_gtc)
    if n_gt == 0:
        raise ValidationError("class has no ground-truth events")
    efpr = np.concatenate([[0.0], fp / total_duration_hours])
    tpr = np.concatenate([[0.0], tp / n_gt])
    return staircase_area([ClassCurve(efpr, tpr)], params.e_max)


# -- segment-based partial AUC ------------------------------------------------

SegmentScores = dict[str, tuple[np.ndarray, np.ndarray]]


def segmentize(
    gts: Mapping[str, Sequence[Event]],
    grids: Mapping[str, PosteriorGrid],
    vocab: ClassVocabulary,
    segment_len: float = 1.0,
    durations: Mapping[str, float] | None = None,
    reduce: str = "max",
) -> SegmentScores:
    """Pool (segment score, segment label) pairs per class over all clips.

    A segment is positive iff a same-class event overlaps it with positive
    length; its score is the max (or mean) posterior of frames centered in it.
    """
    pooled: dict[str, tuple[list, list]] = {}
    for clip in sorted(grids):
        grid = grids[clip]
        dur = durations[clip] if durations is not None and clip in durations else grid.duration
        n_seg = max(1, math.ceil(dur / segment_len - 1e-9))
        centers = (np.arange(grid.num_frames) + 0.5) * grid.frame_hop
        seg_of = np.floor(centers / segment_len).astype(int)
        starts = np.arange(n_seg) * segment_len
        ends = starts + segment_len
        for c, name in enumerate(grid.class_names):
            y = grid.scores[:, c].astype(np.float64)
            scores = np.empty(n_seg)
            for s in range(n_seg):
                sel = y[seg_of == s]
                if sel.size == 0:
                    mid = (starts[s] + min(ends[s], dur)) / 2
                    sel = y[min(int(mid / grid.frame_hop), grid.num_frames - 1):][:1]
                scores[s] = sel.max() if reduce == "max" else sel.mean()
            labels = np.zeros(n_seg, dtype=bool)
            if name in vocab:
                cid = vocab.index(name)
                for ev in gts.get(clip, ()):
                    if ev.class_id == cid:
                        labels |= (ev.onset < ends) & (ev.offset > starts)
            acc = pooled.setdefault(name, ([], []))
            acc[0].append(scores)
            acc[1].append(labels)
    return {n: (np.concatenate(s), np.concatenate(l)) for n, (s, l) in pooled.items()}


def segmentize_events(
    gts: Mapping[str, Sequence[Event]],
    dets: Mapping[str, Sequence[Event]],
    class_names: Sequence[str],
    vocab: ClassVocabulary,
    durations: Mapping[str, float],
    segment_len: float = 1.0,
) -> SegmentScores:
    """Segment scores from scored events: max confidence of same-class detections overlapping a segment."""
    pooled: dict[str, tuple[list, list]] = {n: ([], []) for n in class_names}
    for clip in sorted(durations):
        dur = durations[clip]
        n_seg = max(1, math.ceil(dur / segment_len - 1e-9))
        starts = np.arange(n_seg) * segment_len
        ends = starts + segment_len
        for name in class_names:
            cid = vocab.index(name)
            scores = np.zeros(n_seg)
            labels = np.zeros(n_seg, dtype=bool)
            for ev in dets.get(clip, ()):
                if ev.class_id == cid:
                    hit = (ev.onset < ends) & (ev.offset > starts)
                    scores[hit] = np.maximum(scores[hit], ev.confidence)
            for ev in gts.get(clip, ()):
                if ev.class_id == cid:
                    labels |= (ev.onset < ends) & (ev.offset > starts)
            pooled[name][0].append(scores)
            pooled[name][1].append(labels)
    return {n: (np.concatenate(s), np.concatenate(l)) for n, (s, l) in pooled.items() if s}


def roc_points(scores: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """ROC vertices (fpr, tpr) from (0, 0) over distinct score thresholds, descending."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    order = np.argsort(-scores, kind="stable")
    s, y = scores[order], labels[order]
    last = np.r_[np.flatnonzero(np.diff(s)), s.size - 1]
    tps = np.cumsum(y)[last]
    fps = np.cumsum(~y)[last]
    fpr = np.r_[0.0, fps / max(1, (~labels).sum())]
    tpr = np.r_[0.0, tps / max(1, labels.sum())]
    return fpr, tpr


def partial_auc(scores: np.ndarray, labels: np.ndarray, max_fpr: float = 0.1) -> float:
    """Area under the ROC polyline for fpr in [0, max_fpr], cut by linear interpolation."""
    if not 0 < max_fpr <= 1:
        raise ValidationError("max_fpr must lie in (0, 1]")
    fpr, tpr = roc_points(scores, labels)
    stop = np.searchsorted(fpr, max_fpr, side="right")
    x, y = fpr[:stop], tpr[:stop]
    if stop < fpr.size and x[-1] < max_fpr:
        x0, x1, y0, y1 = fpr[stop - 1], fpr[stop], tpr[stop - 1], tpr[stop]
        x = np.r_[x, max_fpr]
        y = np.r_[y, y0 + (y1 - y0) * (max_fpr - x0) / (x1 - x0)]
    return float(np.sum(np.diff(x) * (y[1:] + y[:-1]) / 2))


def standardize_pauc(pauc: float, max_fpr: float) -> float:
    """Map partial AUC to [0.5, 1] so chance is 0.5 and perfect is 1 (McClish)."""
    lo, hi = max_fpr ** 2 / 2, max_fpr
    return 0.5 * (1 + (pauc - lo) / (hi - lo))


@dataclass
class MpaucResult:
    score: float
    per_class: dict[str, float]
    excluded: list[str]


def mpauc(
    scores: SegmentScores,
    max_fpr: float = 0.1,
    classes: Sequence[str] | None = None,
    standardize: bool = True,
) -> MpaucResult:
    """Mean over classes of the (standardized) segment-based partial ROC AUC."""
    names = list(scores) if classes is None else [c for c in classes if c in scores]
    per_class, excluded = {}, []
    for name in names:
        s, y = scores[name]
        y = np.asarray(y, dtype=bool)
        if y.all() or not y.any():
            log.warning("class %s lacks positive or negative segments; excluded from mpAUC", name)
            excluded.append(name)
            continue
        p = partial_auc(s, y, max_fpr)
        per_class[name] = standardize_pauc(p, max_fpr) if standardize else p / max_fpr
    if not per_class:
        raise ValidationError("no class with both positive and negative segments")
    return MpaucResult(float(np.mean(list(per_class.values()))), per_class, excluded)


def rank_score(mpauc_value: float, psds1: float) -> float:
    return mpauc_value + psds1


def selection_score(psds1_synth: float, psds1_external: float, mpauc_value: float) -> float:
    # correctly rounded, hence independent of argument order
    return math.fsum((psds1_synth, psds1_external, mpauc_value))
