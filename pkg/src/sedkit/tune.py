"""Per-class post-processing hyperparameter search and model ranking."""
from __future__ import annotations

import itertools
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .core import ClassVocabulary, Event, ValidationError
from .ingest import PosteriorGrid
from .metrics import ClassCurve, PsdsParams, class_roc_area, rank_score, staircase_area, match_events
from .postprocess import (
    MedianFilterParams,
    SebbClassParams,
    SebbParams,
    majority_filter,
    _runs,
    sebb_candidates,
    sebb_merge,
)

log = logging.getLogger(__name__)


def linspace(lo: float, hi: float, n: int) -> list[float]:
    if n < 2:
        raise ValidationError("a search grid needs at least 2 values")
    return [float(v) for v in np.linspace(lo, hi, n)]


@dataclass(frozen=True)
class TuneGrid:
    step_filter_len: tuple[float, ...] = tuple(linspace(0.38, 0.66, 8))
    merge_thre_rel: tuple[float, ...] = tuple(linspace(1.5, 3.25, 8))
    merge_thre_abs: tuple[float, ...] = tuple(linspace(0.15, 0.325, 8))

    def __post_init__(self):
        for name in ("step_filter_len", "merge_thre_rel", "merge_thre_abs"):
            values = tuple(sorted(float(v) for v in getattr(self, name)))
            if not values:
                raise ValidationError(f"empty grid axis {name}")
            object.__setattr__(self, name, values)

    def combos(self) -> list[tuple[float, float, float]]:
        """All combinations in lexicographic order."""
        return list(itertools.product(self.step_filter_len, self.merge_thre_rel, self.merge_thre_abs))

    def midpoint(self) -> SebbClassParams:
        mid = lambda v: (v[0] + v[-1]) / 2
        return SebbClassParams(mid(self.step_filter_len), mid(self.merge_thre_rel), mid(self.merge_thre_abs))

    @classmethod
    def from_json(cls, path: str | Path) -> "TuneGrid":
        doc = json.loads(Path(path).read_text())

        def axis(key):
            v = doc[key]
            return tuple(linspace(v["lo"], v["hi"], v.get("n", 8))) if isinstance(v, dict) else tuple(v)

        return cls(axis("step_filter_len"), axis("merge_thre_rel"), axis("merge_thre_abs"))


@dataclass
class TuneResult:
    params: SebbParams
    table: list[dict]
    warnings: list[str] = field(default_factory=list)

    def best_row(self, cls: str) -> dict:
        rows = [r for r in self.table if r["class"] == cls]
        return max(rows, key=lambda r: r["score"])


def _class_gts(gts: Mapping[str, Sequence[Event]], clips: Sequence[str], cid: int) -> dict[str, np.ndarray]:
    return {
        clip: np.array([(e.onset, e.offset) for e in gts.get(clip, ()) if e.class_id == cid]).reshape(-1, 2)
        for clip in clips
    }


def _tune_class(args) -> tuple[str, list[dict], SebbClassParams | None]:
    name, tracks, hops, gts_c, hours, grid, params = args
    if sum(len(g) for g in gts_c.values()) == 0:
        return name, [], None
    rows = []
    best, best_score = None, -np.inf
    for step in grid.step_filter_len:
        probe = SebbClassParams(step, 1.0, 0.0)
        cands = {clip: sebb_candidates(y, probe.step_frames(hops[clip])) for clip, y in tracks.items()}
        for rel, abs_ in itertools.product(grid.merge_thre_rel, grid.merge_thre_abs):
            dets = {}
            for clip, cand in cands.items():
                hop = hops[clip]
                merged = sebb_merge(cand, rel, abs_)
                dets[clip] = np.array([(s * hop, e * hop, c) for s, e, c in merged]).reshape(-1, 3)
            score = class_roc_area(dets, gts_c, hours, params)
            rows.append({"class": name, "step_filter_len": step, "merge_thre_rel": rel, "merge_thre_abs": abs_, "score": score})
            if score > best_score:
                best, best_score = SebbClassParams(step, rel, abs_), score
    return name, rows, best


def tune_sebb(
    grids: Mapping[str, PosteriorGrid],
    gts: Mapping[str, Sequence[Event]],
    vocab: ClassVocabulary,
    durations: Mapping[str, float] | None = None,
    grid: TuneGrid = TuneGrid(),
    params: PsdsParams = PsdsParams(),
    jobs: int = 1,
) -> TuneResult:
    """Exhaustive per-class search; each class maximizes its own ROC area up to e_max.

    Ties go to the lexicographically smallest (step, rel, abs). Classes without
    ground truth fall back to the grid midpoint.
    """
    if not grids:
        raise ValidationError("tuning needs a non-empty development set")
    clips = sorted(grids)
    durations = durations or {}
    hours = sum(durations.get(c, grids[c].duration) for c in clips) / 3600.0
    hops = {c: grids[c].frame_hop for c in clips}
    names = grids[clips[0]].class_names
    tasks = []
    for k, name in enumerate(names):
        cid = vocab.index(name)
        tracks = {c: grids[c].scores[:, grids[c].class_names.index(name)].astype(np.float64) for c in clips}
        tasks.append((name, tracks, hops, _class_gts(gts, clips, cid), hours, grid, params))
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_tune_class, tasks))
    else:
        results = [_tune_class(t) for t in tasks]
    chosen, table, warnings = {}, [], []
    for name, rows, best in results:
        table.extend(rows)
        if best is None:
            msg = f"class {name} has no ground truth on the tuning set; using grid midpoint"
            log.warning(msg)
            warnings.append(msg)
            best = grid.midpoint()
        chosen[name] = best
    return TuneResult(SebbParams(chosen), table, warnings)


def tune_median(
    grids: Mapping[str, PosteriorGrid],
    gts: Mapping[str, Sequence[Event]],
    vocab: ClassVocabulary,
    filter_lens: Sequence[float],
    durations: Mapping[str, float] | None = None,
    params: PsdsParams = PsdsParams(),
) -> tuple[MedianFilterParams, list[dict]]:
    """Per-class median filter length search over a user grid, same objective as tune_sebb."""
    clips = sorted(grids)
    durations = durations or {}
    hours = sum(durations.get(c, grids[c].duration) for c in clips) / 3600.0
    names = grids[clips[0]].class_names
    chosen, table = {}, []
    for name in names:
        cid = vocab.index(name)
        gts_c = {clip: [e for e in gts.get(clip, ()) if e.class_id == cid] for clip in clips}
        n_gt = sum(len(v) for v in gts_c.values())
        best, best_score = None, -np.inf
        for length in sorted(filter_lens):
            if n_gt == 0:
                break
            efpr, tpr = [], []
            for tau in params.thresholds:
                dets = {}
                for clip in clips:
                    g = grids[clip]
                    hop = g.frame_hop
                    win = MedianFilterParams({name: length}).frames(name, hop)
                    y = g.scores[:, g.class_names.index(name)].astype(np.float64)
                    dets[clip] = [Event(s * hop, e * hop, cid) for s, e in _runs(majority_filter(y >= tau, win))]
                counts = match_events(dets, gts_c, len(vocab), params.rho_dtc, params.rho_gtc)
                efpr.append(counts.fp[cid] / hours)
                tpr.append(counts.tp[cid] / n_gt)
            score = staircase_area([ClassCurve(np.array(efpr), np.array(tpr))], params.e_max)
            table.append({"class": name, "filter_len": length, "score": score})
            if score > best_score:
                best, best_score = length, score
        chosen[name] = best if best is not None else float(np.median(filter_lens))
    return MedianFilterParams(chosen), table


@dataclass(frozen=True)
class LeaderboardRow:
    model_id: str
    mpauc: float
    psds1: float
    rank_score: float


def rank_models(results: Sequence[tuple[str, float, float]]) -> list[LeaderboardRow]:
    """Sort by rank score (mpAUC + PSDS1), best first; ties keep input order."""
    rows = [LeaderboardRow(m, a, p, rank_score(a, p)) for m, a, p in results]
    return sorted(rows, key=lambda r: -r.rank_score)
