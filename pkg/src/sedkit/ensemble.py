"""Logit-space ensembling of frame posteriors and pseudo-label generation."""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import ValidationError
from .dsp import align_sequence
from .ingest import PosteriorGrid, list_posterior_dir, posterior_path, read_posteriors, write_posteriors

PROB_EPS = 1e-7


def logit(p: np.ndarray) -> np.ndarray:
    p = np.clip(np.asarray(p, dtype=np.float64), PROB_EPS, 1.0 - PROB_EPS)
    return np.log(p) - np.log1p(-p)


def sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=np.float64)))


def _normalize(weights: Sequence[float] | None, n: int) -> np.ndarray:
    if weights is None:
        return np.full(n, 1.0 / n)
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (n,) or np.any(w < 0) or not w.sum() > 0:
        raise ValidationError("need one non-negative weight per member with a positive sum")
    return w / w.sum()


def average_logits(
    grids: Sequence[PosteriorGrid], weights: Sequence[float] | None = None
) -> PosteriorGrid:
    """sigmoid(sum_i w_i logit(p_i)), members aligned to the coarsest frame grid."""
    if not grids:
        raise ValidationError("ensemble needs at least one member")
    first = grids[0]
    for g in grids[1:]:
        if g.clip_id != first.clip_id:
            raise ValidationError(f"clip mismatch: {g.clip_id!r} vs {first.clip_id!r}")
        if g.class_names != first.class_names:
            raise ValidationError(f"class order differs between members for clip {first.clip_id!r}")
    w = _normalize(weights, len(grids))
    target = min(grids, key=lambda g: (g.num_frames, -g.frame_hop))
    acc = np.zeros((target.num_frames, len(first.class_names)))
    for wi, g in zip(w, grids):
        scores = g.scores if g.num_frames == target.num_frames else align_sequence(g.scores, target.num_frames, "linear")
        acc += wi * logit(scores)
    out = sigmoid(acc).astype(np.float32)
    return PosteriorGrid(first.clip_id, target.frame_hop, out, first.class_names)


@dataclass(frozen=True)
class EnsembleSpec:
    members: tuple[Path, ...]
    weights: tuple[float, ...] | None = None

    def __post_init__(self):
        if not self.members:
            raise ValidationError("ensemble needs at least one member")
        object.__setattr__(self, "members", tuple(Path(m) for m in self.members))
        _normalize(self.weights, len(self.members))


def _ensemble_clip(args) -> PosteriorGrid:
    members, weights, clip_id = args
    return average_logits([read_posteriors(posterior_path(m, clip_id)) for m in members], weights)


def make_pseudo_labels(
    spec: EnsembleSpec, clip_ids: Iterable[str], out_dir: str | Path, jobs: int = 1
) -> list[Path]:
    """Write one ensembled SEDP grid per clip into ``out_dir``."""
    clip_ids = sorted(set(clip_ids))
    missing = []
    for m in spec.members:
        have = set(list_posterior_dir(m)) if Path(m).is_dir() else set()
        missing += [f"{m}:{cid}" for cid in clip_ids if cid not in have]
    if missing:
        raise ValidationError(f"missing member posteriors: {', '.join(missing)}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tasks = [(spec.members, spec.weights, cid) for cid in clip_ids]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            grids = list(pool.map(_ensemble_clip, tasks))
    else:
        grids = [_ensemble_clip(t) for t in tasks]
    paths = []
    for g in grids:
        path = posterior_path(out_dir, g.clip_id)
        write_posteriors(g, path)
        paths.append(path)
    return paths
