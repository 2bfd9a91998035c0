"""Data augmentation with label/mask bookkeeping, and the multi-subset batch composer."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .core import ValidationError
from .dsp import MEL_PRESETS, Waveform, align_sequence, dir_convolve, mel_spectrogram

MIXSTYLE_EPS = 1e-5

BATCH_SUBSETS = ("maestro", "desed_real_strong", "desed_synth_strong", "desed_weak", "desed_unlabeled")
STRONG_TAGS = frozenset({"maestro", "desed_real_strong", "desed_synth_strong"})
DESED_STRONG_TAGS = frozenset({"desed_real_strong", "desed_synth_strong"})


@dataclass(frozen=True, eq=False)
class LabeledExample:
    """One training example.

    ``features`` is a waveform (N,) before the frontend and a spectrogram
    (F, T) after it. Strong targets are (T_label, C), weak targets (C,).
    """

    features: np.ndarray
    mask: np.ndarray
    domain: str
    strong: np.ndarray | None = None
    weak: np.ndarray | None = None
    pseudo: np.ndarray | None = None
    subset: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "features", np.asarray(self.features, dtype=np.float64))
        object.__setattr__(self, "mask", np.asarray(self.mask, dtype=bool))
        for name in ("strong", "weak", "pseudo"):
            arr = getattr(self, name)
            if arr is None:
                continue
            arr = np.asarray(arr, dtype=np.float64)
            if arr.shape[-1] != self.mask.shape[0]:
                raise ValidationError(f"{name} targets have {arr.shape[-1]} classes, mask has {self.mask.shape[0]}")
            if np.any(arr < 0) or np.any(arr > 1):
                raise ValidationError(f"{name} targets outside [0, 1]")
            object.__setattr__(self, name, arr)

    def label_kind(self) -> str:
        if self.strong is not None:
            return "strong"
        return "weak" if self.weak is not None else "unlabeled"


def _mix_opt(a, b, lam):
    if a is None and b is None:
        return None
    if a is None or b is None:
        raise ValidationError("cannot mix an example with targets and one without")
    if a.shape != b.shape:
        raise ValidationError(f"target shape mismatch {a.shape} vs {b.shape}")
    return lam * a + (1.0 - lam) * b


def mixup(a: LabeledExample, b: LabeledExample, lam: float | None = None, rng=None, alpha: float = 0.2) -> LabeledExample:
    """Convex combination of two examples; targets mixed linearly, masks united.

    Works on waveforms (wavmix) and spectrograms alike. When ``lam`` is None
    it is drawn from Beta(alpha, alpha).
    """
    if a.features.shape != b.features.shape:
        raise ValidationError(f"feature shape mismatch {a.features.shape} vs {b.features.shape}")
    if lam is None:
        lam = float(rng.beta(alpha, alpha))
    if not 0.0 <= lam <= 1.0:
        raise ValidationError("mixing weight must lie in [0, 1]")
    return LabeledExample(
        features=lam * a.features + (1.0 - lam) * b.features,
        mask=a.mask | b.mask,
        domain=a.domain if a.domain == b.domain else "mixed",
        strong=_mix_opt(a.strong, b.strong, lam),
        weak=_mix_opt(a.weak, b.weak, lam),
        pseudo=_mix_opt(a.pseudo, b.pseudo, lam),
        subset=a.subset if a.subset == b.subset else "mixed",
    )


def _bin_stats(x: np.ndarray):
    mu = x.mean(axis=1, keepdims=True)
    sig = np.maximum(x.std(axis=1, keepdims=True), MIXSTYLE_EPS)
    return mu, sig


def freq_mixstyle(a: np.ndarray, b: np.ndarray, lam: float | None = None, alpha: float = 0.3, rng=None):
    """Swap per-frequency-bin statistics between two (F, T) spectrograms.

    Each output is its own input normalized per bin, then rescaled with the
    ``lam`` mixture of its own and the partner's mean/std.
    """
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValidationError(f"spectrogram shape mismatch {a.shape} vs {b.shape}")
    if lam is None:
        lam = float(rng.beta(alpha, alpha))
    mu_a, sig_a = _bin_stats(a)
    mu_b, sig_b = _bin_stats(b)
    out_a = (a - mu_a) / sig_a * (lam * sig_a + (1 - lam) * sig_b) + lam * mu_a + (1 - lam) * mu_b
    out_b = (b - mu_b) / sig_b * (lam * sig_b + (1 - lam) * sig_a) + lam * mu_b + (1 - lam) * mu_a
    return out_a, out_b


def linear_gain_profile(n_bins: int, boundaries: np.ndarray, gains_db: np.ndarray) -> np.ndarray:
    """Piecewise-linear dB gain over bins, interpolated between boundary gains."""
    return np.interp(np.arange(n_bins), boundaries, gains_db)


def filter_augment(
    x: np.ndarray,
    rng: np.random.Generator,
    p: float = 0.8,
    band_count_range: tuple[int, int] = (3, 6),
    gain_db_range: tuple[float, float] = (-6.0, 6.0),
) -> np.ndarray:
    """Random piecewise-linear frequency gain added in the log domain (linear FilterAugment)."""
    x = np.asarray(x, dtype=np.float64)
    if rng.random() >= p:
        return x.copy()
    n_bins = x.shape[0]
    n_bands = int(rng.integers(band_count_range[0], band_count_range[1] + 1))
    n_bands = max(1, min(n_bands, n_bins - 1)) if n_bins > 1 else 1
    inner = np.sort(rng.choice(np.arange(1, n_bins - 1), size=n_bands - 1, replace=False)) if n_bands > 1 else []
    boundaries = np.concatenate([[0], inner, [n_bins - 1]]).astype(np.float64)
    gains = rng.uniform(gain_db_range[0], gain_db_range[1], size=boundaries.size)
    profile = linear_gain_profile(n_bins, boundaries, gains)
    return x + (profile * np.log(10.0) / 20.0)[:, None]


def time_mask(
    x: LabeledExample,
    rng: np.random.Generator,
    s_range: tuple[float, float] = (0.05, 0.3),
    s: float | None = None,
) -> LabeledExample:
    """Zero a contiguous span of frames in the features and the matching strong targets."""
    if x.strong is None:
        raise ValidationError("time masking needs strongly labeled examples")
    if s is None:
        s = float(rng.uniform(*s_range))
    n_frames = x.features.shape[-1]
    span = int(round(s * n_frames))
    if span == 0:
        return x
    start = int(rng.integers(0, n_frames - span + 1))
    feats = x.features.copy()
    feats[..., start:start + span] = 0.0
    n_lab = x.strong.shape[0]
    lab_start = int(np.floor(start * n_lab / n_frames))
    lab_end = int(np.ceil((start + span) * n_lab / n_frames))
    strong = x.strong.copy()
    strong[lab_start:lab_end] = 0.0
    pseudo = x.pseudo
    if pseudo is not None:
        pseudo = pseudo.copy()
        pseudo[lab_start:lab_end] = 0.0
    return replace(x, features=feats, strong=strong, pseudo=pseudo)


def warp_frequency(x: np.ndarray, w: float) -> np.ndarray:
    """Resize the frequency axis by ``w`` and center-crop or edge-pad back."""
    x = np.asarray(x, dtype=np.float64)
    n_bins = x.shape[0]
    new = max(1, int(round(n_bins * w)))
    if new == n_bins:
        return x.copy()
    resized = align_sequence(x, new, "linear")
    if new > n_bins:
        off = (new - n_bins) // 2
        return resized[off:off + n_bins]
    before = (n_bins - new) // 2
    return np.pad(resized, ((before, n_bins - new - before), (0, 0)), mode="edge")


def freq_warp(
    x: np.ndarray, rng: np.random.Generator, p: float = 0.5, warp_range: tuple[float, float] = (0.9, 1.1)
) -> np.ndarray:
    if rng.random() >= p:
        return np.array(x, dtype=np.float64)
    return warp_frequency(x, float(rng.uniform(*warp_range)))


# -- batch composition --------------------------------------------------------


@dataclass(frozen=True)
class BatchComposition:
    maestro: int
    desed_real_strong: int
    desed_synth_strong: int
    desed_weak: int
    desed_unlabeled: int

    def __post_init__(self):
        if min(self.counts().values()) < 0:
            raise ValidationError("batch counts must be non-negative")

    def counts(self) -> dict[str, int]:
        return {s: getattr(self, s) for s in BATCH_SUBSETS}

    @property
    def size(self) -> int:
        return sum(self.counts().values())

    @classmethod
    def preset(cls, stage: int) -> "BatchComposition":
        if stage == 1:
            return cls(12, 10, 10, 20, 20)
        if stage == 2:
            return cls(56, 40, 40, 72, 72)
        raise ValidationError(f"no batch preset for stage {stage}")


class BatchComposer:
    """Draws batches by subset, each pool visited without replacement per epoch pass."""

    def __init__(self, pools: Mapping[str, Sequence], comp: BatchComposition, rng: np.random.Generator):
        for subset, n in comp.counts().items():
            if n > 0 and not pools.get(subset):
                raise ValidationError(f"pool {subset!r} is empty but {n} examples were requested")
        self.pools = {s: list(pools.get(s, ())) for s in BATCH_SUBSETS}
        self.comp = comp
        self.rng = rng
        self._order: dict[str, list[int]] = {s: [] for s in BATCH_SUBSETS}

    def _take(self, subset: str, n: int) -> list[int]:
        out = []
        while len(out) < n:
            if not self._order[subset]:
                self._order[subset] = list(self.rng.permutation(len(self.pools[subset])))
            need = n - len(out)
            out.extend(self._order[subset][:need])
            self._order[subset] = self._order[subset][need:]
        return out

    def next_batch(self) -> tuple[list, list[str]]:
        batch, tags = [], []
        for subset, n in self.comp.counts().items():
            for i in self._take(subset, n):
                batch.append(self.pools[subset][i])
                tags.append(subset)
        return batch, tags


def compose_batch(pools: Mapping[str, Sequence], comp: BatchComposition, rng: np.random.Generator):
    return BatchComposer(pools, comp, rng).next_batch()


# -- pipeline -----------------------------------------------------------------

PIPELINE_ORDER = ("dir", "wavmix", "frontend", "freq_warp", "freq_mixstyle", "filter_augment", "time_mask", "mixup")


@dataclass(frozen=True)
class MethodConfig:
    p: float
    pipeline: frozenset[tuple[int, int]]
    alpha: float | None = None
    params: Mapping[str, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValidationError("augmentation probability must be in [0, 1]")
        if self.alpha is not None and not self.alpha > 0:
            raise ValidationError("beta parameter must be positive")
        for name, (lo, hi) in self.params.items():
            if lo > hi:
                raise ValidationError(f"range {name} is not ordered")

    def active(self, iteration: int, stage: int) -> bool:
        return (iteration, stage) in self.pipeline


def _flags(spec: str) -> frozenset[tuple[int, int]]:
    """Parse flags such as ``I1.S{1,2},I2.S2`` into (iteration, stage) pairs."""
    out = set()
    depth, token, parts = 0, "", []
    for ch in spec.replace(" ", ""):
        depth += ch == "{"
        depth -= ch == "}"
        if ch == "," and depth == 0:
            parts.append(token)
            token = ""
        else:
            token += ch
    parts.append(token)

    def expand(s: str) -> list[int]:
        return [int(v) for v in s.strip("{}").split(",")]

    for part in parts:
        it, st = part.split(".")
        for i in expand(it[1:]):
            for s in expand(st[1:]):
                out.add((i, s))
    return frozenset(out)


def _table1() -> dict[str, MethodConfig]:
    return {
        "dir": MethodConfig(0.5, _flags("I{1,2}.S2")),
        "wavmix": MethodConfig(0.5, _flags("I{1,2}.S{1,2}"), alpha=0.2),
        "freq_mixstyle": MethodConfig(0.5, _flags("I1.S{1,2},I2.S2"), alpha=0.3),
        "mixup": MethodConfig(0.5, _flags("I{1,2}.S{1,2}"), alpha=0.2),
        "time_mask": MethodConfig(1.0, _flags("I{1,2}.S2"), params={"s": (0.05, 0.3)}),
        "filter_augment": MethodConfig(
            0.8, _flags("I1.S{1,2},I2.S2"), params={"band_count": (3, 6), "gain_db": (-6.0, 6.0)}
        ),
        "freq_warp": MethodConfig(0.5, _flags("I{1,2}.S2"), params={"warp": (0.9, 1.1)}),
    }


@dataclass(frozen=True)
class AugConfig:
    methods: Mapping[str, MethodConfig] = field(default_factory=_table1)
    impulse_responses: tuple[Waveform, ...] = ()
    # subsets time masking applies to
    time_mask_subsets: frozenset[str] = DESED_STRONG_TAGS

    def enabled(self, iteration: int, stage: int) -> list[str]:
        if iteration not in (1, 2) or stage not in (1, 2):
            raise ValidationError("iteration and stage must be 1 or 2")
        return [m for m in PIPELINE_ORDER if m in self.methods and self.methods[m].active(iteration, stage)]

    def with_probabilities(self, p: float) -> "AugConfig":
        return replace(self, methods={k: replace(v, p=p) for k, v in self.methods.items()})

    @classmethod
    def from_dict(cls, doc: Mapping) -> "AugConfig":
        base = _table1()
        for name, entry in doc.items():
            if name not in base:
                raise ValidationError(f"unknown augmentation {name!r}")
            cur = base[name]
            base[name] = MethodConfig(
                p=float(entry.get("p", cur.p)),
                pipeline=_flags(entry["pipeline"]) if "pipeline" in entry else cur.pipeline,
                alpha=entry.get("alpha", cur.alpha),
                params={**cur.params, **{k: tuple(v) for k, v in entry.get("ranges", {}).items()}},
            )
        return cls(methods=base)

    @classmethod
    def from_json(cls, path: str | Path) -> "AugConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _partners(batch: Sequence[LabeledExample], eligible: list[int], rng: np.random.Generator) -> dict[int, int]:
    """Pair each eligible index with a random eligible partner of the same label kind."""
    out = {}
    by_kind: dict[str, list[int]] = {}
    for i in eligible:
        by_kind.setdefault(batch[i].label_kind(), []).append(i)
    for idx in by_kind.values():
        perm = rng.permutation(len(idx))
        for i, j in zip(idx, perm):
            out[i] = idx[j]
    return out


def _cnn_frontend(x: np.ndarray) -> np.ndarray:
    return mel_spectrogram(Waveform(x), MEL_PRESETS["cnn"])


def apply_pipeline(
    batch: Sequence[LabeledExample],
    cfg: AugConfig,
    stage: int,
    iteration: int,
    rng: np.random.Generator,
    frontend: Callable[[np.ndarray], np.ndarray] = _cnn_frontend,
    applied: list | None = None,
) -> list[LabeledExample]:
    """Run the augmentations enabled for (iteration, stage) in their fixed order.

    Waveform-level steps are skipped when the batch already holds
    spectrograms. ``applied`` collects (method, example index) records.
    """
    enabled = set(cfg.enabled(iteration, stage))
    batch = list(batch)
    n = len(batch)
    log = applied if applied is not None else []

    def draw(method: str) -> list[int]:
        p = cfg.methods[method].p
        return [i for i in range(n) if rng.random() < p]

    waveform_input = n > 0 and batch[0].features.ndim == 1

    if waveform_input and "dir" in enabled and cfg.impulse_responses:
        for i in draw("dir"):
            ir = cfg.impulse_responses[int(rng.integers(len(cfg.impulse_responses)))]
            batch[i] = replace(batch[i], features=dir_convolve(Waveform(batch[i].features), ir).samples)
            log.append(("dir", i))

    if waveform_input and "wavmix" in enabled:
        chosen = [i for i in draw("wavmix") if batch[i].subset in STRONG_TAGS]
        strong = [i for i in range(n) if batch[i].subset in STRONG_TAGS]
        pairs = _partners(batch, strong, rng)
        src = list(batch)
        for i in chosen:
            batch[i] = mixup(src[i], src[pairs[i]], rng=rng, alpha=cfg.methods["wavmix"].alpha)
            log.append(("wavmix", i))

    if waveform_input:
        batch = [replace(ex, features=frontend(ex.features)) for ex in batch]

    if "freq_warp" in enabled:
        lo, hi = cfg.methods["freq_warp"].params.get("warp", (0.9, 1.1))
        for i in draw("freq_warp"):
            batch[i] = replace(batch[i], features=freq_warp(batch[i].features, rng, p=1.0, warp_range=(lo, hi)))
            log.append(("freq_warp", i))

    if "freq_mixstyle" in enabled:
        src = list(batch)
        perm = rng.permutation(n)
        for i in draw("freq_mixstyle"):
            j = int(perm[i])
            out, _ = freq_mixstyle(src[i].features, src[j].features, alpha=cfg.methods["freq_mixstyle"].alpha, rng=rng)
            batch[i] = replace(batch[i], features=out)
            log.append(("freq_mixstyle", i))

    if "filter_augment" in enabled:
        mc = cfg.methods["filter_augment"]
        bands = tuple(int(v) for v in mc.params.get("band_count", (3, 6)))
        gains = mc.params.get("gain_db", (-6.0, 6.0))
        for i in draw("filter_augment"):
            batch[i] = replace(
                batch[i], features=filter_augment(batch[i].features, rng, 1.0, bands, gains)
            )
            log.append(("filter_augment", i))

    if "time_mask" in enabled:
        s_range = cfg.methods["time_mask"].params.get("s", (0.05, 0.3))
        for i in draw("time_mask"):
            if batch[i].subset in cfg.time_mask_subsets and batch[i].strong is not None:
                batch[i] = time_mask(batch[i], rng, s_range)
                log.append(("time_mask", i))

    if "mixup" in enabled:
        src = list(batch)
        pairs = _partners(src, list(range(n)), rng)
        for i in draw("mixup"):
            batch[i] = mixup(src[i], src[pairs[i]], rng=rng, alpha=cfg.methods["mixup"].alpha)
            log.append(("mixup", i))

    return batch
