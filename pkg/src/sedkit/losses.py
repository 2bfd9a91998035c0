"""Training objective terms as plain functions of prediction and target arrays."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Mapping

import numpy as np

from .core import ValidationError

BCE_EPS = 1e-7
EMA_DECAY = 0.999

COMPONENTS = ("maestro", "desed_strong", "synth_strong", "weak", "ssl", "pseudo")


@dataclass(frozen=True)
class LossWeights:
    w_maestro: float = 0.0
    w_desed_strong: float = 0.0
    w_synth_strong: float = 0.0
    w_weak: float = 0.0
    w_ssl: float = 0.0
    w_pseudo: float = 0.0

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not value >= 0:
                raise ValidationError(f"loss weight {name} must be non-negative, got {value}")

    def weight(self, component: str) -> float:
        return getattr(self, f"w_{component}")

    @classmethod
    def from_dict(cls, doc: Mapping[str, float]) -> "LossWeights":
        return cls(**{(k if k.startswith("w_") else f"w_{k}"): float(v) for k, v in doc.items()})


@dataclass(frozen=True, eq=False)
class PredictionPair:
    strong: np.ndarray
    weak: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "strong", np.asarray(self.strong, dtype=np.float64))
        object.__setattr__(self, "weak", np.asarray(self.weak, dtype=np.float64))


def _same_shape(*arrays: np.ndarray) -> None:
    shapes = {a.shape for a in arrays}
    if len(shapes) != 1:
        raise ValidationError(f"shape mismatch: {sorted(shapes)}")


def _bce(pred: np.ndarray, target: np.ndarray) -> np.ndarray:
    p = np.clip(pred, BCE_EPS, 1.0 - BCE_EPS)
    return -(target * np.log(p) + (1.0 - target) * np.log1p(-p))


def masked_bce(pred, target, mask) -> float:
    """Mean BCE over entries whose class is valid in ``mask``; 0 for an empty mask.

    ``mask`` is per class (C,) or per entry (same shape as ``pred``).
    """
    pred, target = np.asarray(pred, dtype=np.float64), np.asarray(target, dtype=np.float64)
    _same_shape(pred, target)
    mask = np.broadcast_to(np.asarray(mask, dtype=bool), pred.shape)
    if not mask.any():
        return 0.0
    return float(_bce(pred, target)[mask].mean())


def pseudo_bce(pred, pseudo_targets) -> float:
    pred, pseudo_targets = np.asarray(pred, dtype=np.float64), np.asarray(pseudo_targets, dtype=np.float64)
    _same_shape(pred, pseudo_targets)
    return float(_bce(pred, pseudo_targets).mean())


def _mse(a: np.ndarray, b: np.ndarray) -> float:
    _same_shape(a, b)
    return float(np.mean((a - b) ** 2))


def mean_teacher_mse(student: PredictionPair, teacher: PredictionPair) -> float:
    """Consistency between student and (constant) teacher; strong and weak weigh equally."""
    return 0.5 * (_mse(student.strong, teacher.strong) + _mse(student.weak, teacher.weak))


def interpolation_consistency(
    student_on_mix: PredictionPair, teacher_a: PredictionPair, teacher_b: PredictionPair, lam: float
) -> float:
    if not 0.0 <= lam <= 1.0:
        raise ValidationError("mixing weight must lie in [0, 1]")
    target = PredictionPair(
        lam * teacher_a.strong + (1 - lam) * teacher_b.strong,
        lam * teacher_a.weak + (1 - lam) * teacher_b.weak,
    )
    return mean_teacher_mse(student_on_mix, target)


@dataclass
class LossBreakdown:
    total: float
    terms: dict[str, dict[str, float]] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    iteration: int = 1
    stage: int = 1

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def pseudo_loss_active(iteration: int, stage: int) -> bool:
    return (iteration, stage) == (2, 1)


def total_loss(
    components: Mapping[str, float], weights: LossWeights, stage: int, iteration: int
) -> LossBreakdown:
    """Weighted sum of the six loss terms.

    The pseudo-label term only counts in iteration 2, stage 1; elsewhere its
    weight is forced to zero and a warning is recorded if one was requested.
    """
    if stage not in (1, 2) or iteration not in (1, 2):
        raise ValidationError("iteration and stage must be 1 or 2")
    unknown = set(components) - set(COMPONENTS)
    if unknown:
        raise ValidationError(f"unknown loss components {sorted(unknown)}")
    out = LossBreakdown(total=0.0, iteration=iteration, stage=stage)
    total = 0.0
    for name in COMPONENTS:
        w = weights.weight(name)
        if name == "pseudo" and not pseudo_loss_active(iteration, stage):
            if w > 0:
                out.warnings.append(
                    f"pseudo-label loss requested with weight {w} at I{iteration}.S{stage}; excluded"
                )
            continue
        value = float(components.get(name, 0.0))
        out.terms[name] = {"value": value, "weight": w, "weighted": w * value}
        total += w * value
    out.total = total
    return out


def ema_update(teacher_params, student_params, m: float = EMA_DECAY) -> np.ndarray:
    teacher, student = np.asarray(teacher_params, dtype=np.float64), np.asarray(student_params, dtype=np.float64)
    if teacher.shape != student.shape:
        raise ValidationError("teacher and student parameter vectors differ in length")
    if not 0.0 <= m <= 1.0:
        raise ValidationError("EMA decay must lie in [0, 1]")
    return m * teacher + (1.0 - m) * student
