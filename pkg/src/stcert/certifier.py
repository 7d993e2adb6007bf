"""Second-thought certification: re-classify a grounded ROI to confirm or
reject an original prediction.

Flow per image: original prediction -> prompt from its lemma -> grounded
detections (super-class fallback prompt if none) -> one secondary input per
detection (masked full frame or context-expanded crop) -> second
predictions -> Certified iff the original class appears among them.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

from .backends import (
    ClassifierBackend,
    Detection,
    Prediction,
    SegmenterBackend,
    DEFAULT_BOX_THRESHOLD,
    DEFAULT_TEXT_THRESHOLD,
)
from .imageops import BBox, BLACK, apply_mask, as_image, crop_resize, expand_box
from .taxonomy import ErrorKind, Taxonomy

__all__ = [
    "Outcome",
    "EvalCategory",
    "CertConfig",
    "CertifiedPrediction",
    "certify",
    "evaluate_trial",
]


class Outcome(str, Enum):
    CERTIFIED = "Certified"
    REJECTED = "Rejected"
    NO_BOX = "NoBox"


class EvalCategory(str, Enum):
    CERT_CORR = "CertCorr"
    INTRA_ERROR = "IntraError"
    INTER_ERROR = "InterError"
    MISS = "Miss"
    TRUE_REJECT = "TrueReject"
    NO_BOX = "NoBox"


@dataclass(frozen=True)
class CertConfig:
    """All pipeline knobs for one certification run."""

    mode: str = "cropped"                  # "masked" or "cropped"
    context_level: int = 0                 # cropped mode only
    context_step: float = 0.25             # box scale = 1 + step * level
    target_size: int = 224
    blank: tuple[int, int, int] = BLACK    # masked-mode fill color
    box_threshold: float = DEFAULT_BOX_THRESHOLD
    text_threshold: float = DEFAULT_TEXT_THRESHOLD
    superclass_fallback: bool = True
    dataset: str = "mixed_10"

    def __post_init__(self):
        if self.mode not in ("masked", "cropped"):
            raise ValueError(f"mode must be 'masked' or 'cropped', got {self.mode!r}")
        if not 0 <= self.context_level <= 5:
            raise ValueError(f"context_level must be in 0..5, got {self.context_level}")
        for name in ("box_threshold", "text_threshold"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0,1], got {v}")
        if self.target_size < 1:
            raise ValueError(f"target_size must be >= 1, got {self.target_size}")

    def with_level(self, level: int) -> "CertConfig":
        return replace(self, mode="cropped", context_level=level)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "context_level": self.context_level,
            "context_step": self.context_step,
            "target_size": self.target_size,
            "blank": list(self.blank),
            "box_threshold": self.box_threshold,
            "text_threshold": self.text_threshold,
            "superclass_fallback": self.superclass_fallback,
            "dataset": self.dataset,
        }


@dataclass
class CertifiedPrediction:
    original: Prediction
    outcome: Outcome
    prompt_used: str
    fallback_used: bool
    detections: list[Detection] = field(default_factory=list)
    second_predictions: list[Prediction] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "original": {
                "class_id": self.original.class_id,
                "confidence": self.original.confidence,
            },
            "outcome": self.outcome.value,
            "prompt_used": self.prompt_used,
            "fallback_used": self.fallback_used,
            "detections": [
                {"box": d.box.to_list(), "score": d.score} for d in self.detections
            ],
            "second_predictions": [
                {"class_id": p.class_id, "confidence": p.confidence}
                for p in self.second_predictions
            ],
        }


def _secondary_input(image, detection: Detection, config: CertConfig):
    h, w = image.shape[:2]
    if config.mode == "masked":
        # Background removed, full frame kept: the ROI stays where it was.
        masked = apply_mask(image, detection.mask, config.blank)
        return crop_resize(masked, BBox(0, 0, w, h), config.target_size)
    box = expand_box(detection.box, config.context_level, w, h, config.context_step)
    return crop_resize(image, box, config.target_size)


def certify(image, first: ClassifierBackend, second: ClassifierBackend,
            segmenter: SegmenterBackend, taxonomy: Taxonomy,
            config: CertConfig) -> CertifiedPrediction:
    """Run the full certification procedure on one image.

    `first` makes the original prediction, `second` the second-thought
    predictions; pass the same backend twice for single-classifier runs.
    Backend failures propagate as BackendError so callers can record the
    trial as an error instead of fabricating a verdict.
    """
    image = as_image(image)
    original = first.classify(image)

    prompt = taxonomy.prompt_for(original.class_id)
    fallback_used = False
    detections = segmenter.ground(
        image, prompt, config.box_threshold, config.text_threshold)
    if not detections and config.superclass_fallback:
        super_name = taxonomy.superclass_of(original.class_id, config.dataset)
        if super_name is not None:
            fallback_used = True
            prompt = super_name.lower()
            detections = segmenter.ground(
                image, prompt, config.box_threshold, config.text_threshold)
    if not detections:
        return CertifiedPrediction(original, Outcome.NO_BOX, prompt, fallback_used)

    second_predictions = [
        second.classify(_secondary_input(image, det, config)) for det in detections
    ]
    certified = original.class_id in {p.class_id for p in second_predictions}
    outcome = Outcome.CERTIFIED if certified else Outcome.REJECTED
    return CertifiedPrediction(
        original, outcome, prompt, fallback_used, detections, second_predictions)


def evaluate_trial(cp: CertifiedPrediction, truth: int, taxonomy: Taxonomy,
                   dataset: str) -> EvalCategory:
    """Map one certified prediction plus ground truth to the six-way category."""
    if cp.outcome is Outcome.NO_BOX:
        return EvalCategory.NO_BOX
    if cp.outcome is Outcome.CERTIFIED:
        kind = taxonomy.error_kind(cp.original.class_id, truth, dataset)
        if kind is ErrorKind.CORRECT:
            return EvalCategory.CERT_CORR
        if kind is ErrorKind.INTRA:
            return EvalCategory.INTRA_ERROR
        return EvalCategory.INTER_ERROR
    if cp.original.class_id == truth:
        return EvalCategory.MISS
    return EvalCategory.TRUE_REJECT
