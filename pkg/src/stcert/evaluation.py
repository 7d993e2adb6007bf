"""Dataset runners and metric aggregation.

Counts are kept as exact integers; rates are derived Fractions so that the
partition invariants (rates sum to 1, consistency = certified mass) hold
without floating-point slack.
"""

from __future__ import annotations

import concurrent.futures
import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .backends import (
    BackendError,
    ClassifierBackend,
    Prediction,
    SegmenterBackend,
)
from .certifier import CertConfig, EvalCategory, certify, evaluate_trial
from .imageops import png_decode
from .taxonomy import Taxonomy

__all__ = [
    "TrialRecord",
    "MetricsReport",
    "AdvReport",
    "SweepPoint",
    "run_dataset",
    "summarize",
    "adversarial_summary",
    "cw_sweep",
    "cross_matrix",
    "similar_pairs",
    "per_class_correct",
    "write_trial_log",
    "read_trial_log",
    "CATEGORIES",
    "ERROR_CATEGORY",
]

CATEGORIES = [c.value for c in EvalCategory]
ERROR_CATEGORY = "BackendError"

# Certified trials, regardless of correctness: the consistency-rate numerator.
_CERTIFIED_CATEGORIES = (
    EvalCategory.CERT_CORR.value,
    EvalCategory.INTRA_ERROR.value,
    EvalCategory.INTER_ERROR.value,
)


@dataclass
class TrialRecord:
    """One evaluated image: verdict, category and full provenance."""

    image_id: str
    dataset: str
    truth: int | None
    original: Prediction | None
    outcome: str | None                 # Outcome value, None on backend error
    category: str                       # EvalCategory value, outcome value for
                                        # adversarial runs, or "BackendError"
    prompt_used: str = ""
    fallback_used: bool = False
    second_predictions: list[Prediction] = field(default_factory=list)
    out_of_dataset: bool = False
    adversarial: bool = False
    error: str | None = None
    config: dict = field(default_factory=dict)
    first_backend: str = ""
    second_backend: str = ""

    def to_dict(self) -> dict:
        pred = None
        if self.original is not None:
            pred = {"class_id": self.original.class_id,
                    "confidence": self.original.confidence}
        return {
            "image_id": self.image_id,
            "dataset": self.dataset,
            "truth": self.truth,
            "original": pred,
            "outcome": self.outcome,
            "category": self.category,
            "prompt_used": self.prompt_used,
            "fallback_used": self.fallback_used,
            "second_predictions": [
                {"class_id": p.class_id, "confidence": p.confidence}
                for p in self.second_predictions
            ],
            "out_of_dataset": self.out_of_dataset,
            "adversarial": self.adversarial,
            "error": self.error,
            "config": self.config,
            "first_backend": self.first_backend,
            "second_backend": self.second_backend,
        }

    @staticmethod
    def from_dict(doc: dict) -> "TrialRecord":
        original = None
        if doc.get("original") is not None:
            original = Prediction(doc["original"]["class_id"],
                                  doc["original"]["confidence"])
        return TrialRecord(
            image_id=doc["image_id"],
            dataset=doc["dataset"],
            truth=doc.get("truth"),
            original=original,
            outcome=doc.get("outcome"),
            category=doc["category"],
            prompt_used=doc.get("prompt_used", ""),
            fallback_used=doc.get("fallback_used", False),
            second_predictions=[
                Prediction(p["class_id"], p["confidence"])
                for p in doc.get("second_predictions", [])
            ],
            out_of_dataset=doc.get("out_of_dataset", False),
            adversarial=doc.get("adversarial", False),
            error=doc.get("error"),
            config=doc.get("config", {}),
            first_backend=doc.get("first_backend", ""),
            second_backend=doc.get("second_backend", ""),
        )


@dataclass
class MetricsReport:
    """Six-way rate breakdown over one trial log.

    The denominator is every evaluated (non-error) trial including NoBox
    ones; backend-error trials are counted separately and excluded.
    """

    dataset: str
    counts: dict[str, int]
    error_count: int = 0
    first_backend: str = ""
    second_backend: str = ""
    mode: str = ""
    context_level: int | None = None

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def rate(self, category: str) -> Fraction:
        if self.total == 0:
            return Fraction(0)
        return Fraction(self.counts.get(category, 0), self.total)

    @property
    def consistency_rate(self) -> Fraction:
        return sum((self.rate(c) for c in _CERTIFIED_CATEGORIES), Fraction(0))

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "total": self.total,
            "counts": {c: self.counts.get(c, 0) for c in CATEGORIES},
            "rates": {c: float(self.rate(c)) for c in CATEGORIES},
            "consistency_rate": float(self.consistency_rate),
            "error_count": self.error_count,
            "first_backend": self.first_backend,
            "second_backend": self.second_backend,
            "mode": self.mode,
            "context_level": self.context_level,
            # Assumption, kept visible in every report: NoBox trials stay in
            # the denominator, consistency counts certified trials only.
            "denominator": "all evaluated trials incl. NoBox",
        }


@dataclass
class AdvReport:
    """Outcome rates on adversarial inputs; no ground-truth bookkeeping."""

    rejected: int
    certified: int
    nobox: int
    error_count: int = 0
    first_backend: str = ""
    second_backend: str = ""

    @property
    def total(self) -> int:
        return self.rejected + self.certified + self.nobox

    def _rate(self, n: int) -> Fraction:
        return Fraction(n, self.total) if self.total else Fraction(0)

    @property
    def detect_rate(self) -> Fraction:
        return self._rate(self.rejected)

    @property
    def certify_rate(self) -> Fraction:
        return self._rate(self.certified)

    @property
    def nobox_rate(self) -> Fraction:
        return self._rate(self.nobox)

    @property
    def overall_success(self) -> Fraction:
        return self.detect_rate + self.nobox_rate

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "counts": {
                "Rejected": self.rejected,
                "Certified": self.certified,
                "NoBox": self.nobox,
            },
            "detect_rate": float(self.detect_rate),
            "certify_rate": float(self.certify_rate),
            "nobox_rate": float(self.nobox_rate),
            "overall_success": float(self.overall_success),
            "error_count": self.error_count,
            "first_backend": self.first_backend,
            "second_backend": self.second_backend,
        }


# ---------------------------------------------------------------------------
# Runners
# ---------------------------------------------------------------------------

def _list_images(root: Path) -> list[tuple[str, str, Path]]:
    """(image_id, synset, path) triples in deterministic sorted order."""
    out = []
    for class_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        for img in sorted(p for p in class_dir.iterdir() if p.is_file()):
            out.append((f"{class_dir.name}/{img.name}", class_dir.name, img))
    return out


def _backend_name(backend) -> str:
    try:
        return backend.info().get("name", backend.__class__.__name__)
    except Exception:
        return backend.__class__.__name__


def _run_one(image_id: str, synset: str, path: Path, dataset: str,
             first, second, segmenter, taxonomy, config: CertConfig,
             adversarial: bool, names: tuple[str, str]) -> TrialRecord:
    base = dict(
        image_id=image_id,
        dataset=dataset,
        adversarial=adversarial,
        config=config.to_dict(),
        first_backend=names[0],
        second_backend=names[1],
    )
    try:
        truth = taxonomy.by_synset(synset).class_id
    except Exception:
        truth = None
    if truth is None and not adversarial:
        return TrialRecord(truth=None, original=None, outcome=None,
                           category=ERROR_CATEGORY,
                           error=f"folder {synset!r} not in taxonomy", **base)
    try:
        image = png_decode(path.read_bytes())
        cp = certify(image, first, second, segmenter, taxonomy, config)
    except (BackendError, OSError, ValueError) as e:
        return TrialRecord(truth=truth, original=None, outcome=None,
                           category=ERROR_CATEGORY, error=str(e), **base)
    if adversarial:
        # Folder names carry provenance only; outcomes are the category.
        category = cp.outcome.value
        out_of_dataset = False
    else:
        category = evaluate_trial(cp, truth, taxonomy, dataset).value
        out_of_dataset = not taxonomy.resolves(cp.original.class_id, dataset)
    return TrialRecord(
        truth=truth,
        original=cp.original,
        outcome=cp.outcome.value,
        category=category,
        prompt_used=cp.prompt_used,
        fallback_used=cp.fallback_used,
        second_predictions=cp.second_predictions,
        out_of_dataset=out_of_dataset,
        **base,
    )


def run_dataset(image_root, dataset: str, first: ClassifierBackend,
                second: ClassifierBackend, segmenter: SegmenterBackend,
                taxonomy: Taxonomy, config: CertConfig, seed: int = 0,
                adversarial: bool = False, workers: int = 1) -> list[TrialRecord]:
    """Certify every image under the class-folder tree; one record each.

    Iteration order is sorted paths and the returned log is sorted by
    image_id, so reruns with the same seed are byte-identical. The seed is
    recorded for stochastic backends; the built-in backends ignore it.
    """
    del seed  # recorded by callers in the manifest; fakes are deterministic
    root = Path(image_root)
    items = _list_images(root) if root.is_dir() else []
    names = (_backend_name(first), _backend_name(second))

    if workers > 1 and all(
        b.info().get("thread_safe", False) for b in (first, second, segmenter)
    ):
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(
                lambda item: _run_one(*item, dataset, first, second, segmenter,
                                      taxonomy, config, adversarial, names),
                items,
            ))
    else:
        records = [
            _run_one(*item, dataset, first, second, segmenter, taxonomy,
                     config, adversarial, names)
            for item in items
        ]
    records.sort(key=lambda r: r.image_id)
    return records


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------

def summarize(records: list[TrialRecord], dataset: str) -> MetricsReport:
    """Exact integer counts per six-way category over one trial log."""
    counts = {c: 0 for c in CATEGORIES}
    errors = 0
    first = second = ""
    mode, level = "", None
    for r in records:
        if r.dataset != dataset:
            raise ValueError(
                f"record {r.image_id} evaluated on {r.dataset!r}, not {dataset!r}")
        if r.adversarial:
            raise ValueError(
                f"record {r.image_id} is adversarial; use adversarial_summary")
        if r.category == ERROR_CATEGORY:
            errors += 1
            continue
        if r.category not in counts:
            raise ValueError(f"record {r.image_id}: unknown category {r.category!r}")
        counts[r.category] += 1
        first, second = r.first_backend, r.second_backend
        mode = r.config.get("mode", mode)
        level = r.config.get("context_level", level)
    return MetricsReport(dataset=dataset, counts=counts, error_count=errors,
                         first_backend=first, second_backend=second,
                         mode=mode, context_level=level)


def adversarial_summary(records: list[TrialRecord]) -> AdvReport:
    """Rates over {Rejected, Certified, NoBox}; overall = Rejected + NoBox."""
    tallies = {"Rejected": 0, "Certified": 0, "NoBox": 0}
    errors = 0
    first = second = ""
    for r in records:
        if r.category == ERROR_CATEGORY:
            errors += 1
            continue
        if not r.adversarial:
            raise ValueError(
                f"record {r.image_id} carries a ground-truth category "
                f"{r.category!r}; adversarial_summary expects outcome-only logs")
        tallies[r.category] += 1
        first, second = r.first_backend, r.second_backend
    return AdvReport(rejected=tallies["Rejected"], certified=tallies["Certified"],
                     nobox=tallies["NoBox"], error_count=errors,
                     first_backend=first, second_backend=second)


def per_class_correct(records: list[TrialRecord]) -> dict[int, tuple[int, int]]:
    """truth class -> (CertCorr count, evaluated count)."""
    out: dict[int, list[int]] = {}
    for r in records:
        if r.category == ERROR_CATEGORY or r.truth is None:
            continue
        num, den = out.setdefault(r.truth, [0, 0])
        out[r.truth][1] = den + 1
        if r.category == EvalCategory.CERT_CORR.value:
            out[r.truth][0] = num + 1
    return {cid: (n, d) for cid, (n, d) in sorted(out.items())}


@dataclass
class SweepPoint:
    label: str                       # "mask" or "cw0".."cw5"
    report: MetricsReport
    per_class: dict[int, tuple[int, int]]
    records: list[TrialRecord] = field(default_factory=list)


def cw_sweep(image_root, dataset: str, first, second, segmenter,
             taxonomy: Taxonomy, base_config: CertConfig,
             levels: list[int], seed: int = 0,
             workers: int = 1) -> list[SweepPoint]:
    """Masked-mode reference point plus one cropped-mode run per level."""
    from dataclasses import replace

    points = []
    masked_cfg = replace(base_config, mode="masked")
    records = run_dataset(image_root, dataset, first, second, segmenter,
                          taxonomy, masked_cfg, seed=seed, workers=workers)
    points.append(SweepPoint("mask", summarize(records, dataset),
                             per_class_correct(records), records))
    for level in levels:
        cfg = base_config.with_level(level)
        records = run_dataset(image_root, dataset, first, second, segmenter,
                              taxonomy, cfg, seed=seed, workers=workers)
        points.append(SweepPoint(f"cw{level}", summarize(records, dataset),
                                 per_class_correct(records), records))
    return points


def per_class_delta(points: list[SweepPoint]) -> dict[str, dict[int, float]]:
    """Per-class CertCorr accuracy change of each sweep point vs the masked
    reference (first point)."""
    if not points:
        return {}
    ref = {cid: (Fraction(n, d) if d else Fraction(0))
           for cid, (n, d) in points[0].per_class.items()}
    deltas = {}
    for point in points[1:]:
        row = {}
        for cid, (n, d) in point.per_class.items():
            acc = Fraction(n, d) if d else Fraction(0)
            row[cid] = float(acc - ref.get(cid, Fraction(0)))
        deltas[point.label] = row
    return deltas


def cross_matrix(image_root, dataset: str, classifiers: list, segmenter,
                 taxonomy: Taxonomy, config: CertConfig,
                 adversarial: bool = False, seed: int = 0,
                 workers: int = 1, record_sink: list | None = None):
    """(i, j) entry: classifiers[i] makes the original prediction and
    classifiers[j] the second thought. Returns MetricsReport or AdvReport
    entries depending on the adversarial flag. When record_sink is given it
    receives one (i, j, records) triple per pair."""
    if not classifiers:
        raise ValueError("need at least one classifier")
    matrix = []
    for i, first in enumerate(classifiers):
        row = []
        for j, second in enumerate(classifiers):
            records = run_dataset(image_root, dataset, first, second, segmenter,
                                  taxonomy, config, seed=seed,
                                  adversarial=adversarial, workers=workers)
            if record_sink is not None:
                record_sink.append((i, j, records))
            if adversarial:
                row.append(adversarial_summary(records))
            else:
                row.append(summarize(records, dataset))
        matrix.append(row)
    return matrix


def similar_pairs(records: list[TrialRecord], taxonomy: Taxonomy,
                  top_n: int) -> list[tuple[str, str, float]]:
    """Most semantically similar (truth, certified prediction) error pairs,
    by taxonomy path similarity, descending; ties broken lexicographically."""
    pairs = set()
    for r in records:
        if r.category in (EvalCategory.INTRA_ERROR.value,
                          EvalCategory.INTER_ERROR.value):
            pairs.add((r.truth, r.original.class_id))
    scored = []
    for truth, pred in pairs:
        scored.append((
            taxonomy.by_id(truth).prompt,
            taxonomy.by_id(pred).prompt,
            taxonomy.path_similarity(truth, pred),
        ))
    scored.sort(key=lambda t: (-t[2], t[0], t[1]))
    return scored[: max(top_n, 0)]


# ---------------------------------------------------------------------------
# Trial log I/O (JSON lines, deterministic byte layout)
# ---------------------------------------------------------------------------

def write_trial_log(records: list[TrialRecord], path) -> None:
    lines = [
        json.dumps(r.to_dict(), sort_keys=True, separators=(",", ":"))
        for r in sorted(records, key=lambda r: r.image_id)
    ]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""),
                          encoding="utf-8")


def read_trial_log(path) -> list[TrialRecord]:
    records = []
    for i, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines()):
        if not line.strip():
            continue
        try:
            records.append(TrialRecord.from_dict(json.loads(line)))
        except (json.JSONDecodeError, KeyError) as e:
            raise ValueError(f"{path}:{i + 1}: malformed trial record: {e}") from e
    return records
