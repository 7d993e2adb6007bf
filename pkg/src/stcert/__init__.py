"""Second-thought certification of image classifier predictions."""

__version__ = "0.1.0"

from .backends import (  # noqa: F401
    BackendError,
    ClassifierBackend,
    Detection,
    FakeWorldSpec,
    Prediction,
    SegmenterBackend,
    fake_classifier,
    fake_segmenter,
    load_fake_world,
    process_backend,
)
from .certifier import (  # noqa: F401
    CertConfig,
    CertifiedPrediction,
    EvalCategory,
    Outcome,
    certify,
    evaluate_trial,
)
from .evaluation import (  # noqa: F401
    AdvReport,
    MetricsReport,
    TrialRecord,
    adversarial_summary,
    cross_matrix,
    cw_sweep,
    run_dataset,
    similar_pairs,
    summarize,
)
from .imageops import BBox, apply_mask, crop_resize, expand_box, tight_bbox  # noqa: F401
from .taxonomy import (  # noqa: F401
    ClassEntry,
    DatasetSpec,
    ErrorKind,
    Taxonomy,
    TaxonomyError,
    default_taxonomy_path,
    load_taxonomy,
    save_taxonomy,
)
