"""Reference-free factuality scoring for open-vocabulary image captions.

The core metric scores a caption in three moves: parse the caption into
entity phrases, ground each phrase against the image with a detector and a
segmenter, and compare the grounded set with a reference entity set in
embedding space. Precision asks how much of the caption is visually
supported; recall asks how much of the scene the caption covers; neither
needs a fixed object list.

Around the metric sit matching-based baselines (closed-vocabulary
hallucination rates, assignment-based caption scores), a streaming dataset
filtering pipeline with resumable caching, and an agreement protocol for
checking any of these against human judgments.
"""

from .errors import (
    BackendError,
    ConfigError,
    DataError,
    FailureCeilingExceeded,
    FixtureMissError,
    NormalizationError,
    OvfactError,
    ProtocolError,
    TransportError,
    UndefinedRateError,
)
from .grounding import GroundingConfig, GroundingResult, ground_entities
from .model import (
    CaptionSample,
    Entity,
    EntitySet,
    FactualityScore,
    ImageRef,
    ReferenceMode,
    SimilarityMatrix,
    Vocabulary,
    build_entity_set,
    build_vocabulary,
    normalize_entity,
)
from .scoring import (
    ReferenceSetSpec,
    ScoredCaption,
    ovfact_f1,
    ovfact_precision,
    ovfact_recall,
    score_caption,
    score_caption_detailed,
    similarity_matrix,
)

__version__ = "0.1.0"

__all__ = [
    "BackendError",
    "CaptionSample",
    "ConfigError",
    "DataError",
    "Entity",
    "EntitySet",
    "FactualityScore",
    "FailureCeilingExceeded",
    "FixtureMissError",
    "GroundingConfig",
    "GroundingResult",
    "ImageRef",
    "NormalizationError",
    "OvfactError",
    "ProtocolError",
    "ReferenceMode",
    "ReferenceSetSpec",
    "ScoredCaption",
    "SimilarityMatrix",
    "TransportError",
    "UndefinedRateError",
    "Vocabulary",
    "build_entity_set",
    "build_vocabulary",
    "ground_entities",
    "normalize_entity",
    "ovfact_f1",
    "ovfact_precision",
    "ovfact_recall",
    "score_caption",
    "score_caption_detailed",
    "similarity_matrix",
    "__version__",
]
