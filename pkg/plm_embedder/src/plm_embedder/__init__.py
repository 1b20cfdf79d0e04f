"""Contextual token-embedding extraction into tokengraph shard files."""

from .contextuality import ContextualityReport, contextuality_check
from .errors import ExtractionError
from .extract import (
    DatasetSample,
    ExtractionJob,
    ExtractionResult,
    extract,
    load_dataset,
    run_model_over_dataset,
)
from .parity import ParityReport, verify_tokenizer_parity
from .shard_io import ManifestData, Record, write_manifest, write_shard

__version__ = "0.1.0"
