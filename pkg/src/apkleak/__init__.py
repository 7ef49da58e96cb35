"""apkleak: find, rank, detect, validate and report hard-coded app credentials."""

from .detect import (
    DetectedCredential,
    Factor,
    FactorHit,
    ServicePattern,
    counterpart_search,
    detect_app,
    find_multi_factor_seeds,
    load_service_patterns,
    match_single_factor,
    pair_credentials,
    redact,
)
from .dexpool import DexStringPool, parse_dex_string_pool
from .extract import (
    KeywordConfig,
    SecretCandidate,
    extract_candidates,
    flag_numeric_only,
)
from .ingest import AppArtifact, ScanUnit, enumerate_scan_units, open_app
from .ranking import (
    RankScore,
    SampleSpec,
    diversity_score,
    load_wordlist,
    margin_of_error,
    rank,
    weighted_sample,
    word_score,
)
from .report import (
    DedupKey,
    LifespanRecord,
    SummaryTable,
    build_report,
    dedup_and_overlap,
    lifespan,
    multi_secret_files,
    per_app_counts,
    shared_credentials,
)
from .validate import (
    FixtureTransport,
    TransportRequest,
    TransportResponse,
    ValidationOutcome,
    ValidationPolicy,
    load_endpoint_templates,
    run_validation_batch,
    validate,
    validate_oauth_pair,
)

__version__ = "0.1.0"

__all__ = [
    "AppArtifact",
    "DedupKey",
    "DetectedCredential",
    "DexStringPool",
    "Factor",
    "FactorHit",
    "FixtureTransport",
    "KeywordConfig",
    "LifespanRecord",
    "RankScore",
    "SampleSpec",
    "ScanUnit",
    "SecretCandidate",
    "ServicePattern",
    "SummaryTable",
    "TransportRequest",
    "TransportResponse",
    "ValidationOutcome",
    "ValidationPolicy",
    "build_report",
    "counterpart_search",
    "dedup_and_overlap",
    "detect_app",
    "diversity_score",
    "enumerate_scan_units",
    "extract_candidates",
    "find_multi_factor_seeds",
    "flag_numeric_only",
    "lifespan",
    "load_endpoint_templates",
    "load_service_patterns",
    "load_wordlist",
    "margin_of_error",
    "match_single_factor",
    "multi_secret_files",
    "open_app",
    "pair_credentials",
    "parse_dex_string_pool",
    "per_app_counts",
    "rank",
    "redact",
    "run_validation_batch",
    "shared_credentials",
    "validate",
    "validate_oauth_pair",
    "weighted_sample",
    "word_score",
]
