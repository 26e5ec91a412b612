"""Python bindings for the vulnllm detection pipeline."""

from ._vulnllm import (
    BackendError,
    ConfusionMatrix,
    DataError,
    Error,
    UsageError,
    VulnRecord,
    arbitrate,
    build_rag_query,
    check_printed_average,
    chunk,
    clean_text,
    confusion,
    embed,
    macro_average,
    metrics,
    paired_t_test,
    parse_verdict,
    read_records,
    render_classification_prompt,
    round2,
    run_cli,
    tokenize,
)

__all__ = [
    "BackendError",
    "ConfusionMatrix",
    "DataError",
    "Error",
    "UsageError",
    "VulnRecord",
    "arbitrate",
    "build_rag_query",
    "check_printed_average",
    "chunk",
    "clean_text",
    "confusion",
    "embed",
    "macro_average",
    "metrics",
    "paired_t_test",
    "parse_verdict",
    "read_records",
    "render_classification_prompt",
    "round2",
    "run_cli",
    "tokenize",
]
