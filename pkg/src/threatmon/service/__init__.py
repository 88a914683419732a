"""Pipeline orchestration, persistence, HTTP API and CLI."""

from .pipeline import (  # noqa: F401
    LabelRecord,
    LabelStore,
    ModelBundle,
    Pipeline,
    PipelineConfig,
    PostRecord,
    ReductionReport,
    RunResult,
    evaluate_clustering,
    reduction_report_for,
    run_stream,
    train,
)
