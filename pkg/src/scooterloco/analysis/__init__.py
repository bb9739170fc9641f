"""Statistics and questionnaire scoring for study data."""
from .questionnaires import Kind, ResponseError, score_questionnaire
from .reports import analyze, format_table, load_log_dir, load_responses, summarize_trials
from .stats import (
    DegenerateSample,
    InsufficientData,
    PairedSample,
    TestKind,
    TestReport,
    cohen_d_from_t,
    paired_t,
    select_test,
    shapiro_wilk,
    wilcoxon_signed_rank,
)

__all__ = [
    "DegenerateSample",
    "InsufficientData",
    "Kind",
    "PairedSample",
    "ResponseError",
    "TestKind",
    "TestReport",
    "analyze",
    "cohen_d_from_t",
    "format_table",
    "load_log_dir",
    "load_responses",
    "paired_t",
    "score_questionnaire",
    "select_test",
    "shapiro_wilk",
    "summarize_trials",
    "wilcoxon_signed_rank",
]
