from .anova import AnovaRow, AnovaTable, DegenerateDesign, SSType, anova_two_way, cell_table
from .descriptive import BoxSummary, DescriptiveStats, EmptyInput, box_summary, describe
from .distributions import DomainError, FDist, StudentT, betainc, tail_probability
from .posthoc import PostHocComparison, holm_sidak, holm_sidak_within, sidak_level
from .ttest import InsufficientData, TTestResult, t_test_two_sample

__all__ = [
    "AnovaRow", "AnovaTable", "DegenerateDesign", "SSType", "anova_two_way", "cell_table",
    "BoxSummary", "DescriptiveStats", "EmptyInput", "box_summary", "describe",
    "DomainError", "FDist", "StudentT", "betainc", "tail_probability",
    "PostHocComparison", "holm_sidak", "holm_sidak_within", "sidak_level",
    "InsufficientData", "TTestResult", "t_test_two_sample",
]
