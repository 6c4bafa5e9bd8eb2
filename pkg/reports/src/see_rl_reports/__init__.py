from .figures import learning_curves, normalized_profile, profile_table
from .records import (ReportError, RunRecord, final_window_mean,
                      group_statistics, load_run, load_runs, method_label,
                      normalize_scores)

__all__ = [
    "ReportError", "RunRecord", "final_window_mean", "group_statistics",
    "learning_curves", "load_run", "load_runs", "method_label",
    "normalize_scores", "normalized_profile", "profile_table",
]
