from .artifacts import file_hash, report_hash, summary_rows, trace_rows, write_csv, write_json_model, write_reports
from .experiment import build_experiment_graph, build_method_graph, graph, run_experiment, run_seed
from .pipeline import (
    TYPE2_RUN_NAME,
    behavioral_unlearn,
    draw_forbidden_pairs,
    evaluate_model,
    prepare_seed,
    reference_target,
    report_name,
    seed_dir,
    train_retrained,
    train_vanilla,
    unlearn_method,
)
from .search import lr_guideline_search, search_learning_rate
from .sweep import inversions, median_trend, point_run, sweep

__all__ = [
    "TYPE2_RUN_NAME",
    "behavioral_unlearn",
    "build_experiment_graph",
    "build_method_graph",
    "draw_forbidden_pairs",
    "evaluate_model",
    "file_hash",
    "graph",
    "inversions",
    "lr_guideline_search",
    "median_trend",
    "point_run",
    "prepare_seed",
    "reference_target",
    "report_hash",
    "report_name",
    "run_experiment",
    "run_seed",
    "search_learning_rate",
    "seed_dir",
    "summary_rows",
    "sweep",
    "trace_rows",
    "train_retrained",
    "train_vanilla",
    "unlearn_method",
    "write_csv",
    "write_json_model",
    "write_reports",
]
