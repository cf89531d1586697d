"""Regularized least squares with closed-form model selection, random
features, task pipelines and out-of-core matrices."""
from . import tasks  # noqa: F401  registers the built-in tasks
from .bigarray import BigArray, MemoryBudget, ba_create, ba_open
from .evaluation import PerfReport, decode_argmax, encode_one_vs_all, performance
from .kernels import (FeatureMap, KernelSpec, apply_feature_map, gaussian_kernel,
                      linear_kernel, sample_feature_map, sigma_from_distances)
from .modelsel import (ParamSelResult, SolverConfig, Split, holdout_split,
                       lambda_grid, select_holdout, select_loo)
from .pipeline import (OptionsStore, Pipeline, TaskDescriptor, load_options,
                       register_task, run_pipeline, save_options)
from .rls import (RegPath, RlsModel, build_path, loo_residuals, predict,
                  solve_at, train_dual, train_primal)

__version__ = "0.1.0"
