"""Regularization grids, hold-out splits and λ selection."""
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import numeric, rls
from .errors import (DegenerateLeverageError, DegenerateSpectrumError,
                     ParameterError, ShapeError, StratificationError)
from .evaluation import decode_argmax
from .kernels import FeatureMap, KernelSpec, apply_feature_map
from .numeric import as_mat

DEFAULT_N_LAMBDAS = 400
GRID_SPAN = 1e-8


@dataclass(frozen=True)
class Split:
    train_idx: np.ndarray
    val_idx: np.ndarray
    seed: int
    fraction: float
    stratified: bool = False


@dataclass
class ParamSelResult:
    lambdas: np.ndarray
    val_scores: np.ndarray  # NaN marks a λ that could not be scored
    best_lambda: float
    method: str
    best_lambda_per_output: Optional[np.ndarray] = None
    skipped: list = field(default_factory=list)

    def to_dict(self):
        out = {
            "lambdas": self.lambdas,
            "val_scores": self.val_scores,
            "best_lambda": self.best_lambda,
            "method": self.method,
            "skipped": list(self.skipped),
        }
        if self.best_lambda_per_output is not None:
            out["best_lambda_per_output"] = self.best_lambda_per_output
        return out


@dataclass(frozen=True)
class SolverConfig:
    """How ``select_holdout`` builds its model.

    mode is ``primal`` (linear model on raw inputs), ``dual`` (kernel given
    by ``kernel``) or ``features`` (linear model on ``feature_map(x)``).
    """
    mode: str = "primal"
    kernel: Optional[KernelSpec] = None
    feature_map: Optional[FeatureMap] = None
    n_lambdas: int = DEFAULT_N_LAMBDAS
    lambdas: Optional[np.ndarray] = None
    per_output: bool = False

    def __post_init__(self):
        if self.mode not in ("primal", "dual", "features"):
            raise ParameterError(f"unknown solver mode {self.mode!r}")
        if self.mode == "dual" and self.kernel is None:
            raise ParameterError("dual mode needs a kernel")
        if self.mode == "features" and self.feature_map is None:
            raise ParameterError("features mode needs a feature map")


def lambda_grid(eig_max, n, n_lambdas=DEFAULT_N_LAMBDAS):
    """Geometric grid from 1e-8·eig_max/n up to eig_max/n, ascending."""
    if not np.isfinite(eig_max) or eig_max <= 0:
        raise DegenerateSpectrumError(
            f"largest eigenvalue must be > 0 to anchor the grid, got {eig_max}")
    if n_lambdas < 1:
        raise ParameterError(f"n_lambdas must be >= 1, got {n_lambdas}")
    hi = eig_max / n
    if n_lambdas == 1:
        return np.array([hi])
    grid = np.exp(np.linspace(math.log(hi * GRID_SPAN), math.log(hi), n_lambdas))
    grid[0] = hi * GRID_SPAN
    grid[-1] = hi
    return grid


def _count(size, fraction):
    # guard against 0.2*50 = 10.000000000000002 style round-up
    return math.ceil(size * fraction - 1e-9)


def holdout_split(n, fraction=0.2, seed=0, labels=None):
    """Random train/validation partition of range(n), optionally stratified.

    Without labels ⌈n·fraction⌉ indices are drawn uniformly for validation.
    With labels each class contributes ⌈count·fraction⌉ validation samples,
    capped so that every class keeps one training sample.
    """
    if n < 2:
        raise ParameterError(f"need n >= 2 to split, got {n}")
    if not 0.0 < fraction < 1.0:
        raise ParameterError(f"fraction must lie in (0, 1), got {fraction}")
    rng = np.random.default_rng(seed)
    if labels is None:
        n_val = _count(n, fraction)
        if n_val >= n:
            raise ParameterError(f"fraction {fraction} leaves no training samples")
        val = rng.permutation(n)[:n_val]
    else:
        labels = np.asarray(labels)
        if labels.shape != (n,):
            raise ShapeError(f"labels must have length {n}")
        classes, counts = np.unique(labels, return_counts=True)
        singletons = classes[counts == 1]
        if singletons.size:
            raise StratificationError(singletons.tolist())
        parts = []
        for cls, cnt in zip(classes, counts):
            members = np.flatnonzero(labels == cls)
            take = min(_count(cnt, fraction), cnt - 1)
            parts.append(members[rng.permutation(cnt)[:take]])
        val = np.concatenate(parts)
    val = np.sort(val)
    mask = np.ones(n, dtype=bool)
    mask[val] = False
    return Split(train_idx=np.flatnonzero(mask), val_idx=val, seed=seed,
                 fraction=fraction, stratified=labels is not None)


def _argmax_last(scores):
    """Index of the best score, ties resolved toward the largest λ."""
    valid = ~np.isnan(scores)
    best = np.max(scores[valid])
    return int(np.flatnonzero(valid & (scores == best))[-1])


def _sign_accuracy(scores, y):
    return np.mean((scores > 0) == (y > 0), axis=0)


def _score_path(path, val_proj, y_val, per_output):
    """Validation accuracy for every λ on the path.

    ``val_proj`` is the validation design (kernel rows or features) already
    multiplied by the path's eigenvectors.
    """
    truth = decode_argmax(y_val)
    acc = np.empty(path.lambdas.size)
    col_acc = np.empty((path.lambdas.size, y_val.shape[1])) if per_output else None
    for j, lam in enumerate(path.lambdas):
        filt = 1.0 / (path.eig.lambdas + path.n * lam)
        scores = val_proj @ (path.qty * filt[:, None])
        acc[j] = np.mean(decode_argmax(scores) == truth)
        if per_output:
            col_acc[j] = _sign_accuracy(scores, y_val)
    return acc, col_acc


def _result(path, acc, col_acc, method):
    best = path.lambdas[_argmax_last(acc)]
    per_output = None
    if col_acc is not None:
        per_output = np.array([path.lambdas[_argmax_last(col_acc[:, t])]
                               for t in range(col_acc.shape[1])])
    return ParamSelResult(lambdas=path.lambdas, val_scores=acc,
                          best_lambda=float(best), method=method,
                          best_lambda_per_output=per_output)


def _grid_path(a, rhs, n, n_lambdas, lambdas):
    eig = numeric.sym_eig(a)
    if lambdas is None:
        lambdas = lambda_grid(eig.lambdas[0], n, n_lambdas)
    lambdas = np.asarray(lambdas, dtype=np.float64).ravel()
    if lambdas.size == 0:
        raise ParameterError("empty lambda grid")
    return rls.path_from_eig(eig, rhs, lambdas, n)


def holdout_dual(k_train, k_val, y_train, y_val, n_lambdas=DEFAULT_N_LAMBDAS,
                 lambdas=None, per_output=False):
    """Hold-out selection from precomputed kernel blocks.

    ``k_train`` is the train×train kernel, ``k_val`` the val×train block.
    """
    k_train = as_mat(k_train, "k_train")
    y_train = as_mat(y_train, "y_train")
    path = _grid_path(k_train, y_train, k_train.shape[0], n_lambdas, lambdas)
    acc, col_acc = _score_path(path, as_mat(k_val, "k_val") @ path.eig.Q,
                               as_mat(y_val, "y_val"), per_output)
    return _result(path, acc, col_acc, "holdout")


def holdout_primal(z_train, z_val, y_train, y_val, n_lambdas=DEFAULT_N_LAMBDAS,
                   lambdas=None, per_output=False):
    z_train = as_mat(z_train, "z_train")
    y_train = as_mat(y_train, "y_train")
    path = _grid_path(numeric.gram(z_train), numeric.cross(z_train, y_train),
                      z_train.shape[0], n_lambdas, lambdas)
    acc, col_acc = _score_path(path, as_mat(z_val, "z_val") @ path.eig.Q,
                               as_mat(y_val, "y_val"), per_output)
    return _result(path, acc, col_acc, "holdout")


def select_holdout(x, y, split, config):
    """Pick λ on the validation part of ``split`` after fitting on the rest.

    Scores are mean multiclass accuracy of the argmax decoding.  The grid is
    anchored to the training-partition spectrum unless ``config.lambdas`` is
    given.
    """
    x = as_mat(x, "x")
    y = as_mat(y, "y")
    if x.shape[0] != y.shape[0]:
        raise ShapeError(f"x has {x.shape[0]} rows, y has {y.shape[0]}")
    tr, va = split.train_idx, split.val_idx
    opts = dict(n_lambdas=config.n_lambdas, lambdas=config.lambdas,
                per_output=config.per_output)
    if config.mode == "dual":
        xt = x[tr]
        return holdout_dual(config.kernel(xt, xt), config.kernel(x[va], xt),
                            y[tr], y[va], **opts)
    z = x if config.mode == "primal" else apply_feature_map(x, config.feature_map)
    return holdout_primal(z[tr], z[va], y[tr], y[va], **opts)


def select_loo(k, y, lambdas=None, n_lambdas=DEFAULT_N_LAMBDAS):
    """Pick λ by closed-form leave-one-out accuracy on the full kernel.

    Without ``lambdas`` the grid is anchored to the kernel spectrum.  A λ
    whose leverages make the closed form undefined is skipped: its score is
    NaN and it is listed in ``skipped``.
    """
    k = as_mat(k, "k")
    y = as_mat(y, "y")
    if lambdas is None:
        path = _grid_path(k, y, k.shape[0], n_lambdas, None)
    else:
        path = rls.build_path(k, y, lambdas)
    truth = decode_argmax(y)
    acc = np.full(path.lambdas.size, np.nan)
    skipped = []
    last_error = None
    for j, lam in enumerate(path.lambdas):
        try:
            res = rls.loo_residuals(path, y, lam)
        except DegenerateLeverageError as exc:
            skipped.append(float(lam))
            last_error = exc
            continue
        acc[j] = np.mean(decode_argmax(y - res) == truth)
    if np.all(np.isnan(acc)):
        raise last_error
    result = _result(path, acc, None, "loo")
    result.skipped = skipped
    return result
