"""Regularized least squares: primal and dual solvers, regularization paths
and closed-form leave-one-out residuals.

The regularizer enters every system as ``n·λ`` where ``n`` is the number of
training samples:

    primal   (XᵀX + nλI) W = XᵀY
    dual     (K   + nλI) C = Y

All solvers take an n×T label matrix and solve the T outputs jointly.
"""
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from . import numeric
from .errors import (DegenerateLeverageError, NotPositiveDefiniteError,
                     NumericError, ParameterError, ShapeError, StateError)
from .kernels import FeatureMap, KernelSpec, apply_feature_map
from .numeric import EigPair, as_mat

LEVERAGE_TOL = 1e-12


@dataclass(frozen=True)
class RlsModel:
    mode: str
    lam: Union[float, np.ndarray]
    W: Optional[np.ndarray] = None
    C: Optional[np.ndarray] = None
    kernel: Optional[KernelSpec] = None
    feature_map: Optional[FeatureMap] = None
    train_x: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.mode == "primal":
            if self.W is None or self.C is not None:
                raise StateError("primal model needs W and no C")
        elif self.mode == "dual":
            if self.C is None or self.W is not None:
                raise StateError("dual model needs C and no W")
        else:
            raise ParameterError(f"unknown mode {self.mode!r}")

    @property
    def n_outputs(self):
        return (self.W if self.mode == "primal" else self.C).shape[1]


@dataclass(frozen=True)
class RegPath:
    """One eigendecomposition reused for every λ on a grid.

    ``n`` is the sample count used to scale λ; for a dual path it equals the
    kernel size, for a primal path (built on XᵀX) it must be passed in.
    """
    eig: EigPair
    qty: np.ndarray
    lambdas: np.ndarray
    n: int


def _check_lambda(lam, allow_zero=True):
    lam = np.asarray(lam, dtype=np.float64)
    if not np.all(np.isfinite(lam)) or np.any(lam < 0) or (
            not allow_zero and np.any(lam == 0)):
        raise ParameterError(f"lambda must be finite and "
                             f"{'>= 0' if allow_zero else '> 0'}, got {lam}")
    return lam


def _solve_shifted(a, rhs, n, lam):
    """(a + nλI)⁻¹ rhs, with a per-column λ when ``lam`` is a vector."""
    if lam.ndim == 0:
        return numeric.shifted_solve(a, rhs, n * float(lam))
    if lam.shape != (rhs.shape[1],):
        raise ShapeError(f"need one lambda per output ({rhs.shape[1]}), got {lam.shape}")
    out = np.empty_like(rhs)
    for t in range(rhs.shape[1]):
        out[:, t] = numeric.shifted_solve(a, rhs[:, t:t + 1], n * float(lam[t]))[:, 0]
    return out


def _lam_value(lam):
    return float(lam) if lam.ndim == 0 else lam.copy()


def train_primal(x, y, lam, feature_map=None):
    """W = (XᵀX + nλI)⁻¹XᵀY.

    With ``feature_map`` the model is fit on the mapped inputs, and
    ``predict`` applies the same map to test inputs.
    """
    x = as_mat(x, "x")
    y = as_mat(y, "y")
    if x.shape[0] != y.shape[0]:
        raise ShapeError(f"x has {x.shape[0]} rows, y has {y.shape[0]}")
    lam = _check_lambda(lam)
    z = x if feature_map is None else apply_feature_map(x, feature_map)
    n = z.shape[0]
    g = numeric.gram(z)
    xty = numeric.cross(z, y)
    try:
        W = _solve_shifted(g, xty, n, lam)
    except NotPositiveDefiniteError as exc:
        if np.any(lam == 0):
            raise NumericError("XᵀX is singular; use lambda > 0") from exc
        raise
    return RlsModel(mode="primal", lam=_lam_value(lam), W=W,
                    feature_map=feature_map)


def train_dual(k, y, lam, kernel=None, train_x=None):
    """C = (K + nλI)⁻¹Y."""
    k = as_mat(k, "k")
    y = as_mat(y, "y")
    n = k.shape[0]
    if k.shape != (n, n) or y.shape[0] != n:
        raise ShapeError(f"kernel {k.shape} incompatible with labels {y.shape}")
    lam = _check_lambda(lam)
    try:
        C = _solve_shifted(k, y, n, lam)
    except NotPositiveDefiniteError as exc:
        if np.any(lam == 0):
            raise NumericError("kernel matrix is singular; use lambda > 0") from exc
        raise
    if train_x is not None:
        train_x = as_mat(train_x, "train_x")
    return RlsModel(mode="dual", lam=_lam_value(lam), C=C,
                    kernel=kernel or KernelSpec("linear"), train_x=train_x)


def predict(model, x_test):
    """Score matrix (m×T) for test inputs."""
    x_test = as_mat(x_test, "x_test")
    if model.mode == "primal":
        z = x_test
        if model.feature_map is not None:
            z = apply_feature_map(x_test, model.feature_map)
        if z.shape[1] != model.W.shape[0]:
            raise ShapeError(f"test inputs have {z.shape[1]} features, "
                             f"model expects {model.W.shape[0]}")
        return z @ model.W
    if model.train_x is None:
        raise StateError("dual model has no stored training inputs")
    if x_test.shape[1] != model.train_x.shape[1]:
        raise ShapeError(f"test inputs have {x_test.shape[1]} features, "
                         f"model expects {model.train_x.shape[1]}")
    return model.kernel(x_test, model.train_x) @ model.C


def build_path(gram_or_cov, y, lambdas, n=None):
    """Eigendecompose once so each grid λ costs a diagonal rescale.

    For a dual path pass the n×n kernel and the labels; for a primal path
    pass XᵀX, XᵀY and the sample count ``n``.
    """
    a = as_mat(gram_or_cov, "gram_or_cov")
    y = as_mat(y, "y")
    if y.shape[0] != a.shape[0]:
        raise ShapeError(f"matrix {a.shape} incompatible with labels {y.shape}")
    lambdas = np.asarray(lambdas, dtype=np.float64).ravel()
    if lambdas.size == 0:
        raise ParameterError("empty lambda grid")
    if np.any(lambdas <= 0) or np.any(np.diff(lambdas) <= 0):
        raise ParameterError("lambdas must be positive and strictly increasing")
    eig = numeric.sym_eig(a)
    return path_from_eig(eig, y, lambdas, a.shape[0] if n is None else n)


def path_from_eig(eig, y, lambdas, n):
    return RegPath(eig=eig, qty=eig.Q.T @ as_mat(y, "y"),
                   lambdas=np.asarray(lambdas, dtype=np.float64).ravel(), n=int(n))


def _filter(path, lam):
    lam = float(lam)
    if not np.isfinite(lam) or lam <= 0:
        raise ParameterError(f"lambda must be > 0, got {lam}")
    return 1.0 / (path.eig.lambdas + path.n * lam)


def solve_at(path, lam):
    """C(λ) = Q·diag(1/(Λ + nλ))·QᵀY."""
    return path.eig.Q @ (path.qty * _filter(path, lam)[:, None])


def leverages(path, lam):
    """Diagonal of S = K(K + nλI)⁻¹."""
    shrink = path.eig.lambdas * _filter(path, lam)
    return (path.eig.Q * path.eig.Q) @ shrink


def loo_residuals(path, y, lam):
    """Exact leave-one-out residuals (yᵢ − f₋ᵢ(xᵢ)) for a dual path.

    The left-out fit uses the same absolute shift nλ as the full fit.  With
    G = K + nλI the residual (y − Sy)ᵢ/(1 − Sᵢᵢ) equals Cᵢ/(G⁻¹)ᵢᵢ; that form
    is used because neither factor subtracts nearly equal numbers, whereas
    1 − Sᵢᵢ and y − Sy cancel badly when a leverage approaches one.
    """
    y = as_mat(y, "y")
    filt = _filter(path, lam)
    g_inv_diag = (path.eig.Q * path.eig.Q) @ filt
    denom = path.n * float(lam) * g_inv_diag  # 1 − Sᵢᵢ
    bad = np.flatnonzero(denom <= LEVERAGE_TOL)
    if bad.size:
        raise DegenerateLeverageError(int(bad[0]), float(1.0 - denom[bad[0]]))
    c = path.eig.Q @ (path.qty * filt[:, None])
    return c / g_inv_diag[:, None]
