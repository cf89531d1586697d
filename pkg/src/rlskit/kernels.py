"""Linear and Gaussian kernels, bandwidth heuristic, random Fourier features."""
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial.distance import pdist

from . import numeric
from .errors import DegenerateDataError, ParameterError, ShapeError
from .numeric import as_mat

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "linear"
    sigma: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("linear", "gaussian"):
            raise ParameterError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "gaussian":
            _check_sigma(self.sigma)

    def __call__(self, x1, x2):
        if self.kind == "linear":
            return linear_kernel(x1, x2)
        return gaussian_kernel(x1, x2, self.sigma)


@dataclass(frozen=True)
class FeatureMap:
    """Random Fourier map z(x) = sqrt(2/D)·cos(xᵀΩ + b).

    ``omega`` is d×D with i.i.d. N(0, 1/σ²) entries, ``b`` holds D phases
    drawn uniformly from [0, 2π).
    """
    omega: np.ndarray
    b: np.ndarray
    sigma: float
    seed: int

    @property
    def D(self):
        return self.omega.shape[1]

    @property
    def d(self):
        return self.omega.shape[0]

    def __call__(self, x):
        return apply_feature_map(x, self)


def _check_sigma(sigma):
    if sigma is None or not np.isfinite(sigma) or sigma <= 0:
        raise ParameterError(f"sigma must be finite and > 0, got {sigma!r}")


def linear_kernel(x1, x2):
    x1 = as_mat(x1, "x1")
    x2 = as_mat(x2, "x2")
    if x1.shape[1] != x2.shape[1]:
        raise ShapeError(f"column mismatch: {x1.shape[1]} vs {x2.shape[1]}")
    return numeric.matmul(x1, x2.T)


def gaussian_kernel(x1, x2, sigma):
    _check_sigma(sigma)
    k = numeric.pairwise_sq_dists(x1, x2)
    k *= -1.0 / (2.0 * sigma * sigma)
    np.exp(k, out=k)
    return k


def sigma_from_distances(x, quantile=0.5):
    """Bandwidth as a quantile of the off-diagonal pairwise Euclidean distances.

    The median (``quantile=0.5``) is the default.  All n(n−1)/2 distances
    are materialized, which costs 4·n² bytes.
    """
    x = as_mat(x, "x")
    if x.shape[0] < 2:
        raise ShapeError("need at least two rows to measure distances")
    if not 0.0 < quantile < 1.0:
        raise ParameterError(f"quantile must lie in (0, 1), got {quantile}")
    dists = pdist(x, "euclidean")
    if not np.any(dists > 0):
        raise DegenerateDataError("all rows are identical; no bandwidth can be set")
    return float(np.quantile(dists, quantile))


def sample_feature_map(d, D, sigma, seed):
    if d < 1 or D < 1:
        raise ParameterError(f"need d >= 1 and D >= 1, got d={d}, D={D}")
    _check_sigma(sigma)
    rng = np.random.default_rng(seed)
    omega = rng.normal(0.0, 1.0 / sigma, size=(d, D))
    b = TWO_PI * rng.random(D)
    # rounding can push a draw just below 1 up to exactly 2π
    b[b >= TWO_PI] = 0.0
    omega.flags.writeable = False
    b.flags.writeable = False
    return FeatureMap(omega=omega, b=b, sigma=float(sigma), seed=int(seed))


def apply_feature_map(x, fm):
    x = as_mat(x, "x")
    if x.shape[1] != fm.omega.shape[0]:
        raise ShapeError(
            f"input has {x.shape[1]} features, map expects {fm.omega.shape[0]}")
    z = x @ fm.omega
    z += fm.b[None, :]
    np.cos(z, out=z)
    z *= math.sqrt(2.0 / fm.omega.shape[1])
    return z
