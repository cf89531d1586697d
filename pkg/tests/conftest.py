import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

_CRITERIA = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def criterion():
    """Record one acceptance line: ``criterion(label, passed, detail)``."""
    def record(label, passed, detail=""):
        _CRITERIA.append((label, bool(passed), detail))
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for label, passed, detail in _CRITERIA:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {label}  {detail}")


def random_spd(rng, n, rank=None):
    a = rng.normal(size=(n, rank or n))
    return a @ a.T / n


def two_blobs(rng, n_per=40, d=2, sep=6.0, noise=1.0):
    centers = np.zeros((2, d))
    centers[0, 0], centers[1, 0] = -sep / 2, sep / 2
    x = np.vstack([rng.normal(c, noise, size=(n_per, d)) for c in centers])
    y = np.repeat([0, 1], n_per)
    perm = rng.permutation(len(y))
    return x[perm], y[perm]


def blob_store(seed, n_per=40, noise=1.0):
    """Options for a separable two-class problem with its own test set."""
    from rlskit import OptionsStore
    rng = np.random.default_rng(seed)
    x, y = two_blobs(rng, n_per=n_per, sep=12.0, noise=noise)
    xt, yt = two_blobs(rng, n_per=n_per // 2, sep=12.0, noise=noise)
    return OptionsStore({"data.x": x, "data.y": y, "data.x_test": xt, "data.y_test": yt,
                         "data.n_classes": 2, "split.fraction": 0.25, "split.seed": seed,
                         "kernel.sigma_quantile": 0.5, "paramsel.n_lambdas": 50})
