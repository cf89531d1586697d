"""Built-in task implementations, registered on import.

Inputs are read from the options store:

    data.x, data.y            training inputs and integer labels
    data.x_test, data.y_test  optional test set (pred/perf fall back to training data)
    data.n_classes            optional; defaults to max(label) + 1
    split.fraction/seed/stratify
    kernel.sigma | kernel.sigma_quantile, kernel.n_features, kernel.seed
    paramsel.n_lambdas, paramsel.lambdas, paramsel.per_output, paramsel.lambda

Every task returns a plain dict that the driver stores under
``results.<category>``.
"""
import numpy as np

from . import kernels, modelsel, rls
from .errors import ParameterError, PipelineError
from .evaluation import decode_argmax, encode_one_vs_all, performance, rmse
from .kernels import FeatureMap, KernelSpec
from .pipeline import register_task


def _labels(opt, test=False):
    key = "data.y_test" if test and "data.y_test" in opt else "data.y"
    return np.asarray(opt[key])


def _n_classes(opt):
    if "data.n_classes" in opt:
        return int(opt["data.n_classes"])
    y = np.asarray(opt["data.y"])
    if "data.y_test" in opt:
        y = np.concatenate([y, np.asarray(opt["data.y_test"])])
    return int(y.max()) + 1


def _targets(opt):
    return encode_one_vs_all(_labels(opt), _n_classes(opt))


def _test_x(opt):
    return opt["data.x_test"] if "data.x_test" in opt else opt["data.x"]


def _feature_map(kres):
    return FeatureMap(omega=kres["omega"], b=kres["b"], sigma=kres["sigma"],
                      seed=kres["seed"])


def _kernel_spec(kres):
    kind = kres["kind"]
    if kind == "linear":
        return KernelSpec("linear")
    if kind == "gaussian":
        return KernelSpec("gaussian", kres["sigma"])
    raise PipelineError(f"kernel result of kind {kind!r} has no dual form")


def _design(opt):
    """Inputs for a primal model: random features if a map was computed."""
    kres = opt.get("results.kernel")
    if kres is not None and kres["kind"] == "randfeats":
        return kres["features"]
    return opt["data.x"]


# --- split -----------------------------------------------------------------

@register_task("split", "holdout")
def split_holdout(opt):
    y = _labels(opt)
    stratify = bool(opt.get("split.stratify", False))
    s = modelsel.holdout_split(len(y), float(opt.get("split.fraction", 0.2)),
                               int(opt.get("split.seed", 0)),
                               labels=y if stratify else None)
    return {"train_idx": s.train_idx, "val_idx": s.val_idx, "seed": s.seed,
            "fraction": s.fraction, "stratified": s.stratified}


# --- kernel ----------------------------------------------------------------

def _sigma(opt, x):
    if "kernel.sigma" in opt:
        return float(opt["kernel.sigma"])
    return kernels.sigma_from_distances(x, float(opt.get("kernel.sigma_quantile", 0.5)))


@register_task("kernel", "linear")
def kernel_linear(opt):
    x = opt["data.x"]
    return {"kind": "linear", "matrix": kernels.linear_kernel(x, x)}


@register_task("kernel", "gaussian")
def kernel_gaussian(opt):
    x = opt["data.x"]
    sigma = _sigma(opt, x)
    return {"kind": "gaussian", "sigma": sigma,
            "matrix": kernels.gaussian_kernel(x, x, sigma)}


@register_task("kernel", "randfeats")
def kernel_randfeats(opt):
    x = opt["data.x"]
    sigma = _sigma(opt, x)
    fm = kernels.sample_feature_map(x.shape[1], int(opt.get("kernel.n_features", 500)),
                                    sigma, int(opt.get("kernel.seed", 0)))
    return {"kind": "randfeats", "sigma": sigma, "seed": fm.seed,
            "omega": fm.omega, "b": fm.b, "features": kernels.apply_feature_map(x, fm)}


# --- paramsel --------------------------------------------------------------

def _grid_opts(opt):
    lambdas = opt.get("paramsel.lambdas")
    return dict(n_lambdas=int(opt.get("paramsel.n_lambdas", modelsel.DEFAULT_N_LAMBDAS)),
                lambdas=None if lambdas is None else np.asarray(lambdas, dtype=float),
                per_output=bool(opt.get("paramsel.per_output", False)))


@register_task("paramsel", "hoprimal", requires=("split",))
def paramsel_hoprimal(opt):
    z = _design(opt)
    y = _targets(opt)
    tr, va = opt["results.split.train_idx"], opt["results.split.val_idx"]
    res = modelsel.holdout_primal(z[tr], z[va], y[tr], y[va], **_grid_opts(opt))
    return res.to_dict()


@register_task("paramsel", "hodual", requires=("split", "kernel"))
def paramsel_hodual(opt):
    k = opt["results.kernel.matrix"]
    y = _targets(opt)
    tr, va = opt["results.split.train_idx"], opt["results.split.val_idx"]
    res = modelsel.holdout_dual(k[np.ix_(tr, tr)], k[np.ix_(va, tr)], y[tr], y[va],
                                **_grid_opts(opt))
    return res.to_dict()


@register_task("paramsel", "loodual", requires=("kernel",))
def paramsel_loodual(opt):
    g = _grid_opts(opt)
    res = modelsel.select_loo(opt["results.kernel.matrix"], _targets(opt),
                              g["lambdas"], n_lambdas=g["n_lambdas"])
    return res.to_dict()


@register_task("paramsel", "fixed")
def paramsel_fixed(opt):
    if "paramsel.lambda" not in opt:
        raise ParameterError("paramsel:fixed needs paramsel.lambda")
    lam = float(opt["paramsel.lambda"])
    return {"best_lambda": lam, "lambdas": np.array([lam]),
            "val_scores": np.array([np.nan]), "method": "fixed", "skipped": []}


# --- rls -------------------------------------------------------------------

def _chosen_lambda(opt):
    per_output = opt.get("results.paramsel.best_lambda_per_output")
    if per_output is not None:
        return np.asarray(per_output, dtype=float)
    return float(opt["results.paramsel.best_lambda"])


@register_task("rls", "primal", requires=("paramsel",))
def rls_primal(opt):
    lam = _chosen_lambda(opt)
    model = rls.train_primal(_design(opt), _targets(opt), lam)
    return {"mode": "primal", "W": model.W, "lambda": model.lam}


@register_task("rls", "dual", requires=("paramsel", "kernel"))
def rls_dual(opt):
    lam = _chosen_lambda(opt)
    model = rls.train_dual(opt["results.kernel.matrix"], _targets(opt), lam)
    return {"mode": "dual", "C": model.C, "lambda": model.lam}


# --- pred ------------------------------------------------------------------

def _model(opt):
    r = opt["results.rls"]
    kres = opt.get("results.kernel")
    if r["mode"] == "primal":
        fm = _feature_map(kres) if kres is not None and kres["kind"] == "randfeats" else None
        return rls.RlsModel(mode="primal", lam=r["lambda"], W=r["W"], feature_map=fm)
    if kres is None:
        raise PipelineError("dual prediction needs results.kernel")
    return rls.RlsModel(mode="dual", lam=r["lambda"], C=r["C"], kernel=_kernel_spec(kres),
                        train_x=opt["data.x"])


@register_task("pred", "primal", requires=("rls",))
def pred_primal(opt):
    model = _model(opt)
    if model.mode != "primal":
        raise PipelineError("pred:primal needs a primal model")
    return {"scores": rls.predict(model, _test_x(opt))}


@register_task("pred", "dual", requires=("rls", "kernel"))
def pred_dual(opt):
    model = _model(opt)
    if model.mode != "dual":
        raise PipelineError("pred:dual needs a dual model")
    return {"scores": rls.predict(model, _test_x(opt))}


# --- perf ------------------------------------------------------------------

@register_task("perf", "accuracy", requires=("pred",))
def perf_accuracy(opt):
    pred = decode_argmax(opt["results.pred.scores"])
    report = performance(pred, _labels(opt, test=True), _n_classes(opt))
    out = report.to_dict()
    out["confusion"] = report.confusion
    out["per_class_accuracy"] = report.per_class_accuracy
    out["predicted"] = pred
    return out


@register_task("perf", "rmse", requires=("pred",))
def perf_rmse(opt):
    truth = encode_one_vs_all(_labels(opt, test=True), _n_classes(opt))
    return {"rmse": rmse(opt["results.pred.scores"], truth)}
