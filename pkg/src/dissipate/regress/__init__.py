"""Regression methods: OLS, LASSO, NCA and ARD Gaussian process."""
from ._common import ConvergenceWarning, FeatureWeights, RegressionError
from .gpr import (
    GprFitError,
    GprModel,
    ard_kernel,
    ard_kernel_matrix,
    fit_gpr,
    gpr_feature_weights,
    gpr_predict,
    log_marginal_likelihood,
)
from .linear import (
    LassoModel,
    LinearModel,
    fit_lasso,
    fit_ols,
    lasso_cv,
    lasso_max_penalty,
    predict_linear,
)
from .nca import (
    NcaDivergenceError,
    NcaModel,
    fit_nca,
    nca_feature_weights,
    nca_objective,
    nca_predict,
    nca_probabilities,
)

METHODS = ("lr", "lasso", "nca", "gpr")
WEIGHTED_METHODS = ("nca", "gpr")
MODEL_TYPES = {"lr": LinearModel, "lasso": LassoModel, "nca": NcaModel, "gpr": GprModel}


def normalize_method(name):
    key = str(name).strip().lower()
    if key not in METHODS:
        raise RegressionError(f"unknown method {name!r}; expected one of {METHODS}")
    return key


def fit(method, data, seed=0, **options):
    """Fit any of the four methods with its defaults."""
    method = normalize_method(method)
    if method == "lr":
        return fit_ols(data)
    if method == "lasso":
        return fit_lasso(data, seed=seed, **options)
    if method == "nca":
        return fit_nca(data, seed=seed, **options)
    return fit_gpr(data, seed=seed, **options)


def model_to_dict(model):
    return {"method": model.method, "feature_ids": list(model.feature_ids),
            "params": model.to_dict()}


def model_from_dict(d):
    cls = MODEL_TYPES[normalize_method(d["method"])]
    return cls.from_dict(d["params"], tuple(d["feature_ids"]))
