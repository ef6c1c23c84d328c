"""Model configuration, parameter container, and priors.

The model is a hidden Markov model over latent trajectory phases with
three optional extensions that are switched on independently:

* duration-dependent (semi-Markov) transition logits,
* copula-coupled multivariate emissions,
* exogenous covariates in the transition logits.

The four classic variants map onto the two boolean switches:
(use_duration, use_covariates) = (F,F) plain HMM, (F,T) HMM with
covariates, (T,F) variable-duration HMM, (T,T) the full model.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import gammaln


COPULA_FAMILIES = ("independence", "survival_gumbel", "amh", "clayton")

#: CLI-facing aliases for the two boolean switches.
VARIANTS = {
    "hmm": (False, False),
    "hmmx": (False, True),
    "vd-hmm": (True, False),
    "vdc-hmmx": (True, True),
}


class ModelError(ValueError):
    """Invalid configuration or parameter values."""


@dataclass(frozen=True)
class ModelConfig:
    """Structural hyperparameters of the model.

    Attributes:
        num_states: number of latent states (>= 1).
        num_margins: number of observed measurement channels (>= 1).
        scale_max: per-margin upper bound of the discrete scale, e.g.
            (10, 7) for a 0-10 pain score and 0-7 activity days.
        duration_cap: maximum tracked sojourn length in weeks; durations
            saturate here, which is exact whenever the cap covers the
            observation horizon.
        copula_family: one of ``COPULA_FAMILIES``.
        covariate_dim: length of the covariate vector entering the
            transition logits (0 for none).
        use_duration: if False the duration coefficients are fixed at 0.
        use_covariates: if False the covariate coefficients are fixed at 0.
    """

    num_states: int
    num_margins: int
    scale_max: tuple[int, ...]
    duration_cap: int = 52
    copula_family: str = "survival_gumbel"
    covariate_dim: int = 0
    use_duration: bool = True
    use_covariates: bool = True

    def __post_init__(self):
        object.__setattr__(self, "scale_max", tuple(int(l) for l in self.scale_max))
        if self.num_states < 1:
            raise ModelError("num_states must be >= 1")
        if self.num_margins < 1:
            raise ModelError("num_margins must be >= 1")
        if len(self.scale_max) != self.num_margins:
            raise ModelError("scale_max must have one entry per margin")
        if any(l < 1 for l in self.scale_max):
            raise ModelError("every scale_max entry must be >= 1")
        if self.duration_cap < 1:
            raise ModelError("duration_cap must be >= 1")
        if self.copula_family not in COPULA_FAMILIES:
            raise ModelError(f"unknown copula_family {self.copula_family!r}")
        if self.covariate_dim < 0:
            raise ModelError("covariate_dim must be >= 0")

    @property
    def has_copula(self) -> bool:
        return self.copula_family != "independence" and self.num_margins > 1

    def with_variant(self, variant: str) -> "ModelConfig":
        """Return a copy restricted to one of the named variants."""
        if variant not in VARIANTS:
            raise ModelError(f"unknown variant {variant!r}; expected one of {sorted(VARIANTS)}")
        use_duration, use_covariates = VARIANTS[variant]
        return replace(self, use_duration=use_duration, use_covariates=use_covariates)


@dataclass(frozen=True)
class ParameterSet:
    """All estimable quantities of the model.

    Arrays are kept on the constrained (natural) scale:

    * ``initial_dist``: probability vector over states, shape (S,).
    * ``intercepts``: transition intercepts, shape (S, S), zero diagonal.
    * ``duration_coefs``: duration slopes, shape (S, S), zero diagonal.
    * ``covariate_coefs``: covariate slopes, shape (S, S, p), zero diagonal.
    * ``emission_rates``: truncated-Poisson rates, shape (S, m), positive,
      with the first column strictly increasing across states (this pins
      state 1 to the mildest phase and removes label switching).
    * ``copula_params``: per-state dependence parameter, shape (S,), or
      None for the independence family.
    """

    initial_dist: np.ndarray
    intercepts: np.ndarray
    duration_coefs: np.ndarray
    covariate_coefs: np.ndarray
    emission_rates: np.ndarray
    copula_params: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "initial_dist", _freeze(self.initial_dist, float))
        object.__setattr__(self, "intercepts", _freeze(self.intercepts, float))
        object.__setattr__(self, "duration_coefs", _freeze(self.duration_coefs, float))
        object.__setattr__(self, "covariate_coefs", _freeze(self.covariate_coefs, float))
        object.__setattr__(self, "emission_rates", _freeze(self.emission_rates, float))
        if self.copula_params is not None:
            object.__setattr__(self, "copula_params", _freeze(self.copula_params, float))

    def validate(self, config: ModelConfig) -> None:
        """Raise ModelError if any invariant is violated."""
        s, m, p = config.num_states, config.num_margins, config.covariate_dim
        if self.initial_dist.shape != (s,):
            raise ModelError(f"initial_dist must have shape ({s},)")
        if np.any(self.initial_dist < 0) or abs(self.initial_dist.sum() - 1.0) > 1e-8:
            raise ModelError("initial_dist must be a probability vector")
        for name, arr in (("intercepts", self.intercepts), ("duration_coefs", self.duration_coefs)):
            if arr.shape != (s, s):
                raise ModelError(f"{name} must have shape ({s}, {s})")
            if not np.all(np.isfinite(arr)):
                raise ModelError(f"{name} must be finite")
            if np.any(np.diagonal(arr) != 0.0):
                raise ModelError(f"{name} must have a zero diagonal")
        if self.covariate_coefs.shape != (s, s, p):
            raise ModelError(f"covariate_coefs must have shape ({s}, {s}, {p})")
        if p > 0:
            if not np.all(np.isfinite(self.covariate_coefs)):
                raise ModelError("covariate_coefs must be finite")
            if np.any(self.covariate_coefs[np.arange(s), np.arange(s), :] != 0.0):
                raise ModelError("covariate_coefs must be zero on the diagonal")
        if not config.use_duration and np.any(self.duration_coefs != 0.0):
            raise ModelError("duration_coefs must be zero when use_duration is off")
        if not config.use_covariates and np.any(self.covariate_coefs != 0.0):
            raise ModelError("covariate_coefs must be zero when use_covariates is off")
        if self.emission_rates.shape != (s, m):
            raise ModelError(f"emission_rates must have shape ({s}, {m})")
        if np.any(self.emission_rates <= 0) or not np.all(np.isfinite(self.emission_rates)):
            raise ModelError("emission_rates must be positive and finite")
        first = self.emission_rates[:, 0]
        if np.any(np.diff(first) <= 0):
            raise ModelError("emission_rates[:, 0] must be strictly increasing across states")
        if config.has_copula:
            if self.copula_params is None or self.copula_params.shape != (s,):
                raise ModelError(f"copula_params must have shape ({s},)")
            v = self.copula_params
            if config.copula_family == "survival_gumbel" and np.any(v < 1.0):
                raise ModelError("survival Gumbel parameter must be >= 1")
            if config.copula_family == "amh" and (np.any(v < -1.0) or np.any(v >= 1.0)):
                raise ModelError("AMH parameter must lie in [-1, 1)")
            if config.copula_family == "clayton" and np.any(v <= 0.0):
                raise ModelError("Clayton parameter must be > 0")


def _freeze(arr, dtype) -> np.ndarray:
    out = np.asarray(arr, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class PriorSpec:
    """Weakly informative priors for every parameter group.

    Scalars are standard deviations of zero-mean normals unless noted.
    Rates and the survival-Gumbel excess (value - 1) are truncated below
    at zero; the AMH parameter carries a standard normal on its scaled
    logit; the Clayton parameter a truncated standard normal, mirroring
    the Gumbel device.
    """

    initial_concentration: float = 1.0
    intercept_sd: float = 10.0
    duration_sd: float = 1.0
    covariate_sd: float = 1.0
    rate_sd: float = 5.0
    copula_sd: float = 1.0


_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def _normal_logpdf(x: np.ndarray | float, sd: float) -> np.ndarray | float:
    return -_LOG_SQRT_2PI - math.log(sd) - 0.5 * (np.asarray(x) / sd) ** 2


def _halfnormal_logpdf(x: np.ndarray | float, sd: float) -> np.ndarray | float:
    # normal(0, sd) truncated below at zero
    x = np.asarray(x, dtype=float)
    out = math.log(2.0) + _normal_logpdf(x, sd)
    return np.where(x >= 0, out, -np.inf)


def log_prior(params: ParameterSet, config: ModelConfig, priors: PriorSpec) -> float:
    """Log prior density of a parameter set on the constrained scale.

    Jacobian corrections for evaluation on the unconstrained scale are
    not included here; they live in :func:`transforms.log_jacobian` and
    the two are summed by the posterior.
    """
    s = config.num_states
    off = ~np.eye(s, dtype=bool)
    total = 0.0

    # symmetric Dirichlet; reduces to log Gamma(S) for concentration 1
    a = priors.initial_concentration
    total += gammaln(s * a) - s * gammaln(a)
    if a != 1.0:
        total += float(np.sum((a - 1.0) * np.log(params.initial_dist)))

    total += float(np.sum(_normal_logpdf(params.intercepts[off], priors.intercept_sd)))
    if config.use_duration:
        total += float(np.sum(_normal_logpdf(params.duration_coefs[off], priors.duration_sd)))
    if config.use_covariates and config.covariate_dim > 0:
        total += float(np.sum(_normal_logpdf(params.covariate_coefs[off], priors.covariate_sd)))

    total += float(np.sum(_halfnormal_logpdf(params.emission_rates, priors.rate_sd)))

    if config.has_copula:
        v = params.copula_params
        if config.copula_family == "survival_gumbel":
            total += float(np.sum(_halfnormal_logpdf(v - 1.0, priors.copula_sd)))
        elif config.copula_family == "clayton":
            total += float(np.sum(_halfnormal_logpdf(v, priors.copula_sd)))
        elif config.copula_family == "amh":
            # standard normal on the scaled logit z of (v+1)/2, expressed
            # as a density in v itself
            w = (v + 1.0) / 2.0
            with np.errstate(divide="ignore"):
                z = np.log(w) - np.log1p(-w)
                log_dz_dv = -math.log(2.0) - np.log(w) - np.log1p(-w)
            total += float(np.sum(_normal_logpdf(z, priors.copula_sd) + log_dz_dv))
    return total


# ---------------------------------------------------------------------------
# JSON serialization: {"model": {"config": {...}, "params": {...}}}
# ---------------------------------------------------------------------------

def model_to_json(config: ModelConfig, params: ParameterSet | None = None) -> str:
    doc: dict = {"model": {"config": config_to_dict(config)}}
    if params is not None:
        doc["model"]["params"] = params_to_dict(params)
    return json.dumps(doc, indent=2)


def model_from_json(text: str) -> tuple[ModelConfig, ParameterSet | None]:
    doc = json.loads(text)
    model = doc["model"]
    config = config_from_dict(model["config"])
    params = params_from_dict(model["params"], config) if "params" in model else None
    return config, params


def config_to_dict(config: ModelConfig) -> dict:
    return {
        "num_states": config.num_states,
        "num_margins": config.num_margins,
        "scale_max": list(config.scale_max),
        "duration_cap": config.duration_cap,
        "copula_family": config.copula_family,
        "covariate_dim": config.covariate_dim,
        "use_duration": config.use_duration,
        "use_covariates": config.use_covariates,
    }


def config_from_dict(d: dict) -> ModelConfig:
    return ModelConfig(
        num_states=int(d["num_states"]),
        num_margins=int(d["num_margins"]),
        scale_max=tuple(d["scale_max"]),
        duration_cap=int(d["duration_cap"]),
        copula_family=str(d["copula_family"]),
        covariate_dim=int(d["covariate_dim"]),
        use_duration=bool(d["use_duration"]),
        use_covariates=bool(d["use_covariates"]),
    )


def params_to_dict(params: ParameterSet) -> dict:
    d = {
        "initial_dist": params.initial_dist.tolist(),
        "intercepts": params.intercepts.tolist(),
        "duration_coefs": params.duration_coefs.tolist(),
        "covariate_coefs": params.covariate_coefs.tolist(),
        "emission_rates": params.emission_rates.tolist(),
    }
    if params.copula_params is not None:
        d["copula_params"] = params.copula_params.tolist()
    return d


def params_from_dict(d: dict, config: ModelConfig) -> ParameterSet:
    copula = np.asarray(d["copula_params"], dtype=float) if "copula_params" in d else None
    params = ParameterSet(
        initial_dist=np.asarray(d["initial_dist"], dtype=float),
        intercepts=np.asarray(d["intercepts"], dtype=float),
        duration_coefs=np.asarray(d["duration_coefs"], dtype=float),
        covariate_coefs=np.asarray(d["covariate_coefs"], dtype=float),
        emission_rates=np.asarray(d["emission_rates"], dtype=float),
        copula_params=copula,
    )
    params.validate(config)
    return params
