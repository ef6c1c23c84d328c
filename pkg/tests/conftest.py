import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from vdchmm import ModelConfig, from_unconstrained, unconstrained_dim


def random_model(rng, num_states=None, num_margins=None, copula_family=None,
                 horizon=None, covariate_dim=None, scale=0.8, use_duration=True):
    """A random valid (config, params) pair for property tests."""
    s = int(num_states if num_states is not None else rng.integers(1, 4))
    m = int(num_margins if num_margins is not None else rng.integers(1, 3))
    fam = copula_family or str(rng.choice(["independence", "survival_gumbel", "amh", "clayton"]))
    p = int(covariate_dim if covariate_dim is not None else rng.integers(0, 3))
    cap = int(horizon if horizon is not None else rng.integers(1, 8))
    config = ModelConfig(
        num_states=s, num_margins=m,
        scale_max=tuple(int(l) for l in rng.integers(2, 9, size=m)),
        duration_cap=cap, copula_family=fam, covariate_dim=p,
        use_duration=use_duration, use_covariates=p > 0,
    )
    v = rng.normal(0.0, scale, size=unconstrained_dim(config))
    return config, from_unconstrained(v, config)


def random_observations(rng, config, n_weeks):
    return np.stack(
        [rng.integers(0, l + 1, size=n_weeks) for l in config.scale_max], axis=1
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
