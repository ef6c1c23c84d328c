"""Copula CDFs and the joint pmf of copula-linked discrete margins.

The survival Gumbel family couples margins with lower tail dependence
(joint absence of symptoms), Ali-Mikhail-Haq gives a weak symmetric
dependence, Clayton an alternative lower-tail family, and independence
is the product copula. Families beyond two margins use the exchangeable
extension of the same generator; for AMH that extension is only a valid
distribution for nonnegative parameter values.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .model import COPULA_FAMILIES, ModelError

#: beyond these dependence strengths the generators lose floating point
#: precision; both families are within a fraction of a percent of their
#: comonotone limit min(u, v) there, which is substituted instead
_COMONOTONE_NU = 300.0
_COMONOTONE_THETA = 100.0


@dataclass(frozen=True)
class CopulaParam:
    """A copula family together with its dependence parameter.

    Domains: survival_gumbel value >= 1 (1 = independence), amh value in
    [-1, 1), clayton value > 0; the value is ignored for independence.
    """

    family: str
    value: float = 0.0

    def __post_init__(self):
        if self.family not in COPULA_FAMILIES:
            raise ModelError(f"unknown copula family {self.family!r}")
        if self.family == "survival_gumbel" and not self.value >= 1.0:
            raise ModelError("survival Gumbel parameter must be >= 1")
        if self.family == "amh" and not (-1.0 <= self.value < 1.0):
            raise ModelError("AMH parameter must lie in [-1, 1)")
        if self.family == "clayton" and not self.value > 0.0:
            raise ModelError("Clayton parameter must be > 0")


def copula_cdf(param: CopulaParam, u, v):
    """Bivariate copula C(u, v); accepts scalars or broadcastable arrays."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if np.any(u < 0) or np.any(u > 1) or np.any(v < 0) or np.any(v > 1):
        raise ModelError("copula arguments must lie in [0, 1]")
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        if param.family == "independence":
            out = u * v
        elif param.family == "survival_gumbel":
            nu = param.value
            if nu > _COMONOTONE_NU:
                out = np.minimum(u, v)
            else:
                a = (-np.log1p(-u)) ** nu + (-np.log1p(-v)) ** nu
                out = u + v - 1.0 + np.exp(-a ** (1.0 / nu))
        elif param.family == "amh":
            out = u * v / (1.0 - param.value * (1.0 - u) * (1.0 - v))
        else:  # clayton
            th = param.value
            if th > _COMONOTONE_THETA:
                out = np.minimum(u, v)
            else:
                out = np.where(
                    (u > 0) & (v > 0),
                    (np.maximum(u, 1e-300) ** -th + np.maximum(v, 1e-300) ** -th - 1.0) ** (-1.0 / th),
                    0.0,
                )
    out = np.clip(np.where(np.isnan(out), 0.0, out), 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def copula_cdf_multi(param: CopulaParam, u: np.ndarray) -> np.ndarray:
    """m-variate copula CDF; u has the margins on its last axis.

    Agrees with :func:`copula_cdf` for two margins and reduces to the
    identity for a single margin.
    """
    u = np.asarray(u, dtype=float)
    m = u.shape[-1]
    if np.any(u < 0) or np.any(u > 1):
        raise ModelError("copula arguments must lie in [0, 1]")
    if m == 1:
        return u[..., 0].copy()
    if m == 2:
        return np.asarray(copula_cdf(param, u[..., 0], u[..., 1]))
    if param.family == "independence":
        return np.prod(u, axis=-1)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        if param.family == "survival_gumbel":
            if param.value > _COMONOTONE_NU:
                return np.min(u, axis=-1)
            # survival function of the m-variate Gumbel, by inclusion-exclusion
            out = np.zeros(u.shape[:-1])
            for signs in itertools.product((0, 1), repeat=m):
                w = np.where(np.array(signs, dtype=bool), 1.0 - u, 1.0)
                out += (-1.0) ** sum(signs) * _gumbel_cdf(param.value, w)
            return np.maximum(out, 0.0)
        if param.family == "clayton":
            th = param.value
            if th > _COMONOTONE_THETA:
                return np.min(u, axis=-1)
            total = np.sum(np.maximum(u, 1e-300) ** -th, axis=-1) - (m - 1)
            out = np.where(np.all(u > 0, axis=-1), total ** (-1.0 / th), 0.0)
            return np.where(np.isnan(out), 0.0, out)
        # amh via its Archimedean generator
        nup = param.value
        if nup == 0.0:
            return np.prod(u, axis=-1)
        gen = np.log1p(-nup * (1.0 - u)) - np.log(np.maximum(u, 1e-300))
        total = np.sum(np.where(u > 0, gen, np.inf), axis=-1)
        out = (1.0 - nup) / (np.exp(total) - nup)
        return np.where(np.all(u > 0, axis=-1), out, 0.0)


def _gumbel_cdf(nu: float, v: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", over="ignore"):
        a = np.sum((-np.log(np.maximum(v, 1e-300))) ** nu, axis=-1)
        out = np.exp(-a ** (1.0 / nu))
    return np.where(np.any(v <= 0, axis=-1), 0.0, out)


def joint_pmf(param: CopulaParam, marginal_cdfs: list[np.ndarray]) -> np.ndarray:
    """Joint pmf on the full discrete grid from copula-linked marginal CDFs.

    Each table is the CDF of one margin over {0, .., L_k} (the value at -1
    is taken as 0). The joint cell mass is the copula volume of the unit
    cell, i.e. the alternating corner sum of the joint CDF. Tiny negative
    cells from floating point are clamped to zero and the table is
    renormalized; genuine negativity signals an invalid input and raises.
    """
    cdfs = [np.asarray(f, dtype=float) for f in marginal_cdfs]
    for k, f in enumerate(cdfs):
        if f.ndim != 1 or f.size < 1:
            raise ModelError(f"margin {k}: CDF table must be a nonempty vector")
        if np.any(np.diff(f) < -1e-12):
            raise ModelError(f"margin {k}: CDF table is decreasing")
        if abs(f[-1] - 1.0) > 1e-9:
            raise ModelError(f"margin {k}: CDF table must end at 1, got {f[-1]!r}")

    if len(cdfs) == 1:
        return np.diff(np.concatenate(([0.0], cdfs[0])))
    if param.family == "independence":
        pmfs = [np.diff(np.concatenate(([0.0], f))) for f in cdfs]
        out = pmfs[0]
        for f in pmfs[1:]:
            out = np.multiply.outer(out, f)
        return out

    # evaluate C on the padded grid {F(-1)=0, F(0), .., F(L)} per margin,
    # then difference along every axis: one pass gives all corner sums
    padded = [np.concatenate(([0.0], f)) for f in cdfs]
    grids = np.meshgrid(*padded, indexing="ij")
    u = np.clip(np.stack(grids, axis=-1), 0.0, 1.0)
    table = copula_cdf_multi(param, u)
    for axis in range(len(cdfs)):
        table = np.diff(table, axis=axis)

    if np.any(table < -1e-12):
        raise ModelError(
            f"joint pmf has a negative cell of size {table.min():.3e}; "
            "check the CDF tables and copula parameter"
        )
    np.clip(table, 0.0, None, out=table)
    total = table.sum()
    if abs(total - 1.0) > 1e-9:
        raise ModelError(f"joint pmf mass is {total!r}, expected 1")
    return table / total
