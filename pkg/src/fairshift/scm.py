"""Linear-Gaussian structural causal model over (C1, D, X1, X2, Y).

    D  ~ Bernoulli(sigmoid(gamma * l1 * C1 + u1))
    X2 = N(0, 1) + u2
    Y  ~ Bernoulli(sigmoid(l2 * D + l3 * X2 + u3))
    X1 = gamma * l4 * C1 + l5 * Y + l6 * D + u4

with u1, u2, u3 ~ N(0, 0.8^2) and u4 ~ N(0, 1.4^2).  D and Y take values in
{-1, +1}; a Bernoulli success is +1.  For D, +1 is the advantaged group and
-1 the disadvantaged one, so C1 = 1 with large gamma shrinks the
disadvantaged share.

Randomness: every structural equation draws from its own PCG64 stream,
spawned from ``SeedSequence(seed, spawn_key=(c1,))``, so a row's values
depend only on (seed, c1, row index) and streams are portable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.special import expit

from ._logistic import fit_logistic
from .data import ColumnSchema, Dataset

SCHEMA = (
    ColumnSchema("C1", "numeric", "domain-indicator"),
    ColumnSchema("D", "binary-label", "protected"),
    ColumnSchema("X1", "numeric", "feature"),
    ColumnSchema("X2", "numeric", "feature"),
    ColumnSchema("Y", "binary-label", "outcome"),
)

FLU_GRAPH = """\
node C1 context
node D protected
node X1 system
node X2 system
node Y outcome
edge C1 D
edge C1 X1
edge D Y
edge D X1
edge X2 Y
edge Y X1
"""


@dataclass(frozen=True)
class ScmCoefficients:
    lambda2: float
    lambda3: float
    lambda5: float
    lambda6: float
    lambda1: float = 0.1
    lambda4: float = 0.8
    sigma123: float = 0.8
    sigma4: float = 1.4

    def __post_init__(self):
        vals = (self.lambda2, self.lambda3, self.lambda5, self.lambda6)
        if not all(np.isfinite(vals)):
            raise ValueError("coefficients must be finite")


@dataclass(frozen=True)
class ScmConfig:
    coefficients: ScmCoefficients
    gamma: float
    n: int
    seed: int = 0

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.n < 1:
            raise ValueError("n must be >= 1")


def sample_coefficients(seed) -> ScmCoefficients:
    """Each free coefficient ~ N(+0.8, 0.8^2) or N(-0.8, 0.8^2), sign chosen
    independently with probability 1/2."""
    rng = np.random.default_rng(seed)
    signs = np.where(rng.random(4) < 0.5, 1.0, -1.0)
    draws = rng.normal(0.8 * signs, 0.8)
    return ScmCoefficients(*map(float, draws))


def _bernoulli_pm(rng, p):
    return np.where(rng.random(p.shape) < p, 1.0, -1.0)


def generate_domain(cfg: ScmConfig, c1: int) -> Dataset:
    if c1 not in (0, 1):
        raise ValueError("c1 must be 0 or 1")
    co, n = cfg.coefficients, cfg.n
    ss = np.random.SeedSequence(cfg.seed, spawn_key=(c1,))
    r_u1, r_d, r_x2, r_u2, r_u3, r_y, r_u4 = (np.random.default_rng(s) for s in ss.spawn(7))

    u1 = r_u1.normal(0.0, co.sigma123, n)
    d = _bernoulli_pm(r_d, expit(cfg.gamma * co.lambda1 * c1 + u1))
    x2 = r_x2.normal(0.0, 1.0, n) + r_u2.normal(0.0, co.sigma123, n)
    u3 = r_u3.normal(0.0, co.sigma123, n)
    y = _bernoulli_pm(r_y, expit(co.lambda2 * d + co.lambda3 * x2 + u3))
    x1 = cfg.gamma * co.lambda4 * c1 + co.lambda5 * y + co.lambda6 * d + r_u4.normal(0.0, co.sigma4, n)

    data = {"C1": np.full(n, float(c1)), "D": d, "X1": x1, "X2": x2, "Y": y}
    return Dataset.from_columns(SCHEMA, data)


def generate_pair(cfg: ScmConfig) -> tuple[Dataset, Dataset]:
    """(source with C1=0, target with C1=1)."""
    return generate_domain(cfg, 0), generate_domain(cfg, 1)


def ci_test_lr(c: np.ndarray, conditioning: np.ndarray, tested: np.ndarray) -> float:
    """p-value for ``tested`` _||_ ``c`` | ``conditioning``.

    Likelihood-ratio test between logistic regressions of the binary
    ``c`` on ``conditioning`` with and without ``tested``.
    """
    c = np.asarray(c, dtype=float)
    z = np.asarray(conditioning, dtype=float).reshape(len(c), -1)
    v = np.asarray(tested, dtype=float).reshape(len(c), -1)
    *_, ll0 = fit_logistic(z, c)
    *_, ll1 = fit_logistic(np.column_stack([z, v]), c)
    stat = max(0.0, 2.0 * (ll1 - ll0))
    return float(stats.chi2.sf(stat, df=v.shape[1]))


def pooled(source: Dataset, target: Dataset) -> Dataset:
    return Dataset(
        source.schema,
        source.columns,
        np.vstack([source.values, target.values]),
        np.vstack([source.mask, target.mask]),
        source.blocks,
    )
