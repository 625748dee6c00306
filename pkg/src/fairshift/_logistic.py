"""Small L2-regularised logistic regression fitted by Newton's method."""

from __future__ import annotations

import numpy as np
from scipy.special import expit


def fit_logistic(x: np.ndarray, t: np.ndarray, l2: float = 0.0, iters: int = 50, tol: float = 1e-10):
    """Fit ``P(t=1 | x) = expit(x @ beta + c)``; ``t`` in {0, 1}.

    Returns ``(beta, c, loglik)``.  The intercept is not penalised.
    """
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    n = x.shape[0]
    a = np.column_stack([np.ones(n), x])
    theta = np.zeros(a.shape[1])
    pen = np.full(a.shape[1], l2)
    pen[0] = 0.0
    for _ in range(iters):
        p = expit(a @ theta)
        grad = a.T @ (t - p) - pen * theta
        hess = (a * (p * (1 - p))[:, None]).T @ a + np.diag(pen) + 1e-10 * np.eye(a.shape[1])
        step = np.linalg.solve(hess, grad)
        theta = theta + step
        if np.max(np.abs(step)) < tol:
            break
    eta = a @ theta
    loglik = float(np.sum(t * eta - np.logaddexp(0.0, eta)))
    return theta[1:], float(theta[0]), loglik
