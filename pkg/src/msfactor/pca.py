"""Principal-component estimation of the equivalent linear factor model
and eigenvalue-ratio selection of the factor count.

The covariance here is the uncentred second-moment matrix with divisor T;
removing unconditional means is a separate, explicit preprocessing step
(:func:`demean_panel`), never applied implicitly.
"""

from __future__ import annotations

import numpy as np

from .exceptions import KTooLargeError
from .types import FactorSpace, Panel

#: Eigenvalues below this fraction of the largest one are treated as zero
#: by the eigenvalue-ratio criterion.
EIGENVALUE_FLOOR_RATIO = 1e-12


def demean_panel(panel: Panel) -> Panel:
    """Subtract each column's sample mean; columns end up mean-zero."""
    data = panel.data - panel.data.mean(axis=0)
    data.setflags(write=False)
    return Panel(data=data)


def sample_covariance(panel: Panel) -> np.ndarray:
    """Uncentred N x N second-moment matrix T^-1 sum_t x_t x_t'."""
    x = panel.data
    s = x.T @ x / panel.t_len
    return (s + s.T) / 2.0


def _descending_eigh(sigma: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues/vectors sorted descending; exact ties keep ascending-index order."""
    vals, vecs = np.linalg.eigh(sigma)
    order = np.argsort(-vals, kind="stable")
    return vals[order], vecs[:, order]


def estimate_factor_space(panel: Panel, k: int) -> FactorSpace:
    """PCA loadings, factors and eigenvalues for a k-factor linear model.

    Loadings are sqrt(N) times the top-k eigenvectors of the sample
    covariance (so a_hat' a_hat / N = I_k); factors are the projections
    g_t = a_hat' x_t / N. Each eigenvector's sign is fixed so its
    largest-magnitude entry is positive.
    """
    n, t_len = panel.n_len, panel.t_len
    if not (1 <= k <= min(n, t_len)):
        raise KTooLargeError(f"k={k} outside [1, min(N, T)] = [1, {min(n, t_len)}]")
    vals, vecs = _descending_eigh(sample_covariance(panel))
    vecs = vecs[:, :k].copy()
    for col in range(k):
        peak = np.argmax(np.abs(vecs[:, col]))
        if vecs[peak, col] < 0:
            vecs[:, col] = -vecs[:, col]
    a_hat = np.sqrt(n) * vecs
    g_hat = panel.data @ a_hat / n
    return FactorSpace(a_hat=a_hat, g_hat=g_hat, eigvals=vals[:k])


def select_num_factors_er(panel: Panel, k_max: int) -> int:
    """Eigenvalue-ratio choice of the factor count.

    Returns the k in 1..k_max maximising mu_k / mu_{k+1} over the
    descending eigenvalues of the sample covariance, ties broken toward
    the smallest k. Eigenvalues below 1e-12 of the largest count as zero;
    a zero denominator under a nonzero numerator wins outright.
    """
    n, t_len = panel.n_len, panel.t_len
    if k_max < 1 or k_max + 1 > min(n, t_len):
        raise KTooLargeError(
            f"k_max={k_max} needs 1 <= k_max <= min(N, T) - 1 = {min(n, t_len) - 1}"
        )
    vals, _ = _descending_eigh(sample_covariance(panel))
    mu = vals[: k_max + 1].copy()
    floor = EIGENVALUE_FLOOR_RATIO * max(mu[0], 0.0)
    mu[mu < floor] = 0.0
    ratios = np.empty(k_max)
    for k in range(1, k_max + 1):
        num, den = mu[k - 1], mu[k]
        if den > 0.0:
            ratios[k - 1] = num / den
        else:
            ratios[k - 1] = np.inf if num > 0.0 else 0.0
    return int(np.argmax(ratios)) + 1
