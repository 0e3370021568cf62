"""Regime-probability recursions: Hamilton forward filter, Kim backward
smoother and smoothed cross-probabilities.

The regime-conditional Gaussian densities underflow in linear scale once N
reaches a few hundred, so the filter update mixes log densities with
log-sum-exp and only stores normalised probabilities. The smoother then
runs safely in linear arithmetic because every input is O(1).
"""

from __future__ import annotations

import numpy as np

from .exceptions import (
    DegeneratePredictionError,
    DimensionMismatchError,
    NonFiniteError,
    ZeroPredictedError,
)
from .types import (
    ModelParams,
    Panel,
    ProbabilityPath,
    StateProbabilities,
    TransitionMatrix,
)

_LOG_2PI = float(np.log(2.0 * np.pi))
_PRED_GUARD = 1e-300


def regime_log_densities(
    panel: Panel, g_hat: np.ndarray, params: ModelParams
) -> np.ndarray:
    """Log density of each observation under each regime.

    Entry (t, j) is log f(x_t | s_t = j+1, g_t) for the diagonal Gaussian

        -(N/2) log(2 pi) - 1/2 sum_i log s2_ji
        - 1/2 sum_i (x_it - b_ji' g_t)^2 / s2_ji.

    The (2 pi)^(-N/2) constant cancels in the filter but keeps log
    likelihoods comparable across panel widths.
    """
    x = panel.data
    g = np.asarray(g_hat, dtype=float)
    t_len, n = x.shape
    if g.shape[0] != t_len:
        raise DimensionMismatchError(
            f"factors have {g.shape[0]} rows but the panel has {t_len}"
        )
    if params.n_series != n or params.n_factors != g.shape[1]:
        raise DimensionMismatchError(
            f"params are for N={params.n_series}, k={params.n_factors}; "
            f"got panel N={n}, factors k={g.shape[1]}"
        )
    out = np.empty((t_len, 2))
    const = -0.5 * n * _LOG_2PI
    for j, (b, s2) in enumerate(
        [(params.b1, params.sigma_e1_diag), (params.b2, params.sigma_e2_diag)]
    ):
        resid = x - g @ b.T
        out[:, j] = const - 0.5 * np.log(s2).sum() - 0.5 * (resid**2 / s2).sum(axis=1)
    if not np.isfinite(out).all():
        t, j = np.argwhere(~np.isfinite(out))[0]
        raise NonFiniteError(int(t), int(j), "non-finite regime log density")
    return out


def hamilton_filter(
    log_eta: np.ndarray,
    trans: TransitionMatrix,
    xi0: StateProbabilities,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Forward recursion for predicted and filtered regime probabilities.

    Starting from xi_{0|0} = ``xi0``, alternates the prediction step
    xi_{t|t-1} = P' xi_{t-1|t-1} with the Bayes update performed on log
    densities:

        log num_j = log eta_{jt} + log xi_{j,t|t-1},
        xi_{t|t}  = exp(num - logsumexp(num)).

    Returns (predicted, filtered, loglik) where ``loglik`` accumulates the
    per-step normalisers logsumexp(num) = log(eta_t' xi_{t|t-1}).
    """
    log_eta = np.asarray(log_eta, dtype=float)
    if log_eta.ndim != 2 or log_eta.shape[1] != 2:
        raise DimensionMismatchError(f"log_eta must be T x 2, got {log_eta.shape}")
    t_len = log_eta.shape[0]
    # Scalar arithmetic throughout: IEEE addition is commutative, so writing
    # each two-term sum explicitly makes swapping the regime labels swap the
    # outputs bitwise, which matrix kernels do not guarantee.
    p11, p12 = float(trans.p[0, 0]), float(trans.p[0, 1])
    p21, p22 = float(trans.p[1, 0]), float(trans.p[1, 1])
    predicted = np.empty((t_len, 2))
    filtered = np.empty((t_len, 2))
    loglik = 0.0
    cur1, cur2 = float(xi0.values[0]), float(xi0.values[1])
    with np.errstate(divide="ignore"):
        for t in range(t_len):
            pred1 = p11 * cur1 + p21 * cur2
            pred2 = p12 * cur1 + p22 * cur2
            if pred1 == 0.0 or pred2 == 0.0:
                dead = 0 if pred1 == 0.0 else 1
                if log_eta[t, dead] >= log_eta[t, 1 - dead]:
                    raise DegeneratePredictionError(
                        f"predicted probability of state {dead + 1} underflowed "
                        f"to 0 at t={t} while its density dominates"
                    )
            num1 = log_eta[t, 0] + np.log(pred1)
            num2 = log_eta[t, 1] + np.log(pred2)
            norm = np.logaddexp(num1, num2)
            cur1 = np.exp(num1 - norm)
            cur2 = np.exp(num2 - norm)
            # Adding O(1) log probabilities to log densities of magnitude
            # |log eta| rounds at |log eta| * eps, so the exponentials may
            # miss an exact unit sum by ~1e-12 for very wide panels; one
            # explicit renormalisation removes that residue.
            total = cur1 + cur2
            cur1 /= total
            cur2 /= total
            predicted[t, 0] = pred1
            predicted[t, 1] = pred2
            filtered[t, 0] = cur1
            filtered[t, 1] = cur2
            loglik += norm
    return predicted, filtered, float(loglik)


def kim_smoother(
    predicted: np.ndarray, filtered: np.ndarray, trans: TransitionMatrix
) -> np.ndarray:
    """Backward recursion for full-sample smoothed probabilities.

    xi_{T|T} = xi_{T|T} (filter output), then for t = T-1, ..., 1

        xi_{t|T} = [P (xi_{t+1|T} / xi_{t+1|t})] * xi_{t|t}.

    Raises :class:`ZeroPredictedError` when a predicted probability that
    must be divided by is below 1e-300.
    """
    predicted = np.asarray(predicted, dtype=float)
    filtered = np.asarray(filtered, dtype=float)
    t_len = predicted.shape[0]
    smoothed = np.empty_like(filtered)
    smoothed[-1] = filtered[-1]
    # scalar arithmetic for bitwise label symmetry, as in hamilton_filter
    p11, p12 = float(trans.p[0, 0]), float(trans.p[0, 1])
    p21, p22 = float(trans.p[1, 0]), float(trans.p[1, 1])
    for t in range(t_len - 2, -1, -1):
        if predicted[t + 1].min() < _PRED_GUARD:
            raise ZeroPredictedError(
                f"predicted probability below {_PRED_GUARD:g} at t={t + 1}"
            )
        ratio1 = smoothed[t + 1, 0] / predicted[t + 1, 0]
        ratio2 = smoothed[t + 1, 1] / predicted[t + 1, 1]
        smoothed[t, 0] = (p11 * ratio1 + p12 * ratio2) * filtered[t, 0]
        smoothed[t, 1] = (p21 * ratio1 + p22 * ratio2) * filtered[t, 1]
    return smoothed


def smoothed_cross_probs(
    predicted: np.ndarray,
    filtered: np.ndarray,
    smoothed: np.ndarray,
    trans: TransitionMatrix,
    xi0: StateProbabilities,
) -> np.ndarray:
    """Joint posterior of consecutive states, T x 4.

    Row t (t >= 2) holds P(s_t = j, s_{t-1} = i | data) in the order
    (1,1), (2,1), (1,2), (2,2):

        cross[(j, i), t] = p_ij (xi_{j,t|T} / xi_{j,t|t-1}) xi_{i,t-1|t-1}.

    Row 0 pairs s_1 with the pre-sample state s_0 ~ ``xi0`` through the
    same identity, so every row sums to 1 and marginalising over the
    s_{t-1} index reproduces the smoothed probabilities at every t.
    """
    predicted = np.asarray(predicted, dtype=float)
    filtered = np.asarray(filtered, dtype=float)
    smoothed = np.asarray(smoothed, dtype=float)
    t_len = predicted.shape[0]
    if predicted.min() < _PRED_GUARD:
        t_bad = int(np.argwhere(predicted < _PRED_GUARD)[0][0])
        raise ZeroPredictedError(
            f"predicted probability below {_PRED_GUARD:g} at t={t_bad}"
        )
    p = trans.p
    ratio = smoothed / predicted
    prev = np.vstack([xi0.values, filtered[:-1]])
    cross = np.empty((t_len, 4))
    # columns: (j, i) = (1,1), (2,1), (1,2), (2,2)
    cross[:, 0] = p[0, 0] * ratio[:, 0] * prev[:, 0]
    cross[:, 1] = p[0, 1] * ratio[:, 1] * prev[:, 0]
    cross[:, 2] = p[1, 0] * ratio[:, 0] * prev[:, 1]
    cross[:, 3] = p[1, 1] * ratio[:, 1] * prev[:, 1]
    return cross


def filter_smoother_pass(
    log_eta: np.ndarray,
    trans: TransitionMatrix,
    xi0: StateProbabilities,
) -> ProbabilityPath:
    """One full forward-backward pass packaged as a :class:`ProbabilityPath`."""
    predicted, filtered, loglik = hamilton_filter(log_eta, trans, xi0)
    smoothed = kim_smoother(predicted, filtered, trans)
    cross = smoothed_cross_probs(predicted, filtered, smoothed, trans, xi0)
    return ProbabilityPath(
        predicted=predicted,
        filtered=filtered,
        smoothed=smoothed,
        cross=cross,
        loglik=loglik,
    )
