"""EM estimation of the switching factor model.

The E step is the filter/smoother pass of :mod:`msfactor.filtering`; the
M step has closed forms: weighted least squares for the loadings, weighted
mean squared residuals for the variances, and normalised smoothed
transition counts for the chain. States are relabeled every iteration so
that state 1 is the one with the highest unconditional probability.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import EmptyRegimeError, SingularGramError
from .filtering import filter_smoother_pass, regime_log_densities
from .pca import FactorSpace
from .types import (
    STATE_1,
    ModelParams,
    Panel,
    ProbabilityPath,
    StateProbabilities,
    TransitionMatrix,
    unconditional_probs,
)

__all__ = [
    "EmConfig",
    "EmResult",
    "expected_loglik",
    "init_params",
    "m_step_loadings",
    "m_step_transition",
    "m_step_variances",
    "relabel_states",
    "run_em",
]

_GRAM_COND_LIMIT = 1e12


@dataclass(frozen=True)
class EmConfig:
    """EM loop controls.

    ``omega1`` and ``omega2`` offset the initial transition matrix away
    from the uninformative all-0.5 point (which stalls the algorithm);
    requiring omega1 > omega2 makes state 1 the more persistent, hence
    most probable, one from the first iteration on.
    """

    max_iter: int = 100
    epsilon: float = 1e-6
    omega1: float = 0.2
    omega2: float = 0.1
    xi0: StateProbabilities = STATE_1

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")
        if not (0.0 < self.omega2 < self.omega1 < 0.5):
            raise ValueError(
                f"need 0 < omega2 < omega1 < 0.5, got omega1={self.omega1}, "
                f"omega2={self.omega2}"
            )


@dataclass(frozen=True)
class EmResult:
    """Final estimates of one EM run.

    ``params`` come from the last M step; ``path`` from one extra
    filter/smoother pass under those final parameters. ``loglik_trace``
    holds one log-likelihood per M step: entry k is the filter
    log-likelihood attained by the parameters the (k+1)-th M step
    produced, with the last entry coming from the closing pass. The EM
    ascent property makes the trace non-decreasing. Non-convergence
    within ``max_iter`` is reported through ``converged``, not raised.
    """

    params: ModelParams
    path: ProbabilityPath
    loglik_trace: tuple[float, ...]
    iterations: int
    converged: bool


def init_params(panel: Panel, fs: FactorSpace, cfg: EmConfig) -> ModelParams:
    """PCA-based starting point.

    Both regimes start from the linear-model loadings (b1 = b2 = a_hat)
    and from the diagonal of the PCA residual second-moment matrix; the
    initial transition matrix is [[0.5+w1, 0.5-w1], [0.5-w2, 0.5+w2]].
    """
    resid = panel.data - fs.g_hat @ fs.a_hat.T
    sigma = np.maximum((resid**2).mean(axis=0), panel.variance_floor())
    w1, w2 = cfg.omega1, cfg.omega2
    trans = TransitionMatrix(np.array([[0.5 + w1, 0.5 - w1], [0.5 - w2, 0.5 + w2]]))
    return ModelParams(
        b1=fs.a_hat,
        b2=fs.a_hat,
        sigma_e1_diag=sigma,
        sigma_e2_diag=sigma,
        trans=trans,
    )


def m_step_loadings(
    panel: Panel, g_hat: np.ndarray, smoothed: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Per-regime weighted least squares of the panel on the factors.

        b_j = (sum_t w_jt x_t g_t') (sum_t w_jt g_t g_t')^-1,

    with w_jt the smoothed probability of regime j at t. Raises
    :class:`SingularGramError` when a weighted Gram matrix is (near)
    singular, which signals that the regime received no weight.
    """
    x = panel.data
    g = np.asarray(g_hat, dtype=float)
    out = []
    for j in range(2):
        w = smoothed[:, j]
        gram = (g * w[:, None]).T @ g
        cond = np.linalg.cond(gram)
        if not np.isfinite(cond) or cond > _GRAM_COND_LIMIT:
            raise SingularGramError(regime=j + 1, cond=float(cond))
        cross_moment = (x * w[:, None]).T @ g
        out.append(np.linalg.solve(gram.T, cross_moment.T).T)
    return out[0], out[1]


def m_step_variances(
    panel: Panel,
    g_hat: np.ndarray,
    b1: np.ndarray,
    b2: np.ndarray,
    smoothed: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-regime weighted mean squared residuals, floored.

        sigma2_ji = sum_t w_jt (x_it - b_ji' g_t)^2 / sum_t w_jt.

    Off-diagonal covariances are identically zero under the exact-factor
    quasi-likelihood, so only the diagonal is returned.
    """
    x = panel.data
    g = np.asarray(g_hat, dtype=float)
    t_len = x.shape[0]
    floor = panel.variance_floor()
    out = []
    for j, b in enumerate([b1, b2]):
        w = smoothed[:, j]
        total = w.sum()
        if total < 1e-8 * t_len:
            raise EmptyRegimeError(
                f"regime {j + 1} has total smoothed weight {total:.3e}"
            )
        resid2 = (x - g @ b.T) ** 2
        out.append(np.maximum(w @ resid2 / total, floor))
    return out[0], out[1]


def m_step_transition(cross: np.ndarray, smoothed: np.ndarray) -> TransitionMatrix:
    """Transition probabilities from smoothed transition counts.

        p_ij = sum_{t=1}^T cross[(j, i), t]
               / (s0_i + sum_{t=1}^{T-1} smoothed[i, t]),

    where s0_i = sum_j cross[(j, i), 1] is the t = 0 state probability
    implied by the first cross row (zero when that row carries no mass).
    The adding-up identity sum_j cross[(j, i), t] = smoothed[i, t-1] then
    makes the rows sum to one by construction, and the estimator is the
    exact maximiser of the expected complete-data log-likelihood, which is
    what guarantees the EM ascent property of the likelihood trace.
    """
    cross = np.asarray(cross, dtype=float)
    smoothed = np.asarray(smoothed, dtype=float)
    numer = cross.sum(axis=0)  # columns: (1,1), (2,1), (1,2), (2,2)
    s0 = np.array([cross[0, 0] + cross[0, 1], cross[0, 2] + cross[0, 3]])
    denom = s0 + smoothed[:-1].sum(axis=0)
    if denom.min() <= 0.0:
        empty = int(np.argmin(denom)) + 1
        raise EmptyRegimeError(f"regime {empty} has zero smoothed weight over t < T")
    p = np.array(
        [
            [numer[0] / denom[0], numer[1] / denom[0]],
            [numer[2] / denom[1], numer[3] / denom[1]],
        ]
    )
    return TransitionMatrix(np.clip(p, 0.0, 1.0))


def expected_loglik(
    log_eta: np.ndarray,
    smoothed: np.ndarray,
    cross: np.ndarray,
    trans: TransitionMatrix,
) -> float:
    """Expected complete-data log-likelihood under the given posteriors.

        sum_t sum_j w_jt log eta_jt
        + sum_{t>=2} sum_{i,j} cross[(j,i), t] log p_ij,

    with the convention that zero-weight terms contribute zero even when
    the corresponding log probability is -inf.
    """
    log_eta = np.asarray(log_eta, dtype=float)
    smoothed = np.asarray(smoothed, dtype=float)
    cross = np.asarray(cross, dtype=float)
    if smoothed.shape != log_eta.shape or cross.shape[0] != log_eta.shape[0]:
        raise ValueError("log_eta, smoothed and cross must cover the same periods")
    density_part = float((smoothed * log_eta).sum())
    with np.errstate(divide="ignore", invalid="ignore"):
        log_rho = np.log(trans.p.reshape(-1))  # (p11, p12, p21, p22)
        weights = cross[1:]
        terms = np.where(weights > 0.0, weights * log_rho[None, :], 0.0)
    return density_part + float(terms.sum())


def relabel_states(
    params: ModelParams, path: ProbabilityPath
) -> tuple[ModelParams, ProbabilityPath]:
    """Give label 1 to the state with the highest unconditional probability.

    When a swap is needed, loadings, variances and the transition matrix
    are permuted together with every probability column of ``path`` (cross
    columns reverse, consistent with the (s_t, s_{t-1}) ordering). Applying
    the function twice equals applying it once.
    """
    stationary = unconditional_probs(params.trans).values
    if stationary[0] >= stationary[1]:
        return params, path
    swapped = ModelParams(
        b1=params.b2,
        b2=params.b1,
        sigma_e1_diag=params.sigma_e2_diag,
        sigma_e2_diag=params.sigma_e1_diag,
        trans=params.trans.relabeled(),
    )
    swapped_path = ProbabilityPath(
        predicted=path.predicted[:, ::-1],
        filtered=path.filtered[:, ::-1],
        smoothed=path.smoothed[:, ::-1],
        cross=path.cross[:, ::-1],
        loglik=path.loglik,
    )
    return swapped, swapped_path


def _relative_change(current: float, previous: float) -> float:
    change = abs(current - previous)
    scale = 0.5 * abs(current + previous)
    if scale == 0.0:
        return 0.0 if change == 0.0 else np.inf
    return change / scale


def run_em(panel: Panel, fs: FactorSpace, cfg: EmConfig) -> EmResult:
    """Full EM loop with PCA factors held fixed.

    Stops at the first iteration where the relative symmetric change of
    two successive log-likelihoods drops below ``cfg.epsilon``, or at
    ``cfg.max_iter``. On convergence one more M step is taken and the
    final probability path comes from one extra E step under those
    parameters, whose log-likelihood closes the trace.
    """
    g_hat = fs.g_hat
    params = init_params(panel, fs, cfg)
    # The pre-sample state prior follows the relabeling: swapping the
    # parameter labels without swapping xi0 would change the likelihood,
    # and for panels with near-balanced regimes that turns per-iteration
    # relabeling into a limit cycle. Swapped jointly, every relabel is an
    # exact invariance and the ascent property survives untouched.
    xi0 = cfg.xi0
    trace: list[float] = []
    converged = False
    iterations = 0
    for k in range(cfg.max_iter):
        log_eta = regime_log_densities(panel, g_hat, params)
        path = filter_smoother_pass(log_eta, params.trans, xi0)
        if k >= 1:
            # path.loglik is the value attained by the previous M step.
            trace.append(path.loglik)
            # The symmetric starting point (b1 = b2) is an exact EM fixed
            # point, and the escape from it begins with tiny likelihood
            # steps that then grow by orders of magnitude. Declaring
            # convergence therefore also requires the step sizes to be
            # shrinking, which holds near an optimum but not on the
            # escape path.
            if (
                len(trace) >= 3
                and _relative_change(trace[-1], trace[-2]) < cfg.epsilon
                and abs(trace[-1] - trace[-2]) <= abs(trace[-2] - trace[-3])
            ):
                converged = True
        b1, b2 = m_step_loadings(panel, g_hat, path.smoothed)
        s1, s2 = m_step_variances(panel, g_hat, b1, b2, path.smoothed)
        trans = m_step_transition(path.cross, path.smoothed)
        new_params = ModelParams(
            b1=b1, b2=b2, sigma_e1_diag=s1, sigma_e2_diag=s2, trans=trans
        )
        params, path = relabel_states(new_params, path)
        if params is not new_params:
            xi0 = StateProbabilities(xi0.values[::-1])
        iterations = k + 1
        if converged:
            break
    final_path = filter_smoother_pass(
        regime_log_densities(panel, g_hat, params), params.trans, xi0
    )
    params, final_path = relabel_states(params, final_path)
    trace.append(final_path.loglik)
    return EmResult(
        params=params,
        path=final_path,
        loglik_trace=tuple(trace),
        iterations=iterations,
        converged=converged,
    )
