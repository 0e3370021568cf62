"""Shared domain types.

Conventions fixed here once for the whole package:

* everything is time-major: row t of a panel / factor / probability array
  is period t;
* regime probabilities are length-2 vectors ordered (state 1, state 2);
* cross-probability 4-vectors are ordered by (s_t, s_{t-1}) as
  (1,1), (2,1), (1,2), (2,2); component (j, i) goes with transition
  probability p_ij, so the matching multiplier vector is the row-major
  ravel (p11, p12, p21, p22) of the transition matrix;
* all containers are immutable after construction and safe to share
  across workers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import (
    DegenerateChainError,
    NonFiniteError,
    TooSmallError,
)

#: Relative factor applied to the grand sample variance of a panel to
#: obtain the idiosyncratic variance floor. Prevents degenerate Gaussian
#: densities when a regime collapses onto few observations.
VARIANCE_FLOOR_RATIO = 1e-10

# Ordering of the cross-probability components: (s_t, s_{t-1}) pairs.
CROSS_ORDER = ((1, 1), (2, 1), (1, 2), (2, 2))


def _frozen_array(x, dtype=float) -> np.ndarray:
    """Copy to a C-contiguous read-only float array."""
    out = np.array(x, dtype=dtype, order="C")
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Panel:
    """T x N observation matrix, rows are time periods.

    Construct through :func:`validate_panel`, which enforces finiteness and
    the minimal dimensions.
    """

    data: np.ndarray

    @property
    def t_len(self) -> int:
        return self.data.shape[0]

    @property
    def n_len(self) -> int:
        return self.data.shape[1]

    def variance_floor(self) -> float:
        """Idiosyncratic variance floor for this panel."""
        return VARIANCE_FLOOR_RATIO * float(np.var(self.data))


def validate_panel(data) -> Panel:
    """Validate a raw matrix and wrap it as an immutable :class:`Panel`.

    Raises
    ------
    NonFiniteError
        If any entry is NaN or infinite (reports the first offending
        row/column, 0-based).
    TooSmallError
        If T < 2 or N < 2.
    """
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 2:
        raise TooSmallError(f"panel must be 2-dimensional, got ndim={arr.ndim}")
    t_len, n_len = arr.shape
    if t_len < 2 or n_len < 2:
        raise TooSmallError(f"panel needs T >= 2 and N >= 2, got T={t_len}, N={n_len}")
    bad = ~np.isfinite(arr)
    if bad.any():
        row, col = np.argwhere(bad)[0]
        raise NonFiniteError(int(row), int(col))
    return Panel(data=_frozen_array(arr))


@dataclass(frozen=True)
class TransitionMatrix:
    """2x2 row-stochastic matrix, p[i, j] = P(s_{t+1} = j+1 | s_t = i+1)."""

    p: np.ndarray

    def __post_init__(self):
        arr = _frozen_array(self.p)
        if arr.shape != (2, 2):
            raise ValueError(f"transition matrix must be 2x2, got {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("transition matrix has non-finite entries")
        if (arr < 0).any() or (arr > 1).any():
            raise ValueError(f"transition probabilities outside [0, 1]: {arr}")
        rows = arr.sum(axis=1)
        if np.abs(rows - 1.0).max() > 1e-12:
            raise ValueError(f"transition matrix rows must sum to 1, got sums {rows}")
        object.__setattr__(self, "p", arr)

    @property
    def p11(self) -> float:
        return float(self.p[0, 0])

    @property
    def p22(self) -> float:
        return float(self.p[1, 1])

    def is_irreducible(self) -> bool:
        """True when both states can be left (p11 < 1 and p22 < 1)."""
        return self.p11 < 1.0 and self.p22 < 1.0

    def relabeled(self) -> "TransitionMatrix":
        """The same chain with the two state labels swapped."""
        q = self.p
        return TransitionMatrix(
            np.array([[q[1, 1], q[1, 0]], [q[0, 1], q[0, 0]]])
        )


@dataclass(frozen=True)
class StateProbabilities:
    """Length-2 probability vector over the two regimes."""

    values: np.ndarray

    def __post_init__(self):
        arr = _frozen_array(self.values).reshape(-1)
        if arr.shape != (2,):
            raise ValueError(f"state probabilities must have length 2, got {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("state probabilities have non-finite entries")
        if (arr < 0).any() or (arr > 1).any():
            raise ValueError(f"state probabilities outside [0, 1]: {arr}")
        if abs(arr.sum() - 1.0) > 1e-12:
            raise ValueError(f"state probabilities must sum to 1, got {arr.sum()!r}")
        object.__setattr__(self, "values", arr)


#: Deterministic filter initialisations xi_{0|0}.
STATE_1 = StateProbabilities(np.array([1.0, 0.0]))
STATE_2 = StateProbabilities(np.array([0.0, 1.0]))


def unconditional_probs(trans: TransitionMatrix) -> StateProbabilities:
    """Stationary (long-run) state probabilities of the chain.

    Returns ((1 - p22) / (2 - p11 - p22), (1 - p11) / (2 - p11 - p22)).

    Raises
    ------
    DegenerateChainError
        If p11 = p22 = 1 (two absorbing states, no unique stationary law).
    """
    leave2 = 1.0 - trans.p22
    leave1 = 1.0 - trans.p11
    denom = leave1 + leave2
    if denom <= 0.0:
        raise DegenerateChainError(
            "p11 = p22 = 1: the chain is reducible and has no unique "
            "stationary distribution"
        )
    return StateProbabilities(np.array([leave2 / denom, leave1 / denom]))


@dataclass(frozen=True)
class ModelParams:
    """Loadings, idiosyncratic variances and transition matrix.

    ``b1`` and ``b2`` are N x k loading matrices on the stacked factor
    vector (k = r1 + r2); the variance vectors hold the diagonal of the
    per-regime idiosyncratic covariance.
    """

    b1: np.ndarray
    b2: np.ndarray
    sigma_e1_diag: np.ndarray
    sigma_e2_diag: np.ndarray
    trans: TransitionMatrix

    def __post_init__(self):
        b1 = _frozen_array(self.b1)
        b2 = _frozen_array(self.b2)
        s1 = _frozen_array(self.sigma_e1_diag).reshape(-1)
        s2 = _frozen_array(self.sigma_e2_diag).reshape(-1)
        if b1.ndim != 2 or b1.shape != b2.shape:
            raise ValueError(
                f"loading matrices must share an N x k shape, got {b1.shape} vs {b2.shape}"
            )
        if not (np.isfinite(b1).all() and np.isfinite(b2).all()):
            raise ValueError("loading matrices have non-finite entries")
        n = b1.shape[0]
        if s1.shape != (n,) or s2.shape != (n,):
            raise ValueError("variance vectors must have length N")
        if (s1 <= 0).any() or (s2 <= 0).any():
            raise ValueError("idiosyncratic variances must be strictly positive")
        object.__setattr__(self, "b1", b1)
        object.__setattr__(self, "b2", b2)
        object.__setattr__(self, "sigma_e1_diag", s1)
        object.__setattr__(self, "sigma_e2_diag", s2)

    @property
    def n_series(self) -> int:
        return self.b1.shape[0]

    @property
    def n_factors(self) -> int:
        return self.b1.shape[1]


@dataclass(frozen=True)
class FactorSpace:
    """PCA estimate of the equivalent linear factor model.

    ``a_hat`` is N x k with (a_hat' a_hat) / N = I_k, ``g_hat`` is T x k
    with rows g_t = a_hat' x_t / N, and ``eigvals`` holds the top-k
    eigenvalues of the (uncentred, divisor-T) sample covariance in
    descending order.
    """

    a_hat: np.ndarray
    g_hat: np.ndarray
    eigvals: np.ndarray

    def __post_init__(self):
        a = _frozen_array(self.a_hat)
        g = _frozen_array(self.g_hat)
        v = _frozen_array(self.eigvals).reshape(-1)
        if a.ndim != 2 or g.ndim != 2 or a.shape[1] != g.shape[1]:
            raise ValueError("loadings and factors must share the factor dimension")
        if v.shape != (a.shape[1],):
            raise ValueError("eigenvalue vector length must equal the factor count")
        if (np.diff(v) > 0).any():
            raise ValueError("eigenvalues must be in descending order")
        object.__setattr__(self, "a_hat", a)
        object.__setattr__(self, "g_hat", g)
        object.__setattr__(self, "eigvals", v)

    @property
    def n_factors(self) -> int:
        return self.a_hat.shape[1]


@dataclass(frozen=True)
class ProbabilityPath:
    """Per-period regime probabilities from one filter + smoother pass.

    ``predicted``, ``filtered`` and ``smoothed`` are T x 2; ``cross`` is
    T x 4 ordered per :data:`CROSS_ORDER`, where row t holds the joint
    posterior of (s_t, s_{t-1}) and row 0 pairs s_1 with the filter prior
    state s_0. ``loglik`` is the accumulated log of the per-step
    normalisation constants.
    """

    predicted: np.ndarray
    filtered: np.ndarray
    smoothed: np.ndarray
    cross: np.ndarray
    loglik: float

    def __post_init__(self):
        pred = _frozen_array(self.predicted)
        filt = _frozen_array(self.filtered)
        smo = _frozen_array(self.smoothed)
        cro = _frozen_array(self.cross)
        t_len = pred.shape[0]
        for name, arr, width in (
            ("predicted", pred, 2),
            ("filtered", filt, 2),
            ("smoothed", smo, 2),
            ("cross", cro, 4),
        ):
            if arr.shape != (t_len, width):
                raise ValueError(f"{name} must be {t_len} x {width}, got {arr.shape}")
            if not np.isfinite(arr).all():
                raise ValueError(f"{name} has non-finite entries")
            if arr.min() < -1e-12 or arr.max() > 1.0 + 1e-9:
                raise ValueError(f"{name} entries leave [0, 1]")
            sums = arr.sum(axis=1)
            if np.abs(sums - 1.0).max() > 1e-10:
                raise ValueError(f"{name} rows must sum to 1 within 1e-10")
        # Marginalising the cross over the s_{t-1} index must reproduce the
        # smoothed probabilities (exact for t >= 2, and by construction of
        # the t = 1 row here as well).
        marg = cro[:, :2] + cro[:, 2:]
        if np.abs(marg - smo).max() > 1e-10:
            raise ValueError("cross probabilities do not marginalise to smoothed")
        object.__setattr__(self, "predicted", pred)
        object.__setattr__(self, "filtered", filt)
        object.__setattr__(self, "smoothed", smo)
        object.__setattr__(self, "cross", cro)
        object.__setattr__(self, "loglik", float(self.loglik))

    @property
    def t_len(self) -> int:
        return self.predicted.shape[0]


@dataclass(frozen=True)
class RngHandle:
    """Seedable, splittable randomness source.

    Identical (seed, stream) pairs produce identical draw sequences across
    runs and platforms; Monte Carlo replication r uses stream id r so that
    serial and parallel execution agree bit for bit.
    """

    seed: int
    stream: int = 0

    def __post_init__(self):
        if not (0 <= int(self.seed) < 2**64):
            raise ValueError("seed must fit an unsigned 64-bit integer")
        if not (0 <= int(self.stream) < 2**64):
            raise ValueError("stream must fit an unsigned 64-bit integer")

    def generator(self) -> np.random.Generator:
        """A fresh generator positioned at the start of this stream."""
        seq = np.random.SeedSequence(entropy=int(self.seed), spawn_key=(int(self.stream),))
        return np.random.default_rng(seq)

    def substream(self, stream: int) -> "RngHandle":
        return RngHandle(seed=self.seed, stream=stream)
