"""Data-generating process for the Monte Carlo study.

Generates a two-state latent chain, AR(1) factors whitened to an exact
identity second moment, N(1,1) loadings rotated to diagonal Gram matrices,
and AR(1) idiosyncratic noise mixed through per-regime covariance square
roots, then rescales the noise to a target noise-to-signal ratio.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import (
    NotPositiveDefiniteError,
    RankDeficientError,
)
from .types import Panel, RngHandle, TransitionMatrix, unconditional_probs, validate_panel


@dataclass(frozen=True)
class SimConfig:
    """Knobs of the simulated two-regime factor panel.

    ``r`` is the factor count per regime (r1 = r2 = r, shared factors);
    ``tau`` controls the banded part of the idiosyncratic covariances;
    ``rho_idio_max`` is the upper bound of the per-series idiosyncratic
    AR coefficients (0 disables serial correlation).
    """

    n: int = 100
    t: int = 500
    r: int = 1
    p11: float = 0.9
    p22: float = 0.7
    rho_f: float = 0.0
    tau: float = 0.0
    rho_idio_max: float = 0.0
    noise_to_signal: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.r < 1:
            raise ValueError("r must be >= 1")
        if self.n < 2 or self.t < 2:
            raise ValueError("need N >= 2 and T >= 2")
        if not (0.0 < self.p11 < 1.0 and 0.0 < self.p22 < 1.0):
            raise ValueError("p11 and p22 must lie strictly in (0, 1)")
        if not (0.0 <= self.rho_f < 1.0):
            raise ValueError("rho_f must lie in [0, 1)")
        if not (0.0 <= self.tau < 1.0):
            raise ValueError("tau must lie in [0, 1)")
        if not (0.0 <= self.rho_idio_max < 1.0):
            raise ValueError("rho_idio_max must lie in [0, 1)")
        if self.noise_to_signal <= 0.0:
            raise ValueError("noise_to_signal must be positive")


@dataclass(frozen=True)
class SimTruth:
    """A simulated panel together with everything latent that produced it."""

    panel: Panel
    states: np.ndarray       # (T,) values in {1, 2}
    xi: np.ndarray           # (T, 2) one-hot
    f: np.ndarray            # (T, r)
    lambda1: np.ndarray      # (N, r)
    lambda2: np.ndarray      # (N, r)
    chi: np.ndarray          # (T, N) common component
    e: np.ndarray            # (T, N) rescaled idiosyncratic component

    @property
    def b1(self) -> np.ndarray:
        """Regime-1 loadings on the stacked factor vector: [lambda1  0]."""
        return np.hstack([self.lambda1, np.zeros_like(self.lambda2)])

    @property
    def b2(self) -> np.ndarray:
        """Regime-2 loadings on the stacked factor vector: [0  lambda2]."""
        return np.hstack([np.zeros_like(self.lambda1), self.lambda2])

    @property
    def g(self) -> np.ndarray:
        """Stacked factors of the equivalent linear model: (xi_t (x) f_t)."""
        return np.hstack([self.f * self.xi[:, [0]], self.f * self.xi[:, [1]]])


def simulate_chain(
    p11: float, p22: float, t: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Simulate the latent two-state chain.

    The initial state is drawn from the stationary distribution; each later
    step draws u ~ U[0,1] and stays/switches according to the transition
    row of the current state. Returns ``(states, xi)`` with states in
    {1, 2} and xi the one-hot T x 2 indicator matrix.
    """
    if not (0.0 < p11 < 1.0 and 0.0 < p22 < 1.0):
        raise ValueError("p11 and p22 must lie strictly in (0, 1)")
    if t < 1:
        raise ValueError("t must be >= 1")
    trans = TransitionMatrix(np.array([[p11, 1.0 - p11], [1.0 - p22, p22]]))
    stat1 = unconditional_probs(trans).values[0]
    p21 = 1.0 - p22
    u = rng.uniform(0.0, 1.0, size=t)
    states = np.empty(t, dtype=np.int64)
    states[0] = 1 if u[0] <= stat1 else 2
    for s in range(1, t):
        stay_threshold = p11 if states[s - 1] == 1 else p21
        states[s] = 1 if u[s] <= stay_threshold else 2
    xi = np.zeros((t, 2))
    xi[np.arange(t), states - 1] = 1.0
    return states, xi


def simulate_factors(
    t: int, r: int, rho_f: float, rng: np.random.Generator
) -> np.ndarray:
    """AR(1) factors whitened so the sample second moment is exactly I_r.

    Each column follows f_t = rho_f f_{t-1} + z_t with standard normal
    innovations and a stationary start, then the whole T x r matrix is
    post-multiplied by the symmetric inverse square root of F'F / T.
    """
    if not (0.0 <= rho_f < 1.0):
        raise ValueError("rho_f must lie in [0, 1)")
    if t < r:
        raise RankDeficientError(f"cannot whiten {r} factors from T={t} observations")
    z = rng.standard_normal((t, r))
    f = np.empty((t, r))
    f[0] = z[0] / np.sqrt(1.0 - rho_f**2)
    for s in range(1, t):
        f[s] = rho_f * f[s - 1] + z[s]
    second_moment = f.T @ f / t
    w, v = np.linalg.eigh(second_moment)
    if w.min() <= 0.0:
        raise RankDeficientError("factor draw is rank deficient, cannot whiten")
    inv_root = v @ np.diag(1.0 / np.sqrt(w)) @ v.T
    return f @ inv_root


def simulate_loadings(
    n: int, r: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Per-regime N x r loadings with diagonal Gram matrices.

    Entries are drawn i.i.d. N(1, 1); each matrix is then rotated by the
    eigenvectors of its own Gram matrix so that lambda' lambda is diagonal.
    """
    if n < r:
        raise ValueError(f"need n >= r, got n={n}, r={r}")
    out = []
    for _ in range(2):
        raw = rng.normal(1.0, 1.0, size=(n, r))
        _, vecs = np.linalg.eigh(raw.T @ raw)
        out.append(raw @ vecs[:, ::-1])  # descending eigenvalue order
    return out[0], out[1]


def _banded_toeplitz(n: int, band_values: np.ndarray) -> np.ndarray:
    """Symmetric Toeplitz matrix with band_values[d] on diagonal offset d."""
    m = np.zeros((n, n))
    for offset, value in enumerate(band_values):
        if offset == 0:
            m += value * np.eye(n)
        else:
            m += value * (np.eye(n, k=offset) + np.eye(n, k=-offset))
    return m


def build_idio_covariances(
    n: int, tau: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Per-regime idiosyncratic covariances: diagonal plus banded Toeplitz.

    The diagonal parts draw U[0.25, 1.25] (regime 1) and U[0.75, 1.75]
    (regime 2). The banded parts put tau^k on the kth diagonal for k = 1, 2
    (regime 1) and tau^(k-1) for k = 1, 2, 3 (regime 2), counting the main
    diagonal as k = 1; with tau = 0 both banded parts are identically zero
    so the idiosyncratic covariance is purely diagonal.

    Raises :class:`NotPositiveDefiniteError` when an assembled matrix has
    an eigenvalue <= 0 (possible for tau near 1).
    """
    if not (0.0 <= tau < 1.0):
        raise ValueError("tau must lie in [0, 1)")
    diag1 = rng.uniform(0.25, 1.25, size=n)
    diag2 = rng.uniform(0.75, 1.75, size=n)
    if tau == 0.0:
        banded1 = np.zeros((n, n))
        banded2 = np.zeros((n, n))
    else:
        banded1 = _banded_toeplitz(n, np.array([tau, tau**2]))
        banded2 = _banded_toeplitz(n, np.array([1.0, tau, tau**2]))
    sigmas = (np.diag(diag1) + banded1, np.diag(diag2) + banded2)
    for j, sigma in enumerate(sigmas, start=1):
        smallest = np.linalg.eigvalsh(sigma).min()
        if smallest <= 0.0:
            raise NotPositiveDefiniteError(
                f"regime-{j} idiosyncratic covariance has eigenvalue "
                f"{smallest:.3e} <= 0 (tau={tau})"
            )
    return sigmas


def _symmetric_sqrt(sigma: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(sigma)
    if w.min() <= 0.0:
        raise NotPositiveDefiniteError(
            f"covariance has eigenvalue {w.min():.3e} <= 0"
        )
    return v @ np.diag(np.sqrt(w)) @ v.T


def simulate_idiosyncratic(
    sigma_e1: np.ndarray,
    sigma_e2: np.ndarray,
    states: np.ndarray,
    rho_idio_max: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Idiosyncratic component e_t = Sigma_{e,s_t}^(1/2) nu_t.

    Each series i has its own AR(1) innovation process
    nu_it = rho_i nu_{i,t-1} + w_it with rho_i ~ U[0, rho_idio_max] (all
    zero when the bound is 0). Every nu column is scaled to unit sample
    variance before mixing, so the covariance matrices alone control the
    idiosyncratic scale. Mixing uses the symmetric PSD square roots.
    """
    states = np.asarray(states)
    t_len = states.shape[0]
    n = sigma_e1.shape[0]
    rho = rng.uniform(0.0, rho_idio_max, size=n)
    w = rng.standard_normal((t_len, n))
    nu = np.empty((t_len, n))
    nu[0] = w[0] / np.sqrt(1.0 - rho**2)
    for s in range(1, t_len):
        nu[s] = rho * nu[s - 1] + w[s]
    sd = nu.std(axis=0)
    sd[sd == 0.0] = 1.0
    nu /= sd
    root1 = _symmetric_sqrt(np.asarray(sigma_e1, dtype=float))
    root2 = _symmetric_sqrt(np.asarray(sigma_e2, dtype=float))
    e = np.where((states == 1)[:, None], nu @ root1, nu @ root2)
    return e


def simulate_panel(cfg: SimConfig, rng: RngHandle) -> SimTruth:
    """Generate one full panel according to the Monte Carlo design.

    Composes chain, factors, loadings and idiosyncratic draws, then scales
    the noise by the closed-form constant that sets the average
    noise-to-signal ratio N^-1 sum_i (sum_t e_it^2 / sum_t chi_it^2)
    exactly to ``cfg.noise_to_signal``.
    """
    gen = rng.generator()
    states, xi = simulate_chain(cfg.p11, cfg.p22, cfg.t, gen)
    f = simulate_factors(cfg.t, cfg.r, cfg.rho_f, gen)
    lambda1, lambda2 = simulate_loadings(cfg.n, cfg.r, gen)
    sigma_e1, sigma_e2 = build_idio_covariances(cfg.n, cfg.tau, gen)
    e_raw = simulate_idiosyncratic(sigma_e1, sigma_e2, states, cfg.rho_idio_max, gen)

    chi = np.where((states == 1)[:, None], f @ lambda1.T, f @ lambda2.T)

    chi_ss = (chi**2).sum(axis=0)
    if (chi_ss == 0.0).any():
        raise ZeroDivisionError("a series has an identically zero common component")
    realised = ((e_raw**2).sum(axis=0) / chi_ss).mean()
    e = e_raw * np.sqrt(cfg.noise_to_signal / realised)

    panel = validate_panel(chi + e)
    return SimTruth(
        panel=panel,
        states=states,
        xi=xi,
        f=f,
        lambda1=lambda1,
        lambda2=lambda2,
        chi=chi,
        e=e,
    )
