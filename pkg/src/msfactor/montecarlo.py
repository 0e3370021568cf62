"""Monte Carlo driver: replicate the simulate -> PCA -> EM -> metrics
pipeline and aggregate the table columns.

Each replication r draws from stream id r of the shared seed, so serial
and parallel execution produce identical reports.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .em import EmConfig, run_em
from .exceptions import MsfactorError
from .metrics import (
    blended_loadings,
    common_component_mse,
    fitted_common_component,
    regime_blend_matrix,
    trace_r2,
)
from .pca import estimate_factor_space
from .simulate import SimConfig, simulate_panel
from .types import RngHandle

#: Fixed report schema, mirroring the Monte Carlo table layout.
REPORT_COLUMNS = (
    "p11_hat",
    "p22_hat",
    "xi1_bar",
    "xi2_bar",
    "r2_bstar",
    "mse_chi",
    "avg_iter",
)


@dataclass(frozen=True)
class ReplicationResult:
    replication: int
    p11_hat: float
    p22_hat: float
    xi1_bar: float
    xi2_bar: float
    r2_bstar: float
    mse_chi: float
    iterations: int
    converged: bool
    loglik_trace: tuple[float, ...]
    #: max |row sum - 1| over the predicted/filtered/smoothed/cross rows of
    #: the final probability path
    norm_deviation: float
    #: max deviation of the cross-probability marginals from the smoothed
    #: probabilities
    marginal_deviation: float

    def column_values(self) -> dict[str, float]:
        return {
            "p11_hat": self.p11_hat,
            "p22_hat": self.p22_hat,
            "xi1_bar": self.xi1_bar,
            "xi2_bar": self.xi2_bar,
            "r2_bstar": self.r2_bstar,
            "mse_chi": self.mse_chi,
            "avg_iter": float(self.iterations),
        }


@dataclass(frozen=True)
class MonteCarloReport:
    """Aggregated Monte Carlo results.

    ``mean``/``std`` map the fixed :data:`REPORT_COLUMNS` to statistics
    over successful replications; with a single replication the standard
    deviations are reported as 0.
    """

    replications: int
    results: tuple[ReplicationResult, ...]
    errors: tuple[tuple[int, str], ...]
    mean: dict[str, float]
    std: dict[str, float]
    non_converged: int

    def to_json_dict(self) -> dict:
        return {
            "columns": list(REPORT_COLUMNS),
            "replications": self.replications,
            "successful": len(self.results),
            "non_converged": self.non_converged,
            "errors": [{"replication": r, "message": m} for r, m in self.errors],
            "mean": {c: self.mean[c] for c in REPORT_COLUMNS},
            "std": {c: self.std[c] for c in REPORT_COLUMNS},
            "per_replication": [
                {
                    "replication": res.replication,
                    **res.column_values(),
                    "converged": res.converged,
                }
                for res in self.results
            ],
        }

    def format_table(self) -> str:
        header = "  ".join(f"{c:>9s}" for c in REPORT_COLUMNS)
        mean_row = "  ".join(f"{self.mean[c]:9.4f}" for c in REPORT_COLUMNS)
        std_row = "  ".join(f"{self.std[c]:9.4f}" for c in REPORT_COLUMNS)
        lines = [
            header,
            mean_row + "   (mean)",
            std_row + "   (std)",
            f"replications: {self.replications}, failed: {len(self.errors)}, "
            f"non-converged: {self.non_converged}",
        ]
        return "\n".join(lines)


def run_replication(
    sim_cfg: SimConfig, em_cfg: EmConfig, seed: int, replication: int
) -> ReplicationResult:
    """Simulate, estimate and score one panel on stream id ``replication``."""
    rng = RngHandle(seed=seed, stream=replication)
    truth = simulate_panel(sim_cfg, rng)
    fs = estimate_factor_space(truth.panel, k=2 * sim_cfg.r)
    result = run_em(truth.panel, fs, em_cfg)

    smoothed = result.path.smoothed
    blend = regime_blend_matrix(smoothed[:, 0], truth.states == 1, fs.g_hat)
    target = blended_loadings(truth.b1, truth.b2, blend)
    chi_hat = fitted_common_component(
        result.params.b1, result.params.b2, fs.g_hat, smoothed
    )
    path = result.path
    norm_dev = max(
        float(np.abs(rows.sum(axis=1) - 1.0).max())
        for rows in (path.predicted, path.filtered, path.smoothed, path.cross)
    )
    marg_dev = float(np.abs(path.cross[:, :2] + path.cross[:, 2:] - smoothed).max())
    return ReplicationResult(
        replication=replication,
        p11_hat=result.params.trans.p11,
        p22_hat=result.params.trans.p22,
        xi1_bar=float(smoothed[:, 0].mean()),
        xi2_bar=float(smoothed[:, 1].mean()),
        r2_bstar=trace_r2(result.params.b1, target),
        mse_chi=common_component_mse(chi_hat, truth.chi),
        iterations=result.iterations,
        converged=result.converged,
        loglik_trace=result.loglik_trace,
        norm_deviation=norm_dev,
        marginal_deviation=marg_dev,
    )


def _worker(args: tuple[SimConfig, EmConfig, int, int]):
    sim_cfg, em_cfg, seed, replication = args
    try:
        return run_replication(sim_cfg, em_cfg, seed, replication)
    except (MsfactorError, np.linalg.LinAlgError) as exc:
        return (replication, f"{type(exc).__name__}: {exc}")


def run_montecarlo(
    sim_cfg: SimConfig,
    em_cfg: EmConfig,
    seed: int,
    replications: int,
    jobs: int = 1,
) -> MonteCarloReport:
    """Run ``replications`` independent streams and aggregate the columns.

    A replication that raises is recorded as an error, not fatal. ``jobs``
    > 1 fans replications over a process pool; the report is identical to
    a serial run because aggregation happens in replication order.
    """
    if replications < 1:
        raise ValueError("replications must be >= 1")
    tasks = [(sim_cfg, em_cfg, seed, rep) for rep in range(replications)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_worker, tasks))
    else:
        outcomes = [_worker(task) for task in tasks]

    results = tuple(o for o in outcomes if isinstance(o, ReplicationResult))
    errors = tuple(o for o in outcomes if not isinstance(o, ReplicationResult))

    mean: dict[str, float] = {}
    std: dict[str, float] = {}
    for col in REPORT_COLUMNS:
        values = np.array([res.column_values()[col] for res in results])
        if values.size == 0:
            mean[col] = float("nan")
            std[col] = float("nan")
        else:
            mean[col] = float(values.mean())
            std[col] = float(values.std(ddof=1)) if values.size > 1 else 0.0
    return MonteCarloReport(
        replications=replications,
        results=results,
        errors=errors,
        mean=mean,
        std=std,
        non_converged=sum(1 for res in results if not res.converged),
    )
