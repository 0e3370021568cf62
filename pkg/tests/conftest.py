import pytest

from msfactor import (
    EmConfig,
    RngHandle,
    SimConfig,
    estimate_factor_space,
    run_replication,
    simulate_panel,
)

ACCEPTANCE_SEED = 0
ACCEPTANCE_REPS = 20


@pytest.fixture(scope="session")
def small_truth():
    """One modest simulated panel reused by unit tests."""
    return simulate_panel(SimConfig(n=60, t=300, r=1, seed=7), RngHandle(seed=7))


@pytest.fixture(scope="session")
def small_factor_space(small_truth):
    return estimate_factor_space(small_truth.panel, k=2)


def _battery(sim_cfg: SimConfig) -> list:
    em_cfg = EmConfig(max_iter=100, epsilon=1e-6)
    return [
        run_replication(sim_cfg, em_cfg, seed=ACCEPTANCE_SEED, replication=rep)
        for rep in range(ACCEPTANCE_REPS)
    ]


@pytest.fixture(scope="session")
def table1_battery():
    """Criterion 1 configuration: r=1, rho_f=0, tau=0, rho=0, N=100, T=500."""
    return _battery(SimConfig(n=100, t=500, r=1))


@pytest.fixture(scope="session")
def table2_battery():
    """Criterion 2 configuration: r=1, rho_f=0.7, tau=0.5, rho=0.5, N=100, T=750."""
    return _battery(SimConfig(n=100, t=750, r=1, rho_f=0.7, tau=0.5, rho_idio_max=0.5))


@pytest.fixture(scope="session")
def table3_batteries():
    """Criterion 3 configurations: r=2, N=100 at T=250 and T=1000."""
    return {
        250: _battery(SimConfig(n=100, t=250, r=2)),
        1000: _battery(SimConfig(n=100, t=1000, r=2)),
    }


def report_criterion(number: int, description: str, passed: bool, detail: str) -> None:
    status = "PASS" if passed else "FAIL"
    print(f"\nACCEPTANCE {number:2d} [{status}] {description}: {detail}")
