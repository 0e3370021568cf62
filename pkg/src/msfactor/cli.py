"""Command-line surface.

Subcommands::

    msfactor simulate    --out DIR [--config FILE] [sim flags]
    msfactor estimate    --input CSV --out DIR [--k N|auto] [estimation flags]
    msfactor montecarlo  --out DIR --reps R [--jobs J] [sim + estimation flags]
    msfactor verify      [--instances N] [--seed S]

Every flag can also be given in a flat ``key = value`` config file passed
with ``--config``; explicit flags override file values.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .em import EmConfig, run_em
from .io import (
    load_panel_csv,
    parse_config_file,
    save_matrix_csv,
    save_panel_csv,
    write_json,
)
from .montecarlo import run_montecarlo
from .oracle import EQUIVALENCE_TOLERANCE, equivalence_suite
from .pca import demean_panel, estimate_factor_space, select_num_factors_er
from .simulate import SimConfig, simulate_panel
from .types import RngHandle, unconditional_probs

_SIM_FIELDS = {
    "n": int,
    "t": int,
    "r": int,
    "p11": float,
    "p22": float,
    "rho_f": float,
    "tau": float,
    "rho_idio_max": float,
    "noise_to_signal": float,
}
_EM_FIELDS = {
    "max_iter": int,
    "epsilon": float,
    "omega1": float,
    "omega2": float,
}


def _parse_bool(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in {"1", "true", "yes", "on"}:
        return True
    if lowered in {"0", "false", "no", "off"}:
        return False
    raise ValueError(f"cannot interpret {value!r} as a boolean")


def _setting(args, file_cfg: dict[str, str], key: str, cast, default):
    """CLI flag > config file > default."""
    cli_value = getattr(args, key, None)
    if cli_value is not None:
        return cli_value
    if key in file_cfg:
        if cast is bool:
            return _parse_bool(file_cfg[key])
        return cast(file_cfg[key])
    return default


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--seed", type=int, help="base RNG seed (default 0)")
    parser.add_argument("--out", help="output directory")


def _add_sim_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--n", type=int, help="number of series N")
    parser.add_argument("--t", type=int, help="number of periods T")
    parser.add_argument("--r", type=int, help="factors per regime")
    parser.add_argument("--p11", type=float, help="stay probability of state 1")
    parser.add_argument("--p22", type=float, help="stay probability of state 2")
    parser.add_argument("--rho-f", dest="rho_f", type=float, help="factor AR(1) coefficient")
    parser.add_argument("--tau", type=float, help="Toeplitz band decay")
    parser.add_argument(
        "--rho-idio-max",
        dest="rho_idio_max",
        type=float,
        help="upper bound of idiosyncratic AR coefficients",
    )
    parser.add_argument(
        "--noise-to-signal",
        dest="noise_to_signal",
        type=float,
        help="target noise-to-signal ratio",
    )


def _add_em_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--max-iter", dest="max_iter", type=int, help="EM iteration cap")
    parser.add_argument("--epsilon", type=float, help="EM convergence threshold")
    parser.add_argument("--omega1", type=float, help="initial transition offset, state 1")
    parser.add_argument("--omega2", type=float, help="initial transition offset, state 2")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="msfactor",
        description="Two-state Markov switching factor models: simulate, estimate, replicate.",
    )
    sub = parser.add_subparsers(dest="mode", required=True)

    p_sim = sub.add_parser("simulate", help="draw one panel and write it with its truth")
    _add_common(p_sim)
    _add_sim_flags(p_sim)

    p_est = sub.add_parser("estimate", help="estimate the model on a CSV panel")
    _add_common(p_est)
    _add_em_flags(p_est)
    p_est.add_argument("--input", help="input panel CSV")
    p_est.add_argument("--k", help="factor count of the linear representation, or 'auto'")
    p_est.add_argument("--k-max", dest="k_max", type=int, help="bound for auto selection")
    p_est.add_argument(
        "--demean",
        action="store_const",
        const=True,
        default=None,
        help="remove unconditional means before estimation",
    )

    p_mc = sub.add_parser("montecarlo", help="replicate the simulation study")
    _add_common(p_mc)
    _add_sim_flags(p_mc)
    _add_em_flags(p_mc)
    p_mc.add_argument("--reps", type=int, help="number of replications")
    p_mc.add_argument("--jobs", type=int, help="parallel worker processes (default 1)")

    p_ver = sub.add_parser("verify", help="run the oracle-equivalence suite")
    p_ver.add_argument("--config", help="flat key=value config file")
    p_ver.add_argument("--seed", type=int, help="suite RNG seed (default 0)")
    p_ver.add_argument("--instances", type=int, help="number of random instances (default 200)")

    return parser


def _sim_config(args, file_cfg: dict[str, str], seed: int) -> SimConfig:
    defaults = SimConfig()
    values = {
        key: _setting(args, file_cfg, key, cast, getattr(defaults, key))
        for key, cast in _SIM_FIELDS.items()
    }
    return SimConfig(seed=seed, **values)


def _em_config(args, file_cfg: dict[str, str]) -> EmConfig:
    defaults = EmConfig()
    values = {
        key: _setting(args, file_cfg, key, cast, getattr(defaults, key))
        for key, cast in _EM_FIELDS.items()
    }
    return EmConfig(**values)


def _out_dir(args, file_cfg: dict[str, str]) -> Path:
    out = _setting(args, file_cfg, "out", str, None)
    if out is None:
        raise SystemExit("an output directory is required (--out or out= in the config)")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _cmd_simulate(args, file_cfg: dict[str, str]) -> int:
    seed = _setting(args, file_cfg, "seed", int, 0)
    cfg = _sim_config(args, file_cfg, seed)
    out = _out_dir(args, file_cfg)
    truth = simulate_panel(cfg, RngHandle(seed=cfg.seed, stream=0))

    save_panel_csv(out / "panel.csv", truth.panel)
    save_matrix_csv(
        out / "states.csv",
        np.column_stack([truth.states.astype(float), truth.xi]),
        ["state", "xi1", "xi2"],
    )
    save_matrix_csv(
        out / "factors.csv", truth.f, [f"f{i + 1}" for i in range(cfg.r)]
    )
    save_matrix_csv(
        out / "common.csv", truth.chi, [f"x{i + 1}" for i in range(cfg.n)]
    )
    save_matrix_csv(
        out / "idiosyncratic.csv", truth.e, [f"x{i + 1}" for i in range(cfg.n)]
    )
    write_json(
        out / "loadings.json",
        {
            "lambda1": truth.lambda1.tolist(),
            "lambda2": truth.lambda2.tolist(),
            "config": {key: getattr(cfg, key) for key in (*_SIM_FIELDS, "seed")},
        },
    )
    print(f"wrote simulated panel (T={cfg.t}, N={cfg.n}) to {out}")
    return 0


def _cmd_estimate(args, file_cfg: dict[str, str]) -> int:
    input_path = _setting(args, file_cfg, "input", str, None)
    if input_path is None:
        raise SystemExit("estimate mode needs --input (or input= in the config)")
    seed = _setting(args, file_cfg, "seed", int, 0)
    demean = _setting(args, file_cfg, "demean", bool, False)
    k_setting = _setting(args, file_cfg, "k", str, "auto")
    out = _out_dir(args, file_cfg)
    em_cfg = _em_config(args, file_cfg)

    panel = load_panel_csv(input_path)
    if demean:
        panel = demean_panel(panel)
    if str(k_setting).lower() == "auto":
        k_max = _setting(
            args, file_cfg, "k_max", int, min(8, min(panel.n_len, panel.t_len) - 1)
        )
        k = select_num_factors_er(panel, k_max)
    else:
        k = int(k_setting)
    fs = estimate_factor_space(panel, k)
    result = run_em(panel, fs, em_cfg)

    stationary = unconditional_probs(result.params.trans).values
    smoothed = result.path.smoothed
    write_json(
        out / "params.json",
        {
            "k": k,
            "demeaned": demean,
            "seed": seed,
            "iterations": result.iterations,
            "converged": result.converged,
            "loglik": result.path.loglik,
            "loglik_trace": list(result.loglik_trace),
            "transition": result.params.trans.p.tolist(),
            "stationary_probs": stationary.tolist(),
            "smoothed_time_average": smoothed.mean(axis=0).tolist(),
            "loadings_regime1": result.params.b1.tolist(),
            "loadings_regime2": result.params.b2.tolist(),
            "idio_variance_regime1": result.params.sigma_e1_diag.tolist(),
            "idio_variance_regime2": result.params.sigma_e2_diag.tolist(),
        },
    )
    g = fs.g_hat
    series = np.column_stack(
        [smoothed, g, smoothed[:, [0]] * g, smoothed[:, [1]] * g]
    )
    headers = (
        ["smoothed1", "smoothed2"]
        + [f"g{i + 1}" for i in range(k)]
        + [f"xi1_g{i + 1}" for i in range(k)]
        + [f"xi2_g{i + 1}" for i in range(k)]
    )
    save_matrix_csv(out / "series.csv", series, headers)
    print(
        f"estimated k={k} factors in {result.iterations} iterations "
        f"(converged={result.converged}); results in {out}"
    )
    return 0


def _cmd_montecarlo(args, file_cfg: dict[str, str]) -> int:
    seed = _setting(args, file_cfg, "seed", int, 0)
    reps = _setting(args, file_cfg, "reps", int, None)
    if reps is None:
        raise SystemExit("montecarlo mode needs --reps (or reps= in the config)")
    jobs = _setting(args, file_cfg, "jobs", int, 1)
    sim_cfg = _sim_config(args, file_cfg, seed)
    em_cfg = _em_config(args, file_cfg)
    out = _out_dir(args, file_cfg)

    report = run_montecarlo(sim_cfg, em_cfg, seed=seed, replications=reps, jobs=jobs)
    payload = {
        "config": {
            **{key: getattr(sim_cfg, key) for key in _SIM_FIELDS},
            **{key: getattr(em_cfg, key) for key in _EM_FIELDS},
            "seed": seed,
            "replications": reps,
        },
        **report.to_json_dict(),
    }
    write_json(out / "report.json", payload)
    print(report.format_table())
    print(f"report written to {out / 'report.json'}")
    return 0


def _cmd_verify(args, file_cfg: dict[str, str]) -> int:
    seed = _setting(args, file_cfg, "seed", int, 0)
    instances = _setting(args, file_cfg, "instances", int, 200)
    dev = equivalence_suite(instances=instances, seed=seed)
    print(f"oracle equivalence over {instances} random instances (seed {seed}):")
    for name, value in dev.items():
        print(f"  max |{name}| deviation: {value:.3e}")
    worst = max(dev.values())
    if worst < EQUIVALENCE_TOLERANCE:
        print(f"PASS (all deviations below {EQUIVALENCE_TOLERANCE:g})")
        return 0
    print(f"FAIL (tolerance {EQUIVALENCE_TOLERANCE:g})")
    return 1


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    file_cfg = parse_config_file(args.config) if args.config else {}
    commands = {
        "simulate": _cmd_simulate,
        "estimate": _cmd_estimate,
        "montecarlo": _cmd_montecarlo,
        "verify": _cmd_verify,
    }
    return commands[args.mode](args, file_cfg)


if __name__ == "__main__":
    sys.exit(main())
