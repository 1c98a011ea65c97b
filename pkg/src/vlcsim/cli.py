"""Command-line interface.

Subcommands: channel (dump gains / CFR / CIR), assign (run one assignment
algorithm), optimize (power control), combine (per-user combining weights
and SINRs), campaign (Monte Carlo sweep to CSV/JSON).

Exit codes: 0 success, 1 usage or config error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

import numpy as np

from . import scenario as scenario_mod
from .assignment import AssignmentObjective, exhaustive, hrs, pra, wss
from .campaign import run_campaign, write_campaign
from .channel import cfr, cir_from_cfr, compute_channel_gains
from .combining import combined_sinr, gboc_weights, mrc_weights, oc_weights
from .network import jain_fairness, user_rates, user_sinr
from .power import PowerOptions, optimize_power
from .scenario import ConfigError, ScenarioConfig


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="vlcsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="scenario config (.json or .toml)")
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        p.add_argument("--out", default=None, help="output file (default: stdout)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")

    p_channel = sub.add_parser("channel", help="dump channel gains, CFR or CIR")
    common(p_channel)
    p_channel.add_argument("--what", choices=("gains", "cfr", "cir"), default="gains")
    p_channel.add_argument("--user", type=int, default=0)
    p_channel.add_argument("--pd", type=int, default=0)
    p_channel.add_argument("--led", type=int, default=0)
    p_channel.add_argument("--f-max-hz", type=float, default=100e6)
    p_channel.add_argument("--df-hz", type=float, default=1e6)

    p_assign = sub.add_parser("assign", help="run one assignment algorithm")
    common(p_assign)
    p_assign.add_argument(
        "--algorithm",
        required=True,
        choices=("hrs", "wss", "pra", "exhaustive_sum", "exhaustive_log"),
    )
    p_assign.add_argument("--qos", default=None, help="comma-separated QoS ratios for pra")

    p_opt = sub.add_parser("optimize", help="optimize LED power coefficients")
    common(p_opt)
    p_opt.add_argument("--algorithm", default="wss", choices=("hrs", "wss", "pra"))
    p_opt.add_argument(
        "--objective", default="log_sum_rate", choices=("sum_rate", "log_sum_rate")
    )
    p_opt.add_argument("--trace-out", default=None, help="write the optimizer trace CSV here")

    p_comb = sub.add_parser("combine", help="per-user combining weights and SINRs")
    common(p_comb)
    p_comb.add_argument("--algorithm", default="wss", choices=("hrs", "wss", "pra"))

    p_camp = sub.add_parser("campaign", help="run a Monte Carlo campaign")
    common(p_camp)
    p_camp.add_argument("--algorithms", default="hrs,wss,tdma")
    p_camp.add_argument("--realizations", type=int, default=100)
    p_camp.add_argument("--qos", default=None, help="comma-separated QoS ratios for pra")
    p_camp.add_argument(
        "--grid-step",
        type=float,
        default=None,
        help="emit a per-location (x, y, metric) sweep instead of per-realization records",
    )

    return parser


def _load_config(args) -> ScenarioConfig:
    config = scenario_mod.load_scenario(args.config)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    return config


def _emit(text: str, out: str | None):
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


def _assignment_for(name: str, h2d, budget, qos):
    if name == "hrs":
        return hrs(h2d)
    if name == "wss":
        return wss(h2d)
    if name == "pra":
        return pra(h2d, np.full(h2d.shape[1], budget.p_max), budget, qos)
    if name == "exhaustive_sum":
        return exhaustive(h2d, np.full(h2d.shape[1], budget.p_max), budget, AssignmentObjective.MAX_SUM_RATE)
    if name == "exhaustive_log":
        return exhaustive(h2d, np.full(h2d.shape[1], budget.p_max), budget, AssignmentObjective.MAX_LOG_SUM_RATE)
    raise UsageError(f"unknown algorithm {name}")


def _parse_qos(text: str | None, users: int) -> np.ndarray:
    if text is None:
        return np.ones(users)
    values = np.array([float(x) for x in text.split(",")])
    if values.shape != (users,):
        raise UsageError(f"--qos needs {users} comma-separated values")
    return values


def _cmd_channel(args) -> int:
    config = _load_config(args)
    if args.what == "gains":
        gains = compute_channel_gains(config)
        lines = ["user,pd,led,gain"]
        for k in range(gains.users):
            for m in range(gains.pds_per_user):
                for n in range(gains.leds):
                    lines.append(f"{k},{m},{n},{gains.gains[k, m, n]!r}")
        _emit("\n".join(lines) + "\n", args.out)
        return 0

    leds = scenario_mod.led_sources(config)
    positions = scenario_mod.place_users(config, 0)
    pds = scenario_mod.receiver_pds(config, positions[args.user])
    reflectors = scenario_mod.room_reflectors(config)
    source, pd = leds[args.led], pds[args.pd]
    if args.what == "cfr":
        n_freq = int(round(args.f_max_hz / args.df_hz)) + 1
        lines = ["frequency_hz,real,imag"]
        for i in range(n_freq):
            f = i * args.df_hz
            value = cfr(source, pd, reflectors, frequency=f, order=config.reflection_order)
            lines.append(f"{f!r},{value.real!r},{value.imag!r}")
        _emit("\n".join(lines) + "\n", args.out)
    else:
        times, amplitudes = cir_from_cfr(
            source, pd, reflectors, config.reflection_order, args.f_max_hz, args.df_hz
        )
        lines = ["time_s,amplitude"]
        for t, a in zip(times, amplitudes):
            lines.append(f"{t!r},{a!r}")
        _emit("\n".join(lines) + "\n", args.out)
    return 0


def _metrics_text(assign, h2d, p, budget, fmt: str) -> str:
    rates = user_rates(h2d, assign, p, budget)
    sinr_vec = user_sinr(h2d, assign, p, budget)
    if fmt == "json":
        payload = {
            "assignment": assign.matrix.tolist(),
            "rates_bps": rates.tolist(),
            "sinr": sinr_vec.tolist(),
            "sum_rate_bps": float(rates.sum()),
            "jain_index": jain_fairness(rates),
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"
    lines = ["# assignment matrix (users x leds)"]
    for row in assign.matrix:
        lines.append(",".join(str(int(x)) for x in row))
    lines.append("user,rate_bps,sinr")
    for k, (r, s) in enumerate(zip(rates, sinr_vec)):
        lines.append(f"{k},{r!r},{s!r}")
    lines.append(f"sum_rate_bps,{float(rates.sum())!r}")
    lines.append(f"jain_index,{jain_fairness(rates)!r}")
    return "\n".join(lines) + "\n"


def _cmd_assign(args) -> int:
    config = _load_config(args)
    budget = scenario_mod.budget(config)
    gains = compute_channel_gains(config)
    h2d = gains.summed() if gains.pds_per_user > 1 else gains.single_pd()
    qos = _parse_qos(args.qos, config.user_count)
    assign = _assignment_for(args.algorithm, h2d, budget, qos)
    p = np.full(h2d.shape[1], budget.p_max)
    _emit(_metrics_text(assign, h2d, p, budget, args.format), args.out)
    return 0


def _cmd_optimize(args) -> int:
    config = _load_config(args)
    budget = scenario_mod.budget(config)
    gains = compute_channel_gains(config)
    h2d = gains.summed() if gains.pds_per_user > 1 else gains.single_pd()
    assign = _assignment_for(args.algorithm, h2d, budget, np.ones(config.user_count))
    objective = (
        AssignmentObjective.MAX_LOG_SUM_RATE
        if args.objective == "log_sum_rate"
        else AssignmentObjective.MAX_SUM_RATE
    )
    result = optimize_power(
        h2d, assign, budget, objective, PowerOptions(collect_trace=args.trace_out is not None)
    )
    if args.trace_out:
        lines = ["iteration,objective,kkt_residual"]
        for it, value, residual in result.trace:
            lines.append(f"{it},{value!r},{residual!r}")
        with open(args.trace_out, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    if args.format == "json":
        payload = {
            "power_w": result.p.tolist(),
            "objective_value": result.objective_value,
            "iterations": result.iterations,
            "kkt_residual": result.kkt_residual,
        }
        _emit(json.dumps(payload, indent=2, sort_keys=True) + "\n", args.out)
    else:
        lines = ["led,power_w"]
        for n, value in enumerate(result.p):
            lines.append(f"{n},{value!r}")
        lines.append(f"objective,{result.objective_value!r}")
        lines.append(f"kkt_residual,{result.kkt_residual!r}")
        _emit("\n".join(lines) + "\n", args.out)
    return 0


def _cmd_combine(args) -> int:
    config = _load_config(args)
    budget = scenario_mod.budget(config)
    gains = compute_channel_gains(config)
    h2d = gains.summed() if gains.pds_per_user > 1 else gains.single_pd()
    assign = _assignment_for(args.algorithm, h2d, budget, np.ones(config.user_count))
    p = np.full(h2d.shape[1], budget.p_max)
    schemes = {"mrc": mrc_weights, "oc": oc_weights, "gboc": gboc_weights}
    rows = []
    for k in range(gains.users):
        for scheme, fn in schemes.items():
            w = fn(gains, assign, p, budget, k)
            sinr_val = combined_sinr(gains, assign, p, budget, w, k)
            norm = float(np.linalg.norm(w))
            unit_w = (w / norm).tolist() if norm > 0 else w.tolist()
            rows.append((k, scheme, sinr_val, unit_w))
    if args.format == "json":
        payload = [
            {"user": k, "scheme": scheme, "sinr": sinr_val, "weights": unit_w}
            for k, scheme, sinr_val, unit_w in rows
        ]
        _emit(json.dumps(payload, indent=2, sort_keys=True) + "\n", args.out)
    else:
        lines = ["user,scheme,sinr,weights"]
        for k, scheme, sinr_val, unit_w in rows:
            weights = ";".join(repr(x) for x in unit_w)
            lines.append(f"{k},{scheme},{sinr_val!r},{weights}")
        _emit("\n".join(lines) + "\n", args.out)
    return 0


def _cmd_campaign(args) -> int:
    config = _load_config(args)
    algorithms = [a.strip() for a in args.algorithms.split(",") if a.strip()]
    if not algorithms:
        raise UsageError("--algorithms must name at least one pipeline")
    if args.grid_step is not None:
        if len(algorithms) != 1:
            raise UsageError("--grid-step sweeps exactly one algorithm")
        from .campaign import grid_sweep_csv, run_grid_sweep

        sweep = run_grid_sweep(config, algorithms[0], args.realizations, args.grid_step)
        _emit(grid_sweep_csv(sweep), args.out)
        return 0
    qos = _parse_qos(args.qos, config.user_count) if args.qos else None
    result = run_campaign(config, algorithms, args.realizations, qos_ratios=qos)
    if args.out:
        write_campaign(result, args.out, args.format)
    else:
        from .campaign import campaign_csv, campaign_json

        text = campaign_csv(result) if args.format == "csv" else campaign_json(result)
        sys.stdout.write(text)
    return 0


_COMMANDS = {
    "channel": _cmd_channel,
    "assign": _cmd_assign,
    "optimize": _cmd_optimize,
    "combine": _cmd_combine,
    "campaign": _cmd_campaign,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


def console_main() -> None:  # pragma: no cover - thin wrapper
    sys.exit(main())


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
