"""Seeded Monte Carlo campaigns over a scenario.

Each realization places users at random (stream-split from the campaign
seed), computes channel gains once, and runs the requested pipelines.
Pipeline names: "tdma", "hrs", "wss", "pra", "exhaustive_sum",
"exhaustive_log"; append "+power" to an assignment pipeline to optimize the
power coefficients for the logarithmic sum rate afterwards.  Multi-PD
scenarios additionally record per-user combined SINRs for MRC, OC and GB-OC.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import scenario as scenario_mod
from .assignment import AssignmentObjective, exhaustive, hrs, pra, wss
from .channel import ChannelGains, compute_channel_gains
from .combining import combined_sinr, gboc_weights, mrc_weights, oc_weights
from .network import InfeasibleAssignmentError, jain_fairness, tdma_rates, user_sinr
from .power import PowerOptions, optimize_power
from .scenario import ScenarioConfig

KNOWN_ALGORITHMS = ("tdma", "hrs", "wss", "pra", "exhaustive_sum", "exhaustive_log")
COMBINING_SCHEMES = ("mrc", "oc", "gboc")


@dataclass
class RealizationRecord:
    realization: int
    algorithm: str
    status: str = "ok"
    rates: list[float] = field(default_factory=list)
    sum_rate: float = math.nan
    log_sum_rate: float = math.nan
    jain_index: float = math.nan
    sinr: list[float] = field(default_factory=list)
    combined_sinr: dict[str, list[float]] = field(default_factory=dict)
    power: list[float] = field(default_factory=list)


@dataclass
class CampaignResult:
    config: ScenarioConfig
    algorithms: list[str]
    realizations: int
    records: list[RealizationRecord]

    def for_algorithm(self, algorithm: str) -> list[RealizationRecord]:
        return [r for r in self.records if r.algorithm == algorithm]

    def aggregates(self) -> dict:
        from .stats import percentile

        out: dict[str, dict[str, float]] = {}
        for algorithm in self.algorithms:
            rows = [r for r in self.for_algorithm(algorithm) if r.status == "ok"]
            if not rows:
                out[algorithm] = {"realizations_ok": 0}
                continue
            sums = np.array([r.sum_rate for r in rows])
            logs = np.array([r.log_sum_rate for r in rows])
            jains = np.array([r.jain_index for r in rows])
            entry = {
                "realizations_ok": len(rows),
                "mean_sum_rate": float(np.mean(sums)),
                "mean_log_sum_rate": float(np.mean(logs[~np.isnan(logs)])) if np.any(~np.isnan(logs)) else math.nan,
                "mean_jain_index": float(np.mean(jains)),
                "sum_rate_p10": percentile(sums, 10),
                "sum_rate_p50": percentile(sums, 50),
                "sum_rate_p90": percentile(sums, 90),
            }
            for scheme in COMBINING_SCHEMES:
                pool = [v for r in rows for v in r.combined_sinr.get(scheme, [])]
                if pool:
                    entry[f"sinr_{scheme}_p10"] = percentile(pool, 10)
                    entry[f"sinr_{scheme}_p50"] = percentile(pool, 50)
            out[algorithm] = entry
        return out


def _fill_metrics(record: RealizationRecord, sinr_vec: np.ndarray, bandwidth: float):
    rates = bandwidth * np.log2(1.0 + sinr_vec)
    record.rates = [float(x) for x in rates]
    record.sum_rate = float(np.sum(rates))
    record.log_sum_rate = float(np.sum(np.log(rates))) if np.all(rates > 0) else math.nan
    record.jain_index = jain_fairness(rates)
    record.sinr = [float(x) for x in sinr_vec]


def _run_pipeline(
    name: str,
    gains: ChannelGains,
    config: ScenarioConfig,
    qos_ratios: np.ndarray,
    realization: int,
) -> RealizationRecord:
    budget = scenario_mod.budget(config)
    record = RealizationRecord(realization=realization, algorithm=name)
    base, _, power_step = name.partition("+")
    h2d = gains.summed() if gains.pds_per_user > 1 else gains.single_pd()
    p_uniform = np.full(gains.leds, budget.p_max)

    if base == "tdma":
        rates = tdma_rates(h2d, p_uniform, budget)
        snr = (budget.responsivity * h2d @ p_uniform) ** 2 / budget.noise_power
        record.rates = [float(x) for x in rates]
        record.sum_rate = float(np.sum(rates))
        record.log_sum_rate = float(np.sum(np.log(rates))) if np.all(rates > 0) else math.nan
        record.jain_index = jain_fairness(rates)
        record.sinr = [float(x) for x in snr]
        return record

    if base == "hrs":
        assign = hrs(h2d)
    elif base == "wss":
        assign = wss(h2d)
    elif base == "pra":
        assign = pra(h2d, p_uniform, budget, qos_ratios)
    elif base == "exhaustive_sum":
        assign = exhaustive(h2d, p_uniform, budget, AssignmentObjective.MAX_SUM_RATE)
    elif base == "exhaustive_log":
        assign = exhaustive(h2d, p_uniform, budget, AssignmentObjective.MAX_LOG_SUM_RATE)
    else:
        raise ValueError(f"unknown algorithm {name!r}")

    p = p_uniform
    if power_step:
        if power_step != "power":
            raise ValueError(f"unknown pipeline suffix {power_step!r} in {name!r}")
        result = optimize_power(
            h2d, assign, budget, AssignmentObjective.MAX_LOG_SUM_RATE, PowerOptions()
        )
        p = result.p
        record.power = [float(x) for x in p]

    _fill_metrics(record, user_sinr(h2d, assign, p, budget), budget.bandwidth)

    if gains.pds_per_user > 1:
        schemes = {"mrc": mrc_weights, "oc": oc_weights, "gboc": gboc_weights}
        served = assign.matrix.sum(axis=1) > 0
        for scheme, weight_fn in schemes.items():
            values = []
            for k in range(gains.users):
                if not served[k]:
                    values.append(0.0)  # starved user: no signal, SINR 0 for any weights
                    continue
                w = weight_fn(gains, assign, p, budget, k)
                values.append(float(combined_sinr(gains, assign, p, budget, w, k)))
            record.combined_sinr[scheme] = values
    return record


def run_campaign(
    config: ScenarioConfig,
    algorithms,
    realizations: int,
    qos_ratios=None,
) -> CampaignResult:
    """Run `realizations` seeded network realizations for each pipeline.

    Fully deterministic given (config, algorithms, realizations, qos_ratios);
    per-realization failures are recorded and the campaign continues.
    """
    if realizations < 1:
        raise ValueError("need at least one realization")
    algorithms = list(algorithms)
    for name in algorithms:
        base = name.partition("+")[0]
        if base not in KNOWN_ALGORITHMS:
            raise ValueError(f"unknown algorithm {name!r}; known: {KNOWN_ALGORITHMS}")
    if qos_ratios is None:
        qos = np.ones(config.user_count)
    else:
        qos = np.asarray(qos_ratios, dtype=float)
        if qos.shape != (config.user_count,):
            raise ValueError("qos_ratios must have one entry per user")

    records: list[RealizationRecord] = []
    for i in range(realizations):
        positions = scenario_mod.place_users(config, i)
        gains = compute_channel_gains(config, positions)
        for name in algorithms:
            try:
                record = _run_pipeline(name, gains, config, qos, i)
            except (InfeasibleAssignmentError, ValueError, RuntimeError) as exc:
                record = RealizationRecord(
                    realization=i, algorithm=name, status=f"error: {exc}"
                )
            records.append(record)
    return CampaignResult(
        config=config, algorithms=algorithms, realizations=realizations, records=records
    )


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def _csv_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def campaign_csv(result: CampaignResult) -> str:
    """Flat CSV: one row per (realization, algorithm)."""
    users = result.config.user_count
    leds = result.config.led_count
    multi_pd = result.config.pd_count > 1
    header = ["realization", "algorithm", "status", "sum_rate_bps", "log_sum_rate", "jain_index"]
    header += [f"rate_bps_{k + 1}" for k in range(users)]
    header += [f"sinr_{k + 1}" for k in range(users)]
    if multi_pd:
        for scheme in COMBINING_SCHEMES:
            header += [f"sinr_{scheme}_{k + 1}" for k in range(users)]
    has_power = any(r.power for r in result.records)
    if has_power:
        header += [f"power_w_{n + 1}" for n in range(leds)]

    lines = [",".join(header)]
    for record in result.records:
        row = [
            str(record.realization),
            record.algorithm,
            record.status.replace(",", ";"),
            _csv_cell(record.sum_rate),
            _csv_cell(record.log_sum_rate),
            _csv_cell(record.jain_index),
        ]
        row += [_csv_cell(x) for x in _padded(record.rates, users)]
        row += [_csv_cell(x) for x in _padded(record.sinr, users)]
        if multi_pd:
            for scheme in COMBINING_SCHEMES:
                row += [_csv_cell(x) for x in _padded(record.combined_sinr.get(scheme, []), users)]
        if has_power:
            row += [_csv_cell(x) for x in _padded(record.power, leds)]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def _padded(values: list[float], size: int) -> list[float]:
    return list(values) + [math.nan] * (size - len(values))


def campaign_json(result: CampaignResult) -> str:
    payload = {
        "config": scenario_mod.scenario_to_dict(result.config),
        "algorithms": result.algorithms,
        "realizations": result.realizations,
        "records": [
            {
                "realization": r.realization,
                "algorithm": r.algorithm,
                "status": r.status,
                "rates": r.rates,
                "sum_rate": r.sum_rate,
                "log_sum_rate": r.log_sum_rate,
                "jain_index": r.jain_index,
                "sinr": r.sinr,
                "combined_sinr": r.combined_sinr,
                "power": r.power,
            }
            for r in result.records
        ],
        "aggregates": result.aggregates(),
    }
    return json.dumps(payload, indent=2, sort_keys=True, allow_nan=True) + "\n"


def write_campaign(result: CampaignResult, path, fmt: str = "csv") -> None:
    if fmt == "csv":
        text = campaign_csv(result)
    elif fmt == "json":
        text = campaign_json(result)
    else:
        raise ValueError("format must be 'csv' or 'json'")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


# ---------------------------------------------------------------------------
# location grid sweep
# ---------------------------------------------------------------------------

@dataclass
class GridSweepResult:
    config: ScenarioConfig
    algorithm: str
    realizations: int
    grid_step: float
    records: list[dict]


def run_grid_sweep(
    config: ScenarioConfig,
    algorithm: str,
    realizations: int,
    grid_step: float,
) -> GridSweepResult:
    """Average per-location metrics over random co-user populations.

    A probe receiver is pinned at each grid node (cell centers of a
    `grid_step` grid over the floor); the other user_count - 1 users are
    redrawn per realization from the stream [seed, node, i].  Records carry
    the probe's mean rate and SINR, plus per-scheme combined SINRs on
    multi-PD receivers.
    """
    if config.user_count < 2:
        raise ValueError("the sweep needs at least one random co-user")
    if realizations < 1:
        raise ValueError("need at least one realization")
    if grid_step <= 0:
        raise ValueError("grid_step must be positive")
    base = algorithm.partition("+")[0]
    if base not in KNOWN_ALGORITHMS or base == "tdma":
        raise ValueError(f"grid sweep supports assignment pipelines, not {algorithm!r}")
    budget = scenario_mod.budget(config)
    lx, ly, _ = config.room.dimensions_m
    xs = np.arange(grid_step / 2.0, lx, grid_step)
    ys = np.arange(grid_step / 2.0, ly, grid_step)
    qos = np.ones(config.user_count)
    multi_pd = config.pd_count > 1
    records = []
    for node, (x, y) in enumerate((x, y) for x in xs for y in ys):
        rates, sinrs = [], []
        combined: dict[str, list[float]] = {s: [] for s in COMBINING_SCHEMES}
        for i in range(realizations):
            positions = scenario_mod.place_users(config, (node, i))
            positions[0] = (x, y, config.receiver_height_m)
            gains = compute_channel_gains(config, positions)
            record = _run_pipeline(algorithm, gains, config, qos, i)
            if record.status != "ok":
                continue
            rates.append(record.rates[0])
            sinrs.append(record.sinr[0])
            for scheme in COMBINING_SCHEMES:
                if scheme in record.combined_sinr:
                    combined[scheme].append(record.combined_sinr[scheme][0])
        row = {
            "x_m": float(x),
            "y_m": float(y),
            "realizations_ok": len(rates),
            "mean_rate_bps": float(np.mean(rates)) if rates else math.nan,
            "mean_sinr": float(np.mean(sinrs)) if sinrs else math.nan,
        }
        if multi_pd:
            for scheme in COMBINING_SCHEMES:
                row[f"mean_sinr_{scheme}"] = (
                    float(np.mean(combined[scheme])) if combined[scheme] else math.nan
                )
        records.append(row)
    return GridSweepResult(
        config=config,
        algorithm=algorithm,
        realizations=realizations,
        grid_step=grid_step,
        records=records,
    )


def grid_sweep_csv(result: GridSweepResult) -> str:
    if not result.records:
        return "x_m,y_m\n"
    header = list(result.records[0].keys())
    lines = [",".join(header)]
    for row in result.records:
        lines.append(",".join(_csv_cell(row[key]) for key in header))
    return "\n".join(lines) + "\n"
