"""LED-to-user assignment: HRS, WSS, the QoS-proportional rate algorithm,
and an exhaustive search oracle for small instances.

All assignment rules break ties toward the lowest index so identical inputs
always produce identical assignments.
"""

from __future__ import annotations

import enum
import itertools

import numpy as np

from .network import (
    Assignment,
    InfeasibleAssignmentError,
    LinkBudget,
    gains_matrix,
    user_rates,
)


class AssignmentObjective(enum.Enum):
    MAX_SUM_RATE = "sum_rate"
    MAX_LOG_SUM_RATE = "log_sum_rate"


class SearchSpaceError(RuntimeError):
    """Exhaustive enumeration would exceed the evaluation cap."""


def hrs(gains) -> Assignment:
    """Highest-RSS assignment: each LED serves the user with the largest gain."""
    h = gains_matrix(gains)
    owners = np.argmax(h, axis=0)
    return Assignment.from_owner(owners, users=h.shape[0])


def wss(gains) -> Assignment:
    """Weighted-signal-strength assignment.

    Each LED goes to the user maximizing h[k, n] / sum_m h[k, m]^2, which
    prioritizes users with low aggregate received power.
    """
    h = gains_matrix(gains)
    totals = np.sum(h**2, axis=1)
    if np.any(totals == 0):
        raise ValueError(
            f"users with all-zero gains have undefined WSS weights: "
            f"{np.nonzero(totals == 0)[0].tolist()}"
        )
    weights = h / totals[:, None]
    owners = np.argmax(weights, axis=0)
    return Assignment.from_owner(owners, users=h.shape[0])


def snr_delta(gains, p, budget: LinkBudget, k: int, n: int) -> float:
    """Single-link SNR (p_n h_kn)^2 / N0 used to rank LEDs inside the PRA."""
    h = gains_matrix(gains)
    p = np.asarray(p, dtype=float)
    return float((p[n] * h[k, n]) ** 2 / budget.noise_psd)


def pra(gains, p, budget: LinkBudget, qos_ratios, strict_rate_update: bool = False) -> Assignment:
    """Proportional rate algorithm for QoS-ratio-driven LED assignment.

    Seeds every user with its best-SNR LED, then repeatedly lets the user
    with the smallest R_k / qos_k pick its best remaining LED until all LEDs
    are assigned.  By default every rate is recomputed after each pick so the
    min-ratio selection always sees current interference; with
    `strict_rate_update` only the picking user's rate is refreshed, exactly
    as the listing reads.
    """
    h = gains_matrix(gains)
    p = np.asarray(p, dtype=float)
    qos = np.asarray(qos_ratios, dtype=float)
    k_users, n_leds = h.shape
    if qos.shape != (k_users,) or np.any(qos <= 0):
        raise ValueError("qos_ratios must be positive with one entry per user")
    if n_leds < k_users:
        raise ValueError(f"cannot seed {k_users} users with only {n_leds} LEDs")

    delta = (p[None, :] * h) ** 2 / budget.noise_psd
    available = np.ones(n_leds, dtype=bool)
    matrix = np.zeros((k_users, n_leds), dtype=np.int8)
    rates = np.zeros(k_users)

    def pick_best(k: int) -> int:
        masked = np.where(available, delta[k], -np.inf)
        return int(np.argmax(masked))

    def refresh(k: int):
        assign = Assignment(matrix)
        if strict_rate_update:
            rates[k] = user_rates(h, assign, p, budget)[k]
        else:
            rates[:] = user_rates(h, assign, p, budget)

    for k in range(k_users):
        n = pick_best(k)
        matrix[k, n] = 1
        available[n] = False
        refresh(k)

    while available.any():
        k = int(np.argmin(rates / qos))
        n = pick_best(k)
        matrix[k, n] = 1
        available[n] = False
        refresh(k)

    return Assignment(matrix)


def exhaustive(
    gains,
    p,
    budget: LinkBudget,
    objective: AssignmentObjective = AssignmentObjective.MAX_SUM_RATE,
    evaluation_cap: int = 2**20,
    chunk: int = 4096,
) -> Assignment:
    """Optimal assignment by enumerating all K^N full assignments.

    Every LED serves someone; ties on the objective keep the lexicographically
    smallest owner tuple.  Assignments starving a user are skipped under the
    log objective.
    """
    h = gains_matrix(gains)
    p = np.asarray(p, dtype=float)
    k_users, n_leds = h.shape
    total = k_users**n_leds
    if total > evaluation_cap:
        raise SearchSpaceError(
            f"{k_users}^{n_leds} = {total} assignments exceed the cap of "
            f"{evaluation_cap}; use hrs/wss/pra instead"
        )

    hp = budget.responsivity * h * p[None, :]  # (K, N) current per (user, LED)
    noise = budget.noise_power
    want_log = objective == AssignmentObjective.MAX_LOG_SUM_RATE

    best_value = -np.inf
    best_owner: tuple[int, ...] | None = None
    iterator = itertools.product(range(k_users), repeat=n_leds)
    while True:
        block = list(itertools.islice(iterator, chunk))
        if not block:
            break
        owners = np.array(block, dtype=np.int64)  # (B, N)
        onehot = owners[:, :, None] == np.arange(k_users)[None, None, :]  # (B, N, L)
        amps = np.einsum("bnl,kn->blk", onehot, hp)  # group l at user k
        powers = amps**2
        signal = np.einsum("bkk->bk", powers)
        interference = powers.sum(axis=1) - signal
        sinr_vals = signal / (noise + interference)
        rates = budget.bandwidth * np.log2(1.0 + sinr_vals)
        if want_log:
            with np.errstate(divide="ignore"):
                values = np.where(
                    np.all(rates > 0, axis=1), np.sum(np.log(np.maximum(rates, 1e-300)), axis=1), -np.inf
                )
        else:
            values = rates.sum(axis=1)
        idx = int(np.argmax(values))
        if values[idx] > best_value:
            best_value = float(values[idx])
            best_owner = tuple(int(x) for x in owners[idx])

    if best_owner is None or best_value == -np.inf:
        raise InfeasibleAssignmentError(
            "no full assignment serves every user under the log objective"
        )
    return Assignment.from_owner(np.array(best_owner), users=k_users)
