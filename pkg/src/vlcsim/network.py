"""Connectivity, SINR, rate and fairness metrics over a channel-gain matrix.

The electrical-domain signal model: the current contributed by LED n at user
k is responsivity * h[k, n] * p[n]; LEDs serving the same user add
coherently, each interfering user's group adds as one component, and the
noise floor is N0 * B.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelGains


class InfeasibleAssignmentError(RuntimeError):
    """An assignment starves a user that the requested objective requires served."""


@dataclass
class LinkBudget:
    """Receiver noise spectral density, bandwidth, power cap and responsivity."""

    noise_psd: float  # A^2/Hz
    bandwidth: float  # Hz
    p_max: float  # W^(1/2)-scaled signal std-dev units
    responsivity: float = 0.5  # A/W

    def __post_init__(self):
        for name in ("noise_psd", "bandwidth", "p_max", "responsivity"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")

    @property
    def noise_power(self) -> float:
        return self.noise_psd * self.bandwidth


@dataclass
class Assignment:
    """K x N binary connectivity matrix; a[k, n] = 1 when LED n serves user k.

    Each column sums to at most 1 (an LED serves at most one user).
    """

    matrix: np.ndarray

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix)
        if self.matrix.ndim != 2:
            raise ValueError("assignment matrix must be 2-D (users x leds)")
        if not np.all((self.matrix == 0) | (self.matrix == 1)):
            raise ValueError("assignment matrix must be binary")
        self.matrix = self.matrix.astype(np.int8)
        if np.any(self.matrix.sum(axis=0) > 1):
            raise ValueError("an LED cannot serve more than one user")

    @property
    def users(self) -> int:
        return self.matrix.shape[0]

    @property
    def leds(self) -> int:
        return self.matrix.shape[1]

    def led_owner(self) -> np.ndarray:
        """User index serving each LED, -1 for unassigned columns."""
        owners = np.argmax(self.matrix, axis=0)
        owners = np.where(self.matrix.sum(axis=0) > 0, owners, -1)
        return owners.astype(int)

    @classmethod
    def from_owner(cls, owners, users: int) -> "Assignment":
        owners = np.asarray(owners, dtype=int)
        matrix = np.zeros((users, owners.size), dtype=np.int8)
        for n, k in enumerate(owners):
            if k >= 0:
                matrix[k, n] = 1
        return cls(matrix)


def gains_matrix(gains) -> np.ndarray:
    """Coerce a ChannelGains (single-PD) or array to a K x N float matrix."""
    if isinstance(gains, ChannelGains):
        return gains.single_pd()
    arr = np.asarray(gains, dtype=float)
    if arr.ndim != 2:
        raise ValueError("expected a 2-D gain matrix (users x leds)")
    return arr


def _group_amplitudes(h_row: np.ndarray, assign: Assignment, p: np.ndarray, r: float) -> np.ndarray:
    """Per-user-group received amplitude r * sum_n a[l, n] h[k, n] p[n] at one user."""
    return r * (assign.matrix * (h_row * p)[None, :]).sum(axis=1)


def sinr(gains, assign: Assignment, p, budget: LinkBudget, k: int) -> float:
    """SINR of user k: coherent own-group power over noise plus per-group interference."""
    h = gains_matrix(gains)
    p = np.asarray(p, dtype=float)
    if h.shape != (assign.users, assign.leds) or p.shape != (assign.leds,):
        raise ValueError("gain / assignment / power dimensions disagree")
    amps = _group_amplitudes(h[k], assign, p, budget.responsivity)
    signal = amps[k] ** 2
    interference = float(np.sum(amps**2) - signal)
    return float(signal / (budget.noise_power + interference))


def rate(sinr_value: float, bandwidth: float) -> float:
    """Shannon rate B * log2(1 + SINR) in bits/s."""
    if sinr_value < 0:
        raise ValueError("SINR must be nonnegative")
    return bandwidth * math.log2(1.0 + sinr_value)


def user_sinr(gains, assign: Assignment, p, budget: LinkBudget) -> np.ndarray:
    """SINR of every user under a common assignment and power vector."""
    h = gains_matrix(gains)
    p = np.asarray(p, dtype=float)
    if h.shape != (assign.users, assign.leds) or p.shape != (assign.leds,):
        raise ValueError("gain / assignment / power dimensions disagree")
    amps = budget.responsivity * (assign.matrix * p[None, :]) @ h.T  # (K groups, K users)
    powers = amps**2
    signal = np.diag(powers)
    interference = powers.sum(axis=0) - signal
    return signal / (budget.noise_power + interference)


def user_rates(gains, assign: Assignment, p, budget: LinkBudget) -> np.ndarray:
    """Rates of all users under a common assignment and power vector."""
    return budget.bandwidth * np.log2(1.0 + user_sinr(gains, assign, p, budget))


def sum_rate(gains, assign: Assignment, p, budget: LinkBudget) -> float:
    return float(np.sum(user_rates(gains, assign, p, budget)))


def log_sum_rate(gains, assign: Assignment, p, budget: LinkBudget) -> float:
    """Sum of natural-log rates; starved users make the assignment infeasible."""
    rates = user_rates(gains, assign, p, budget)
    if np.any(rates <= 0):
        raise InfeasibleAssignmentError(
            "log-rate objective undefined: users with zero rate: "
            f"{np.nonzero(rates <= 0)[0].tolist()}"
        )
    return float(np.sum(np.log(rates)))


def jain_fairness(rates) -> float:
    """Jain's fairness index (sum R)^2 / (K sum R^2), in [1/K, 1]."""
    rates = np.asarray(rates, dtype=float)
    if rates.size == 0:
        raise ValueError("need at least one rate")
    if np.any(rates < 0):
        raise ValueError("rates must be nonnegative")
    total_sq = float(np.sum(rates**2))
    if total_sq == 0:
        raise ValueError("all rates are zero; fairness undefined")
    return float(np.sum(rates)) ** 2 / (rates.size * total_sq)


def tdma_rates(gains, p, budget: LinkBudget, users: int | None = None) -> np.ndarray:
    """Per-user rates when all LEDs serve one user at a time in equal slots.

    Each user sees the full LED set interference-free for a 1/K duty cycle.
    """
    h = gains_matrix(gains)
    p = np.asarray(p, dtype=float)
    k_users = h.shape[0] if users is None else users
    snr = (budget.responsivity * h @ p) ** 2 / budget.noise_power
    return budget.bandwidth * np.log2(1.0 + snr) / k_users
