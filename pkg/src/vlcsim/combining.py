"""Multi-photodetector receiver combining: MRC, optimum combining, and
grouping-aware optimum combining, plus the assignment broadcast codec.

Per-PD amplitudes from user l's LED group at user k's PD m are
y[l, m] = r * sum_n a[l, n] p[n] h[k, m, n]; the combined SINR of weight
vector w is (w . y_k)^2 / (|w|^2 N0 B + sum_{l != k} (w . y_l)^2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelGains
from .network import Assignment, LinkBudget


def _pd_gains(pd_channel, k: int) -> np.ndarray:
    """User k's M x N gain matrix from a ChannelGains or 3-D array."""
    if isinstance(pd_channel, ChannelGains):
        return pd_channel.gains[k]
    arr = np.asarray(pd_channel, dtype=float)
    if arr.ndim != 3:
        raise ValueError("expected a (users, pds, leds) gain tensor")
    return arr[k]


def _group_signals(h_k: np.ndarray, assign: Assignment, p: np.ndarray, r: float) -> np.ndarray:
    """(K, M) matrix of per-group amplitudes y[l, m] at one user's PDs."""
    return r * (assign.matrix * p[None, :]) @ h_k.T


def combined_sinr(pd_channel, assign: Assignment, p, budget: LinkBudget, w, k: int) -> float:
    """SINR of user k after linearly combining its PDs with weights w."""
    w = np.asarray(w, dtype=float)
    if not np.any(w != 0):
        raise ValueError("combining weights must not all be zero")
    h_k = _pd_gains(pd_channel, k)
    p = np.asarray(p, dtype=float)
    y = _group_signals(h_k, assign, p, budget.responsivity)  # (K, M)
    combined = y @ w
    signal = combined[k] ** 2
    interference = float(np.sum(combined**2) - signal)
    noise = float(w @ w) * budget.noise_power
    return float(signal / (noise + interference))


def mrc_weights(pd_channel, assign: Assignment, p, budget: LinkBudget, k: int) -> np.ndarray:
    """Maximum ratio combining: each PD weighted by its own SINR."""
    h_k = _pd_gains(pd_channel, k)
    p = np.asarray(p, dtype=float)
    y = _group_signals(h_k, assign, p, budget.responsivity)
    signal = y[k] ** 2
    interference = np.sum(y**2, axis=0) - signal
    return signal / (budget.noise_power + interference)


def oc_weights(pd_channel, assign: Assignment, p, budget: LinkBudget, k: int) -> np.ndarray:
    """Optimum combining against a per-LED interference correlation model.

    The correlation matrix sums outer products of each non-serving LED's
    signal vector individually, ignoring that co-group LEDs transmit the
    same symbol.
    """
    h_k = _pd_gains(pd_channel, k)
    p = np.asarray(p, dtype=float)
    r = budget.responsivity
    u = r * p[None, :] * h_k  # (M, N) columns are per-LED signal vectors
    non_serving = assign.matrix[k] == 0
    m_pds = h_k.shape[0]
    corr = budget.noise_power * np.eye(m_pds)
    cols = u[:, non_serving]
    corr += cols @ cols.T
    desired = u[:, ~non_serving].sum(axis=1)
    return _solve_weights(corr, desired)


def gboc_weights(pd_channel, assign: Assignment, p, budget: LinkBudget, k: int) -> np.ndarray:
    """Grouping-based optimum combining.

    Uses the full assignment matrix so each interfering user's LED group sums
    coherently before the outer product, which makes the correlation matrix
    the exact interference-plus-noise covariance of the combined SINR.
    """
    h_k = _pd_gains(pd_channel, k)
    p = np.asarray(p, dtype=float)
    y = _group_signals(h_k, assign, p, budget.responsivity)  # (K, M)
    m_pds = h_k.shape[0]
    corr = budget.noise_power * np.eye(m_pds)
    for user in range(y.shape[0]):
        if user != k:
            corr += np.outer(y[user], y[user])
    return _solve_weights(corr, y[k])


def _solve_weights(corr: np.ndarray, desired: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.solve(corr, desired)
    except np.linalg.LinAlgError as exc:
        raise ValueError("interference-plus-noise correlation matrix is singular") from exc


# ---------------------------------------------------------------------------
# assignment broadcast codec
# ---------------------------------------------------------------------------

class CodecError(ValueError):
    """Malformed broadcast payload."""


@dataclass
class BroadcastMessage:
    """Packed LED assignment: one ceil(log2(K+1))-bit field per LED.

    Field value 0 means unassigned, v in 1..K means user v; fields are packed
    MSB-first in LED order, the final byte zero-padded.
    """

    payload: bytes
    users: int
    leds: int

    @property
    def bits_per_led(self) -> int:
        return max(1, int(self.users).bit_length())

    @property
    def bit_count(self) -> int:
        return self.bits_per_led * self.leds


def encode_assignment(assign: Assignment) -> BroadcastMessage:
    """Pack an assignment into the compact per-LED broadcast form."""
    owners = assign.led_owner()
    bits_per_led = max(1, assign.users.bit_length())
    acc = 0
    n_bits = 0
    for owner in owners:
        acc = (acc << bits_per_led) | (int(owner) + 1 if owner >= 0 else 0)
        n_bits += bits_per_led
    pad = (-n_bits) % 8
    acc <<= pad
    payload = acc.to_bytes((n_bits + pad) // 8, "big") if n_bits else b""
    return BroadcastMessage(payload=payload, users=assign.users, leds=assign.leds)


def decode_assignment(message: BroadcastMessage | bytes, users: int | None = None, leds: int | None = None) -> Assignment:
    """Recover the assignment matrix from a broadcast payload."""
    if isinstance(message, BroadcastMessage):
        payload, users, leds = message.payload, message.users, message.leds
    else:
        if users is None or leds is None:
            raise CodecError("raw payloads need explicit users and leds")
        payload = bytes(message)
    bits_per_led = max(1, int(users).bit_length())
    n_bits = bits_per_led * leds
    expected = (n_bits + 7) // 8
    if len(payload) != expected:
        raise CodecError(f"payload holds {len(payload)} bytes, expected {expected}")
    acc = int.from_bytes(payload, "big") if payload else 0
    pad = len(payload) * 8 - n_bits
    if pad and acc & ((1 << pad) - 1):
        raise CodecError("padding bits must be zero")
    acc >>= pad
    owners = np.empty(leds, dtype=int)
    mask = (1 << bits_per_led) - 1
    for n in reversed(range(leds)):
        value = acc & mask
        acc >>= bits_per_led
        if value > users:
            raise CodecError(f"field value {value} exceeds the user count {users}")
        owners[n] = value - 1
    return Assignment.from_owner(owners, users=users)
