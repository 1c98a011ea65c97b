"""Optical channel computation: LOS gains and the multipath reflection engine.

Two independent routes compute the multipath channel:

* a frequency-domain engine built on the (L+1)x(L+1) one-bounce coupling
  matrix of the scene (LED/PD on node 0, the L surface patches on nodes
  1..L), summed over reflection orders through its eigendecomposition, and
* a brute-force path enumerator (`recursive_oracle`) that walks every
  reflector sequence explicitly.

The engine's node 0 acts as the LED when sourcing and as the PD when
receiving, so entry (0, 0) of the coupling matrix carries the direct LOS
term and the excitation vector e_0 injects the LED only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import SPEED_OF_LIGHT, LedSource, Photodetector, Reflector

_TWO_PI = 2.0 * math.pi


class ChannelConvergenceError(RuntimeError):
    """Raised when the infinite-order reflection series does not converge."""


class PathCountError(RuntimeError):
    """Raised when explicit path enumeration would exceed the path cap."""


# ---------------------------------------------------------------------------
# line-of-sight primitives
# ---------------------------------------------------------------------------

def los_gain(source: LedSource, pd: Photodetector) -> float:
    """DC gain of the direct path from a Lambertian source to a detector.

    Returns (gamma+1)/(2*pi) * cos^gamma(phi) * cos(theta) * A / R^2 when the
    detector lies in front of the source (phi <= pi/2) and the source lies
    inside the detector FOV (theta <= fov), else 0.  phi is measured at the
    source from its beam axis, theta at the detector from its normal.
    """
    d = pd.position - source.position
    r_sq = float(d @ d)
    if r_sq == 0.0:
        raise ValueError("source and detector positions coincide")
    r = math.sqrt(r_sq)
    cos_phi = float(source.orientation @ d) / r
    cos_theta = -float(pd.orientation @ d) / r
    if cos_phi <= 0.0 or cos_theta <= 0.0:
        return 0.0
    if cos_theta < math.cos(pd.fov):
        return 0.0
    gamma = source.lambertian_order
    return (gamma + 1.0) / _TWO_PI * cos_phi**gamma * cos_theta * pd.area / r_sq


def los_delay(source: LedSource, pd: Photodetector) -> float:
    """Propagation delay of the direct path in seconds."""
    d = pd.position - source.position
    r = float(np.linalg.norm(d))
    if r == 0.0:
        raise ValueError("source and detector positions coincide")
    return r / SPEED_OF_LIGHT


def _gain_matrix(src_pos, src_axis, src_gamma, rx_pos, rx_axis, rx_area, rx_cos_fov):
    """Vectorized LOS gains from each source j to each receiver i.

    Returns (gains, distances), both with shape (n_rx, n_src).  Coincident
    source/receiver pairs get zero gain (that covers patch self-coupling).
    """
    diff = rx_pos[:, None, :] - src_pos[None, :, :]  # (n_rx, n_src, 3)
    r_sq = np.einsum("ijk,ijk->ij", diff, diff)
    r = np.sqrt(r_sq)
    safe_r = np.where(r > 0, r, 1.0)
    cos_phi = np.einsum("jk,ijk->ij", src_axis, diff) / safe_r
    cos_theta = -np.einsum("ik,ijk->ij", rx_axis, diff) / safe_r
    visible = (r_sq > 0) & (cos_phi > 0) & (cos_theta > 0) & (cos_theta >= rx_cos_fov[:, None])
    cos_phi = np.where(visible, cos_phi, 0.0)
    gains = np.where(
        visible,
        (src_gamma[None, :] + 1.0)
        / _TWO_PI
        * cos_phi ** src_gamma[None, :]
        * cos_theta
        * rx_area[:, None]
        / np.where(r_sq > 0, r_sq, 1.0),
        0.0,
    )
    return gains, r


def _patch_arrays(reflectors: list[Reflector]):
    pos = np.array([p.position for p in reflectors], dtype=float).reshape(len(reflectors), 3)
    axis = np.array([p.orientation for p in reflectors], dtype=float).reshape(len(reflectors), 3)
    area = np.array([p.area for p in reflectors], dtype=float)
    rho = np.array([p.coefficient for p in reflectors], dtype=float)
    return pos, axis, area, rho


# ---------------------------------------------------------------------------
# frequency-domain engine
# ---------------------------------------------------------------------------

@dataclass
class CfrMatrix:
    """One-bounce coupling matrix C(f) of a scene at a single frequency.

    entries[i, j] = h0(source j -> receiver i) * exp(j*2*pi*tau_ij*f); node 0
    sources as the LED and receives as the PD, nodes 1..L are the surface
    patches (mode-1 sources; receivers with the patch area and FOV pi/2).
    """

    entries: np.ndarray
    frequency: float

    @property
    def size(self) -> int:
        return self.entries.shape[0]


def build_cfr_matrix(
    source: LedSource,
    pd: Photodetector,
    reflectors: list[Reflector],
    frequency: float = 0.0,
) -> CfrMatrix:
    """Assemble C(f) for one LED/PD pair and the scene's reflectors."""
    n = len(reflectors) + 1
    if reflectors:
        p_pos, p_axis, p_area, _ = _patch_arrays(reflectors)
        src_pos = np.vstack([source.position[None, :], p_pos])
        src_axis = np.vstack([source.orientation[None, :], p_axis])
        src_gamma = np.concatenate([[source.lambertian_order], np.ones(len(reflectors))])
        rx_pos = np.vstack([pd.position[None, :], p_pos])
        rx_axis = np.vstack([pd.orientation[None, :], p_axis])
        rx_area = np.concatenate([[pd.area], p_area])
        rx_cos_fov = np.concatenate([[math.cos(pd.fov)], np.zeros(len(reflectors))])
    else:
        src_pos = source.position[None, :]
        src_axis = source.orientation[None, :]
        src_gamma = np.array([source.lambertian_order])
        rx_pos = pd.position[None, :]
        rx_axis = pd.orientation[None, :]
        rx_area = np.array([pd.area])
        rx_cos_fov = np.array([math.cos(pd.fov)])

    gains, dist = _gain_matrix(src_pos, src_axis, src_gamma, rx_pos, rx_axis, rx_area, rx_cos_fov)
    if frequency == 0.0:
        entries = gains
    else:
        tau = dist / SPEED_OF_LIGHT
        entries = gains * np.exp(1j * _TWO_PI * tau * frequency)
    assert entries.shape == (n, n)
    return CfrMatrix(entries=entries, frequency=frequency)


def _reflection_coefficients(reflectors: list[Reflector]) -> np.ndarray:
    return np.array([p.coefficient for p in reflectors], dtype=float)


def cfr(
    source: LedSource,
    pd: Photodetector,
    reflectors: list[Reflector],
    frequency: float = 0.0,
    order: float = 0,
) -> complex:
    """Channel frequency response at one frequency, summed to `order` bounces.

    order may be a nonnegative integer or math.inf.  The d-bounce received
    component is the first entry of (C(f) D)^d C(f) e_0; the series over d is
    evaluated through the eigendecomposition of C(f) D (the infinite tail via
    the geometric-series closed form), falling back to iterated matrix-vector
    products / a direct linear solve when the eigenbasis is ill-conditioned.
    """
    infinite = math.isinf(order)
    if not infinite and (order < 0 or int(order) != order):
        raise ValueError("order must be a nonnegative integer or math.inf")
    c = build_cfr_matrix(source, pd, reflectors, frequency).entries
    p0 = c[:, 0].copy()
    if (not infinite and order == 0) or not reflectors:
        return complex(p0[0])

    rho = _reflection_coefficients(reflectors)
    d_diag = np.concatenate([[0.0], rho])
    m = c * d_diag[None, :]

    eigvals, eigvecs = np.linalg.eig(m)
    radius = float(np.max(np.abs(eigvals)))
    if infinite and radius >= 1.0 - 1e-6:
        raise ChannelConvergenceError(
            f"spectral radius {radius:.6f} of C(f)D is too close to 1; "
            "the infinite reflection series does not converge"
        )

    mp0 = m @ p0
    use_eig = True
    try:
        z = np.linalg.solve(eigvecs, p0)
        recon = (eigvecs * eigvals[None, :]) @ z
        scale = float(np.linalg.norm(mp0))
        if not np.all(np.isfinite(z)) or np.linalg.norm(recon - mp0) > 1e-8 * (scale + 1e-300):
            use_eig = False
    except np.linalg.LinAlgError:
        use_eig = False

    if use_eig:
        if infinite:
            series = eigvals / (1.0 - eigvals)
        else:
            series = np.zeros_like(eigvals)
            power = np.ones_like(eigvals)
            for _ in range(int(order)):
                power = power * eigvals
                series = series + power
        result = complex(p0[0] + (eigvecs @ (series * z))[0])
    elif infinite:
        tail_vec = np.linalg.solve(np.eye(m.shape[0], dtype=m.dtype) - m, mp0)
        result = complex(p0[0] + tail_vec[0])
    else:
        acc = p0[0]
        v = p0
        for _ in range(int(order)):
            v = m @ v
            acc = acc + v[0]
        result = complex(acc)

    if frequency == 0.0:
        # real inputs make the f = 0 series real; only eigendecomposition
        # roundoff can leak an imaginary residue, bounded by the scene scale
        scale = max(abs(result.real), float(np.max(np.abs(p0))), 1e-300)
        if abs(result.imag) > 1e-12 * scale:
            raise ArithmeticError(f"non-real DC response: {result!r}")
        return complex(result.real)
    return result


def dc_gain(
    source: LedSource,
    pd: Photodetector,
    reflectors: list[Reflector],
    order: float = 0,
) -> float:
    """Real DC channel gain: the CFR at f = 0 summed to `order` bounces."""
    value = cfr(source, pd, reflectors, frequency=0.0, order=order)
    real, imag = value.real, value.imag
    if abs(imag) > 1e-12 * max(abs(real), 1e-300):
        raise ArithmeticError(f"DC gain came out complex: {value!r}")
    return max(real, 0.0)


# ---------------------------------------------------------------------------
# explicit path enumeration oracle
# ---------------------------------------------------------------------------

@dataclass
class ImpulseResponse:
    """Channel impulse response as a list of (delay, amplitude) path samples."""

    times: np.ndarray
    amplitudes: np.ndarray

    @property
    def dc_gain(self) -> float:
        return float(np.sum(self.amplitudes))

    def cfr(self, frequency: float) -> complex:
        """Sum of amplitude * exp(j*2*pi*tau*f) over all paths."""
        return complex(np.sum(self.amplitudes * np.exp(1j * _TWO_PI * self.times * frequency)))


def recursive_oracle(
    source: LedSource,
    pd: Photodetector,
    reflectors: list[Reflector],
    d_max: int,
    path_cap: int = 2_000_000,
) -> ImpulseResponse:
    """Enumerate every reflector sequence up to d_max bounces explicitly.

    Cost grows as L^d; the enumeration refuses to start when the total path
    count would exceed `path_cap`.  Intended as a validation oracle for the
    frequency-domain engine on small scenes.
    """
    if d_max < 0:
        raise ValueError("d_max must be nonnegative")
    n_patches = len(reflectors)
    total = sum(n_patches**d for d in range(1, d_max + 1))
    if total > path_cap:
        raise PathCountError(
            f"{total} paths exceed the cap of {path_cap}; reduce d_max or the patch count"
        )

    times = [los_delay(source, pd)]
    amplitudes = [los_gain(source, pd)]
    if n_patches == 0 or d_max == 0:
        return ImpulseResponse(np.array(times), np.array(amplitudes))

    p_pos, p_axis, p_area, rho = _patch_arrays(reflectors)
    patch_cos_fov = np.zeros(n_patches)

    # hop tables: source -> patch, patch -> patch, patch -> detector
    g_sp, r_sp = _gain_matrix(
        source.position[None, :],
        source.orientation[None, :],
        np.array([source.lambertian_order]),
        p_pos,
        p_axis,
        p_area,
        patch_cos_fov,
    )
    g_sp, tau_sp = g_sp[:, 0], r_sp[:, 0] / SPEED_OF_LIGHT
    ones = np.ones(n_patches)
    g_pp, r_pp = _gain_matrix(p_pos, p_axis, ones, p_pos, p_axis, p_area, patch_cos_fov)
    tau_pp = r_pp / SPEED_OF_LIGHT
    g_pr, r_pr = _gain_matrix(
        p_pos,
        p_axis,
        ones,
        pd.position[None, :],
        pd.orientation[None, :],
        np.array([pd.area]),
        np.array([math.cos(pd.fov)]),
    )
    g_pr, tau_pr = g_pr[0, :], r_pr[0, :] / SPEED_OF_LIGHT

    def walk(node: int, bounces_left: int, amp: float, delay: float):
        if bounces_left == 0:
            a = amp * g_pr[node]
            if a != 0.0:
                times.append(delay + tau_pr[node])
                amplitudes.append(a)
            return
        row_g = g_pp[:, node]  # node as source -> patch i as receiver
        row_t = tau_pp[:, node]
        for nxt in range(n_patches):
            a = row_g[nxt]
            if a != 0.0:
                walk(nxt, bounces_left - 1, amp * rho[nxt] * a, delay + row_t[nxt])

    for depth in range(1, d_max + 1):
        for first in range(n_patches):
            a = g_sp[first]
            if a != 0.0:
                walk(first, depth - 1, a * rho[first], tau_sp[first])

    return ImpulseResponse(np.array(times), np.array(amplitudes))


# ---------------------------------------------------------------------------
# CIR from CFR utility
# ---------------------------------------------------------------------------

def cir_from_cfr(
    source: LedSource,
    pd: Photodetector,
    reflectors: list[Reflector],
    order: float,
    f_max: float = 100e6,
    df: float = 1e6,
) -> tuple[np.ndarray, np.ndarray]:
    """Impulse response by inverse Fourier transform of a sampled CFR.

    The CFR is sampled on 0..f_max at spacing df, Hermitian-extended and
    transformed; returns (times, amplitudes) where the amplitudes sum to the
    DC gain.
    """
    if f_max <= 0 or df <= 0 or f_max < df:
        raise ValueError("need f_max >= df > 0")
    n_freq = int(round(f_max / df)) + 1
    samples = np.array(
        [cfr(source, pd, reflectors, frequency=k * df, order=order) for k in range(n_freq)]
    )
    n_fft = 2 * n_freq - 1
    spectrum = np.zeros(n_fft, dtype=complex)
    spectrum[0] = samples[0].real
    spectrum[1:n_freq] = samples[1:]
    spectrum[n_freq:] = np.conj(samples[1:][::-1])
    # forward transform maps the engine's exp(+j*2*pi*tau*f) phases to +tau
    impulse = np.fft.fft(spectrum) / n_fft
    dt = 1.0 / (df * n_fft)
    return np.arange(n_fft) * dt, impulse.real


# ---------------------------------------------------------------------------
# batched gains over a scenario
# ---------------------------------------------------------------------------

@dataclass
class ChannelGains:
    """Dense K x M x N tensor of DC gains (user, PD-on-user, LED)."""

    gains: np.ndarray

    def __post_init__(self):
        self.gains = np.asarray(self.gains, dtype=float)
        if self.gains.ndim != 3:
            raise ValueError("gains must have shape (users, pds_per_user, leds)")
        if not np.all(np.isfinite(self.gains)) or np.any(self.gains < 0):
            raise ValueError("gains must be finite and nonnegative")

    @property
    def users(self) -> int:
        return self.gains.shape[0]

    @property
    def pds_per_user(self) -> int:
        return self.gains.shape[1]

    @property
    def leds(self) -> int:
        return self.gains.shape[2]

    def single_pd(self) -> np.ndarray:
        """The K x N gain matrix of a single-PD population."""
        if self.pds_per_user != 1:
            raise ValueError("gains tensor has more than one PD per user")
        return self.gains[:, 0, :]

    def summed(self) -> np.ndarray:
        """Total gain per (user, LED), summed over the user's PDs."""
        return self.gains.sum(axis=1)


@dataclass
class _SceneKernel:
    """Geometry-only multipath data shared by every (LED, PD) pair of a scene.

    nlos_basis[:, n] maps patch-to-PD pickup gains to the summed reflection
    contribution of LED n: gain = los + pickup_row @ nlos_basis[:, n].
    """

    patch_pos: np.ndarray
    patch_axis: np.ndarray
    patch_area: np.ndarray
    led_pos: np.ndarray
    led_axis: np.ndarray
    led_gamma: np.ndarray
    nlos_basis: np.ndarray | None


_KERNEL_CACHE: dict[tuple, _SceneKernel] = {}
_KERNEL_CACHE_MAX = 4


def _build_scene_kernel(leds: list[LedSource], reflectors: list[Reflector], order: float) -> _SceneKernel:
    led_pos = np.array([s.position for s in leds], dtype=float)
    led_axis = np.array([s.orientation for s in leds], dtype=float)
    led_gamma = np.array([s.lambertian_order for s in leds], dtype=float)
    if not reflectors or order == 0:
        return _SceneKernel(
            patch_pos=np.zeros((0, 3)),
            patch_axis=np.zeros((0, 3)),
            patch_area=np.zeros(0),
            led_pos=led_pos,
            led_axis=led_axis,
            led_gamma=led_gamma,
            nlos_basis=None,
        )
    p_pos, p_axis, p_area, rho = _patch_arrays(reflectors)
    n_patches = len(reflectors)
    patch_cos_fov = np.zeros(n_patches)
    # patch-to-patch coupling: column j sources, row i receives
    coupling, _ = _gain_matrix(p_pos, p_axis, np.ones(n_patches), p_pos, p_axis, p_area, patch_cos_fov)
    weighted = coupling * rho[None, :]
    eye = np.eye(n_patches)
    if math.isinf(order):
        # crude spectral-radius estimate by power iteration
        v = np.full(n_patches, 1.0 / math.sqrt(n_patches))
        radius = 0.0
        for _ in range(50):
            w = weighted @ v
            radius = float(np.linalg.norm(w))
            if radius == 0.0:
                break
            v = w / radius
        if radius >= 1.0 - 1e-6:
            raise ChannelConvergenceError(
                f"estimated spectral radius {radius:.6f} of the reflection operator is too "
                "close to 1; the infinite series does not converge"
            )
        series = np.linalg.solve(eye - weighted, eye)
    else:
        series = eye.copy()
        for _ in range(int(order) - 1):
            series = eye + weighted @ series
    injection, _ = _gain_matrix(led_pos, led_axis, led_gamma, p_pos, p_axis, p_area, patch_cos_fov)
    basis = (rho[:, None] * series) @ injection  # (L, N)
    return _SceneKernel(
        patch_pos=p_pos,
        patch_axis=p_axis,
        patch_area=p_area,
        led_pos=led_pos,
        led_axis=led_axis,
        led_gamma=led_gamma,
        nlos_basis=basis,
    )


def scene_kernel(config) -> _SceneKernel:
    """Cached multipath kernel for a scenario's fixed geometry."""
    key = config.geometry_key()
    kernel = _KERNEL_CACHE.get(key)
    if kernel is None:
        from . import scenario as scenario_mod

        kernel = _build_scene_kernel(
            scenario_mod.led_sources(config),
            scenario_mod.room_reflectors(config),
            config.reflection_order,
        )
        if len(_KERNEL_CACHE) >= _KERNEL_CACHE_MAX:
            _KERNEL_CACHE.pop(next(iter(_KERNEL_CACHE)))
        _KERNEL_CACHE[key] = kernel
    return kernel


def compute_channel_gains(config, positions: np.ndarray | None = None) -> ChannelGains:
    """DC gain tensor h[k, m, n] for a scenario's user population.

    When `positions` is None the users are placed from the scenario seed
    (realization 0), so the result is fully determined by the config.
    """
    from . import scenario as scenario_mod

    if positions is None:
        positions = scenario_mod.place_users(config, 0)
    positions = np.asarray(positions, dtype=float)
    kernel = scene_kernel(config)
    n_leds = kernel.led_pos.shape[0]
    users = positions.shape[0]
    pds0 = scenario_mod.receiver_pds(config, positions[0])
    m_pds = len(pds0)
    gains = np.zeros((users, m_pds, n_leds))
    for k in range(users):
        pds = pds0 if k == 0 else scenario_mod.receiver_pds(config, positions[k])
        rx_pos = np.array([p.position for p in pds], dtype=float)
        rx_axis = np.array([p.orientation for p in pds], dtype=float)
        rx_area = np.array([p.area for p in pds], dtype=float)
        rx_cos_fov = np.array([math.cos(p.fov) for p in pds], dtype=float)
        los, _ = _gain_matrix(
            kernel.led_pos, kernel.led_axis, kernel.led_gamma, rx_pos, rx_axis, rx_area, rx_cos_fov
        )
        gains[k] = los
        if kernel.nlos_basis is not None:
            pickup, _ = _gain_matrix(
                kernel.patch_pos,
                kernel.patch_axis,
                np.ones(kernel.patch_pos.shape[0]),
                rx_pos,
                rx_axis,
                rx_area,
                rx_cos_fov,
            )
            gains[k] += pickup @ kernel.nlos_basis
    return ChannelGains(gains=gains)
