"""Box-constrained LED power optimization with analytic derivatives.

The rate derivatives are expressed through the per-group amplitude sums
S[l, k] = sum_n a[l, n] h[k, n] p[n] and the totals
T[k] = N0*B/r^2 + sum_l S[l, k]^2, so that SINR(k) = S[k,k]^2/(T[k]-S[k,k]^2).
The optimizer is a projected Newton method on the box [0, p_max]^N driven by
the analytic gradient and Hessian, with projected-gradient fallback steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .assignment import AssignmentObjective
from .network import Assignment, InfeasibleAssignmentError, LinkBudget, gains_matrix, user_rates


class PowerOptimizationError(RuntimeError):
    """Optimizer failed to reach the KKT tolerance; carries the best iterate."""

    def __init__(self, message: str, best_p: np.ndarray, best_value: float):
        super().__init__(message)
        self.best_p = best_p
        self.best_value = best_value


@dataclass
class RateDerivativeContext:
    """Precomputed quantities entering the analytic rate derivatives."""

    h: np.ndarray  # (K, N) gains
    p: np.ndarray  # (N,) power coefficients
    s: np.ndarray  # (K, K): s[l, k] = sum_n a[l, n] h[k, n] p[n]
    t: np.ndarray  # (K,): N0*B/r^2 + sum_l s[l, k]^2
    sinr: np.ndarray  # (K,)
    rates: np.ndarray  # (K,) bits/s
    led_owner: np.ndarray  # (N,) serving user per LED, -1 unassigned
    bandwidth: float


def derivative_context(gains, assign: Assignment, p, budget: LinkBudget) -> RateDerivativeContext:
    h = gains_matrix(gains)
    p = np.asarray(p, dtype=float)
    if h.shape != (assign.users, assign.leds) or p.shape != (assign.leds,):
        raise ValueError("gain / assignment / power dimensions disagree")
    a = assign.matrix.astype(float)
    s = (a * p[None, :]) @ h.T  # s[l, k]
    noise = budget.noise_power / budget.responsivity**2
    t = noise + np.sum(s**2, axis=0)
    signal = np.diag(s) ** 2
    sinr = signal / (t - signal)
    rates = budget.bandwidth * np.log2(1.0 + sinr)
    return RateDerivativeContext(
        h=h,
        p=p,
        s=s,
        t=t,
        sinr=sinr,
        rates=rates,
        led_owner=assign.led_owner(),
        bandwidth=budget.bandwidth,
    )


_LN2 = math.log(2.0)


def _plain_gradients(ctx: RateDerivativeContext) -> np.ndarray:
    """dR_k/dp_m for all users and LEDs, shape (K, N)."""
    k_users, n_leds = ctx.h.shape
    owner = ctx.led_owner
    grad = np.zeros((k_users, n_leds))
    assigned = owner >= 0
    if not np.any(assigned):
        return grad
    cols = np.nonzero(assigned)[0]
    own = owner[cols]
    s_lk = ctx.s[own, :]  # (n_assigned, K): s[f(m), k]
    served = own[:, None] == np.arange(k_users)[None, :]
    c_km = np.where(served, 1.0, -ctx.sinr[None, :])
    g = (ctx.bandwidth / _LN2) * 2.0 * s_lk * ctx.h[:, cols].T / ctx.t[None, :] * c_km
    grad[:, cols] = g.T
    return grad


def rate_gradient(ctx: RateDerivativeContext, objective: AssignmentObjective, k: int, m: int) -> float:
    """First derivative of user k's (log-)rate w.r.t. power coefficient m."""
    grad = _plain_gradients(ctx)[k, m]
    if objective == AssignmentObjective.MAX_LOG_SUM_RATE:
        if ctx.rates[k] <= 0:
            raise InfeasibleAssignmentError(f"user {k} has zero rate; log derivative undefined")
        return float(grad / ctx.rates[k])
    return float(grad)


def _plain_hessian(ctx: RateDerivativeContext, k: int) -> np.ndarray:
    """d2 R_k / dp_m dp_n, shape (N, N).

    Case analysis on the owners l = f(m), l' = f(n); the expressions are
    arranged so nothing divides by a (possibly zero) S term:
      same owner l, k == l : c * 2 h_m h_n (T - 2 S^2) / T^2
      same owner l, k != l : c * 2 h_m h_n * SINR/T * (2 S^2 (2+SINR)/T - 1)
      l != l', k in {l,l'} : -c * 4 S_l S_l' h_m h_n / T^2
      l != l', k otherwise : +c * 4 S_l S_l' h_m h_n / T^2 * SINR (2 + SINR)
    """
    n_leds = ctx.h.shape[1]
    owner = ctx.led_owner
    hess = np.zeros((n_leds, n_leds))
    assigned = np.nonzero(owner >= 0)[0]
    if assigned.size == 0:
        return hess
    cols = assigned
    own = owner[cols]
    c = ctx.bandwidth / _LN2
    t = ctx.t[k]
    sinr = ctx.sinr[k]
    h_k = ctx.h[k, cols]
    s_own = ctx.s[own, k]  # S_{f(m), k}

    same = own[:, None] == own[None, :]
    serves_m = own == k
    either_serves = serves_m[:, None] | serves_m[None, :]

    hh = np.outer(h_k, h_k)
    ss = np.outer(s_own, s_own)

    s_sq = s_own**2
    same_served = c * 2.0 * hh * (t - 2.0 * s_sq[:, None]) / t**2
    same_other = c * 2.0 * hh * sinr / t * (2.0 * s_sq[:, None] * (2.0 + sinr) / t - 1.0)
    cross = c * 4.0 * ss * hh / t**2
    block = np.where(
        same,
        np.where(serves_m[:, None], same_served, same_other),
        np.where(either_serves, -cross, cross * sinr * (2.0 + sinr)),
    )
    hess[np.ix_(cols, cols)] = block
    return hess


def rate_hessian(
    ctx: RateDerivativeContext, objective: AssignmentObjective, k: int, m: int, n: int
) -> float:
    """Second derivative of user k's (log-)rate w.r.t. power coefficients m, n."""
    plain = _plain_hessian(ctx, k)[m, n]
    if objective == AssignmentObjective.MAX_LOG_SUM_RATE:
        if ctx.rates[k] <= 0:
            raise InfeasibleAssignmentError(f"user {k} has zero rate; log derivative undefined")
        g = _plain_gradients(ctx)[k]
        return float(plain / ctx.rates[k] - g[m] * g[n] / ctx.rates[k] ** 2)
    return float(plain)


def objective_value(ctx: RateDerivativeContext, objective: AssignmentObjective) -> float:
    if objective == AssignmentObjective.MAX_LOG_SUM_RATE:
        if np.any(ctx.rates <= 0):
            raise InfeasibleAssignmentError("a user has zero rate; log objective undefined")
        return float(np.sum(np.log(ctx.rates)))
    return float(np.sum(ctx.rates))


def objective_gradient(ctx: RateDerivativeContext, objective: AssignmentObjective) -> np.ndarray:
    grads = _plain_gradients(ctx)
    if objective == AssignmentObjective.MAX_LOG_SUM_RATE:
        if np.any(ctx.rates <= 0):
            raise InfeasibleAssignmentError("a user has zero rate; log objective undefined")
        grads = grads / ctx.rates[:, None]
    return grads.sum(axis=0)


def objective_hessian(ctx: RateDerivativeContext, objective: AssignmentObjective) -> np.ndarray:
    n_leds = ctx.h.shape[1]
    total = np.zeros((n_leds, n_leds))
    log_obj = objective == AssignmentObjective.MAX_LOG_SUM_RATE
    grads = _plain_gradients(ctx) if log_obj else None
    for k in range(ctx.h.shape[0]):
        block = _plain_hessian(ctx, k)
        if log_obj:
            r_k = ctx.rates[k]
            if r_k <= 0:
                raise InfeasibleAssignmentError("a user has zero rate; log objective undefined")
            g_k = grads[k]
            block = block / r_k - np.outer(g_k, g_k) / r_k**2
        total += block
    return total


# ---------------------------------------------------------------------------
# Lagrange dual derivatives
# ---------------------------------------------------------------------------

@dataclass
class LagrangeState:
    """Primal powers and the 2N multipliers (upper bounds first, then lower)."""

    p: np.ndarray
    multipliers: np.ndarray

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        self.multipliers = np.asarray(self.multipliers, dtype=float)
        if self.multipliers.shape != (2 * self.p.size,):
            raise ValueError("need 2N multipliers for N powers")
        if np.any(self.multipliers < 0):
            raise ValueError("multipliers must be nonnegative")


def lagrangian_jacobian(
    state: LagrangeState,
    ctx: RateDerivativeContext,
    objective: AssignmentObjective,
    budget: LinkBudget,
) -> np.ndarray:
    """Length-3N first derivative of the Lagrange dual function.

    Blocks: d/dp (objective gradient plus multiplier terms), then the upper
    bound residuals p - p_max, then the lower bound residuals -p.
    """
    n = state.p.size
    lam = state.multipliers
    jac = np.empty(3 * n)
    jac[:n] = objective_gradient(ctx, objective) + lam[:n] - lam[n:]
    jac[n : 2 * n] = state.p - budget.p_max
    jac[2 * n :] = -state.p
    return jac


def lagrangian_hessian(
    state: LagrangeState,
    ctx: RateDerivativeContext,
    objective: AssignmentObjective,
) -> np.ndarray:
    """3N x 3N second derivative of the Lagrange dual function.

    The (p, p) block is the summed rate Hessian; the (p, multiplier) blocks
    are +/- identities from the box constraints; multipliers do not couple.
    """
    n = state.p.size
    g = np.zeros((3 * n, 3 * n))
    g[:n, :n] = objective_hessian(ctx, objective)
    eye = np.eye(n)
    g[:n, n : 2 * n] = eye
    g[:n, 2 * n :] = -eye
    g[n : 2 * n, :n] = eye
    g[2 * n :, :n] = -eye
    return g


# ---------------------------------------------------------------------------
# optimizer
# ---------------------------------------------------------------------------

@dataclass
class PowerOptions:
    p_init: np.ndarray | None = None
    tol: float = 1e-8
    max_iter: int = 500
    collect_trace: bool = False


@dataclass
class PowerResult:
    p: np.ndarray
    objective_value: float
    iterations: int
    kkt_residual: float
    trace: list[tuple[int, float, float]] = field(default_factory=list)


def _kkt_residual(p: np.ndarray, grad: np.ndarray, p_max: float) -> np.ndarray:
    """Per-coordinate first-order violation for maximization over the box."""
    at_lower = p <= 0.0
    at_upper = p >= p_max
    res = np.abs(grad)
    res = np.where(at_lower, np.maximum(grad, 0.0), res)
    res = np.where(at_upper, np.maximum(-grad, 0.0), res)
    return res


def optimize_power(
    gains,
    assign: Assignment,
    budget: LinkBudget,
    objective: AssignmentObjective = AssignmentObjective.MAX_LOG_SUM_RATE,
    options: PowerOptions | None = None,
) -> PowerResult:
    """Maximize the (log-)sum-rate over 0 <= p <= p_max for a fixed assignment.

    Projected Newton: coordinates pinned at a bound with outward gradient are
    frozen, a negative-definite-modified Newton step is taken on the free
    block, and an Armijo backtracking search along the projected path keeps
    every iterate feasible and the objective non-decreasing.  Returns a KKT
    point within options.tol (scaled by the initial residual).
    """
    # Works for any feasible assignment; running it on QoS-driven (pra)
    # assignments is supported but experimental, since the QoS ratios are not
    # part of either objective.
    opts = options or PowerOptions()
    h = gains_matrix(gains)
    p_max = budget.p_max
    n_leds = h.shape[1]
    if opts.p_init is None:
        p = np.full(n_leds, p_max / 2.0)
    else:
        p = np.clip(np.asarray(opts.p_init, dtype=float).copy(), 0.0, p_max)
        if p.shape != (n_leds,):
            raise ValueError("p_init has the wrong length")

    if objective == AssignmentObjective.MAX_LOG_SUM_RATE:
        start_rates = user_rates(h, assign, p, budget)
        if np.any(start_rates <= 0):
            raise InfeasibleAssignmentError(
                "every user needs a served LED with positive gain for the log objective"
            )

    def evaluate(pv):
        ctx = derivative_context(h, assign, pv, budget)
        return ctx, objective_value(ctx, objective)

    ctx, value = evaluate(p)
    grad = objective_gradient(ctx, objective)
    scale = max(1.0, float(np.max(_kkt_residual(p, grad, p_max))))
    trace: list[tuple[int, float, float]] = []
    best_p, best_value = p.copy(), value

    for iteration in range(opts.max_iter):
        residual = float(np.max(_kkt_residual(p, grad, p_max)))
        if opts.collect_trace:
            trace.append((iteration, value, residual))
        if residual <= opts.tol * scale:
            return PowerResult(p, value, iteration, residual, trace)

        eps_active = 1e-12 * p_max
        at_lower = (p <= eps_active) & (grad < 0)
        at_upper = (p >= p_max - eps_active) & (grad > 0)
        free = ~(at_lower | at_upper)
        direction = np.zeros(n_leds)
        if np.any(free):
            hess = objective_hessian(ctx, objective)[np.ix_(free, free)]
            try:
                eigvals, eigvecs = np.linalg.eigh(hess)
                floor = max(1e-10, 1e-8 * float(np.max(np.abs(eigvals), initial=0.0)))
                curvature = np.minimum(eigvals, -floor)
                step = eigvecs @ ((eigvecs.T @ grad[free]) / (-curvature))
            except np.linalg.LinAlgError:
                step = None
            if step is None or not np.all(np.isfinite(step)) or grad[free] @ step <= 0:
                g_free = grad[free]
                norm = float(np.max(np.abs(g_free)))
                step = g_free * (p_max / norm) if norm > 0 else g_free
            direction[free] = step

        improved = False
        for fallback in (False, True):
            if fallback:
                norm = float(np.max(np.abs(grad)))
                if norm == 0:
                    break
                direction = grad * (p_max / norm)
            alpha = 1.0
            while alpha >= 1e-14:
                candidate = np.clip(p + alpha * direction, 0.0, p_max)
                shift = candidate - p
                if not np.any(shift):
                    break
                try:
                    cand_ctx, cand_value = evaluate(candidate)
                except InfeasibleAssignmentError:
                    alpha *= 0.5
                    continue
                if cand_value >= value + 1e-4 * float(grad @ shift) and cand_value >= value:
                    p, ctx, value = candidate, cand_ctx, cand_value
                    improved = True
                    break
                alpha *= 0.5
            if improved:
                break
        if not improved:
            residual = float(np.max(_kkt_residual(p, grad, p_max)))
            if residual <= opts.tol * scale:
                return PowerResult(p, value, iteration + 1, residual, trace)
            raise PowerOptimizationError(
                f"line search stalled at residual {residual:.3e}", best_p, best_value
            )
        grad = objective_gradient(ctx, objective)
        if value > best_value:
            best_p, best_value = p.copy(), value

    residual = float(np.max(_kkt_residual(p, grad, p_max)))
    if residual <= opts.tol * scale:
        return PowerResult(p, value, opts.max_iter, residual, trace)
    raise PowerOptimizationError(
        f"no convergence after {opts.max_iter} iterations (residual {residual:.3e})",
        best_p,
        best_value,
    )


# ---------------------------------------------------------------------------
# finite-difference validation
# ---------------------------------------------------------------------------

@dataclass
class FiniteDifferenceReport:
    gradient_error: float
    hessian_error: float


def finite_difference_check(
    gains,
    assign: Assignment,
    p,
    budget: LinkBudget,
    objective: AssignmentObjective = AssignmentObjective.MAX_SUM_RATE,
    gradient_step: float | None = None,
    hessian_step: float | None = None,
) -> FiniteDifferenceReport:
    """Compare analytic derivatives against central differences of the rates.

    The reference objective is rebuilt from the plain SINR/rate path
    (network.user_rates), independent of the derivative formulas.  Reported
    errors are max absolute deviations scaled by the largest finite-difference
    entry, so structurally-zero entries must agree exactly.  The gradient uses
    step 1e-6 * p_max; the second differences need a larger step
    (default 1e-3 * p_max) to stay clear of float64 cancellation.
    """
    h = gains_matrix(gains)
    p = np.asarray(p, dtype=float)
    n_leds = h.shape[1]
    hg = 1e-6 * budget.p_max if gradient_step is None else gradient_step
    hh = 1e-3 * budget.p_max if hessian_step is None else hessian_step

    def f(pv) -> float:
        rates = user_rates(h, assign, pv, budget)
        if objective == AssignmentObjective.MAX_LOG_SUM_RATE:
            return float(np.sum(np.log(rates)))
        return float(np.sum(rates))

    def shifted(*pairs) -> float:
        pv = p.copy()
        for idx, delta in pairs:
            pv[idx] += delta
        return f(pv)

    fd_grad = np.array([(shifted((m, hg)) - shifted((m, -hg))) / (2 * hg) for m in range(n_leds)])
    fd_hess = np.empty((n_leds, n_leds))
    base = f(p)
    for m in range(n_leds):
        fd_hess[m, m] = (shifted((m, hh)) - 2 * base + shifted((m, -hh))) / hh**2
        for n in range(m + 1, n_leds):
            fd_hess[m, n] = fd_hess[n, m] = (
                shifted((m, hh), (n, hh))
                - shifted((m, hh), (n, -hh))
                - shifted((m, -hh), (n, hh))
                + shifted((m, -hh), (n, -hh))
            ) / (4 * hh**2)

    ctx = derivative_context(h, assign, p, budget)
    ana_grad = objective_gradient(ctx, objective)
    ana_hess = objective_hessian(ctx, objective)

    g_scale = max(float(np.max(np.abs(fd_grad))), 1e-300)
    h_scale = max(float(np.max(np.abs(fd_hess))), 1e-300)
    return FiniteDifferenceReport(
        gradient_error=float(np.max(np.abs(ana_grad - fd_grad))) / g_scale,
        hessian_error=float(np.max(np.abs(ana_hess - fd_hess))) / h_scale,
    )
