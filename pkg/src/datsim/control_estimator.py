"""Estimator-based distributed average tracking.

A per-agent filter ``(p_i, q_i)`` estimates the average reference position
and velocity using only neighbors' filter states, which are the algorithm's
only communication payload. Each agent then tracks its own filter output,
so reference restrictions drop out entirely for teams without
Euler-Lagrange members.

Agent labels are 1-based; ``eps`` is the shared signum smoothing policy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import validation
from .dynamics import ELModel
from .graph import Topology
from .signum import sgn_policy


@dataclass(frozen=True)
class FilterState:
    """Estimates of the mean reference position (p) and velocity (q)."""

    p: np.ndarray
    q: np.ndarray


@dataclass(frozen=True)
class EstimatorGains:
    eta: np.ndarray
    gamma: float
    kappa: float
    alpha: float
    mu: float

    @classmethod
    def uniform(
        cls, eta: float, n: int, gamma: float, kappa: float, alpha: float, mu: float
    ) -> "EstimatorGains":
        return cls(np.full(n, float(eta)), float(gamma), float(kappa), float(alpha), float(mu))

    def eta_of(self, agent: int) -> float:
        return float(self.eta[agent - 1])


def adaptive_beta(i: int, r_i, v_r_i, a_r_i, gains: EstimatorGains) -> float:
    """State-based filter gain grown with the agent's own signal size.

    ``beta_i = eta_i ||r_i||_1 + eta_i ||v_i^r||_1 + ||a_i^r||_1 + gamma``,
    recomputed at every evaluation so the switching term always dominates
    the instantaneous reference, even for unbounded signals.
    """
    eta_i = gains.eta_of(i)
    return float(
        eta_i * np.sum(np.abs(r_i))
        + eta_i * np.sum(np.abs(v_r_i))
        + np.sum(np.abs(a_r_i))
        + gains.gamma
    )


def filter_rhs(
    i: int, filter_states, topology: Topology, r_i, v_r_i, a_r_i,
    gains: EstimatorGains, eps: float = 0.0,
):
    """Filter dynamics for agent ``i``: returns ``(p_dot_i, q_dot_i)``.

    ``p_dot_i = q_i`` and

    ``q_dot_i = -beta_i sgn[sum_j a_ij ((p_i+q_i) - (p_j+q_j))]
    - kappa (p_i - r_i) - kappa (q_i - v_i^r) + a_i^r``.

    Only neighbors' ``(p_j, q_j)`` are read.
    """
    own = filter_states[i - 1]
    row = topology.adjacency[i - 1]
    w = np.zeros_like(own.p, dtype=float)
    own_sum = own.p + own.q
    for j in np.nonzero(row)[0]:
        w += own_sum - (filter_states[j].p + filter_states[j].q)
    beta_i = adaptive_beta(i, r_i, v_r_i, a_r_i, gains)
    q_dot = (
        -beta_i * sgn_policy(w, eps)
        - gains.kappa * (own.p - r_i)
        - gains.kappa * (own.q - v_r_i)
        + a_r_i
    )
    return own.q.astype(float, copy=True), q_dot


def u_single_est(
    i: int, x_i, filter_state: FilterState, gains: EstimatorGains, eps: float = 0.0
) -> np.ndarray:
    """``u_i = -eta_i sgn(x_i - p_i) + q_i``."""
    return -gains.eta_of(i) * sgn_policy(x_i - filter_state.p, eps) + filter_state.q


def u_double_est(
    i: int, x_i, v_i, filter_state: FilterState, q_dot_i, gains: EstimatorGains,
    eps: float = 0.0,
) -> np.ndarray:
    """Double-integrator tracker of the filter output.

    ``u_i = -eta_i sgn[(x_i-p_i)+(v_i-q_i)] - eta_i (x_i-p_i)
    - eta_i (v_i-q_i) + q_dot_i``.

    ``q_dot_i`` must come from evaluating :func:`filter_rhs` at the same
    instant, never from differencing the q trajectory: differentiating a
    switching signal numerically injects unbounded noise.
    """
    eta_i = gains.eta_of(i)
    ex = x_i - filter_state.p
    ev = v_i - filter_state.q
    return -eta_i * sgn_policy(ex + ev, eps) - eta_i * ex - eta_i * ev + q_dot_i


def u_el_est(
    i: int, x_i, xd_i, filter_state: FilterState, q_dot_i, model: ELModel,
    theta_hat, gains: EstimatorGains, eps: float = 0.0,
):
    """Adaptive Euler-Lagrange tracker of the filter output.

    The sliding variable is ``s_i = mu (x_i - p_i) + (xd_i - q_i)`` and the
    regressor is evaluated at ``chi = mu (q_i - xd_i) + q_dot_i`` and
    ``psi = mu (p_i - x_i) + q_i``, so that ``Y theta`` reproduces exactly
    the model terms the closed loop needs: ``M chi + C psi + g``.

    Returns ``(u_i, theta_hat_rate)``.
    """
    p_i, q_i = filter_state.p, filter_state.q
    s = gains.mu * (x_i - p_i) + (xd_i - q_i)
    chi = gains.mu * (q_i - xd_i) + q_dot_i
    psi = gains.mu * (p_i - x_i) + q_i
    regressor = model.regressor(x_i, xd_i, chi, psi)
    u = regressor @ theta_hat - gains.alpha * s
    theta_rate = -regressor.T @ s
    return u, theta_rate


def validate_gains_est(gains: EstimatorGains) -> validation.ValidationReport:
    """Check ``eta_i > kappa > 1`` and positivity of the remaining gains."""
    eta_min = float(np.min(gains.eta))
    checks = (
        validation.check(
            "min eta > kappa",
            eta_min > gains.kappa,
            eta_min - gains.kappa,
            f"min eta = {eta_min:.4g}, kappa = {gains.kappa:.4g}",
        ),
        validation.check(
            "kappa > 1", gains.kappa > 1, gains.kappa - 1, f"kappa = {gains.kappa:.4g}"
        ),
        validation.check(
            "gamma > 0", gains.gamma > 0, gains.gamma, f"gamma = {gains.gamma:.4g}"
        ),
        validation.check(
            "alpha > 0", gains.alpha > 0, gains.alpha, f"alpha = {gains.alpha:.4g}"
        ),
        validation.check("mu > 0", gains.mu > 0, gains.mu, f"mu = {gains.mu:.4g}"),
    )
    return validation.ValidationReport(checks)
