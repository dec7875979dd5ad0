"""Position-feedback distributed average tracking controllers.

Each agent uses only its own position (and velocity, where its dynamics
has one), its own reference triple, and relative positions to neighbors.
No reference information of other agents and no communicated state enters
any formula here; that restriction is what makes the algorithm deployable
with pure local sensing.

Agent labels are 1-based. The smoothing parameter ``eps`` applies the same
boundary-layer policy to every signum evaluation in this module.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import validation
from .dynamics import ELModel
from .graph import Topology
from .signum import sgn_policy


@dataclass(frozen=True)
class DirectGains:
    """Per-agent switching gains and the Euler-Lagrange tracking gain."""

    beta: np.ndarray
    alpha: float

    @classmethod
    def uniform(cls, beta: float, n: int, alpha: float) -> "DirectGains":
        return cls(np.full(n, float(beta)), float(alpha))

    def beta_of(self, agent: int) -> float:
        return float(self.beta[agent - 1])


def neighborhood_disagreement(i: int, positions, topology: Topology) -> np.ndarray:
    """``sum_j a_ij (x_i - x_j)``: row ``i`` of the Laplacian acting on x."""
    row = topology.adjacency[i - 1]
    x_i = positions[i - 1]
    out = np.zeros_like(x_i, dtype=float)
    for j in np.nonzero(row)[0]:
        out += x_i - positions[j]
    return out


def u_single_direct(
    i: int, positions, topology: Topology, r_i, v_r_i, gains: DirectGains,
    eps: float = 0.0,
) -> np.ndarray:
    """``u_i = -beta_i sgn[sum_j a_ij (x_i - x_j)] - (x_i - r_i) + v_i^r``."""
    dis = neighborhood_disagreement(i, positions, topology)
    x_i = positions[i - 1]
    return -gains.beta_of(i) * sgn_policy(dis, eps) - (x_i - r_i) + v_r_i


def u_double_direct(
    i: int, positions, v_i, topology: Topology, r_i, v_r_i, a_r_i,
    gains: DirectGains, eps: float = 0.0,
) -> np.ndarray:
    """Double-integrator law with damping-like velocity feedback.

    ``u_i = -beta_i sgn[dis_i] - dis_i - (x_i - r_i) - 2 (v_i - v_i^r) + a_i^r``
    where ``dis_i`` is the neighborhood disagreement. The velocity error
    gain is fixed at 2 (it has no tunable knob).
    """
    dis = neighborhood_disagreement(i, positions, topology)
    x_i = positions[i - 1]
    return (
        -gains.beta_of(i) * sgn_policy(dis, eps)
        - dis
        - (x_i - r_i)
        - 2.0 * (v_i - v_r_i)
        + a_r_i
    )


def u_el_direct(
    i: int, positions, xd_i, topology: Topology, r_i, v_r_i, a_r_i,
    model: ELModel, theta_hat, gains: DirectGains, eps: float = 0.0,
):
    """Adaptive Euler-Lagrange law built around the auxiliary velocity.

    The auxiliary velocity ``nu_i = -beta_i sgn[dis_i] - (x_i - r_i) + v_i^r``
    is what a single integrator would follow; the sliding variable
    ``s_i = xd_i - nu_i`` is driven to zero. The regressor is evaluated at
    ``(ups_i, nu_i)`` where ``ups_i = -(xd_i - v_i^r) + a_i^r`` is the
    derivative of ``nu_i`` away from the switching surface (the signum term
    is piecewise constant, so it contributes nothing almost everywhere).

    Returns ``(u_i, theta_hat_rate)``; the caller integrates the estimate.
    """
    dis = neighborhood_disagreement(i, positions, topology)
    x_i = positions[i - 1]
    nu = -gains.beta_of(i) * sgn_policy(dis, eps) - (x_i - r_i) + v_r_i
    s = xd_i - nu
    ups = -(xd_i - v_r_i) + a_r_i
    regressor = model.regressor(x_i, xd_i, ups, nu)
    u = regressor @ theta_hat - gains.alpha * s - dis
    theta_rate = -regressor.T @ s
    return u, theta_rate


def validate_gains_direct(gains: DirectGains, reference_bounds) -> validation.ValidationReport:
    """Check the convergence conditions ``min_i beta_i > r_bar + v_bar``, ``alpha > 0``.

    ``reference_bounds`` is ``(r_bar, v_bar)`` or ``None`` when no finite
    bound exists (the condition is then reported as not checkable). The
    report never aborts anything: sub-threshold gains often still track.
    """
    checks = []
    beta_min = float(np.min(gains.beta))
    if reference_bounds is None:
        checks.append(
            validation.skipped(
                "min beta > r_bar + v_bar",
                "not checkable: reference bounds are not finite",
            )
        )
    else:
        r_bar, v_bar = reference_bounds
        need = r_bar + v_bar
        checks.append(
            validation.check(
                "min beta > r_bar + v_bar",
                beta_min > need,
                beta_min - need,
                f"min beta = {beta_min:.4g}, r_bar + v_bar = {need:.4g}",
            )
        )
    checks.append(
        validation.check(
            "beta > 0",
            bool(np.all(gains.beta > 0)),
            beta_min,
            f"min beta = {beta_min:.4g}",
        )
    )
    checks.append(
        validation.check(
            "alpha > 0", gains.alpha > 0, gains.alpha, f"alpha = {gains.alpha:.4g}"
        )
    )
    return validation.ValidationReport(tuple(checks))
