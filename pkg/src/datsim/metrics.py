"""Derived quantities for verifying simulated runs.

Tracking errors are measured against the centralized average-reference
oracle, consensus errors through the centering projection
``I - (1/N) 1 1^T``, and the Lyapunov monitors reproduce the quadratic
forms whose monotone decrease certifies convergence. All error norms are
2-norms per agent.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import signals
from .dynamics import DOUBLE, SINGLE
from .errors import WrongAlgorithmError


@dataclass(frozen=True)
class Trace:
    """Sampled time series of one simulation run.

    Arrays are indexed ``[sample, agent, dim]``; entries that do not apply
    to an agent kind (velocities of single integrators, estimates of
    non-adaptive agents) hold NaN. ``p``/``q`` are ``None`` for
    direct-algorithm runs.
    """

    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    u: np.ndarray
    theta_hat: np.ndarray
    p: Optional[np.ndarray]
    q: Optional[np.ndarray]
    algorithm: str
    fingerprint: str

    def __post_init__(self):
        if self.t.ndim != 1 or np.any(np.diff(self.t) <= 0):
            raise ValueError("sample times must be strictly increasing")

    @property
    def n_samples(self) -> int:
        return self.t.shape[0]

    @property
    def n_agents(self) -> int:
        return self.x.shape[1]

    @property
    def dim(self) -> int:
        return self.x.shape[2]


def tracking_error(trace: Trace, spec: signals.ReferenceSpec) -> np.ndarray:
    """Per-agent distance to the average reference: shape (n_samples, n)."""
    mean_r, _ = _mean_reference_series(trace, spec)
    return np.linalg.norm(trace.x - mean_r[:, None, :], axis=2)


def estimation_error(trace: Trace, spec: signals.ReferenceSpec):
    """Filter errors ``(||p_i - mean r||, ||q_i - mean v^r||)`` per agent."""
    if trace.p is None or trace.q is None:
        raise WrongAlgorithmError(
            "trace has no filter states; estimation error needs an "
            "estimator-algorithm run"
        )
    mean_r, mean_vr = _mean_reference_series(trace, spec)
    err_p = np.linalg.norm(trace.p - mean_r[:, None, :], axis=2)
    err_q = np.linalg.norm(trace.q - mean_vr[:, None, :], axis=2)
    return err_p, err_q


def consensus_error(positions: np.ndarray) -> float:
    """Norm of the centered stack: zero exactly when all agents coincide.

    Adding a common offset to every position leaves the value unchanged.
    """
    centered = positions - positions.mean(axis=0, keepdims=True)
    return float(np.linalg.norm(centered))


def consensus_error_series(trace: Trace) -> np.ndarray:
    centered = trace.x - trace.x.mean(axis=1, keepdims=True)
    return np.linalg.norm(centered.reshape(trace.n_samples, -1), axis=1)


def aggregate_sums(trace: Trace, spec: signals.ReferenceSpec):
    """Aggregate residual sums ``(S1, S2)``, each of shape (n_samples, dim).

    Estimator runs: ``S1 = sum_i (p_i - r_i)`` and ``S2 = sum_i (q_i -
    v_i^r)``; with the default filter initialization both start at zero.
    Direct runs: ``S1 = sum_i (x_i - r_i)`` and ``S2`` is ``None``.
    """
    r, vr, _ = signals.reference_series(spec, trace.t)
    if trace.algorithm == "estimator":
        s1 = np.sum(trace.p - r, axis=1)
        s2 = np.sum(trace.q - vr, axis=1)
        return s1, s2
    return np.sum(trace.x - r, axis=1), None


@dataclass(frozen=True)
class MonitorSeries:
    """Lyapunov monitor values per sample.

    ``v1`` is the filter consensus monitor; the per-agent monitors carry
    the 1-based labels of the agents they belong to.
    """

    v1: np.ndarray
    ve: np.ndarray
    ve_agents: tuple[int, ...]
    vd: np.ndarray
    vd_agents: tuple[int, ...]
    vs: np.ndarray
    vs_agents: tuple[int, ...]


def lyapunov_monitors(trace: Trace, scenario) -> MonitorSeries:
    """Evaluate the proof's Lyapunov functions along an estimator trace.

    * filter: ``V1 = 1/2 [p~; q~]' (L kron [[2k, 1], [1, 1]] kron I) [p~; q~]``
      with the centered filter stacks,
    * per Euler-Lagrange agent: ``Ve = 1/2 s' M s + 1/2 |theta_err|^2``
      (uses the scenario's true parameters),
    * per double integrator: ``Vd = 1/2 [x~; v~]' [[2 eta I, I], [I, I]] [x~; v~]``,
    * per single integrator: ``Vs = 1/2 |x~|^2``,

    where ``x~ = x - p`` and ``v~ = v - q``.
    """
    if trace.p is None or trace.q is None:
        raise WrongAlgorithmError("Lyapunov monitors need an estimator-algorithm trace")
    lap = scenario.topology.laplacian
    kappa = scenario.gains.kappa
    mu = scenario.gains.mu
    nt = trace.n_samples

    p_c = trace.p - trace.p.mean(axis=1, keepdims=True)
    q_c = trace.q - trace.q.mean(axis=1, keepdims=True)
    lp = np.einsum("nm,tmd->tnd", lap, p_c)
    lq = np.einsum("nm,tmd->tnd", lap, q_c)
    pp = np.sum(p_c * lp, axis=(1, 2))
    pq = np.sum(p_c * lq, axis=(1, 2))
    qq = np.sum(q_c * lq, axis=(1, 2))
    v1 = 0.5 * (2.0 * kappa * pp + 2.0 * pq + qq)

    ve_list, ve_agents = [], []
    vd_list, vd_agents = [], []
    vs_list, vs_agents = [], []
    for idx, kind in enumerate(scenario.kinds):
        label = idx + 1
        x_t = trace.x[:, idx, :] - trace.p[:, idx, :]
        if kind.kind == SINGLE:
            vs_list.append(0.5 * np.sum(x_t * x_t, axis=1))
            vs_agents.append(label)
        elif kind.kind == DOUBLE:
            eta_i = scenario.gains.eta[idx]
            v_t = trace.v[:, idx, :] - trace.q[:, idx, :]
            vd_list.append(
                0.5
                * (
                    2.0 * eta_i * np.sum(x_t * x_t, axis=1)
                    + 2.0 * np.sum(x_t * v_t, axis=1)
                    + np.sum(v_t * v_t, axis=1)
                )
            )
            vd_agents.append(label)
        else:
            model = kind.model
            v_t = trace.v[:, idx, :] - trace.q[:, idx, :]
            s = mu * x_t + v_t
            if model.mass_damper is not None:
                m, _ = model.mass_damper
                s_m_s = m * np.sum(s * s, axis=1)
            else:
                s_m_s = np.empty(nt)
                for k in range(nt):
                    inertia = model.mass(trace.x[k, idx, :], model.theta)
                    s_m_s[k] = s[k] @ inertia @ s[k]
            th_err = trace.theta_hat[:, idx, : model.param_dim] - model.theta
            ve_list.append(0.5 * s_m_s + 0.5 * np.sum(th_err * th_err, axis=1))
            ve_agents.append(label)

    def stack(series):
        return np.stack(series, axis=1) if series else np.zeros((nt, 0))

    return MonitorSeries(
        v1=v1,
        ve=stack(ve_list),
        ve_agents=tuple(ve_agents),
        vd=stack(vd_list),
        vd_agents=tuple(vd_agents),
        vs=stack(vs_list),
        vs_agents=tuple(vs_agents),
    )


def window(trace_t: np.ndarray, t_lo: float, t_hi: float) -> np.ndarray:
    """Boolean mask selecting samples with ``t_lo <= t <= t_hi``."""
    return (trace_t >= t_lo - 1e-12) & (trace_t <= t_hi + 1e-12)


def steady_state_error(trace_t: np.ndarray, series: np.ndarray, fraction: float = 0.2) -> float:
    """Max of ``series`` over the final ``fraction`` of the horizon.

    Chattering makes the instantaneous terminal value noisy; the windowed
    maximum is the honest summary.
    """
    t_lo = trace_t[-1] - fraction * (trace_t[-1] - trace_t[0])
    return float(np.max(series[window(trace_t, t_lo, trace_t[-1])]))


def _mean_reference_series(trace: Trace, spec: signals.ReferenceSpec):
    r, vr, _ = signals.reference_series(spec, trace.t)
    return r.mean(axis=1), vr.mean(axis=1)
