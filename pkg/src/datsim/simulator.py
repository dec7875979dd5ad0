"""Fixed-step integration of the coupled closed-loop system.

Two equivalent right-hand-side routes exist on purpose:

* :func:`system_rhs` assembles the derivative from the per-agent controller
  functions. It is the readable reference form, works with any
  Euler-Lagrange model, and is what the equivalence tests check against.
* :func:`integrate` packs the scenario into flat arrays and runs the
  compiled kernels in ``_kernels`` for whole-horizon speed. Only the
  built-in mass-damper model is representable there.

Fixed-step explicit schemes only: adaptive error control is meaningless on
a discontinuous right-hand side, while a fixed step keeps chattering
bounded and runs bit-for-bit repeatable.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels, control_direct, control_estimator, signals
from .control_estimator import FilterState
from .dynamics import DOUBLE, EULER_LAGRANGE, SINGLE, AgentState, el_forward
from .errors import DivergenceError, ScenarioError
from .metrics import Trace
from .signum import sgn_policy  # noqa: F401  (re-export: uniform signum policy)

SCHEMES = ("euler", "rk4")
ALGORITHMS = ("direct", "estimator")

_SCHEME_ID = {"euler": _kernels.EULER, "rk4": _kernels.RK4}
_ALGO_ID = {"direct": _kernels.DIRECT, "estimator": _kernels.ESTIMATOR}
_KIND_ID = {SINGLE: _kernels.KIND_SINGLE, DOUBLE: _kernels.KIND_DOUBLE,
            EULER_LAGRANGE: _kernels.KIND_EL}


@dataclass(frozen=True)
class SimConfig:
    """Integration settings.

    ``eps`` is the shared signum smoothing: 0 keeps the exact switching law,
    anything positive substitutes the boundary layer ``z/(|z|+eps)`` in
    every signum evaluation of the run.
    """

    h: float
    t_final: float
    scheme: str = "rk4"
    eps: float = 0.0
    stride: int = 1

    def __post_init__(self):
        if self.h <= 0:
            raise ScenarioError(f"sim.h must be positive, got {self.h}")
        if self.t_final < self.h:
            raise ScenarioError("sim.t_final must be at least one step long")
        if self.scheme not in SCHEMES:
            raise ScenarioError(f"sim.scheme must be one of {SCHEMES}")
        if self.eps < 0:
            raise ScenarioError("sim.epsilon must be nonnegative")
        if self.stride < 1 or self.stride != int(self.stride):
            raise ScenarioError("sim.stride must be a positive integer")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.h))


@dataclass
class SystemState:
    """Full closed-loop state at one instant."""

    t: float
    agent_states: list[AgentState]
    filter_states: Optional[list[FilterState]] = None


@dataclass
class SystemDerivative:
    """Stacked time derivative plus the controls that produced it.

    Velocity-derivative rows of single integrators and estimate rows of
    non-adaptive agents are zero. ``p_dot``/``q_dot`` are ``None`` for
    direct-algorithm evaluations.
    """

    x_dot: np.ndarray
    v_dot: np.ndarray
    theta_dot: np.ndarray
    p_dot: Optional[np.ndarray]
    q_dot: Optional[np.ndarray]
    u: np.ndarray


def initial_system_state(scenario) -> SystemState:
    """Materialize the scenario's initial conditions as a SystemState."""
    agents = []
    for idx, kind in enumerate(scenario.kinds):
        x = scenario.x0[idx].copy()
        if kind.kind == SINGLE:
            agents.append(AgentState(x=x))
        elif kind.kind == DOUBLE:
            agents.append(AgentState(x=x, v=scenario.v0[idx].copy()))
        else:
            agents.append(
                AgentState(
                    x=x,
                    v=scenario.v0[idx].copy(),
                    theta_hat=scenario.theta_hat0[idx].copy(),
                )
            )
    filters = None
    if scenario.algorithm == "estimator":
        filters = [
            FilterState(scenario.p0[idx].copy(), scenario.q0[idx].copy())
            for idx in range(len(scenario.kinds))
        ]
    return SystemState(t=0.0, agent_states=agents, filter_states=filters)


def system_rhs(state: SystemState, scenario, algorithm: Optional[str] = None) -> SystemDerivative:
    """Closed-loop derivative assembled from the per-agent controller functions."""
    algo = algorithm or scenario.algorithm
    if algo not in ALGORITHMS:
        raise ValueError(f"algorithm must be one of {ALGORITHMS}")
    n = len(scenario.kinds)
    p = scenario.references.dim
    eps = scenario.sim.eps
    gains = scenario.gains
    topology = scenario.topology
    t = state.t

    refs = [signals.eval_reference(scenario.references, i, t) for i in range(1, n + 1)]
    positions = [st.x for st in state.agent_states]

    x_dot = np.zeros((n, p))
    v_dot = np.zeros((n, p))
    theta_dot = np.zeros((n, 2))
    u_all = np.zeros((n, p))
    p_dot = q_dot = None

    if algo == "direct":
        for idx, kind in enumerate(scenario.kinds):
            i = idx + 1
            r_i, vr_i, ar_i = refs[idx]
            st = state.agent_states[idx]
            if kind.kind == SINGLE:
                u = control_direct.u_single_direct(
                    i, positions, topology, r_i, vr_i, gains, eps
                )
                x_dot[idx] = u
            elif kind.kind == DOUBLE:
                u = control_direct.u_double_direct(
                    i, positions, st.v, topology, r_i, vr_i, ar_i, gains, eps
                )
                x_dot[idx] = st.v
                v_dot[idx] = u
            else:
                u, th_rate = control_direct.u_el_direct(
                    i, positions, st.v, topology, r_i, vr_i, ar_i,
                    kind.model, st.theta_hat, gains, eps,
                )
                x_dot[idx] = st.v
                v_dot[idx] = el_forward(kind.model, kind.model.theta, st.x, st.v, u)
                theta_dot[idx, : kind.model.param_dim] = th_rate
            u_all[idx] = u
    else:
        if state.filter_states is None:
            raise ValueError("estimator algorithm needs filter states")
        p_dot = np.zeros((n, p))
        q_dot = np.zeros((n, p))
        for idx in range(n):
            r_i, vr_i, ar_i = refs[idx]
            p_dot[idx], q_dot[idx] = control_estimator.filter_rhs(
                idx + 1, state.filter_states, topology, r_i, vr_i, ar_i, gains, eps
            )
        for idx, kind in enumerate(scenario.kinds):
            i = idx + 1
            st = state.agent_states[idx]
            fs = state.filter_states[idx]
            if kind.kind == SINGLE:
                u = control_estimator.u_single_est(i, st.x, fs, gains, eps)
                x_dot[idx] = u
            elif kind.kind == DOUBLE:
                u = control_estimator.u_double_est(
                    i, st.x, st.v, fs, q_dot[idx], gains, eps
                )
                x_dot[idx] = st.v
                v_dot[idx] = u
            else:
                u, th_rate = control_estimator.u_el_est(
                    i, st.x, st.v, fs, q_dot[idx], kind.model, st.theta_hat, gains, eps
                )
                x_dot[idx] = st.v
                v_dot[idx] = el_forward(kind.model, kind.model.theta, st.x, st.v, u)
                theta_dot[idx, : kind.model.param_dim] = th_rate
            u_all[idx] = u

    return SystemDerivative(x_dot, v_dot, theta_dot, p_dot, q_dot, u_all)


def _packed_gains(scenario):
    n = len(scenario.kinds)
    zeros = np.zeros(n)
    if scenario.algorithm == "direct":
        g = scenario.gains
        return (
            np.asarray(g.beta, dtype=float), float(g.alpha),
            zeros, 0.0, 0.0, 0.0,
        )
    g = scenario.gains
    return (
        zeros, float(g.alpha),
        np.asarray(g.eta, dtype=float), float(g.gamma), float(g.kappa), float(g.mu),
    )


def _pack_arrays(scenario):
    n = len(scenario.kinds)
    kinds = np.empty(n, dtype=np.int64)
    el_m = np.ones(n)
    el_c = np.zeros(n)
    for idx, kind in enumerate(scenario.kinds):
        kinds[idx] = _KIND_ID[kind.kind]
        if kind.kind == EULER_LAGRANGE:
            if kind.model.mass_damper is None:
                raise ScenarioError(
                    f"agent {idx + 1}: only mass-damper Euler-Lagrange models "
                    "can be integrated (custom models work with system_rhs)"
                )
            el_m[idx], el_c[idx] = kind.model.mass_damper
    table = signals.term_table(scenario.references)
    lap = np.ascontiguousarray(scenario.topology.laplacian)
    return lap, kinds, el_m, el_c, table


def pack_state(scenario, state: SystemState) -> np.ndarray:
    """Flatten a SystemState into the kernel's packed layout."""
    n = len(scenario.kinds)
    p = scenario.references.dim
    y = np.zeros(4 * n * p + 2 * n)
    x_blk = y[0 : n * p].reshape(n, p)
    v_blk = y[n * p : 2 * n * p].reshape(n, p)
    th_blk = y[2 * n * p : 2 * n * p + 2 * n].reshape(n, 2)
    for idx, st in enumerate(state.agent_states):
        x_blk[idx] = st.x
        if st.v is not None:
            v_blk[idx] = st.v
        if st.theta_hat is not None:
            th_blk[idx, : st.theta_hat.shape[0]] = st.theta_hat
    if state.filter_states is not None:
        p_blk = y[2 * n * p + 2 * n : 3 * n * p + 2 * n].reshape(n, p)
        q_blk = y[3 * n * p + 2 * n : 4 * n * p + 2 * n].reshape(n, p)
        for idx, fs in enumerate(state.filter_states):
            p_blk[idx] = fs.p
            q_blk[idx] = fs.q
    return y


def kernel_rhs(scenario, state: SystemState):
    """Evaluate the compiled-kernel RHS at one state (test/diagnostic hook).

    Returns ``(dy, u)`` in the packed layout.
    """
    n = len(scenario.kinds)
    p = scenario.references.dim
    lap, kinds, el_m, el_c, table = _pack_arrays(scenario)
    beta, alpha, eta, gamma, kappa, mu = _packed_gains(scenario)
    y = pack_state(scenario, state)
    dy = np.empty_like(y)
    u = np.empty((n, p))
    r = np.empty((n, p))
    vr = np.empty((n, p))
    ar = np.empty((n, p))
    _kernels.closed_loop_rhs(
        state.t, y, dy, u, _ALGO_ID[scenario.algorithm], scenario.sim.eps,
        lap, kinds, el_m, el_c, table, beta, alpha, eta, gamma, kappa, mu,
        r, vr, ar,
    )
    return dy, u


def _fingerprint(scenario, cfg: SimConfig, y0: np.ndarray) -> str:
    digest = hashlib.sha256()
    lap, kinds, el_m, el_c, table = _pack_arrays(scenario)
    beta, alpha, eta, gamma, kappa, mu = _packed_gains(scenario)
    for arr in (lap, kinds.astype(float), el_m, el_c, table, beta, eta, y0):
        digest.update(np.ascontiguousarray(arr).tobytes())
    digest.update(
        repr((scenario.algorithm, alpha, gamma, kappa, mu,
              cfg.h, cfg.t_final, cfg.scheme, cfg.eps, cfg.stride)).encode()
    )
    return digest.hexdigest()[:16]


def integrate(scenario, config: Optional[SimConfig] = None) -> Trace:
    """Run the closed loop and return the sampled trace.

    Deterministic: identical scenario and config produce bit-identical
    traces. Raises :class:`DivergenceError` when any state magnitude
    exceeds ``1e9``.
    """
    cfg = config if config is not None else scenario.sim
    n = len(scenario.kinds)
    p = scenario.references.dim
    n_steps = cfg.n_steps
    stride = int(cfg.stride)
    n_samples = n_steps // stride + 1 + (1 if n_steps % stride else 0)

    lap, kinds, el_m, el_c, table = _pack_arrays(scenario)
    beta, alpha, eta, gamma, kappa, mu = _packed_gains(scenario)
    state0 = initial_system_state(scenario)
    y0 = pack_state(scenario, state0)

    t_out = np.empty(n_samples)
    y_out = np.empty((n_samples, y0.shape[0]))
    u_out = np.empty((n_samples, n, p))

    status, step, rows = _kernels.run_closed_loop(
        y0, 0.0, cfg.h, n_steps, stride, _SCHEME_ID[cfg.scheme],
        _ALGO_ID[scenario.algorithm], cfg.eps, lap, kinds, el_m, el_c,
        table, beta, alpha, eta, gamma, kappa, mu, t_out, y_out, u_out,
    )
    if status != 0:
        raise DivergenceError(step * cfg.h)

    npx = n * p
    x = y_out[:rows, 0:npx].reshape(rows, n, p).copy()
    v = y_out[:rows, npx : 2 * npx].reshape(rows, n, p).copy()
    theta = y_out[:rows, 2 * npx : 2 * npx + 2 * n].reshape(rows, n, 2).copy()
    for idx, kind in enumerate(scenario.kinds):
        if kind.kind == SINGLE:
            v[:, idx, :] = np.nan
        if kind.kind != EULER_LAGRANGE:
            theta[:, idx, :] = np.nan
    if scenario.algorithm == "estimator":
        p_arr = y_out[:rows, 2 * npx + 2 * n : 3 * npx + 2 * n].reshape(rows, n, p).copy()
        q_arr = y_out[:rows, 3 * npx + 2 * n : 4 * npx + 2 * n].reshape(rows, n, p).copy()
    else:
        p_arr = q_arr = None

    return Trace(
        t=t_out[:rows].copy(),
        x=x,
        v=v,
        u=u_out[:rows].copy(),
        theta_hat=theta,
        p=p_arr,
        q=q_arr,
        algorithm=scenario.algorithm,
        fingerprint=_fingerprint(scenario, cfg, y0),
    )
