"""Shared builders and oracles for the test suite."""

import numpy as np

from datsim import (
    Constant,
    DirectGains,
    EstimatorGains,
    FilterState,
    Polynomial,
    ReferenceSpec,
    SimConfig,
    Sinusoid,
    build_scenario,
    build_topology,
    double,
    euler_lagrange,
    is_connected,
    mass_damper_model,
    single,
)
from datsim.signum import sgn_policy
from datsim.simulator import initial_system_state


def random_connected_topology(rng, n):
    while True:
        edges = [
            (i + 1, j + 1)
            for i in range(n)
            for j in range(i + 1, n)
            if rng.random() < 0.5
        ]
        if not edges and n > 1:
            continue
        top = build_topology(edges, n)
        if is_connected(top):
            return top


def random_reference_spec(rng, n, p, bounded=False):
    terms = []
    for _ in range(n):
        agent = []
        for _ in range(p):
            cell = [
                Sinusoid(
                    float(rng.normal(scale=2)),
                    float(rng.uniform(0.1, 2.0)),
                    float(rng.normal()),
                )
            ]
            if bounded:
                cell.append(Constant(float(rng.normal())))
            else:
                cell.append(Polynomial(tuple(rng.normal(scale=0.3, size=3))))
            agent.append(tuple(cell))
        terms.append(tuple(agent))
    return ReferenceSpec(dim=p, terms=tuple(terms))


def random_scenario(rng, n_single, n_double, n_el, p, algorithm, eps=0.0):
    """Random validated scenario for equivalence and property tests."""
    n = n_single + n_double + n_el
    top = random_connected_topology(rng, n)
    refs = random_reference_spec(rng, n, p)
    kinds = (
        [single()] * n_single
        + [double()] * n_double
        + [
            euler_lagrange(
                mass_damper_model(
                    float(rng.uniform(0.5, 2.0)), float(rng.uniform(0.1, 1.0)), p
                )
            )
            for _ in range(n_el)
        ]
    )
    if algorithm == "direct":
        gains = DirectGains(rng.uniform(1.0, 30.0, size=n), float(rng.uniform(1, 20)))
    else:
        gains = EstimatorGains(
            rng.uniform(2.1, 8.0, size=n), 1.0, 2.0, float(rng.uniform(1, 20)),
            float(rng.uniform(0.5, 2.0)),
        )
    v0 = rng.normal(size=(n, p))
    v0[:n_single] = 0.0
    return build_scenario(
        name="random",
        topology=top,
        kinds=kinds,
        references=refs,
        algorithm=algorithm,
        gains=gains,
        x0=rng.normal(size=(n, p)),
        v0=v0,
        sim=SimConfig(h=1e-3, t_final=1.0, eps=eps),
    )


def randomize_state(rng, scenario, t_max=5.0):
    """Random SystemState consistent with the scenario's agent kinds."""
    state = initial_system_state(scenario)
    state.t = float(rng.uniform(0.0, t_max))
    p = scenario.dim
    for agent in state.agent_states:
        agent.x = rng.normal(size=p)
        if agent.v is not None:
            agent.v = rng.normal(size=p)
        if agent.theta_hat is not None:
            agent.theta_hat = rng.normal(size=2)
    if state.filter_states is not None:
        state.filter_states = [
            FilterState(rng.normal(size=p), rng.normal(size=p))
            for _ in range(scenario.n_agents)
        ]
    return state


def stacked_direct_controls(scenario, state):
    """Block-matrix evaluation of the direct-algorithm closed loop.

    Builds the stacked vector forms with explicit Kronecker products, as an
    oracle independent of the per-agent controller functions. Returns
    ``(u, theta_rates)`` with u of shape (n, p).
    """
    from datsim import signals

    n = scenario.n_agents
    p = scenario.dim
    eps = scenario.sim.eps
    lap = scenario.topology.laplacian
    eye = np.eye(p)
    beta = scenario.gains.beta
    alpha = scenario.gains.alpha

    x = np.concatenate([st.x for st in state.agent_states])
    refs = [
        signals.eval_reference(scenario.references, i, state.t)
        for i in range(1, n + 1)
    ]
    r = np.concatenate([ref[0] for ref in refs])
    vr = np.concatenate([ref[1] for ref in refs])
    ar = np.concatenate([ref[2] for ref in refs])

    groups = {"single": [], "double": [], "el": []}
    for idx, kind in enumerate(scenario.kinds):
        groups[kind.kind].append(idx)

    u = np.zeros((n, p))
    theta_rates = np.zeros((n, 2))

    def block(indices):
        sel = np.zeros((len(indices) * p, n * p))
        for row, idx in enumerate(indices):
            sel[row * p : (row + 1) * p, idx * p : (idx + 1) * p] = eye
        return sel

    for kind_name, indices in groups.items():
        if not indices:
            continue
        sel = block(indices)
        lap_block = np.kron(lap[indices, :], eye)
        beta_block = np.kron(np.diag(beta[indices]), eye)
        sg = sgn_policy(lap_block @ x, eps)
        if kind_name == "single":
            u_blk = -beta_block @ sg - (sel @ x - sel @ r) + sel @ vr
        elif kind_name == "double":
            v = np.concatenate([state.agent_states[idx].v for idx in indices])
            u_blk = (
                -beta_block @ sg
                - lap_block @ x
                - (sel @ x - sel @ r)
                - 2.0 * (v - sel @ vr)
                + sel @ ar
            )
        else:
            xd = np.concatenate([state.agent_states[idx].v for idx in indices])
            nu = -beta_block @ sg - (sel @ x - sel @ r) + sel @ vr
            s = xd - nu
            ups = -(xd - sel @ vr) + sel @ ar
            u_blk = -alpha * s - lap_block @ x
            for row, idx in enumerate(indices):
                sl = slice(row * p, (row + 1) * p)
                model = scenario.kinds[idx].model
                regressor = model.regressor(
                    state.agent_states[idx].x, xd[sl], ups[sl], nu[sl]
                )
                u_blk[sl] += regressor @ state.agent_states[idx].theta_hat
                theta_rates[idx] = -regressor.T @ s[sl]
        for row, idx in enumerate(indices):
            u[idx] = u_blk[row * p : (row + 1) * p]
    return u, theta_rates
