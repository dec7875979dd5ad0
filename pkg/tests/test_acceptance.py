"""Acceptance suite: one test per criterion, one printed verdict line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see every verdict.

Where a criterion leaves the signum smoothing free, the run documents the
value it uses and why. Two criteria are asserted exactly as stated even
though the measured behavior of the published control laws cannot meet
them under fixed-step integration (the chattering-rectified adaptation
drift and the switching-bias mean offset); those tests fail with the
measured numbers on record rather than with loosened thresholds.
"""

import dataclasses
import time

import numpy as np
import pytest

from datsim import (
    DirectGains,
    DivergenceError,
    adaptive_beta,
    average_reference,
    build_scenario,
    estimation_error,
    filter_rhs,
    load_bundled,
    lyapunov_monitors,
    mass_damper_model,
    steady_state_error,
    tracking_error,
    verify_properties,
)
from datsim.dynamics import single
from datsim.signum import sgn_policy
from datsim.simulator import SimConfig, integrate
from datsim import signals

from helpers import (
    random_connected_topology,
    random_scenario,
    randomize_state,
    stacked_direct_controls,
)


def verdict(name: str, ok: bool, detail: str) -> bool:
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    return ok


def window_max(trace, series, lo, hi):
    mask = (trace.t >= lo - 1e-9) & (trace.t <= hi + 1e-9)
    return float(np.max(series[mask]))


@pytest.fixture(scope="module")
def sec4():
    return load_bundled("sec4")


@pytest.fixture(scope="module")
def estimator_run():
    """Six-agent estimator run that completes: smoothing 0.2 documented.

    With exact switching (epsilon 0, and also at the 1e-3 layer, which is
    unstable at this step size) the Euler-Lagrange adaptation rectifies the
    filter's switching chatter and diverges near t = 1.8, so the smallest
    smoothing that keeps the boundary layer stable is used instead.
    """
    scen = load_bundled("sec4_estimator")
    cfg = SimConfig(h=1e-3, t_final=60.0, stride=1, eps=0.2)
    return scen, integrate(scen, cfg)


# ---------------------------------------------------------------------------
# direct algorithm


def test_sec4_reproduction_as_stated(sec4):
    """Six-agent run with exact switching, as pinned: h=1e-3, T=100, eps=0."""
    name = "sec4 reproduction (eps=0 as stated)"
    try:
        trace = integrate(sec4)  # bundled config: h=1e-3, t_final=100, eps=0
    except DivergenceError as exc:
        ok = verdict(
            name, False,
            f"diverged at t={exc.time:.2f}: with exact switching the "
            "Euler-Lagrange estimate update -Y's rectifies the +/-beta "
            "chatter of the auxiliary velocity into a parameter drift of "
            "~1e3/s (step-size independent; measured at h=1e-3, 2e-4, 1e-4), "
            "so no fixed-step run of the printed law completes this horizon",
        )
        pytest.fail("criterion unattainable as stated; see ledger analysis")
    err = tracking_error(trace, sec4.references)
    worst = window_max(trace, np.max(err, axis=1), 60.0, 100.0)
    k60 = int(np.argmin(np.abs(trace.t - 60.0)))
    ratio = float(np.max(err[k60] / err[0]))
    ok = worst < 0.5 and ratio < 0.1
    verdict(name, ok, f"max err[60,100]={worst:.3f}, t60/t0 ratio={ratio:.3f}")
    assert ok


def test_sec4_reproduction_with_boundary_layer(sec4):
    """Same scenario with the smallest stabilizing boundary layer (documented).

    Smoothing eps=0.05 replaces the exact signum in every switching term;
    it is the smallest value that keeps the adaptation bounded at h=1e-3.
    This is the supplementary demonstration that the averaging behavior
    itself is reproduced; the exact-switching criterion above stays red.
    """
    cfg = SimConfig(h=1e-3, t_final=100.0, stride=10, eps=0.05)
    integrate(sec4, SimConfig(h=1e-3, t_final=0.05, eps=0.05))  # warm kernels
    t0 = time.perf_counter()
    trace = integrate(sec4, cfg)
    wall = time.perf_counter() - t0
    err = tracking_error(trace, sec4.references)
    worst = window_max(trace, np.max(err, axis=1), 60.0, 100.0)
    k60 = int(np.argmin(np.abs(trace.t - 60.0)))
    ratio = float(np.max(err[k60] / err[0]))
    ok = worst < 0.5 and ratio < 0.1 and wall < 10.0
    verdict(
        "sec4 reproduction (eps=0.05 boundary layer)", ok,
        f"max err[60,100]={worst:.3f} (<0.5), t60/t0={ratio:.4f} (<0.1), "
        f"runtime {wall:.2f} s (<10)",
    )
    assert ok


def test_direct_theory_compliant_gain(sec4):
    """beta=40 exceeds the r_bar + v_bar bound; threshold 0.2 as stated.

    Smoothing 0.1 documented (exact switching diverges through the adaptive
    agents). The measured floor across h in {1e-3, 5e-4, 2.5e-4} and eps in
    {0.02..0.5} is ~0.40, set by the switching-bias mean offset, which grows
    with beta; the stated threshold is not reachable by this control law
    under fixed-step integration.
    """
    scen = dataclasses.replace(sec4, gains=DirectGains.uniform(40.0, 6, 15.0))
    trace = integrate(scen, SimConfig(h=1e-3, t_final=100.0, stride=10, eps=0.1))
    err = tracking_error(trace, scen.references)
    steady = steady_state_error(trace.t, np.max(err, axis=1))
    ok = steady < 0.2
    verdict(
        "direct algorithm, theory-compliant gain (beta=40)", ok,
        f"steady max err over final 20% = {steady:.3f} (threshold 0.2)",
    )
    assert ok


def test_static_reference_consensus():
    """Constant distinct references on a 4-ring settle on the mean."""
    scen = load_bundled("static_consensus")
    trace = integrate(scen)
    mean_r, _ = average_reference(scen.references, 0.0)
    dist = np.linalg.norm(trace.x - mean_r, axis=2)
    worst = window_max(trace, np.max(dist, axis=1), 50.0, trace.t[-1])
    ok = worst < 1e-2
    verdict(
        "static-reference consensus sanity", ok,
        f"max distance to mean on [50,60] = {worst:.2e} (threshold 1e-2)",
    )
    assert ok


# ---------------------------------------------------------------------------
# estimator algorithm


def test_estimator_filter_convergence():
    """Filter accuracy and monitor monotonicity, exactly as stated.

    The filter is autonomous (agent kinds never enter it), so the stated
    ingredients (6-ring, the six sinusoid references, eta=3, kappa=2,
    gamma=1, default initialization, h=1e-3, T=60) run here on an all-single
    team with exact switching; this sidesteps the unrelated adaptive-agent
    divergence and measures the filter itself, with no smoothing at all.
    """
    base = load_bundled("sec4_estimator")
    scen = build_scenario(
        name="filter_only", topology=base.topology, kinds=[single()] * 6,
        references=base.references, algorithm="estimator", gains=base.gains,
        x0=base.x0, sim=SimConfig(h=1e-3, t_final=60.0, stride=1),
    )
    trace = integrate(scen)
    err_p, _ = estimation_error(trace, scen.references)
    worst = window_max(trace, np.max(err_p, axis=1), 40.0, 60.0)
    err_ok = worst < 0.1

    mon = lyapunov_monitors(trace, scen)
    slack = 1e-6 * scen.sim.h
    dv1 = np.diff(mon.v1)
    v1_ok = bool((dv1 <= slack).all())
    violations = int((dv1 > slack).sum())

    verdict(
        "estimator filter accuracy", err_ok,
        f"max est_err_p on [40,60] = {worst:.3f} (threshold 0.1); the "
        "switching duty bias forces the filter mean off the true average "
        "whenever the per-agent state-based gains differ",
    )
    verdict(
        "filter monitor non-increasing per step", v1_ok,
        f"{violations} of {dv1.size} steps increase V1, worst by "
        f"{float(dv1.max()):.2e} against slack {slack:.0e}; discrete "
        "switching chatter makes per-step monotonicity unattainable at "
        "this tolerance",
    )
    assert err_ok and v1_ok


def test_estimator_end_to_end(estimator_run):
    """Trackers follow the filter outputs; threshold 0.2 as stated."""
    scen, trace = estimator_run
    err = tracking_error(trace, scen.references)
    worst = window_max(trace, np.max(err, axis=1), 40.0, 60.0)
    ok = worst < 0.2
    verdict(
        "estimator end-to-end tracking", ok,
        f"max err on [40,60] = {worst:.3f} (threshold 0.2); dominated by "
        "the filter's switching-bias mean offset",
    )
    assert ok


def test_polynomial_reference_relaxation():
    """Ramp references, no adaptive agents: unbounded signals still track."""
    scen = load_bundled("poly_relax")
    trace = integrate(scen)
    err = tracking_error(trace, scen.references)
    steady = steady_state_error(trace.t, np.max(err, axis=1))
    ok = steady < 0.2
    verdict(
        "polynomial-reference relaxation", ok,
        f"steady max err over final 20% = {steady:.4f} (threshold 0.2), "
        "with exact switching",
    )
    assert ok


def test_aggregate_sum_identity():
    """sum_i(q_dot_i - a_i) == -kappa S1 - kappa S2 - sum_i beta_i sgn(w_i).

    The left side comes from the per-agent filter evaluations at every
    sampled step of an estimator run; the right side is assembled from the
    aggregate sums independently.
    """
    scen = load_bundled("sec4_estimator")
    cfg = SimConfig(h=1e-3, t_final=5.0, stride=1, eps=0.2)
    trace = integrate(scen, cfg)
    gains = scen.gains
    n = scen.n_agents
    from datsim.control_estimator import FilterState

    worst = 0.0
    for k in range(trace.n_samples):
        t = float(trace.t[k])
        states = [FilterState(trace.p[k, i], trace.q[k, i]) for i in range(n)]
        lhs = np.zeros(scen.dim)
        s1 = np.zeros(scen.dim)
        s2 = np.zeros(scen.dim)
        switch = np.zeros(scen.dim)
        for i in range(1, n + 1):
            r, vr, ar = signals.eval_reference(scen.references, i, t)
            _, q_dot = filter_rhs(
                i, states, scen.topology, r, vr, ar, gains, cfg.eps
            )
            lhs += q_dot - ar
            s1 += states[i - 1].p - r
            s2 += states[i - 1].q - vr
            w = np.zeros(scen.dim)
            for j in np.nonzero(scen.topology.adjacency[i - 1])[0]:
                w += (states[i - 1].p + states[i - 1].q) - (
                    states[j].p + states[j].q
                )
            switch += adaptive_beta(i, r, vr, ar, gains) * sgn_policy(w, cfg.eps)
        rhs = -gains.kappa * s1 - gains.kappa * s2 - switch
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    ok = worst <= 1e-12
    verdict(
        "aggregate-sum identity", ok,
        f"worst per-step residual = {worst:.2e} (threshold 1e-12) over "
        f"{trace.n_samples} steps",
    )
    assert ok


# ---------------------------------------------------------------------------
# property suites


def test_property_suite_graph(rng):
    worst_gap = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 9))
        top = random_connected_topology(rng, n)
        lam = np.linalg.eigvalsh(top.laplacian)
        y = rng.normal(size=n)
        y -= y.mean()
        quad = y @ top.laplacian @ y
        yy = y @ y
        assert lam[1] * yy <= quad + 1e-10
        assert quad <= lam[-1] * yy + 1e-10
        worst_gap = max(worst_gap, lam[1] * yy - quad, quad - lam[-1] * yy)
        np.testing.assert_array_equal(top.incidence @ top.incidence.T, top.laplacian)
    verdict(
        "graph spectral bounds + incidence factorization", True,
        f"100 random connected graphs, worst bound violation {worst_gap:.1e} "
        "(tol 1e-10), incidence product exact",
    )


def test_property_suite_model():
    model = mass_damper_model(1.5, 0.6)
    report = verify_properties(model, model.theta, sample_count=1000, rng_seed=11)
    ok = report.p2_ok and report.p3_ok and report.p1_ok
    verdict(
        "model structural properties", ok,
        f"P2 max |v'(Mdot-2C)v| = {report.p2_max:.1e} (tol 1e-4), "
        f"P3 residual = {report.p3_max:.1e} (tol 1e-12), 1000 samples",
    )
    assert ok


def test_property_suite_tracker_monitor(estimator_run):
    """Adaptive-tracker energy non-increasing per step on the EL agents."""
    scen, trace = estimator_run
    mon = lyapunov_monitors(trace, scen)
    slack = 1e-6 * 1e-3
    dve = np.diff(mon.ve, axis=0)
    ok = bool((dve <= slack).all())
    verdict(
        "adaptive tracker monitor non-increasing", ok,
        f"max per-step change {float(dve.max()):.2e} against slack "
        f"{slack:.0e} over {dve.shape[0]} steps x {dve.shape[1]} agents "
        "(smoothing 0.2 documented)",
    )
    assert ok


def test_property_suite_determinism(sec4):
    cfg = SimConfig(h=1e-3, t_final=2.0, stride=10, eps=0.05)
    a = integrate(sec4, cfg)
    b = integrate(sec4, cfg)
    same = (
        np.array_equal(a.x, b.x)
        and np.array_equal(a.v[~np.isnan(a.v)], b.v[~np.isnan(b.v)])
        and np.array_equal(a.u, b.u)
        and np.array_equal(
            a.theta_hat[~np.isnan(a.theta_hat)], b.theta_hat[~np.isnan(b.theta_hat)]
        )
    )
    verdict("determinism", same, "repeat run is bit-identical")
    assert same


def test_oracle_equivalence_stacked_forms(rng):
    worst = 0.0
    for trial in range(100):
        counts = rng.integers(0, 3, size=3)
        if counts.sum() == 0:
            counts[int(rng.integers(0, 3))] = 1
        scen = random_scenario(
            rng, int(counts[0]), int(counts[1]), int(counts[2]),
            p=int(rng.integers(1, 4)), algorithm="direct",
            eps=float(rng.choice([0.0, 0.3])),
        )
        state = randomize_state(rng, scen)
        from datsim.simulator import system_rhs

        der = system_rhs(state, scen)
        u_oracle, theta_oracle = stacked_direct_controls(scen, state)
        worst = max(
            worst,
            float(np.max(np.abs(der.u - u_oracle))),
            float(np.max(np.abs(der.theta_dot - theta_oracle))),
        )
    ok = worst <= 1e-12
    verdict(
        "controller vs stacked block-matrix forms", ok,
        f"worst deviation {worst:.2e} over 100 random states (tol 1e-12)",
    )
    assert ok
