"""Distributed average tracking simulator for heterogeneous agent teams.

Single-integrator, double-integrator and Euler-Lagrange agents track the
time-varying mean of per-agent reference signals using only local
interaction, under either a position-feedback law or an estimator-based law
with a communicated per-agent filter.
"""

from .accel import USING_NUMBA, backend_name
from .control_direct import (
    DirectGains,
    neighborhood_disagreement,
    u_double_direct,
    u_el_direct,
    u_single_direct,
    validate_gains_direct,
)
from .control_estimator import (
    EstimatorGains,
    FilterState,
    adaptive_beta,
    filter_rhs,
    u_double_est,
    u_el_est,
    u_single_est,
    validate_gains_est,
)
from .dynamics import (
    AgentKind,
    AgentState,
    ELBounds,
    ELModel,
    double,
    el_forward,
    euler_lagrange,
    mass_damper_model,
    single,
    verify_properties,
)
from .errors import (
    DivergenceError,
    ModelViolationError,
    ScenarioError,
    UnboundedReferenceError,
    WrongAlgorithmError,
)
from .graph import Topology, build_topology, fiedler_value, is_connected
from .metrics import (
    Trace,
    aggregate_sums,
    consensus_error,
    consensus_error_series,
    estimation_error,
    lyapunov_monitors,
    steady_state_error,
    tracking_error,
)
from .scenario import (
    Scenario,
    build_scenario,
    dump_scenario,
    load_bundled,
    parse_scenario,
    parse_scenario_text,
)
from .signals import (
    Constant,
    Polynomial,
    ReferenceSpec,
    Sinusoid,
    average_reference,
    eval_reference,
    reference_bounds,
)
from .simulator import (
    SimConfig,
    SystemState,
    initial_system_state,
    integrate,
    sgn_policy,
    system_rhs,
)

__version__ = "0.1.0"
