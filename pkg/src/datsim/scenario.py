"""Scenario definition: file schema, validation, canonical dump.

A scenario file is a YAML tree with six sections::

    name: <string>                  # optional
    algorithm: direct | estimator
    topology:
      n: <int>
      edges: [[i, j], ...]          # 1-based labels, undirected
    agents:
      kinds: [single, ..., double, ..., el, ...]   # singles, doubles, then EL
      el_models: {label: {type: mass_damper, m: <f>, c: <f>}, ...}
    references:
      dim: <int>
      agents:                       # one entry per agent: dim term lists
        - - [{type: sin, amplitude: <f>, omega: <f>, phase: <f>}, ...]
          - [{type: const, value: <f>}, {type: poly, coeffs: [c0, c1, ...]}]
    gains:                          # direct: beta, alpha
      beta: <f> | [<f>, ...]        # estimator: eta, gamma, kappa, alpha, mu
      alpha: <f>
    initial:
      x: [[...], ...]               # required, one p-vector per agent
      v: [[...], ...]               # optional, default zeros
      theta_hat: {label: [...]}     # optional, default zeros
      p: [[...], ...]               # optional (estimator), default r_i(0)
      q: [[...], ...]               # optional (estimator), default v_i^r(0)
    sim:
      h: <f>
      t_final: <f>
      scheme: euler | rk4           # optional, default rk4
      epsilon: <f>                  # optional, default 0
      stride: <int>                 # optional, default 1

Schema errors carry the dotted path of the offending field. Parsing
materializes every default, so the normalized dump round-trips exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional, Union

import numpy as np
import yaml

from . import signals
from .control_direct import DirectGains
from .control_estimator import EstimatorGains
from .dynamics import (
    EULER_LAGRANGE,
    SINGLE,
    AgentKind,
    double,
    euler_lagrange,
    mass_damper_model,
    single,
    validate_label_order,
)
from .errors import ScenarioError
from .graph import Topology, build_topology, is_connected
from .simulator import SimConfig

Gains = Union[DirectGains, EstimatorGains]


@dataclass(frozen=True)
class Scenario:
    """Fully validated, fully defaulted simulation setup."""

    name: str
    topology: Topology
    kinds: tuple[AgentKind, ...]
    references: signals.ReferenceSpec
    algorithm: str
    gains: Gains
    x0: np.ndarray
    v0: np.ndarray
    theta_hat0: np.ndarray
    p0: Optional[np.ndarray]
    q0: Optional[np.ndarray]
    sim: SimConfig

    @property
    def n_agents(self) -> int:
        return len(self.kinds)

    @property
    def dim(self) -> int:
        return self.references.dim


def build_scenario(
    *, name, topology, kinds, references, algorithm, gains, x0,
    v0=None, theta_hat0=None, p0=None, q0=None, sim,
) -> Scenario:
    """Apply defaults and cross-field validation; the one true constructor."""
    kinds = tuple(kinds)
    n = len(kinds)
    if topology.n != n:
        raise ScenarioError(
            f"agents.kinds: {n} agents but topology has {topology.n} nodes"
        )
    if not is_connected(topology):
        raise ScenarioError("topology: graph is not connected (assumption violated)")
    try:
        validate_label_order(kinds)
    except ValueError as exc:
        raise ScenarioError(f"agents.kinds: {exc}") from exc
    if references.n_agents != n:
        raise ScenarioError(
            f"references.agents: expected {n} entries, got {references.n_agents}"
        )
    p = references.dim
    for idx, kind in enumerate(kinds):
        if kind.model is not None and kind.model.dim != p:
            raise ScenarioError(
                f"agents.el_models: agent {idx + 1} model has dimension "
                f"{kind.model.dim}, references have {p}"
            )

    if algorithm not in ("direct", "estimator"):
        raise ScenarioError(f"algorithm: must be direct or estimator, got {algorithm!r}")
    if algorithm == "direct" and not isinstance(gains, DirectGains):
        raise ScenarioError("gains: direct algorithm needs DirectGains")
    if algorithm == "estimator" and not isinstance(gains, EstimatorGains):
        raise ScenarioError("gains: estimator algorithm needs EstimatorGains")
    if len(gains.beta if algorithm == "direct" else gains.eta) != n:
        raise ScenarioError("gains: per-agent gain vector length must equal n")

    x0 = _as_matrix(x0, n, p, "initial.x")
    v0 = (
        np.zeros((n, p))
        if v0 is None
        else _as_matrix(v0, n, p, "initial.v")
    )
    for idx, kind in enumerate(kinds):
        if kind.kind == SINGLE and np.any(v0[idx] != 0.0):
            raise ScenarioError(
                f"initial.v: agent {idx + 1} is a single integrator and has "
                "no velocity state; its row must be zero or omitted"
            )
    if theta_hat0 is None:
        theta_hat0 = np.zeros((n, 2))
    else:
        theta_hat0 = _as_matrix(theta_hat0, n, 2, "initial.theta_hat")
    for idx, kind in enumerate(kinds):
        if kind.kind != EULER_LAGRANGE and np.any(theta_hat0[idx] != 0.0):
            raise ScenarioError(
                f"initial.theta_hat: agent {idx + 1} is not Euler-Lagrange"
            )

    if algorithm == "estimator":
        if p0 is None or q0 is None:
            r0 = np.zeros((n, p))
            vr0 = np.zeros((n, p))
            for i in range(1, n + 1):
                r0[i - 1], vr0[i - 1], _ = signals.eval_reference(references, i, 0.0)
            p0 = r0 if p0 is None else _as_matrix(p0, n, p, "initial.p")
            q0 = vr0 if q0 is None else _as_matrix(q0, n, p, "initial.q")
        else:
            p0 = _as_matrix(p0, n, p, "initial.p")
            q0 = _as_matrix(q0, n, p, "initial.q")
    else:
        if p0 is not None or q0 is not None:
            raise ScenarioError("initial.p/q: filter states only apply to estimator runs")

    for arr in (x0, v0, theta_hat0) + ((p0, q0) if p0 is not None else ()):
        arr.flags.writeable = False

    return Scenario(
        name=str(name),
        topology=topology,
        kinds=kinds,
        references=references,
        algorithm=algorithm,
        gains=gains,
        x0=x0,
        v0=v0,
        theta_hat0=theta_hat0,
        p0=p0,
        q0=q0,
        sim=sim,
    )


# ---------------------------------------------------------------------------
# parsing

_TOP_KEYS = {"name", "algorithm", "topology", "agents", "references", "gains",
             "initial", "sim"}


def parse_scenario(path) -> Scenario:
    """Load and validate a scenario file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file {path}: {exc}") from exc
    return parse_scenario_text(text, name=path.stem)


def parse_scenario_text(text: str, name: str = "scenario", overrides=()) -> Scenario:
    try:
        tree = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"scenario is not valid YAML: {exc}") from exc
    if not isinstance(tree, dict):
        raise ScenarioError("scenario must be a mapping of sections")
    if overrides:
        tree = apply_overrides(tree, overrides)
    return scenario_from_tree(tree, default_name=name)


def apply_overrides(tree: dict, settings) -> dict:
    """Apply ``section.field=value`` overrides to a parsed scenario tree."""
    import copy

    tree = copy.deepcopy(tree)
    for setting in settings:
        if "=" not in setting:
            raise ScenarioError(f"override {setting!r} is not of the form path=value")
        dotted, raw = setting.split("=", 1)
        keys = dotted.strip().split(".")
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError as exc:
            raise ScenarioError(f"override {dotted}: bad value {raw!r}: {exc}") from exc
        node = tree
        for key in keys[:-1]:
            if not isinstance(node, dict) or key not in node:
                raise ScenarioError(f"override {dotted}: no section {key!r}")
            node = node[key]
        if not isinstance(node, dict):
            raise ScenarioError(f"override {dotted}: parent is not a mapping")
        node[keys[-1]] = value
    return tree


def scenario_from_tree(tree: dict, default_name: str = "scenario") -> Scenario:
    unknown = set(tree) - _TOP_KEYS
    if unknown:
        raise ScenarioError(f"unknown top-level field(s): {sorted(unknown)}")
    name = tree.get("name", default_name)
    algorithm = _req(tree, "algorithm", "", str)

    topo_tree = _req(tree, "topology", "", dict)
    topology = _parse_topology(topo_tree)

    refs_tree = _req(tree, "references", "", dict)
    references = _parse_references(refs_tree, topology.n)

    agents_tree = _req(tree, "agents", "", dict)
    kinds = _parse_agents(agents_tree, topology.n, references.dim)

    gains_tree = _req(tree, "gains", "", dict)
    gains = _parse_gains(gains_tree, algorithm, topology.n)

    init_tree = _req(tree, "initial", "", dict)
    _check_keys(init_tree, {"x", "v", "theta_hat", "p", "q"}, "initial")
    theta_hat0 = _parse_theta_hat(init_tree.get("theta_hat"), topology.n)

    sim_tree = _req(tree, "sim", "", dict)
    sim = _parse_sim(sim_tree)

    return build_scenario(
        name=name,
        topology=topology,
        kinds=kinds,
        references=references,
        algorithm=algorithm,
        gains=gains,
        x0=_req(init_tree, "x", "initial", list),
        v0=init_tree.get("v"),
        theta_hat0=theta_hat0,
        p0=init_tree.get("p"),
        q0=init_tree.get("q"),
        sim=sim,
    )


def _parse_topology(tree: dict) -> Topology:
    _check_keys(tree, {"n", "edges"}, "topology")
    n = _req(tree, "n", "topology", int)
    edges = _req(tree, "edges", "topology", list)
    for e in edges:
        if not (isinstance(e, (list, tuple)) and len(e) == 2):
            raise ScenarioError(f"topology.edges: entry {e!r} is not a pair")
    try:
        return build_topology([tuple(e) for e in edges], n)
    except ValueError as exc:
        raise ScenarioError(f"topology.edges: {exc}") from exc


def _parse_agents(tree: dict, n: int, dim: int) -> tuple[AgentKind, ...]:
    _check_keys(tree, {"kinds", "el_models"}, "agents")
    kind_names = _req(tree, "kinds", "agents", list)
    if len(kind_names) != n:
        raise ScenarioError(f"agents.kinds: expected {n} entries, got {len(kind_names)}")
    models = tree.get("el_models") or {}
    if not isinstance(models, dict):
        raise ScenarioError("agents.el_models: must map agent labels to models")
    kinds: list[AgentKind] = []
    for idx, kname in enumerate(kind_names):
        label = idx + 1
        if kname == "single":
            kinds.append(single())
        elif kname == "double":
            kinds.append(double())
        elif kname == "el":
            if label not in models:
                raise ScenarioError(
                    f"agents.el_models: missing model for Euler-Lagrange agent {label}"
                )
            kinds.append(euler_lagrange(_parse_el_model(models[label], label, dim)))
        else:
            raise ScenarioError(
                f"agents.kinds: unknown agent kind {kname!r} for agent {label} "
                "(expected single, double, or el)"
            )
    extra = set(models) - {i + 1 for i, k in enumerate(kind_names) if k == "el"}
    if extra:
        raise ScenarioError(
            f"agents.el_models: entries for non-EL agent label(s) {sorted(extra)}"
        )
    return tuple(kinds)


def _parse_el_model(tree, label: int, dim: int):
    path = f"agents.el_models.{label}"
    if not isinstance(tree, dict):
        raise ScenarioError(f"{path}: must be a mapping")
    _check_keys(tree, {"type", "m", "c"}, path)
    mtype = _req(tree, "type", path, str)
    if mtype != "mass_damper":
        raise ScenarioError(f"{path}.type: only mass_damper is supported, got {mtype!r}")
    m = _req(tree, "m", path, (int, float))
    c = _req(tree, "c", path, (int, float))
    try:
        return mass_damper_model(float(m), float(c), dim=dim)
    except ValueError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc


def _parse_references(tree: dict, n: int) -> signals.ReferenceSpec:
    _check_keys(tree, {"dim", "agents"}, "references")
    dim = _req(tree, "dim", "references", int)
    agents = _req(tree, "agents", "references", list)
    if len(agents) != n:
        raise ScenarioError(f"references.agents: expected {n} entries, got {len(agents)}")
    all_terms = []
    for idx, per_dim in enumerate(agents):
        path = f"references.agents[{idx}]"
        if not isinstance(per_dim, list) or len(per_dim) != dim:
            raise ScenarioError(f"{path}: expected {dim} per-dimension term lists")
        dims = []
        for d, term_list in enumerate(per_dim):
            if not isinstance(term_list, list):
                raise ScenarioError(f"{path}[{d}]: expected a list of terms")
            dims.append(
                tuple(_parse_term(t, f"{path}[{d}][{k}]") for k, t in enumerate(term_list))
            )
        all_terms.append(tuple(dims))
    return signals.ReferenceSpec(dim=dim, terms=tuple(all_terms))


def _parse_term(tree, path: str) -> signals.Term:
    if not isinstance(tree, dict):
        raise ScenarioError(f"{path}: term must be a mapping")
    ttype = _req(tree, "type", path, str)
    if ttype == "const":
        _check_keys(tree, {"type", "value"}, path)
        return signals.Constant(float(_req(tree, "value", path, (int, float))))
    if ttype == "sin":
        _check_keys(tree, {"type", "amplitude", "omega", "phase"}, path)
        return signals.Sinusoid(
            float(_req(tree, "amplitude", path, (int, float))),
            float(_req(tree, "omega", path, (int, float))),
            float(tree.get("phase", 0.0)),
        )
    if ttype == "poly":
        _check_keys(tree, {"type", "coeffs"}, path)
        coeffs = _req(tree, "coeffs", path, list)
        try:
            return signals.Polynomial(tuple(float(c) for c in coeffs))
        except (TypeError, ValueError) as exc:
            raise ScenarioError(f"{path}.coeffs: {exc}") from exc
    raise ScenarioError(f"{path}.type: unknown term type {ttype!r}")


def _parse_gains(tree: dict, algorithm: str, n: int) -> Gains:
    if algorithm == "direct":
        _check_keys(tree, {"beta", "alpha"}, "gains")
        beta = _per_agent(_req(tree, "beta", "gains", (int, float, list)), n, "gains.beta")
        alpha = float(_req(tree, "alpha", "gains", (int, float)))
        return DirectGains(beta, alpha)
    if algorithm == "estimator":
        _check_keys(tree, {"eta", "gamma", "kappa", "alpha", "mu"}, "gains")
        eta = _per_agent(_req(tree, "eta", "gains", (int, float, list)), n, "gains.eta")
        return EstimatorGains(
            eta,
            float(_req(tree, "gamma", "gains", (int, float))),
            float(_req(tree, "kappa", "gains", (int, float))),
            float(_req(tree, "alpha", "gains", (int, float))),
            float(_req(tree, "mu", "gains", (int, float))),
        )
    raise ScenarioError(f"algorithm: must be direct or estimator, got {algorithm!r}")


def _parse_theta_hat(tree, n: int):
    if tree is None:
        return None
    if not isinstance(tree, dict):
        raise ScenarioError("initial.theta_hat: must map agent labels to vectors")
    out = np.zeros((n, 2))
    for label, vec in tree.items():
        if not isinstance(label, int) or not 1 <= label <= n:
            raise ScenarioError(f"initial.theta_hat: bad agent label {label!r}")
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (2,):
            raise ScenarioError(
                f"initial.theta_hat.{label}: expected 2 entries for the mass-damper"
            )
        out[label - 1] = vec
    return out


def _parse_sim(tree: dict) -> SimConfig:
    _check_keys(tree, {"h", "t_final", "scheme", "epsilon", "stride"}, "sim")
    return SimConfig(
        h=float(_req(tree, "h", "sim", (int, float))),
        t_final=float(_req(tree, "t_final", "sim", (int, float))),
        scheme=tree.get("scheme", "rk4"),
        eps=float(tree.get("epsilon", 0.0)),
        stride=int(tree.get("stride", 1)),
    )


# ---------------------------------------------------------------------------
# dumping

def scenario_to_tree(scenario: Scenario) -> dict:
    """Normalized tree with every default materialized."""
    el_models = {}
    for idx, kind in enumerate(scenario.kinds):
        if kind.kind == EULER_LAGRANGE:
            m, c = kind.model.mass_damper
            el_models[idx + 1] = {"type": "mass_damper", "m": m, "c": c}
    refs = []
    for per_dim in scenario.references.terms:
        refs.append([[_term_to_tree(t) for t in terms] for terms in per_dim])
    if scenario.algorithm == "direct":
        gains = {
            "beta": [float(b) for b in scenario.gains.beta],
            "alpha": scenario.gains.alpha,
        }
    else:
        gains = {
            "eta": [float(e) for e in scenario.gains.eta],
            "gamma": scenario.gains.gamma,
            "kappa": scenario.gains.kappa,
            "alpha": scenario.gains.alpha,
            "mu": scenario.gains.mu,
        }
    initial = {
        "x": scenario.x0.tolist(),
        "v": scenario.v0.tolist(),
        "theta_hat": {
            idx + 1: scenario.theta_hat0[idx].tolist()
            for idx, kind in enumerate(scenario.kinds)
            if kind.kind == EULER_LAGRANGE
        },
    }
    if scenario.algorithm == "estimator":
        initial["p"] = scenario.p0.tolist()
        initial["q"] = scenario.q0.tolist()
    return {
        "name": scenario.name,
        "algorithm": scenario.algorithm,
        "topology": {
            "n": scenario.topology.n,
            "edges": [list(e) for e in scenario.topology.edges],
        },
        "agents": {
            "kinds": [k.kind for k in scenario.kinds],
            "el_models": el_models,
        },
        "references": {"dim": scenario.references.dim, "agents": refs},
        "gains": gains,
        "initial": initial,
        "sim": {
            "h": scenario.sim.h,
            "t_final": scenario.sim.t_final,
            "scheme": scenario.sim.scheme,
            "epsilon": scenario.sim.eps,
            "stride": scenario.sim.stride,
        },
    }


def _term_to_tree(term: signals.Term) -> dict:
    if isinstance(term, signals.Constant):
        return {"type": "const", "value": term.value}
    if isinstance(term, signals.Sinusoid):
        return {
            "type": "sin",
            "amplitude": term.amplitude,
            "omega": term.omega,
            "phase": term.phase,
        }
    return {"type": "poly", "coeffs": list(term.coeffs)}


def dump_scenario(scenario: Scenario) -> str:
    return yaml.safe_dump(scenario_to_tree(scenario), sort_keys=True)


# ---------------------------------------------------------------------------
# bundled scenarios

def bundled_scenario_path(name: str) -> Path:
    """Filesystem path of a scenario shipped with the package."""
    candidate = resources.files("datsim").joinpath("data", f"{name}.scenario")
    with resources.as_file(candidate) as path:
        if not path.exists():
            raise ScenarioError(f"no bundled scenario named {name!r}")
        return path


def load_bundled(name: str) -> Scenario:
    return parse_scenario(bundled_scenario_path(name))


# ---------------------------------------------------------------------------
# small helpers

def _req(tree: dict, key: str, path: str, typ=None):
    dotted = f"{path}.{key}" if path else key
    if key not in tree or tree[key] is None:
        raise ScenarioError(f"{dotted}: missing required field")
    value = tree[key]
    if typ is not None and not isinstance(value, typ):
        raise ScenarioError(f"{dotted}: expected {getattr(typ, '__name__', typ)}, "
                            f"got {type(value).__name__}")
    return value


def _check_keys(tree: dict, allowed: set, path: str):
    unknown = set(tree) - allowed
    if unknown:
        raise ScenarioError(f"{path}: unknown field(s) {sorted(unknown)}")


def _as_matrix(value, n: int, p: int, path: str) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{path}: not numeric: {exc}") from exc
    if arr.shape != (n, p):
        raise ScenarioError(f"{path}: expected shape ({n}, {p}), got {arr.shape}")
    return arr.copy()


def _per_agent(value, n: int, path: str) -> np.ndarray:
    if isinstance(value, (int, float)):
        return np.full(n, float(value))
    arr = np.asarray(value, dtype=float)
    if arr.shape != (n,):
        raise ScenarioError(f"{path}: expected a scalar or {n} values, got shape {arr.shape}")
    return arr
