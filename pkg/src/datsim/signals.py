"""Per-agent time-varying reference inputs with analytic derivatives.

A reference signal is a per-agent, per-dimension sum of terms drawn from a
small closed-form library (constants, sinusoids, polynomials up to cubic).
First and second derivatives are exact, never finite-differenced, and
conservative amplitude bounds are available whenever every term is bounded.

Agent labels are 1-based, matching the rest of the package.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import UnboundedReferenceError


@dataclass(frozen=True)
class Constant:
    value: float


@dataclass(frozen=True)
class Sinusoid:
    """``amplitude * sin(omega * t + phase)``."""

    amplitude: float
    omega: float
    phase: float = 0.0


@dataclass(frozen=True)
class Polynomial:
    """``c0 + c1 t + c2 t^2 + c3 t^3`` with 1 to 4 coefficients."""

    coeffs: tuple[float, ...]

    def __post_init__(self):
        if not 1 <= len(self.coeffs) <= 4:
            raise ValueError("polynomial terms support degree 0 through 3")
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))


Term = Union[Constant, Sinusoid, Polynomial]


def _term_eval(term: Term, t):
    """(value, first derivative, second derivative) of one term at ``t``.

    ``t`` may be a scalar or an ndarray; the return matches its shape.
    """
    if isinstance(term, Constant):
        zero = np.zeros_like(t, dtype=float) if isinstance(t, np.ndarray) else 0.0
        return term.value + zero, zero, zero
    if isinstance(term, Sinusoid):
        arg = term.omega * t + term.phase
        s = np.sin(arg)
        c = np.cos(arg)
        return (
            term.amplitude * s,
            term.amplitude * term.omega * c,
            -term.amplitude * term.omega * term.omega * s,
        )
    c0, c1, c2, c3 = (term.coeffs + (0.0, 0.0, 0.0))[:4]
    return (
        c0 + c1 * t + c2 * t * t + c3 * t * t * t,
        c1 + 2.0 * c2 * t + 3.0 * c3 * t * t,
        2.0 * c2 + 6.0 * c3 * t,
    )


@dataclass(frozen=True)
class ReferenceSpec:
    """Reference signals for all agents.

    ``terms[i][d]`` is the tuple of terms summed to produce dimension ``d``
    of agent ``i+1``'s signal.
    """

    dim: int
    terms: tuple[tuple[tuple[Term, ...], ...], ...]

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("reference dimension must be positive")
        for agent_terms in self.terms:
            if len(agent_terms) != self.dim:
                raise ValueError(
                    f"every agent needs {self.dim} per-dimension term lists, "
                    f"got {len(agent_terms)}"
                )

    @property
    def n_agents(self) -> int:
        return len(self.terms)


def eval_reference(spec: ReferenceSpec, agent: int, t: float):
    """Reference triple ``(r_i, v_i, a_i)`` for agent ``agent`` (1-based) at ``t``.

    The three vectors are mutually consistent analytic derivatives.
    """
    if not 1 <= agent <= spec.n_agents:
        raise ValueError(f"agent label {agent} outside 1..{spec.n_agents}")
    r = np.zeros(spec.dim)
    vr = np.zeros(spec.dim)
    ar = np.zeros(spec.dim)
    for d, terms in enumerate(spec.terms[agent - 1]):
        for term in terms:
            val, d1, d2 = _term_eval(term, t)
            r[d] += val
            vr[d] += d1
            ar[d] += d2
    return r, vr, ar


def reference_series(spec: ReferenceSpec, times: np.ndarray):
    """Vectorized evaluation over a time grid.

    Returns three arrays of shape ``(len(times), n_agents, dim)``. Used by
    the metrics post-processing, where per-sample scalar calls would be slow.
    """
    times = np.asarray(times, dtype=float)
    nt = times.shape[0]
    r = np.zeros((nt, spec.n_agents, spec.dim))
    vr = np.zeros((nt, spec.n_agents, spec.dim))
    ar = np.zeros((nt, spec.n_agents, spec.dim))
    for i, agent_terms in enumerate(spec.terms):
        for d, terms in enumerate(agent_terms):
            for term in terms:
                val, d1, d2 = _term_eval(term, times)
                r[:, i, d] += val
                vr[:, i, d] += d1
                ar[:, i, d] += d2
    return r, vr, ar


def reference_bounds(spec: ReferenceSpec):
    """Conservative bounds ``(r_bar, v_bar)`` dominating every agent's signal.

    Per dimension the term amplitudes are summed, then combined in the
    2-norm, so the result provably dominates ``sup_t ||r_i(t)||`` (and
    likewise for the velocity). Cheap, and tight enough for gain checks.

    Raises:
        UnboundedReferenceError: if any nonconstant polynomial term is
            present; those signals admit no finite bound.
    """
    r_bar = 0.0
    v_bar = 0.0
    for i, agent_terms in enumerate(spec.terms):
        r_amp = np.zeros(spec.dim)
        v_amp = np.zeros(spec.dim)
        for d, terms in enumerate(agent_terms):
            for term in terms:
                if isinstance(term, Constant):
                    r_amp[d] += abs(term.value)
                elif isinstance(term, Sinusoid):
                    r_amp[d] += abs(term.amplitude)
                    v_amp[d] += abs(term.amplitude * term.omega)
                else:
                    if any(c != 0.0 for c in term.coeffs[1:]):
                        raise UnboundedReferenceError(
                            f"agent {i + 1} has a nonconstant polynomial term; "
                            "no finite reference bound exists"
                        )
                    r_amp[d] += abs(term.coeffs[0])
        r_bar = max(r_bar, float(np.linalg.norm(r_amp)))
        v_bar = max(v_bar, float(np.linalg.norm(v_amp)))
    return r_bar, v_bar


def average_reference(spec: ReferenceSpec, t: float):
    """Arithmetic mean of all reference positions and velocities at ``t``.

    This is the centralized oracle that tracking errors are measured
    against; no agent in the simulated network ever sees it.
    """
    mean_r = np.zeros(spec.dim)
    mean_vr = np.zeros(spec.dim)
    for agent in range(1, spec.n_agents + 1):
        r, vr, _ = eval_reference(spec, agent, t)
        mean_r += r
        mean_vr += vr
    return mean_r / spec.n_agents, mean_vr / spec.n_agents


TERM_POLY = 0
TERM_SIN = 1


def term_table(spec: ReferenceSpec) -> np.ndarray:
    """Flat float64 encoding of the reference signals for the hot path.

    One row per term: ``[agent0, dim0, kind, c0, c1, c2, c3]`` with 0-based
    agent/dimension indices. Sinusoids store ``(amplitude, omega, phase)``
    in ``c0..c2``; constants become degree-0 polynomials.
    """
    rows = []
    for i, agent_terms in enumerate(spec.terms):
        for d, terms in enumerate(agent_terms):
            for term in terms:
                if isinstance(term, Constant):
                    rows.append([i, d, TERM_POLY, term.value, 0.0, 0.0, 0.0])
                elif isinstance(term, Sinusoid):
                    rows.append(
                        [i, d, TERM_SIN, term.amplitude, term.omega, term.phase, 0.0]
                    )
                else:
                    c0, c1, c2, c3 = (term.coeffs + (0.0, 0.0, 0.0))[:4]
                    rows.append([i, d, TERM_POLY, c0, c1, c2, c3])
    if not rows:
        return np.zeros((0, 7))
    return np.array(rows, dtype=float)
