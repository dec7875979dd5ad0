"""Agent dynamics: integrator kinds and Euler-Lagrange models.

Three agent kinds exist, always labeled in the order single-integrator,
double-integrator, Euler-Lagrange. Euler-Lagrange models are supplied with
an analytic regression matrix (the linear-in-parameters factorization is
model-specific structure, not something that can be derived generically);
the mass-damper is the only built-in.

True physical parameters ride on the model object for the simulation side;
controllers only ever receive the regressor and a parameter estimate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ModelViolationError

SINGLE = "single"
DOUBLE = "double"
EULER_LAGRANGE = "el"

_KIND_ORDER = {SINGLE: 0, DOUBLE: 1, EULER_LAGRANGE: 2}


@dataclass(frozen=True)
class ELBounds:
    """Declared structural bounds of an Euler-Lagrange model.

    ``inertia_min * I <= M(x) <= inertia_max * I``,
    ``||C(x, xd) xd|| <= coriolis_max * ||xd||``, ``||g(x)|| <= gravity_max``.
    """

    inertia_min: float
    inertia_max: float
    coriolis_max: float
    gravity_max: float


@dataclass(frozen=True)
class ELModel:
    """Euler-Lagrange dynamics ``M(x) xdd + C(x, xd) xd + D(x, xd) + g(x) = u``.

    ``C`` is the Coriolis/centrifugal matrix, the matrix the skew-symmetry
    property is about. Dissipative velocity forces (viscous friction) live
    in the separate ``damping`` slot: lumping them into ``C`` would break
    skew symmetry for any positive damping even though they only ever help
    stability.

    All callables are parameterized by the constant parameter vector so the
    linear factorization ``M(x) chi + C(x, xd) psi + D(x, psi) + g(x) =
    Y(x, xd, chi, psi) theta`` holds for every ``chi``, ``psi``. The
    regressor itself is parameter-free.

    Attributes:
        dim: workspace dimension p.
        param_dim: length of the parameter vector.
        mass: ``mass(x, theta) -> (p, p)`` symmetric inertia.
        coriolis: ``coriolis(x, xd, theta) -> (p, p)``.
        damping: ``damping(x, v, theta) -> (p,)`` dissipative force at
            velocity ``v``; must be linear in ``v`` for the factorization.
        gravity: ``gravity(x, theta) -> (p,)``.
        regressor: ``regressor(x, xd, chi, psi) -> (p, param_dim)``.
        bounds: declared structural bounds at the true parameters.
        theta: true parameter vector (simulation side only; controllers
            never see it).
        mass_damper: ``(m, c)`` when the model is the built-in mass-damper,
            which lets the integrator use its compiled fast path.
    """

    dim: int
    param_dim: int
    mass: Callable
    coriolis: Callable
    damping: Callable
    gravity: Callable
    regressor: Callable
    bounds: ELBounds
    theta: np.ndarray
    mass_damper: Optional[tuple[float, float]] = None


def mass_damper_model(m: float, c: float, dim: int = 2) -> ELModel:
    """Point mass with viscous damping: ``m xdd + c xd = u``.

    ``M = m I``, zero Coriolis matrix (the inertia is constant), damping
    force ``c xd``, ``g = 0``. The regressor stacks its two generalized
    velocity arguments columnwise, ``Y(x, xd, chi, psi) = [chi psi]``, so
    that ``Y theta = m chi + c psi`` with ``theta = [m, c]``.
    """
    if m <= 0:
        raise ValueError(f"mass must be positive, got {m}")
    if c < 0:
        raise ValueError(f"damping must be nonnegative, got {c}")

    def mass(x, theta):
        return theta[0] * np.eye(dim)

    def coriolis(x, xd, theta):
        return np.zeros((dim, dim))

    def damping(x, v, theta):
        return theta[1] * v

    def gravity(x, theta):
        return np.zeros(dim)

    def regressor(x, xd, chi, psi):
        return np.column_stack((chi, psi))

    theta = np.array([float(m), float(c)])
    theta.flags.writeable = False
    return ELModel(
        dim=dim,
        param_dim=2,
        mass=mass,
        coriolis=coriolis,
        damping=damping,
        gravity=gravity,
        regressor=regressor,
        bounds=ELBounds(float(m), float(m), 0.0, 0.0),
        theta=theta,
        mass_damper=(float(m), float(c)),
    )


def el_forward(model: ELModel, theta, x, xd, u) -> np.ndarray:
    """Forward dynamics ``xdd = M(x)^-1 (u - C(x, xd) xd - D(x, xd) - g(x))``.

    Raises:
        ModelViolationError: if the inertia matrix is singular (the lower
            inertia bound should rule this out for a well-posed model).
    """
    inertia = model.mass(x, theta)
    force = (
        u
        - model.coriolis(x, xd, theta) @ xd
        - model.damping(x, xd, theta)
        - model.gravity(x, theta)
    )
    try:
        return np.linalg.solve(inertia, force)
    except np.linalg.LinAlgError as exc:
        raise ModelViolationError(f"singular inertia matrix: {exc}") from exc


@dataclass(frozen=True)
class PropertyReport:
    """Sampled verification of the three structural model properties."""

    p1_ok: bool
    p2_ok: bool
    p3_ok: bool
    inertia_eig_min: float
    inertia_eig_max: float
    p2_max: float
    p3_max: float
    sample_count: int
    rng_seed: int

    @property
    def all_ok(self) -> bool:
        return self.p1_ok and self.p2_ok and self.p3_ok

    def format(self) -> str:
        return "\n".join(
            [
                f"P1 bounds          : {'pass' if self.p1_ok else 'FAIL'} "
                f"(inertia eigenvalues in [{self.inertia_eig_min:.6g}, "
                f"{self.inertia_eig_max:.6g}])",
                f"P2 skew symmetry   : {'pass' if self.p2_ok else 'FAIL'} "
                f"(max |v'(Mdot-2C)v| = {self.p2_max:.3e}, tol 1e-4)",
                f"P3 linearity       : {'pass' if self.p3_ok else 'FAIL'} "
                f"(max residual = {self.p3_max:.3e}, tol 1e-12)",
                f"samples={self.sample_count} seed={self.rng_seed}",
            ]
        )


P2_TOL = 1e-4
P3_TOL = 1e-12
_P2_FD_STEP = 1e-5


def verify_properties(
    model: ELModel, theta, sample_count: int = 1000, rng_seed: int = 0
) -> PropertyReport:
    """Check P1 (bounds), P2 (skew symmetry), P3 (linear parameterization).

    P2 uses a central finite difference of the inertia matrix along the
    sampled velocity direction, since models declare no analytic Mdot.
    Failures are reported, never raised.
    """
    rng = np.random.default_rng(rng_seed)
    theta = np.asarray(theta, dtype=float)
    p = model.dim
    b = model.bounds

    p1_ok = True
    eig_min = np.inf
    eig_max = -np.inf
    p2_max = 0.0
    p3_max = 0.0
    tol = 1e-9
    for _ in range(sample_count):
        x = rng.normal(scale=2.0, size=p)
        xd = rng.normal(scale=2.0, size=p)
        chi = rng.normal(scale=2.0, size=p)
        psi = rng.normal(scale=2.0, size=p)

        inertia = model.mass(x, theta)
        eigs = np.linalg.eigvalsh(inertia)
        eig_min = min(eig_min, float(eigs[0]))
        eig_max = max(eig_max, float(eigs[-1]))
        cor = model.coriolis(x, xd, theta)
        grav = model.gravity(x, theta)
        if eigs[0] < b.inertia_min - tol or eigs[-1] > b.inertia_max + tol:
            p1_ok = False
        if np.linalg.norm(cor @ xd) > b.coriolis_max * np.linalg.norm(xd) + tol:
            p1_ok = False
        if np.linalg.norm(grav) > b.gravity_max + tol:
            p1_ok = False

        h = _P2_FD_STEP
        mdot = (model.mass(x + h * xd, theta) - model.mass(x - h * xd, theta)) / (
            2.0 * h
        )
        v = rng.normal(size=p)
        p2_max = max(p2_max, float(abs(v @ (mdot - 2.0 * cor) @ v)))

        residual = model.regressor(x, xd, chi, psi) @ theta - (
            inertia @ chi + cor @ psi + model.damping(x, psi, theta) + grav
        )
        p3_max = max(p3_max, float(np.max(np.abs(residual))))

    return PropertyReport(
        p1_ok=p1_ok,
        p2_ok=p2_max <= P2_TOL,
        p3_ok=p3_max <= P3_TOL,
        inertia_eig_min=eig_min,
        inertia_eig_max=eig_max,
        p2_max=p2_max,
        p3_max=p3_max,
        sample_count=sample_count,
        rng_seed=rng_seed,
    )


@dataclass(frozen=True)
class AgentKind:
    """Tagged agent kind; ``model`` is present exactly for Euler-Lagrange."""

    kind: str
    model: Optional[ELModel] = None

    def __post_init__(self):
        if self.kind not in _KIND_ORDER:
            raise ValueError(f"unknown agent kind {self.kind!r}")
        if (self.kind == EULER_LAGRANGE) != (self.model is not None):
            raise ValueError("Euler-Lagrange agents need a model, others must not")


def single() -> AgentKind:
    return AgentKind(SINGLE)


def double() -> AgentKind:
    return AgentKind(DOUBLE)


def euler_lagrange(model: ELModel) -> AgentKind:
    return AgentKind(EULER_LAGRANGE, model)


def validate_label_order(kinds) -> None:
    """Enforce the labeling convention: singles, then doubles, then EL."""
    order = [_KIND_ORDER[k.kind] for k in kinds]
    if any(a > b for a, b in zip(order, order[1:])):
        raise ValueError(
            "agents must be labeled single-integrator first, then "
            "double-integrator, then Euler-Lagrange"
        )


@dataclass
class AgentState:
    """Value-semantic state of one agent.

    ``v`` is absent for single integrators; ``theta_hat`` is present only
    for Euler-Lagrange agents.
    """

    x: np.ndarray
    v: Optional[np.ndarray] = None
    theta_hat: Optional[np.ndarray] = None
