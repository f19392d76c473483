"""Per-agent objectives with gradients and smoothness/convexity constants."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "AgentObjective",
    "ObjectiveSuite",
    "make_sensor_suite",
    "make_quadratic_suite",
    "optimal_point",
    "centralized_minimizer",
    "resolve_optimum",
    "stacked_gradient",
    "check_constants",
    "SENSOR_A",
    "SENSOR_B",
    "SENSOR_C",
    "SENSOR_STEP_SIZES",
]

# five-sensor estimation example
SENSOR_A = (1.0, 2.0, 3.0, 4.0, 5.0)
SENSOR_B = (3.33, 1.67, 1.11, 0.83, 0.67)
SENSOR_C = (0.2, 0.4, 0.6, 0.8, 1.0)
SENSOR_STEP_SIZES = (0.035, 0.015, 0.025, 0.045, 0.055)


@dataclass(frozen=True)
class AgentObjective:
    """One agent's differentiable objective.

    ``L`` is the Lipschitz constant of ``gradient`` and ``mu`` the
    strong-convexity modulus (``0`` for merely convex functions).
    """

    evaluate: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    L: float
    mu: float = 0.0

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError(f"L must be positive, got {self.L}")
        if not self.mu >= 0:
            raise ValueError(f"mu must be nonnegative, got {self.mu}")


@dataclass(frozen=True)
class ObjectiveSuite:
    agents: tuple[AgentObjective, ...]
    dimension: int = 1
    kind: str = "custom"
    params: dict = field(default_factory=dict, compare=False)
    _batch_gradient: Callable[[np.ndarray], np.ndarray] | None = field(
        default=None, compare=False, repr=False
    )

    def __post_init__(self):
        object.__setattr__(self, "agents", tuple(self.agents))
        if not self.agents:
            raise ValueError("a suite needs at least one agent")
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        if not any(a.mu > 0 for a in self.agents):
            raise ValueError("at least one agent objective must be strongly convex (mu_i > 0)")

    @property
    def n_agents(self) -> int:
        return len(self.agents)

    @property
    def L_values(self) -> np.ndarray:
        return np.array([a.L for a in self.agents])

    @property
    def mu_values(self) -> np.ndarray:
        return np.array([a.mu for a in self.agents])

    @property
    def L_hat(self) -> float:
        return float(self.L_values.max())

    @property
    def L_bar(self) -> float:
        return float(self.L_values.mean())

    @property
    def mu_hat(self) -> float:
        return float(self.mu_values.max())

    @property
    def mu_bar(self) -> float:
        return float(self.mu_values.mean())

    @property
    def kappa(self) -> float:
        return self.L_hat / self.mu_bar

    def stats(self) -> dict:
        return {
            "n_agents": self.n_agents,
            "L_hat": self.L_hat,
            "L_bar": self.L_bar,
            "mu_hat": self.mu_hat,
            "mu_bar": self.mu_bar,
            "kappa": self.kappa,
        }

    def value(self, x) -> float:
        """Global objective ``(1/N) sum_i f_i(x)`` at a common point."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return float(np.mean([a.evaluate(x) for a in self.agents]))


def _sensor_agent(a: float, b: float, c: np.ndarray) -> AgentObjective:
    def evaluate(x):
        d = np.atleast_1d(x) - c
        return float(a + d @ d / b)

    def gradient(x):
        return 2.0 * (np.atleast_1d(x) - c) / b

    return AgentObjective(evaluate, gradient, L=2.0 / b, mu=2.0 / b)


def make_sensor_suite(a, b, c, dimension: int = 1) -> ObjectiveSuite:
    """Sensor-estimation suite ``f_i(x) = a_i + ||x - c_i||^2 / b_i``.

    ``c`` may be an ``N``-vector (broadcast over coordinates) or an
    ``N x dimension`` array.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    c = np.asarray(c, dtype=float)
    if c.ndim == 1:
        c = np.repeat(c[:, None], dimension, axis=1)
    dimension = c.shape[1]
    if not (len(a) == len(b) == c.shape[0]):
        raise ValueError(f"a, b, c disagree on the number of agents ({len(a)}, {len(b)}, {c.shape[0]})")
    if np.any(b <= 0) or not np.all(np.isfinite(b)):
        raise ValueError("every b_i must be positive and finite")
    agents = tuple(_sensor_agent(ai, bi, ci) for ai, bi, ci in zip(a, b, c))
    inv_b = (1.0 / b)[:, None]

    def batch(x):
        return 2.0 * (x - c) * inv_b

    return ObjectiveSuite(
        agents, dimension, kind="sensor",
        params={"a": a, "b": b, "c": c}, _batch_gradient=batch,
    )


def make_quadratic_suite(curvatures, centers, dimension: int = 1) -> ObjectiveSuite:
    """``f_i(x) = (h_i / 2) ||x - c_i||^2``; ``h_i = 0`` gives a flat agent."""
    h = np.asarray(curvatures, dtype=float).ravel()
    c = np.asarray(centers, dtype=float)
    if c.ndim == 1:
        c = np.repeat(c[:, None], dimension, axis=1)
    agents = []
    for hi, ci in zip(h, c):
        agents.append(
            AgentObjective(
                lambda x, hi=hi, ci=ci: float(0.5 * hi * np.sum((np.atleast_1d(x) - ci) ** 2)),
                lambda x, hi=hi, ci=ci: hi * (np.atleast_1d(x) - ci),
                L=max(hi, 1e-12), mu=hi,
            )
        )
    return ObjectiveSuite(
        tuple(agents), c.shape[1], kind="quadratic",
        params={"h": h, "c": c},
        _batch_gradient=lambda x: h[:, None] * (x - c),
    )


def stacked_gradient(suite: ObjectiveSuite, x) -> np.ndarray:
    """Row ``i`` of the result is ``grad f_i(x_i)``; ``x`` is ``N x n``."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] != suite.n_agents:
        raise ValueError(f"expected {suite.n_agents} rows, got {x.shape[0]}")
    if suite._batch_gradient is not None:
        return suite._batch_gradient(x)
    return np.vstack([np.atleast_1d(a.gradient(xi)) for a, xi in zip(suite.agents, x)])


def optimal_point(suite: ObjectiveSuite):
    """Closed-form minimizer when one is known, otherwise ``None``."""
    if suite.kind == "sensor":
        w = 1.0 / suite.params["b"]
        return (w[:, None] * suite.params["c"]).sum(axis=0) / w.sum()
    if suite.kind == "quadratic":
        h = suite.params["h"]
        return (h[:, None] * suite.params["c"]).sum(axis=0) / h.sum()
    return None


def centralized_minimizer(suite: ObjectiveSuite, x0=None, tol: float = 1e-13, max_iters: int = 200_000):
    """Gradient descent on ``(1/N) sum_i f_i`` with step ``1 / L_hat``.

    Returns ``(x, iterations)``. Used as the oracle for suites without a
    closed-form minimizer.
    """
    x = np.zeros(suite.dimension) if x0 is None else np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    step = 1.0 / suite.L_hat
    for it in range(1, max_iters + 1):
        g = np.mean([np.atleast_1d(a.gradient(x)) for a in suite.agents], axis=0)
        x_new = x - step * g
        if np.linalg.norm(x_new - x) <= tol:
            return x_new, it
        x = x_new
    return x, max_iters


def resolve_optimum(suite: ObjectiveSuite) -> np.ndarray:
    x_star = optimal_point(suite)
    if x_star is None:
        x_star, _ = centralized_minimizer(suite)
    return np.atleast_1d(x_star)


def check_constants(
    suite: ObjectiveSuite,
    samples: int = 100,
    seed: int = 0,
    scale: float = 10.0,
    tol: float = 1e-9,
) -> dict:
    """Stochastic audit of each agent's ``L_i`` and ``mu_i``.

    For seeded random pairs ``(x, y)`` it evaluates

    * ``||grad f(x) - grad f(y)|| / (L ||x - y||)`` (smoothness), and
    * ``(mu/2)||x-y||^2 / (f(x) - f(y) - <grad f(y), x - y>)`` (strong convexity),

    and records any ratio above ``1 + tol``.
    """
    rng = np.random.default_rng(seed)
    worst_l = np.zeros(suite.n_agents)
    worst_mu = np.zeros(suite.n_agents)
    violations = []
    for i, agent in enumerate(suite.agents):
        for t in range(samples):
            x = rng.uniform(-scale, scale, suite.dimension)
            y = rng.uniform(-scale, scale, suite.dimension)
            dist = np.linalg.norm(x - y)
            if dist == 0:
                continue
            gx, gy = np.atleast_1d(agent.gradient(x)), np.atleast_1d(agent.gradient(y))
            r_l = np.linalg.norm(gx - gy) / (agent.L * dist)
            gap = agent.evaluate(x) - agent.evaluate(y) - gy @ (x - y)
            quad = 0.5 * agent.mu * dist**2
            if quad == 0:
                r_mu = 0.0
            elif gap <= 0:
                r_mu = np.inf
            else:
                r_mu = quad / gap
            worst_l[i] = max(worst_l[i], r_l)
            worst_mu[i] = max(worst_mu[i], r_mu)
            if r_l > 1 + tol:
                violations.append({"agent": i + 1, "sample": t, "assumption": "lipschitz", "ratio": float(r_l)})
            if r_mu > 1 + tol:
                violations.append({"agent": i + 1, "sample": t, "assumption": "strong-convexity", "ratio": float(r_mu)})
    return {
        "samples": samples,
        "worst_lipschitz_ratio": worst_l.tolist(),
        "worst_convexity_ratio": worst_mu.tolist(),
        "violations": violations,
        "passed": not violations,
    }
