"""Push-DIGing and the two diminishing-step baselines.

Stacked iterates are ``N x n`` arrays: row ``i`` belongs to agent ``i + 1``.
Every coordinate is mixed independently by the same matrices.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .graphs import Digraph, GraphSequence
from .mixing import DEFAULT_SCALING_FLOOR, PushSumSchedule, ScalingFloorError
from .objectives import ObjectiveSuite, resolve_optimum, stacked_gradient

__all__ = [
    "DivergenceError",
    "StepSizes",
    "NetworkState",
    "TraceRecord",
    "init_state",
    "push_diging_step",
    "transformed_view",
    "run_push_diging",
    "run_dgd_baseline",
    "run_push_sum_baseline",
    "run_centralized_gd",
    "metropolis_weights",
    "inexact_gd_run",
    "eq4_consistency",
    "DIVERGENCE_FACTOR",
]

DIVERGENCE_FACTOR = 1e6


class DivergenceError(FloatingPointError):
    """The iteration blew up; ``k`` is the first offending iteration."""

    def __init__(self, k: int, reason: str):
        self.k = k
        self.reason = reason
        super().__init__(f"diverged at iteration {k}: {reason}")


@dataclass(frozen=True)
class StepSizes:
    """Per-agent constant step-sizes (the diagonal of ``D``)."""

    alphas: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.alphas, dtype=float).ravel()
        if a.size == 0 or not np.all(a > 0) or not np.all(np.isfinite(a)):
            raise ValueError("step-sizes must be positive and finite")
        a.setflags(write=False)
        object.__setattr__(self, "alphas", a)

    @property
    def n_agents(self) -> int:
        return self.alphas.size

    @property
    def alpha_max(self) -> float:
        return float(self.alphas.max())

    @property
    def alpha_min(self) -> float:
        return float(self.alphas.min())

    @property
    def alpha_bar(self) -> float:
        return float(self.alphas.mean())

    @property
    def k_D(self) -> float:
        return self.alpha_max / self.alpha_min

    @property
    def matrix(self) -> np.ndarray:
        return np.diag(self.alphas)

    def scaled(self, factor: float) -> "StepSizes":
        return StepSizes(self.alphas * factor)


@dataclass(frozen=True)
class NetworkState:
    k: int
    p: np.ndarray
    s: np.ndarray
    x: np.ndarray
    y: np.ndarray
    grad: np.ndarray  # gradients at x, cached for the next y-update

    @property
    def h(self) -> np.ndarray:
        return self.y / self.s[:, None]


def _as_stack(x0, n_agents: int, dimension: int) -> np.ndarray:
    x0 = np.asarray(x0, dtype=float)
    if x0.ndim == 1:
        x0 = x0[:, None]
    if x0.shape != (n_agents, dimension):
        raise ValueError(f"x0 must have shape ({n_agents}, {dimension}), got {x0.shape}")
    return x0.copy()


def init_state(suite: ObjectiveSuite, x0) -> NetworkState:
    x = _as_stack(x0, suite.n_agents, suite.dimension)
    g = stacked_gradient(suite, x)
    return NetworkState(k=0, p=x.copy(), s=np.ones(suite.n_agents), x=x, y=g.copy(), grad=g)


def push_diging_step(
    state: NetworkState,
    A,
    D: StepSizes,
    suite: ObjectiveSuite,
    floor: float = DEFAULT_SCALING_FLOOR,
) -> NetworkState:
    """One synchronous round: p, then s, then x = p / s, then y."""
    a = np.asarray(A, dtype=float)
    k1 = state.k + 1
    p = a @ (state.p - D.alphas[:, None] * state.y)
    s = a @ state.s
    low = s.min()
    if not low >= floor:
        raise ScalingFloorError(k1, float(low), floor)
    x = p / s[:, None]
    if not np.all(np.isfinite(x)):
        raise DivergenceError(k1, "non-finite iterate")
    g = stacked_gradient(suite, x)
    y = a @ (state.y + g - state.grad)
    if not np.all(np.isfinite(y)):
        raise DivergenceError(k1, "non-finite gradient tracker")
    return NetworkState(k=k1, p=p, s=s, x=x, y=y, grad=g)


def transformed_view(prev: NetworkState, next: NetworkState, A) -> tuple[np.ndarray, np.ndarray]:
    """``R(k) = S(k+1)^-1 A(k) S(k)`` and ``h(k) = S(k)^-1 y(k)``."""
    a = np.asarray(A, dtype=float)
    R = (a * prev.s[None, :]) / next.s[:, None]
    return R, prev.h


@dataclass
class TraceRecord:
    """Per-iteration record of one run.

    ``x`` has shape ``(K+1, N, n)``. Auxiliary arrays (``y``, ``s``, ``h``,
    ``z``) are filled only when the run was asked to record them.
    """

    algorithm: str
    k: np.ndarray
    x: np.ndarray
    x_star: np.ndarray
    residual_q: np.ndarray
    consensus_violation: np.ndarray
    fig1_metric: np.ndarray
    tracking_error: np.ndarray
    y: np.ndarray | None = None
    s: np.ndarray | None = None
    h: np.ndarray | None = None
    z: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n_agents(self) -> int:
        return self.x.shape[1]

    @property
    def iterations(self) -> int:
        return int(self.k[-1])

    def to_csv(self) -> str:
        n, dim = self.x.shape[1], self.x.shape[2]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if dim == 1:
            xcols = [f"x_{i + 1}" for i in range(n)]
        else:
            xcols = [f"x_{i + 1}_{d + 1}" for i in range(n) for d in range(dim)]
        w.writerow(["k", *xcols, "residual_q", "consensus_violation", "fig1_metric", "tracking_error"])
        for t in range(len(self.k)):
            row = [str(int(self.k[t]))]
            row += [f"{v:.17g}" for v in self.x[t].ravel()]
            row += [
                f"{self.residual_q[t]:.17g}",
                f"{self.consensus_violation[t]:.17g}",
                f"{self.fig1_metric[t]:.17g}",
                f"{self.tracking_error[t]:.17g}",
            ]
            w.writerow(row)
        return buf.getvalue()


class _Recorder:
    def __init__(self, suite: ObjectiveSuite, x0: np.ndarray, x_star, aux: bool):
        self.suite = suite
        self.x_star = resolve_optimum(suite) if x_star is None else np.atleast_1d(np.asarray(x_star, float))
        self.aux = aux
        self.x0_dist = np.linalg.norm(x0 - self.x_star[None, :], axis=1)
        # agents starting exactly at x* are not normalized
        self.x0_dist = np.where(self.x0_dist > 0, self.x0_dist, 1.0)
        self.rows: dict[str, list] = {k: [] for k in ("x", "q", "cv", "fig", "te", "y", "s")}
        self.q0 = None

    def add(self, x, y=None, s=None, grad=None) -> float:
        q = float(np.linalg.norm(x - self.x_star[None, :]))
        if self.q0 is None:
            self.q0 = q
        self.rows["x"].append(x.copy())
        self.rows["q"].append(q)
        self.rows["cv"].append(float(np.linalg.norm(x - x.mean(axis=0, keepdims=True))))
        self.rows["fig"].append(float(np.sum(np.linalg.norm(x - self.x_star[None, :], axis=1) / self.x0_dist)))
        if y is not None:
            self.rows["te"].append(float(np.linalg.norm(y.mean(axis=0) - grad.mean(axis=0))))
        else:
            self.rows["te"].append(float("nan"))
        if self.aux:
            self.rows["y"].append(None if y is None else y.copy())
            self.rows["s"].append(None if s is None else s.copy())
        return q

    def check(self, k: int, q: float):
        if not np.isfinite(q):
            raise DivergenceError(k, "non-finite residual")
        if self.q0 and q > DIVERGENCE_FACTOR * self.q0:
            raise DivergenceError(k, f"residual {q:.3e} exceeds {DIVERGENCE_FACTOR:.0e} x initial {self.q0:.3e}")

    def build(self, algorithm: str, meta: dict) -> TraceRecord:
        r = self.rows
        x = np.array(r["x"])
        rec = TraceRecord(
            algorithm=algorithm,
            k=np.arange(len(x)),
            x=x,
            x_star=self.x_star,
            residual_q=np.array(r["q"]),
            consensus_violation=np.array(r["cv"]),
            fig1_metric=np.array(r["fig"]),
            tracking_error=np.array(r["te"]),
            meta=meta,
        )
        if self.aux and r["y"] and r["y"][0] is not None:
            rec.y = np.array(r["y"])
            rec.s = np.array(r["s"])
            rec.h = rec.y / rec.s[:, :, None]
            g = np.array([stacked_gradient(self.suite, xi) for xi in x])
            z = np.zeros_like(g)
            z[1:] = g[1:] - g[:-1]
            rec.z = z
        return rec


def run_push_diging(
    seq: GraphSequence,
    suite: ObjectiveSuite,
    D: StepSizes,
    x0,
    max_iters: int,
    stop_residual: float = 0.0,
    x_star=None,
    record_aux: bool = False,
    schedule: PushSumSchedule | None = None,
) -> TraceRecord:
    """Run Push-DIGing from ``x0`` until ``max_iters`` or ``residual_q <= stop_residual``."""
    if D.n_agents != suite.n_agents or seq.n_agents != suite.n_agents:
        raise ValueError(
            f"agent count mismatch: graph {seq.n_agents}, suite {suite.n_agents}, step-sizes {D.n_agents}"
        )
    sched = schedule if schedule is not None else PushSumSchedule(seq)
    state = init_state(suite, x0)
    rec = _Recorder(suite, state.x, x_star, record_aux)
    q = rec.add(state.x, state.y, state.s, state.grad)
    # stop_residual = 0 always runs the full horizon
    while state.k < max_iters and not (stop_residual > 0 and q <= stop_residual):
        state = push_diging_step(state, sched.A(state.k), D, suite, sched.floor)
        q = rec.add(state.x, state.y, state.s, state.grad)
        rec.check(state.k, q)
    return rec.build("push-diging", {"step_sizes": D.alphas.tolist()})


def metropolis_weights(g: Digraph) -> np.ndarray:
    """Doubly-stochastic Metropolis weights of the symmetrized graph."""
    sym = g.symmetrized()
    n = sym.n_agents
    deg = np.zeros(n, dtype=int)
    for j, _ in sym.edges:
        deg[j - 1] += 1
    w = np.zeros((n, n))
    for j, i in sym.edges:
        w[i - 1, j - 1] = 1.0 / (1.0 + max(deg[i - 1], deg[j - 1]))
    w[np.diag_indices(n)] = 1.0 - w.sum(axis=1)
    return w


def _diminishing(alpha0: float, k: int) -> float:
    return alpha0 / np.sqrt(k + 1.0)


def run_dgd_baseline(
    seq: GraphSequence,
    suite: ObjectiveSuite,
    alpha0: float,
    x0,
    max_iters: int,
    x_star=None,
) -> TraceRecord:
    """``x(k+1) = W(k) x(k) - alpha0/sqrt(k+1) grad F(x(k))`` with Metropolis ``W(k)``."""
    if alpha0 < 0:
        raise ValueError("alpha0 must be nonnegative")
    x = _as_stack(x0, suite.n_agents, suite.dimension)
    rec = _Recorder(suite, x, x_star, False)
    rec.add(x)
    cache: dict[int, np.ndarray] = {}
    for k in range(max_iters):
        key = k % seq.period if seq.period is not None else k
        w = cache.get(key)
        if w is None:
            w = cache[key] = metropolis_weights(seq[k])
        x = w @ x - _diminishing(alpha0, k) * stacked_gradient(suite, x)
        rec.check(k + 1, rec.add(x))
    return rec.build("dgd", {"alpha0": alpha0})


def run_push_sum_baseline(
    seq: GraphSequence,
    suite: ObjectiveSuite,
    alpha0: float,
    x0,
    max_iters: int,
    x_star=None,
    schedule: PushSumSchedule | None = None,
) -> TraceRecord:
    """Gradient-push: ``w(k+1) = A(k)(w(k) - alpha_k g(k))``, ``x = w / s``."""
    if alpha0 < 0:
        raise ValueError("alpha0 must be nonnegative")
    sched = schedule if schedule is not None else PushSumSchedule(seq)
    x = _as_stack(x0, suite.n_agents, suite.dimension)
    w = x.copy()
    rec = _Recorder(suite, x, x_star, False)
    rec.add(x)
    for k in range(max_iters):
        a = sched.A(k)
        w = a @ (w - _diminishing(alpha0, k) * stacked_gradient(suite, x))
        x = w / sched.s(k + 1)[:, None]
        rec.check(k + 1, rec.add(x))
    return rec.build("push-sum", {"alpha0": alpha0})


def run_centralized_gd(suite: ObjectiveSuite, alpha: float, x0, max_iters: int) -> np.ndarray:
    """Iterates of ``x(k+1) = x(k) - alpha grad f_1(x(k))`` for a one-agent suite."""
    if suite.n_agents != 1:
        raise ValueError("centralized reference is defined for a single agent")
    x = np.atleast_1d(np.asarray(x0, dtype=float)).ravel().copy()
    out = [x.copy()]
    grad = suite.agents[0].gradient
    for _ in range(max_iters):
        x = x - alpha * np.atleast_1d(grad(x))
        out.append(x.copy())
    return np.array(out)


def inexact_gd_run(
    suite: ObjectiveSuite,
    theta: float,
    noise,
    evaluation_points,
    v0,
    iters: int,
    v_star=None,
) -> tuple[np.ndarray, np.ndarray]:
    """Inexact gradient descent ``v+ = v - theta * mean_i grad g_i(u_i) + e``.

    ``noise`` is an ``(iters, n)`` array or a callable ``k -> e_k``;
    ``evaluation_points`` is an ``(iters, N, n)`` array or a callable
    ``(k, v_k) -> u(k)``. Returns ``(v, r)`` with ``v`` of shape
    ``(iters+1, n)`` and ``r_k = ||v_k - v*||``.
    """
    if theta <= 0:
        raise ValueError("theta must be positive")
    v_star = resolve_optimum(suite) if v_star is None else np.atleast_1d(v_star)
    v = np.atleast_1d(np.asarray(v0, dtype=float)).copy()
    vs = [v.copy()]
    for k in range(iters):
        u = evaluation_points(k, v) if callable(evaluation_points) else evaluation_points[k]
        u = np.asarray(u, dtype=float).reshape(suite.n_agents, suite.dimension)
        e = noise(k) if callable(noise) else noise[k]
        v = v - theta * stacked_gradient(suite, u).mean(axis=0) + np.atleast_1d(e)
        vs.append(v.copy())
    vs = np.array(vs)
    return vs, np.linalg.norm(vs - v_star[None, :], axis=1)


def eq4_consistency(trace: TraceRecord, schedule: PushSumSchedule, D: StepSizes) -> dict:
    """Largest per-step error of the transformed recursion along a recorded trace.

    Checks ``x(k+1) = R(k)(x(k) - D h(k))`` and
    ``h(k+1) = R(k) h(k) + S(k+1)^-1 A(k) z(k+1)``.
    """
    if trace.h is None:
        raise ValueError("trace was recorded without auxiliary quantities")
    ex = eh = 0.0
    for k in range(len(trace.k) - 1):
        R = schedule.R(k)
        x_next = R @ (trace.x[k] - D.alphas[:, None] * trace.h[k])
        h_next = R @ trace.h[k] + (schedule.A(k) @ trace.z[k + 1]) / schedule.s(k + 1)[:, None]
        ex = max(ex, float(np.max(np.abs(x_next - trace.x[k + 1]))))
        eh = max(eh, float(np.max(np.abs(h_next - trace.h[k + 1]))))
    return {"x_error": ex, "h_error": eh}
