"""scikit-learn style front end for the solvers and the certifier.

``fit`` accepts either an :class:`ObjectiveSuite` or an ``(N, 3)`` array
whose rows are sensor parameters ``(a_i, b_i, c_i)``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .certify import certify, norm_bounds
from .engine import StepSizes, run_dgd_baseline, run_push_diging, run_push_sum_baseline
from .graphs import GraphSequence, make_ring
from .mixing import PushSumSchedule, consensus_constants, empirical_consensus_constants
from .objectives import ObjectiveSuite, make_sensor_suite

__all__ = ["PushDIGing", "DGD", "PushSum", "RateCertifier", "check_suite"]


def check_suite(X) -> ObjectiveSuite:
    """Coerce ``X`` into an objective suite, validating sensor rows."""
    if isinstance(X, ObjectiveSuite):
        return X
    X = check_array(X, ensure_min_samples=1)
    if X.shape[1] != 3:
        raise ValueError(f"expected rows (a, b, c) with 3 columns, got {X.shape[1]}")
    return make_sensor_suite(X[:, 0], X[:, 1], X[:, 2])


def _check_graph(graph, n: int) -> GraphSequence:
    seq = make_ring(n) if graph is None else graph
    if seq.n_agents != n:
        raise ValueError(f"graph has {seq.n_agents} agents, objective has {n}")
    return seq


def _initial(x0, suite: ObjectiveSuite, random_state) -> np.ndarray:
    if x0 is not None:
        return np.asarray(x0, dtype=float)
    rng = np.random.default_rng(random_state)
    return rng.uniform(0.0, 1.0, (suite.n_agents, suite.dimension))


class _SolverMixin:
    def _store(self, trace):
        self.trace_ = trace
        self.x_ = trace.x[-1]
        self.consensus_ = trace.x[-1].mean(axis=0)
        self.n_iter_ = trace.iterations
        self.n_agents_ = trace.n_agents
        return self

    def predict(self, X=None) -> np.ndarray:
        """Per-agent final estimates (``X`` is ignored)."""
        check_is_fitted(self, "trace_")
        return self.x_

    def score(self, X=None, y=None) -> float:
        """Negative final distance ``-||x(K) - 1 x*||``."""
        check_is_fitted(self, "trace_")
        return -float(self.trace_.residual_q[-1])


class PushDIGing(_SolverMixin, BaseEstimator):
    """Push-DIGing with per-agent step-sizes.

    Parameters
    ----------
    graph : GraphSequence, optional
        Communication schedule; defaults to the static directed ring.
    step_sizes : array-like, optional
        One step per agent. Defaults to ``1 / (10 L_hat)`` for every agent.
    max_iters : int
    x0 : array-like, optional
        Initial iterates ``(N,)`` or ``(N, n)``; random in ``[0, 1)`` otherwise.
    random_state : int
    record_aux : bool
        Keep ``y``, ``s``, ``h`` and ``z`` on ``trace_``.

    Attributes
    ----------
    trace_ : TraceRecord
    x_ : ndarray of shape (N, n)
    consensus_ : ndarray of shape (n,)
    n_iter_ : int
    """

    def __init__(self, graph=None, step_sizes=None, max_iters=500, x0=None, random_state=0, record_aux=False):
        self.graph = graph
        self.step_sizes = step_sizes
        self.max_iters = max_iters
        self.x0 = x0
        self.random_state = random_state
        self.record_aux = record_aux

    def fit(self, X, y=None):
        suite = check_suite(X)
        seq = _check_graph(self.graph, suite.n_agents)
        alphas = (
            np.full(suite.n_agents, 0.1 / suite.L_hat) if self.step_sizes is None
            else np.asarray(self.step_sizes, dtype=float)
        )
        self.step_sizes_ = StepSizes(alphas)
        trace = run_push_diging(
            seq, suite, self.step_sizes_, _initial(self.x0, suite, self.random_state),
            self.max_iters, record_aux=self.record_aux,
        )
        return self._store(trace)


class _Baseline(_SolverMixin, BaseEstimator):
    _runner = None

    def __init__(self, graph=None, alpha0=None, max_iters=500, x0=None, random_state=0):
        self.graph = graph
        self.alpha0 = alpha0
        self.max_iters = max_iters
        self.x0 = x0
        self.random_state = random_state

    def fit(self, X, y=None):
        suite = check_suite(X)
        seq = _check_graph(self.graph, suite.n_agents)
        self.alpha0_ = 1.0 / suite.L_hat if self.alpha0 is None else float(self.alpha0)
        runner = type(self)._runner
        trace = runner(seq, suite, self.alpha0_, _initial(self.x0, suite, self.random_state), self.max_iters)
        return self._store(trace)


class DGD(_Baseline):
    """Distributed gradient descent with Metropolis weights and ``alpha0 / sqrt(k+1)`` steps."""

    _runner = staticmethod(run_dgd_baseline)


class PushSum(_Baseline):
    """Gradient-push (subgradient-push) with ``alpha0 / sqrt(k+1)`` steps."""

    _runner = staticmethod(run_push_sum_baseline)


class RateCertifier(BaseEstimator):
    """Evaluate the geometric-rate certificate for a configuration.

    Parameters
    ----------
    graph : GraphSequence, optional
    step_sizes : array-like
    B : int, optional
        Window length; defaults to ``N * claimed_B0``.
    mode : {"empirical", "certified"}
    horizon : int
        Horizon over which empirical constants and norm bounds are measured.

    Attributes
    ----------
    certificate_ : RateCertificate
    lambda_ : float
    valid_ : bool
    """

    def __init__(self, graph=None, step_sizes=None, B=None, mode="empirical", horizon=500, beta=None, eta=1.0):
        self.graph = graph
        self.step_sizes = step_sizes
        self.B = B
        self.mode = mode
        self.horizon = horizon
        self.beta = beta
        self.eta = eta

    def fit(self, X, y=None):
        if self.mode not in ("empirical", "certified"):
            raise ValueError(f"mode must be 'empirical' or 'certified', got {self.mode!r}")
        if self.step_sizes is None:
            raise ValueError("step_sizes is required")
        suite = check_suite(X)
        seq = _check_graph(self.graph, suite.n_agents)
        sched = PushSumSchedule(seq)
        B = seq.n_agents * seq.claimed_B0 if self.B is None else int(self.B)
        if self.mode == "certified":
            consts = consensus_constants(seq.n_agents, seq.claimed_B0, B)
        else:
            consts = empirical_consensus_constants(seq, B, self.horizon, schedule=sched)
        norms = norm_bounds(seq, self.horizon, sched)
        self.certificate_ = certify(
            suite.stats(), norms, consts, StepSizes(self.step_sizes), beta=self.beta, eta=self.eta
        )
        self.lambda_ = self.certificate_.lam
        self.valid_ = self.certificate_.valid
        return self
