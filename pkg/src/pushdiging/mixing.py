"""Column-stochastic mixing, push-sum scaling and consensus contraction.

Conventions: ``A(k)[i, j]`` is the weight agent ``i`` puts on the message
from agent ``j`` (0-based indices, agent ``i + 1``). ``s(k)`` is the push-sum
weight vector and ``R(k) = S(k+1)^-1 A(k) S(k)`` the induced row-stochastic
matrix.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .graphs import Digraph, GraphSequence

__all__ = [
    "STOCHASTIC_TOL",
    "ScalingFloorError",
    "MixingMatrix",
    "ConsensusConstants",
    "PushSumSchedule",
    "build_mixing_matrix",
    "matrix_product_window",
    "push_sum_scaling",
    "row_normalized",
    "consensus_constants",
    "contraction_factor_empirical",
    "contraction_factor_exact",
    "empirical_consensus_constants",
    "consensus_projector",
    "average_projector",
    "matrix_to_csv",
]

STOCHASTIC_TOL = 1e-12
DEFAULT_SCALING_FLOOR = 1e-300


class ScalingFloorError(FloatingPointError):
    """A push-sum weight fell below the configured floor."""

    def __init__(self, k: int, value: float, floor: float):
        self.k = k
        self.value = value
        self.floor = floor
        super().__init__(
            f"push-sum weight {value:.3e} below floor {floor:.1e} at iteration {k}; "
            "the graph sequence is numerically disconnected"
        )


@dataclass(frozen=True)
class MixingMatrix:
    entries: np.ndarray
    k: int | None = None

    def __post_init__(self):
        self.entries.setflags(write=False)

    @property
    def n_agents(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)


def average_projector(n: int) -> np.ndarray:
    """``J = (1/N) 1 1^T``."""
    return np.full((n, n), 1.0 / n)


def consensus_projector(n: int) -> np.ndarray:
    """``I - J``, which maps a stack of iterates to its consensus violation."""
    return np.eye(n) - average_projector(n)


def build_mixing_matrix(g: Digraph, k: int | None = None) -> MixingMatrix:
    """Weights ``1 / (d_j^out + 1)`` on every edge out of ``j`` and on ``j`` itself."""
    w = 1.0 / (g.out_degrees() + 1.0)
    a = np.diag(w)
    for j, i in g.edges:
        a[i - 1, j - 1] = w[j - 1]
    return MixingMatrix(a, k)


class PushSumSchedule:
    """Lazily evaluated ``A(k)``, ``s(k)`` and ``R(k)`` for one graph sequence.

    Mixing matrices of periodic sequences are cached per slice; push-sum
    weights are extended on demand and cached for the lifetime of the object.
    """

    def __init__(self, seq: GraphSequence, floor: float = DEFAULT_SCALING_FLOOR):
        self.seq = seq
        self.n_agents = seq.n_agents
        self.floor = floor
        self._a_cache: dict[int, np.ndarray] = {}
        self._s = [np.ones(self.n_agents)]

    def A(self, k: int) -> np.ndarray:
        key = k % self.seq.period if self.seq.period is not None else k
        a = self._a_cache.get(key)
        if a is None:
            a = build_mixing_matrix(self.seq[k], k).entries
            self._a_cache[key] = a
        return a

    def s(self, k: int) -> np.ndarray:
        while len(self._s) <= k:
            t = len(self._s) - 1
            nxt = self.A(t) @ self._s[t]
            low = nxt.min()
            if not low >= self.floor:
                raise ScalingFloorError(t + 1, float(low), self.floor)
            self._s.append(nxt)
        return self._s[k]

    def R(self, k: int) -> np.ndarray:
        return (self.A(k) * self.s(k)[None, :]) / self.s(k + 1)[:, None]

    def product(self, k: int, B: int) -> np.ndarray:
        """``A_B(k) = A(k) A(k-1) ... A(k+1-B)``; factors with negative index are ``I``."""
        out = np.eye(self.n_agents)
        for t in range(k + 1 - B, k + 1):
            if t >= 0:
                out = self.A(t) @ out
        return out

    def R_window(self, k: int, B: int) -> np.ndarray:
        """``R_B(k) = S(k+1)^-1 A_B(k) S(k+1-B)`` for ``k >= B - 1``."""
        if k < B - 1:
            raise ValueError(f"R_B(k) needs k >= B - 1 (k={k}, B={B})")
        prod = self.product(k, B)
        return (prod * self.s(k + 1 - B)[None, :]) / self.s(k + 1)[:, None]


def matrix_product_window(seq: GraphSequence, k: int, B: int) -> np.ndarray:
    if B < 0:
        raise ValueError("B must be nonnegative")
    return PushSumSchedule(seq).product(k, B)


def push_sum_scaling(
    seq: GraphSequence, horizon: int, floor: float = DEFAULT_SCALING_FLOOR
) -> np.ndarray:
    """Push-sum weights ``s(0), ..., s(horizon)`` as rows of an array.

    ``S(k)`` is ``np.diag(result[k])``.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    sched = PushSumSchedule(seq, floor)
    return np.array([sched.s(k) for k in range(horizon + 1)])


def row_normalized(seq: GraphSequence, k: int, schedule: PushSumSchedule | None = None) -> np.ndarray:
    sched = schedule if schedule is not None else PushSumSchedule(seq)
    return sched.R(k)


@dataclass(frozen=True)
class ConsensusConstants:
    """Consensus contraction constants ``tau``, ``Q1`` and ``delta``.

    ``mode`` is ``"certified"`` for the closed-form constants,
    ``"empirical"`` when measured from a concrete sequence, and
    ``"not-applicable"`` for a single agent.
    """

    tau: float
    Q1: float
    delta: float
    B: int
    B0: int
    n_agents: int
    mode: str = "certified"
    log_delta: float = float("nan")
    notes: tuple[str, ...] = field(default=())

    @property
    def applicable(self) -> bool:
        return self.mode != "not-applicable"

    @property
    def valid(self) -> bool:
        return self.applicable and self.delta < 1.0


def consensus_constants(n_agents: int, B0: int, B: int) -> ConsensusConstants:
    """Closed-form constants, evaluated in log space.

    ``tau = N^-(2 + N B0)`` underflows quickly, so ``Q1`` and ``delta`` are
    assembled from logarithms; ``delta`` may legitimately be astronomically
    large.
    """
    if n_agents < 1 or B0 < 1 or B < 1:
        raise ValueError("n_agents, B0 and B must all be >= 1")
    if n_agents == 1:
        return ConsensusConstants(
            tau=1.0, Q1=float("nan"), delta=0.0, B=B, B0=B0, n_agents=1,
            mode="not-applicable", log_delta=float("-inf"),
            notes=("single agent: tau = 1 makes Q1 divide by zero; consensus is exact",),
        )
    nb = n_agents * B0
    log_tau = -(2 + nb) * math.log(n_agents)
    tau = math.exp(log_tau)
    tau_nb = math.exp(nb * log_tau)  # may underflow to 0.0
    a = -nb * log_tau  # log(tau^-NB0)
    log_q1 = math.log(2 * n_agents) + a + math.log1p(math.exp(-a)) - math.log1p(-tau_nb)
    log_delta = log_q1 + (B - 1) / nb * math.log1p(-tau_nb)
    q1 = math.exp(log_q1) if log_q1 < 709 else float("inf")
    delta = math.exp(log_delta) if log_delta < 709 else float("inf")
    return ConsensusConstants(
        tau=tau, Q1=q1, delta=delta, B=B, B0=B0, n_agents=n_agents,
        mode="certified", log_delta=log_delta,
    )


def _restricted_norm(m: np.ndarray) -> float:
    """Spectral norm of ``(I - J) m`` restricted to the subspace orthogonal to 1."""
    n = m.shape[0]
    if n == 1:
        return 0.0
    # orthonormal basis of 1-perp
    q, _ = np.linalg.qr(np.eye(n) - average_projector(n))
    basis = q[:, : n - 1]
    return float(np.linalg.norm(consensus_projector(n) @ m @ basis, 2))


def contraction_factor_exact(seq: GraphSequence, k: int, B: int, schedule: PushSumSchedule | None = None) -> float:
    """Worst-case ``||(I-J) R_B(k) y|| / ||(I-J) y||`` over all ``y``."""
    sched = schedule if schedule is not None else PushSumSchedule(seq)
    return _restricted_norm(sched.R_window(k, B))


def contraction_factor_empirical(
    seq: GraphSequence,
    k: int,
    B: int,
    trials: int = 1000,
    seed: int = 0,
    schedule: PushSumSchedule | None = None,
) -> float:
    """Monte-Carlo estimate of the consensus contraction of ``R_B(k)``.

    Draws ``trials`` random unit vectors ``y`` and returns the largest ratio
    ``||(I-J) R_B(k) y|| / ||(I-J) y||``; vectors with no consensus violation
    are skipped.
    """
    if k < B - 1:
        raise ValueError(f"need k >= B - 1 (k={k}, B={B})")
    n = seq.n_agents
    if n == 1:
        return 0.0
    sched = schedule if schedule is not None else PushSumSchedule(seq)
    rb = sched.R_window(k, B)
    jt = consensus_projector(n)
    rng = np.random.default_rng(seed)
    y = rng.standard_normal((trials, n))
    y /= np.linalg.norm(y, axis=1, keepdims=True)
    den = np.linalg.norm(y @ jt.T, axis=1)
    num = np.linalg.norm(y @ (jt @ rb).T, axis=1)
    ok = den > 1e-14
    if not ok.any():
        return 0.0
    return float(np.max(num[ok] / den[ok]))


def empirical_consensus_constants(
    seq: GraphSequence,
    B: int,
    horizon: int,
    B0: int | None = None,
    schedule: PushSumSchedule | None = None,
) -> ConsensusConstants:
    """Measured replacements for ``delta`` and ``Q1`` over ``k < horizon``.

    ``delta`` is the largest exact restricted contraction of ``R_B(k)`` for
    ``B - 1 <= k < horizon``. ``Q1`` bounds ``||(I-J) R_t(k)||`` for
    ``0 <= t < B``, which is how the gain bounds use it; it is at least 1
    because ``R_0 = I``.
    """
    n = seq.n_agents
    B0 = seq.claimed_B0 if B0 is None else B0
    if n == 1:
        return ConsensusConstants(
            tau=1.0, Q1=1.0, delta=0.0, B=B, B0=B0, n_agents=1, mode="not-applicable",
            log_delta=float("-inf"),
        )
    sched = schedule if schedule is not None else PushSumSchedule(seq)
    jt = consensus_projector(n)
    delta = 0.0
    q1 = 1.0
    for k in range(0, horizon):
        prod = np.eye(n)
        for t in range(1, B + 1):
            if k - t + 1 < 0:
                break
            prod = prod @ sched.A(k - t + 1) if t > 1 else sched.A(k).copy()
            rt = (prod * sched.s(k + 1 - t)[None, :]) / sched.s(k + 1)[:, None]
            if t < B:
                q1 = max(q1, float(np.linalg.norm(jt @ rt, 2)))
            else:
                delta = max(delta, _restricted_norm(rt))
    tau = float(n) ** (-(2 + n * B0))
    return ConsensusConstants(
        tau=tau, Q1=q1, delta=delta, B=B, B0=B0, n_agents=n, mode="empirical",
        log_delta=math.log(delta) if delta > 0 else float("-inf"),
        notes=(f"measured over k < {horizon}",),
    )


def matrix_to_csv(m: np.ndarray) -> str:
    """Dense row-major CSV with 17 significant digits."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for row in np.atleast_2d(np.asarray(m)):
        w.writerow([f"{v:.17g}" for v in row])
    return buf.getvalue()
