"""Closed-form rate constants and numerical audits of the convergence proof.

Everything here is evaluation, never optimisation: each function computes a
bound from its inputs, and each audit compares both sides of one inequality
along recorded sequences. Reports are plain dicts so they serialize directly.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .engine import StepSizes, TraceRecord
from .graphs import GraphSequence
from .mixing import (
    ConsensusConstants,
    PushSumSchedule,
    average_projector,
    consensus_projector,
)

__all__ = [
    "SmallGainError",
    "InadmissibleLambdaError",
    "NormBounds",
    "GainSet",
    "RateCertificate",
    "lambda_norm",
    "lambda_norm_profile",
    "small_gain_bound",
    "small_gain_empirical_check",
    "norm_bounds",
    "lambda_constraints",
    "evaluate_gains",
    "certify",
    "corollary_rate",
    "rate_interval",
    "audit_inexact_descent",
    "audit_gain_chain",
    "trace_omegas",
    "report_to_text",
]


class SmallGainError(ValueError):
    """The gain product is not below one, so no bound follows."""


class InadmissibleLambdaError(ValueError):
    """``lambda`` violates at least one admissibility constraint."""

    def __init__(self, violations: dict[str, str]):
        self.violations = violations
        detail = "; ".join(f"({k}) {v}" for k, v in violations.items())
        super().__init__(f"inadmissible lambda: {detail}")


# -- weighted norms and the small gain bound ------------------------------------


def _norm(v) -> float:
    v = np.asarray(v, dtype=float).ravel()
    m = float(np.max(np.abs(v))) if v.size else 0.0
    # rescale so squaring cannot underflow or overflow
    return m * float(np.linalg.norm(v / m)) if 0 < m < np.inf else m


def _norms(values) -> np.ndarray:
    return np.array([_norm(v) for v in values])


def lambda_norm_profile(values, lam: float) -> np.ndarray:
    """``max_{k <= K} lam^-k ||u(k)||`` for every ``K`` at once."""
    if not 0.0 < lam:
        raise ValueError("lambda must be positive")
    n = _norms(values)
    k = np.arange(len(n))
    with np.errstate(over="ignore", divide="ignore"):
        scaled = np.where(n > 0, np.exp(np.log(np.where(n > 0, n, 1.0)) - k * math.log(lam)), 0.0)
    return np.maximum.accumulate(scaled) if len(scaled) else scaled


def lambda_norm(values, lam: float, K: int) -> float:
    """Weighted sup-norm ``max_{k=0..K} lam^-k ||u(k)||``."""
    if K < 0 or len(values) <= K:
        raise ValueError(f"need a sequence longer than K={K}, got {len(values)} values")
    return float(lambda_norm_profile(list(values)[: K + 1], lam)[K])


def small_gain_bound(gains: Sequence[float], offsets: Sequence[float]) -> float:
    """Bound on ``||u_1||^lambda`` for a closed cycle of gains.

    With arrows ``||u_{i+1}|| <= g_i ||u_i|| + w_i`` (indices mod m) this is
    ``(g_m...g_2 w_1 + g_m...g_3 w_2 + ... + g_m w_{m-1} + w_m) / (1 - g_1...g_m)``.
    """
    g = [float(v) for v in gains]
    w = [float(v) for v in offsets]
    if len(g) != len(w) or not g:
        raise ValueError("gains and offsets must be non-empty and of equal length")
    if any(v < 0 for v in g):
        raise ValueError("gains must be nonnegative")
    prod = math.prod(g)
    if not prod < 1:
        raise SmallGainError(f"gain product {prod:.6g} is not below 1")
    m = len(g)
    total = 0.0
    for i in range(m):
        # offset w_i travels through arrows i+1, ..., m-1 (0-based)
        total += math.prod(g[i + 1 :]) * w[i]
    return total / (1.0 - prod)


def small_gain_empirical_check(
    sequences: Sequence[Sequence],
    gains: Sequence[float],
    offsets: Sequence[float],
    lam: float,
    K: int,
) -> dict:
    """Check every cyclic arrow at every horizon ``0..K`` and the closed bound."""
    m = len(sequences)
    if not (len(gains) == len(offsets) == m):
        raise ValueError("need one gain and one offset per sequence")
    prof = [lambda_norm_profile(list(s)[: K + 1], lam) for s in sequences]
    arrows = []
    for i in range(m):
        j = (i + 1) % m
        slack = gains[i] * prof[i] + offsets[i] - prof[j]
        bad = np.flatnonzero(slack < -1e-12 * np.maximum(1.0, prof[j]))
        arrows.append({
            "arrow": f"u{i + 1} -> u{j + 1}",
            "gain": float(gains[i]),
            "offset": float(offsets[i]),
            "min_slack": float(slack.min()),
            "violations": bad.tolist(),
            "passed": bad.size == 0,
        })
    report = {"lambda": lam, "K": K, "arrows": arrows}
    try:
        bound = small_gain_bound(gains, offsets)
    except SmallGainError as exc:
        report["closed_bound"] = {"status": "not-applicable", "reason": str(exc)}
    else:
        measured = float(prof[0][-1])
        report["closed_bound"] = {
            "status": "pass" if measured <= bound * (1 + 1e-12) + 1e-300 else "fail",
            "bound": bound,
            "measured": measured,
            "slack": bound - measured,
        }
    report["passed"] = all(a["passed"] for a in arrows) and report["closed_bound"]["status"] != "fail"
    return report


# -- norm bounds -----------------------------------------------------------------


@dataclass(frozen=True)
class NormBounds:
    """Suprema over ``k`` of ``||S||``, ``||S^-1||``, ``||J R||`` and ``||A||`` (spectral)."""

    S_max: float
    S_inv_max: float
    JR_max: float
    A_max: float
    mode: str
    horizon: int


def norm_bounds(
    seq: GraphSequence,
    horizon: int | None = None,
    schedule: PushSumSchedule | None = None,
    settle_tol: float = 1e-14,
    max_horizon: int = 100_000,
) -> NormBounds:
    """Evaluate the sup-norms along the push-sum weights.

    For periodic schedules the weights are followed until they settle onto
    their periodic orbit (successive periods agree within ``settle_tol``),
    after which the supremum is attained on the prefix already seen; the
    result is tagged ``exact-over-period``. Otherwise the default horizon is
    ``10 * B0 * N`` and the tag is ``finite-horizon estimate``. A caller-supplied
    ``horizon`` is always covered.
    """
    sched = schedule if schedule is not None else PushSumSchedule(seq)
    n = seq.n_agents
    base = 10 * seq.claimed_B0 * n
    need = max(base, horizon or 0)
    s_max = 0.0
    s_inv = 0.0
    jr = 0.0
    k = 0
    mode = "finite-horizon estimate"
    settled_at = None
    while True:
        s = sched.s(k)
        s_max = max(s_max, float(s.max()))
        s_inv = max(s_inv, float(1.0 / s.min()))
        rt1 = sched.R(k).T @ np.ones(n)
        jr = max(jr, float(np.linalg.norm(rt1) / math.sqrt(n)))
        if seq.period is not None and settled_at is None and k >= seq.period:
            if np.max(np.abs(s - sched.s(k - seq.period))) <= settle_tol:
                settled_at = k
        k += 1
        if settled_at is not None and k > settled_at + seq.period and k > need:
            mode = "exact-over-period"
            break
        if settled_at is None and k > need and (seq.period is None or k >= max_horizon):
            break
    if seq.period is not None:
        a_max = max(float(np.linalg.norm(sched.A(t), 2)) for t in range(seq.period))
    else:
        a_max = max(float(np.linalg.norm(sched.A(t), 2)) for t in range(k))
    return NormBounds(S_max=s_max, S_inv_max=s_inv, JR_max=jr, A_max=a_max, mode=mode, horizon=k)


# -- gains -----------------------------------------------------------------------


@dataclass(frozen=True)
class GainSet:
    gamma_11: float
    gamma_12: float
    gamma_21: float
    gamma_22: float
    gamma_3: float
    gamma_4: float
    omega_1: float
    omega_21: float
    omega_22: float
    omega_3: float
    omega_4: float
    params: dict = field(default_factory=dict)

    @property
    def product(self) -> float:
        """``(g11 g21 + g12 g22) g3 g4``; the small gain condition needs it below 1."""
        return (self.gamma_11 * self.gamma_21 + self.gamma_12 * self.gamma_22) * self.gamma_3 * self.gamma_4


def _stat(stats, name):
    return stats[name] if isinstance(stats, dict) else getattr(stats, name)


def lambda_constraints(
    lam: float,
    alpha: float,
    stats,
    consts: ConsensusConstants,
    norms: NormBounds,
    beta: float,
    eta: float,
    enforce_half: bool = False,
) -> dict[str, str]:
    """Violated admissibility constraints, keyed by a short label.

    ``step-range``: the step-size cap; ``descent-floor``: the descent-rate floor;
    ``contraction-root``: ``delta^(1/B) < lambda``; ``projection-norm``:
    ``||JR||_max < lambda``; ``half``: ``lambda >= 0.5`` (optional).
    """
    L_hat, mu_bar = _stat(stats, "L_hat"), _stat(stats, "mu_bar")
    out: dict[str, str] = {}
    if beta < 2:
        out["beta"] = f"beta = {beta:g} < 2"
    if eta <= 0:
        out["eta"] = f"eta = {eta:g} <= 0"
    cap = min((beta + 1) / (mu_bar * beta), 1.0 / (L_hat * (1 + eta)), 3.0 / mu_bar)
    if not 0 < alpha < cap:
        out["step-range"] = f"alpha = {alpha:.6g} outside (0, {cap:.6g})"
    if not 0 < lam < 1:
        out["range"] = f"lambda = {lam:.6g} outside (0, 1)"
    floor23 = math.sqrt(max(0.0, 1 - alpha * mu_bar * beta / (2 * (beta + 1))))
    if lam < floor23 * (1 - 1e-12):  # equality is attained at beta = 2
        out["descent-floor"] = f"lambda = {lam:.6g} < {floor23:.6g}"
    if consts.applicable:
        root = consts.delta ** (1.0 / consts.B) if consts.delta < float("inf") else float("inf")
        if not root < lam:
            out["contraction-root"] = f"delta^(1/B) = {root:.6g} is not below lambda = {lam:.6g}"
    if not norms.JR_max < lam:
        out["projection-norm"] = f"||JR||_max = {norms.JR_max:.6g} is not below lambda = {lam:.6g}"
    if enforce_half and lam < 0.5:
        out["half"] = f"lambda = {lam:.6g} < 0.5"
    return out


def trace_omegas(trace: TraceRecord, B: int) -> dict:
    """Trajectory inputs of the offsets: ``||xbar(0) - x*||`` and the first ``B``
    values of ``||x~||`` and ``||h~||``."""
    n = trace.n_agents
    jt = consensus_projector(n)
    out = {
        "xbar0_error": float(np.linalg.norm(trace.x[0].mean(axis=0) - trace.x_star)),
        "x_tilde_prefix": [float(np.linalg.norm(jt @ trace.x[t])) for t in range(min(B, len(trace.k)))],
    }
    if trace.h is not None:
        out["h_tilde_prefix"] = [float(np.linalg.norm(jt @ trace.h[t])) for t in range(min(B, len(trace.k)))]
    return out


def evaluate_gains(
    stats,
    norms: NormBounds,
    D: StepSizes,
    consts: ConsensusConstants,
    lam: float,
    beta: float,
    eta: float,
    xbar0_error: float | None = None,
    x_tilde_prefix: Sequence[float] | None = None,
    h_tilde_prefix: Sequence[float] | None = None,
    waive: Iterable[str] = (),
    y_branch: str = "alpha_max",
) -> GainSet:
    """Gains and offsets of the five arrows ``q -> z -> h -> {x~, y} -> q``.

    Raises :class:`InadmissibleLambdaError` naming every violated constraint
    that is not listed in ``waive``. When ``projection-norm`` is waived and violated,
    ``gamma_3`` and ``omega_3`` are NaN because the arrow ``z -> h`` is not
    established.
    """
    bad = lambda_constraints(lam, D.alpha_max, stats, consts, norms, beta, eta)
    waive = set(waive)
    blocking = {k: v for k, v in bad.items() if k not in waive}
    if blocking:
        raise InadmissibleLambdaError(blocking)

    N = _stat(stats, "n_agents")
    L_hat, mu_hat, mu_bar = _stat(stats, "L_hat"), _stat(stats, "mu_hat"), _stat(stats, "mu_bar")
    B, delta, Q1 = consts.B, consts.delta, consts.Q1
    a_max = D.alpha_max
    lb = lam**B
    rN = math.sqrt(N)
    root = math.sqrt(L_hat * (1 + eta) / (eta * mu_bar) + (mu_hat / mu_bar) * beta)

    g11 = (1 + rN) * (1 + (rN / lam) * root)
    if y_branch == "alpha_max":
        g12 = math.sqrt(3 - a_max * mu_bar) / (lam * mu_bar) * (1 - 1 / D.k_D)
    elif y_branch == "alpha_bar":
        ab = D.alpha_bar
        g12 = (
            math.sqrt(3 - ab * mu_bar) / (ab * rN * lam * mu_bar)
            * math.sqrt(float(np.sum((D.alphas - ab) ** 2)))
        )
    else:
        raise ValueError(f"unknown y_branch {y_branch!r}")
    g21 = a_max / (lb - delta) * (delta + Q1 * (lam - lb) / (1 - lam))
    g22 = norms.S_max
    fa = norms.S_inv_max * norms.A_max
    ratio = 1 - norms.JR_max / lam
    arrow3 = ratio > 0
    g3 = fa * (1 + Q1 * lam * (1 - lb) / ((lb - delta) * (1 - lam))) / ratio if arrow3 else float("nan")
    g4 = L_hat * (1 + 1 / lam)

    def prefix_sum(vals):
        if vals is None:
            return float("nan")
        return lb / (lb - delta) * sum(lam ** (-(t - 1)) * vals[t - 1] for t in range(1, min(B, len(vals)) + 1))

    w1 = 2 * rN * xbar0_error if xbar0_error is not None else float("nan")
    w21 = prefix_sum(x_tilde_prefix)
    w3 = prefix_sum(h_tilde_prefix) / ratio if arrow3 else float("nan")
    return GainSet(
        gamma_11=g11, gamma_12=g12, gamma_21=g21, gamma_22=g22, gamma_3=g3, gamma_4=g4,
        omega_1=w1, omega_21=w21, omega_22=0.0, omega_3=w3, omega_4=0.0,
        params={
            "lambda": lam, "beta": beta, "eta": eta, "B": B, "delta": delta, "Q1": Q1,
            "y_branch": y_branch, "waived": sorted(waive & set(bad)),
        },
    )


# -- certificate -----------------------------------------------------------------


@dataclass
class RateCertificate:
    F: float
    G: float
    C: float
    H: float
    K: float
    delta: float
    Q1: float
    tau: float
    B: int
    alpha_max: float
    k_D: float
    alpha_max_bound: float
    alpha_max_bound_lambda: float
    kD_bound: float
    lam: float
    lambda_terms: dict
    gain_product: float
    mode: str
    norms: dict
    valid: bool
    reasons: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def certify(
    stats,
    norms: NormBounds,
    consts: ConsensusConstants,
    D: StepSizes,
    beta: float | None = None,
    eta: float = 1.0,
) -> RateCertificate:
    """Instantiate the geometric-rate certificate for one configuration.

    Returns a certificate even when the hypotheses fail; ``valid``
    is then false and ``reasons`` lists every failed condition. Nothing is
    clamped silently.
    """
    N = _stat(stats, "n_agents")
    L_hat, mu_hat, mu_bar = _stat(stats, "L_hat"), _stat(stats, "mu_hat"), _stat(stats, "mu_bar")
    kappa = L_hat / mu_bar
    beta = 2 * L_hat / mu_hat if beta is None else beta
    B, delta, Q1 = consts.B, consts.delta, consts.Q1
    a_max, kD = D.alpha_max, D.k_D
    S, Sinv, JR, Amax = norms.S_max, norms.S_inv_max, norms.JR_max, norms.A_max
    reasons: list[str] = []
    notes: list[str] = []
    mode = "certified" if consts.mode == "certified" else "empirical-delta"

    if not consts.applicable:
        reasons.append("single agent: consensus constants not applicable")
    F = Sinv * Amax
    G = 2 * L_hat * (1 + math.sqrt(N)) * (1 + 4 * math.sqrt(N) * math.sqrt(kappa)) * (delta + Q1 * (B - 1))
    C = 1 - JR
    H = -4 * math.sqrt(3) * kappa * (1 - 1 / kD) * S
    K = B * Q1 * Sinv * Amax
    if not delta < 1:
        reasons.append(f"delta = {delta:.6g} >= 1")
    if not C > 0:
        reasons.append(
            f"C = 1 - ||JR||_max = {C:.6g} <= 0 (||(1/N)11^T R|| >= 1 for every row-stochastic R)"
        )
    chf = C + H * F

    # step-size cap using 1/2^B - delta in the denominators
    d_half = 0.5**B - delta
    denom = F * (B * Q1 + d_half)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        # G = 0 (B = 1, delta = 0) leaves the consensus cap unbounded
        cap_half = float(
            np.float64(1 - delta) / G * ((1 - delta) * C - 4 * math.sqrt(3) * kappa * (1 - 1 / kD) * S * denom) / denom
        )
    alpha_bound = min(cap_half, 1 / (2 * L_hat))
    if not delta < 1:
        notes.append("step-size cap is not meaningful for delta >= 1 (sign of 1 - delta flips it)")
    elif not cap_half > 0:
        reasons.append(f"k_D bound violated: step-size interval is empty (upper end {cap_half:.6g} <= 0)")
    elif not a_max < alpha_bound:
        reasons.append(f"alpha_max = {a_max:.6g} exceeds the admissible bound {alpha_bound:.6g}")

    # rate: max of the three lower bounds
    disc = (G * F * a_max - H * K) ** 2 + 4 * chf * G * K * a_max
    if chf > 0 and disc >= 0:
        inner = delta + ((G * F * a_max - H * K) + math.sqrt(disc)) / (2 * chf)
        t1 = inner ** (1.0 / B) if inner >= 0 else float("nan")
    else:
        t1 = float("nan")
        reasons.append(f"C + HF = {chf:.6g} <= 0: the consensus term of the rate is undefined")
    t2 = math.sqrt(max(0.0, 1 - a_max * mu_bar / 3))
    terms = {"consensus": t1, "descent": t2, "JR_max": JR}
    lam = max(v for v in terms.values() if not math.isnan(v)) if not math.isnan(t1) else float("nan")
    if not math.isnan(lam) and lam < 0.5:
        notes.append(f"lambda raised from {lam:.6g} to 0.5 (the bound assumes lambda >= 0.5)")
        lam = 0.5
    if math.isnan(lam) or not lam < 1:
        reasons.append(f"lambda = {lam:.6g} is not below 1")

    # lambda-dependent forms
    if not math.isnan(lam):
        u = lam**B - delta
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            cap_lambda = float(np.float64(u) / G * (C * u / np.float64(F * u + K) + H))
        kd_den = 4 * math.sqrt(3) * kappa * S * Sinv * Amax * (B * Q1 + u) - u * C
        kd_bound = 1 + u * C / kd_den if kd_den != 0 else float("inf")
        if not kD < kd_bound:
            reasons.append(f"k_D = {kD:.6g} violates the condition-number bound {kd_bound:.6g}")
        if np.sign(cap_lambda) != np.sign(cap_half):
            notes.append(
                f"step-size caps disagree in sign: lambda form {cap_lambda:.6g}, 1/2^B form {cap_half:.6g}"
            )
    else:
        cap_lambda = kd_bound = float("nan")

    gain_product = float("nan")
    if not math.isnan(lam) and 0 < lam < 1:
        try:
            gains = evaluate_gains(stats, norms, D, consts, lam, beta, eta)
            gain_product = gains.product
            if not gain_product < 1:
                reasons.append(f"gain product {gain_product:.6g} >= 1 at lambda = {lam:.6g}")
        except InadmissibleLambdaError as exc:
            reasons.append(str(exc))
    return RateCertificate(
        F=F, G=G, C=C, H=H, K=K, delta=delta, Q1=Q1, tau=consts.tau, B=B,
        alpha_max=a_max, k_D=kD,
        alpha_max_bound=alpha_bound, alpha_max_bound_lambda=cap_lambda, kD_bound=kd_bound,
        lam=lam, lambda_terms=terms, gain_product=gain_product, mode=mode,
        norms=asdict(norms), valid=not reasons, reasons=reasons, notes=notes,
    )


# -- explicit rate ---------------------------------------------------------------


def rate_interval(lam: float, F, G, C, H, K, delta, B, mu_bar) -> tuple[float, float]:
    """End points ``[3(1 - lam^2B)/mu_bar, ((C+HF)u^2 + HKu) / (G(F+K))]`` with ``u = lam^B - delta``."""
    u = lam**B - delta
    return 3 * (1 - lam ** (2 * B)) / mu_bar, ((C + H * F) * u * u + H * K * u) / (G * (F + K))


def corollary_rate(F, G, C, H, K, delta, B, mu_bar, alpha_max) -> dict:
    """Explicit rate for a step-size inside the explicit-rate interval.

    Below the crossover ``M`` the rate is ``(1 - alpha mu_bar / 3)^(1/(2B))``,
    above it the ``B``-th root of the quadratic's positive solution. Both
    meet at ``lambda_mid`` when ``alpha = M``.
    """
    if not delta < 1:
        raise ValueError(f"delta = {delta} must be below 1")
    chf = C + H * F
    if not chf > 0:
        raise ValueError(f"C + HF = {chf} must be positive")
    gfk = G * (F + K)
    upper = (chf * (1 - delta) ** 2 + H * K * (1 - delta)) / gfk
    if not upper > 0:
        raise ValueError(f"empty step-size interval (upper end {upper:.6g})")
    if not 0 < alpha_max <= upper:
        raise ValueError(f"alpha_max = {alpha_max:.6g} outside (0, {upper:.6g}]")

    mc = mu_bar * chf
    a2 = mc + 3 * gfk
    b2 = 2 * delta * mc - mu_bar * H * K
    disc = (mu_bar * H * K - 2 * delta * mc) ** 2 + 4 * a2 * (delta * mu_bar * H * K + 3 * gfk - mc * delta**2)
    w_mid = (b2 + math.sqrt(disc)) / (2 * a2)
    lam_mid = w_mid ** (1.0 / B)
    M = 3 * (1 - lam_mid ** (2 * B)) / mu_bar

    lam1 = (1 - alpha_max * mu_bar / 3) ** (1.0 / (2 * B))
    lin = 2 * delta * chf - H * K
    disc2 = lin**2 + 4 * chf * (H * K * delta + gfk * alpha_max - chf * delta**2)
    lam2 = ((lin + math.sqrt(disc2)) / (2 * chf)) ** (1.0 / B) if disc2 >= 0 else float("nan")
    branch = 1 if alpha_max <= M else 2
    lam = lam1 if branch == 1 else lam2
    lo, hi = rate_interval(lam, F, G, C, H, K, delta, B, mu_bar)
    tol = 1e-9 * max(1.0, abs(alpha_max))
    return {
        "M": M,
        "lambda_mid": lam_mid,
        "lambda": lam,
        "branch": branch,
        "candidates": (lam1, lam2),
        "alpha_upper": upper,
        "interval": (lo, hi),
        "interval_ok": lo <= hi + tol and lo - tol <= alpha_max <= hi + tol,
    }


# -- audits ----------------------------------------------------------------------


def _compare(name: str, lhs: np.ndarray, rhs: np.ndarray, rtol: float = 1e-10) -> dict:
    slack = rhs - lhs
    bad = np.flatnonzero(slack < -rtol * np.maximum(1.0, np.abs(rhs)))
    worst = int(np.argmin(slack))
    return {
        "name": name,
        "status": "pass" if bad.size == 0 else "fail",
        "violations": int(bad.size),
        "first_violation_K": int(bad[0]) if bad.size else None,
        "min_slack": float(slack[worst]),
        "lhs_at_min": float(lhs[worst]),
        "rhs_at_min": float(rhs[worst]),
        "K_checked": int(len(lhs) - 1),
    }


def audit_inexact_descent(
    v: np.ndarray,
    r: np.ndarray,
    theta: float,
    lam: float,
    stats,
    evaluation_points,
    noise,
    beta: float = 2.0,
    eta: float = 1.0,
    K: int | None = None,
) -> dict:
    """Audit the inexact gradient-descent bound at every horizon up to ``K``.

    ``||r||^{lam,K} <= 2 r_0 + sqrt(3 - theta mu_bar)/(lam theta mu_bar) ||e||^{lam,K}
    + sqrt(L_hat(1+eta)/(eta mu_bar) + beta mu_hat/mu_bar) / (lam sqrt N) sum_i ||v - u_i||^{lam,K}``.
    """
    N = _stat(stats, "n_agents")
    L_hat, mu_hat, mu_bar = _stat(stats, "L_hat"), _stat(stats, "mu_hat"), _stat(stats, "mu_bar")
    cap = min((beta + 1) / (mu_bar * beta), 1.0 / (L_hat * (1 + eta)), 3.0 / mu_bar)
    problems = {}
    if beta < 2:
        problems["beta"] = f"beta = {beta} < 2"
    if eta <= 0:
        problems["eta"] = f"eta = {eta} <= 0"
    if not 0 < theta < cap:
        problems["theta"] = f"theta = {theta:.6g} outside (0, {cap:.6g})"
    floor = math.sqrt(1 - theta * mu_bar * beta / (2 * (beta + 1))) if 0 < theta < cap else 1.0
    if not floor <= lam < 1:
        problems["lambda"] = f"lambda = {lam:.6g} outside [{floor:.6g}, 1)"
    if problems:
        raise InadmissibleLambdaError(problems)

    u = np.asarray(evaluation_points, dtype=float)
    e = np.asarray(noise, dtype=float)
    iters = len(u)
    K = iters - 1 if K is None else K
    u = u.reshape(iters, N, -1)
    v = np.asarray(v, dtype=float).reshape(len(v), -1)
    lhs = lambda_norm_profile(r[: K + 1], lam)
    e_prof = lambda_norm_profile(e[: K + 1].reshape(K + 1, -1), lam)
    spread = sum(lambda_norm_profile(v[: K + 1] - u[: K + 1, i, :], lam) for i in range(N))
    c_noise = math.sqrt(3 - theta * mu_bar) / (lam * theta * mu_bar)
    c_spread = math.sqrt(L_hat * (1 + eta) / (eta * mu_bar) + (mu_hat / mu_bar) * beta) / (lam * math.sqrt(N))
    rhs = 2 * r[0] + c_noise * e_prof + c_spread * spread
    rep = _compare("inexact-gd", lhs, rhs)
    rep.update({"theta": theta, "lambda": lam, "beta": beta, "eta": eta, "passed": rep["status"] == "pass"})
    return rep


def audit_gain_chain(
    trace: TraceRecord,
    gains: GainSet,
    norms: NormBounds,
    consts: ConsensusConstants,
    L_hat: float,
    K: int | None = None,
) -> dict:
    """Evaluate both sides of every arrow of the gain cycle at each horizon.

    Arrows: ``{x~, y} -> q``, ``h -> x~``, ``h -> y``, ``z -> h`` (with its
    three sub-inequalities) and ``q -> z``. The ``z -> h`` arrow is reported
    ``not-applicable`` when its gain is undefined.
    """
    if trace.h is None or trace.z is None or trace.y is None:
        raise ValueError("trace must be recorded with auxiliary quantities")
    for arr in (trace.x, trace.y, trace.h, trace.z):
        if not np.all(np.isfinite(arr)):
            raise ValueError("trace contains non-finite values; refusing to audit a diverged run")
    lam = gains.params["lambda"]
    B, delta, Q1 = consts.B, consts.delta, consts.Q1
    n = trace.n_agents
    K = len(trace.k) - 1 if K is None else K
    jt, jj = consensus_projector(n), average_projector(n)
    xs = trace.x[: K + 1]
    q = xs - trace.x_star[None, None, :]
    xt = np.einsum("ij,kjd->kid", jt, xs)
    h = trace.h[: K + 1]
    ht = np.einsum("ij,kjd->kid", jt, h)
    hj = np.einsum("ij,kjd->kid", jj, h)
    P = lambda seq: lambda_norm_profile(seq, lam)  # noqa: E731
    nq, nxt, ny, nh, nht, nhj, nz = P(q), P(xt), P(trace.y[: K + 1]), P(h), P(ht), P(hj), P(trace.z[: K + 1])

    lb = lam**B
    arrows = [
        _compare("1: {x~,y} -> q", nq, gains.gamma_11 * nxt + gains.gamma_12 * ny + gains.omega_1),
        _compare("2a: h -> x~", nxt, gains.gamma_21 * nh + gains.omega_21),
        _compare("2b: h -> y", ny, gains.gamma_22 * nh + gains.omega_22),
    ]
    if math.isnan(gains.gamma_3):
        arrows.append({
            "name": "3: z -> h",
            "status": "not-applicable",
            "reason": f"requires ||JR||_max = {norms.JR_max:.6g} < lambda = {lam:.6g}",
        })
    else:
        arrows.append(_compare("3: z -> h", nh, gains.gamma_3 * nz + gains.omega_3))
    arrows.append(_compare("4: q -> z", nz, gains.gamma_4 * nq + gains.omega_4))

    fa = norms.S_inv_max * norms.A_max
    h_prefix = [float(np.linalg.norm(ht[t])) for t in range(min(B, K + 1))]
    w_ht = lb / (lb - delta) * sum(lam ** (-(t - 1)) * h_prefix[t - 1] for t in range(1, len(h_prefix) + 1))
    sub = [
        _compare("3(i): h <= h~ + Jh", nh, nht + nhj),
        _compare(
            "3(ii): z -> h~",
            nht,
            Q1 * fa * lam * (1 - lb) / ((lb - delta) * (1 - lam)) * nz + w_ht,
        ),
        _compare("3(iii): h -> Jh", nhj, norms.JR_max / lam * nh + fa * nz),
    ]
    applicable = [a for a in arrows + sub if a["status"] != "not-applicable"]
    return {
        "lambda": lam,
        "K": K,
        "mode": consts.mode,
        "arrows": arrows,
        "sub_inequalities": sub,
        "violations": sum(a["violations"] for a in applicable),
        "all_arrows_established": all(a["status"] == "pass" for a in arrows + sub),
        "passed": all(a["status"] == "pass" for a in applicable),
    }


# -- reporting -------------------------------------------------------------------


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v) or math.isinf(v):
            return str(v)
        return float(f"{v:.12g}")
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def report_to_text(report) -> str:
    """Diff-stable JSON: sorted keys, 12 significant digits, NaN/inf as strings."""
    if hasattr(report, "to_dict"):
        report = report.to_dict()
    return json.dumps(_clean(report), sort_keys=True, indent=2) + "\n"
