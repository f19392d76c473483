"""Seeded configuration families and hypothesis strategies shared by the tests."""

from __future__ import annotations

from dataclasses import dataclass

import math

import numpy as np
from hypothesis import strategies as st

from pushdiging.engine import StepSizes, inexact_gd_run
from pushdiging.graphs import Digraph, GraphSequence, make_periodic_partition, make_random_sequence, make_ring
from pushdiging.objectives import (
    SENSOR_A,
    SENSOR_B,
    SENSOR_C,
    SENSOR_STEP_SIZES,
    ObjectiveSuite,
    make_sensor_suite,
)


@dataclass
class Setup:
    seq: GraphSequence
    suite: ObjectiveSuite
    D: StepSizes
    x0: np.ndarray
    label: str


def varied_setups(count: int = 20) -> list[Setup]:
    """Seeded configurations over N in {1, 2, 3, 5, 8} with mixed graph families."""
    out = []
    sizes = (1, 2, 3, 5, 8)
    for idx in range(count):
        n = sizes[idx % len(sizes)]
        rng = np.random.default_rng(1000 + idx)
        family = (idx // len(sizes) + idx) % 3
        if family == 0:
            seq = make_ring(n)
        elif family == 1:
            seq = make_periodic_partition(n, 2 + idx % 2, seed=idx)
        else:
            seq = make_random_sequence(n, 0.35, B0_retry_budget=500, seed=idx, B0=2)
        dim = 1 + idx % 2
        suite = make_sensor_suite(
            rng.uniform(0, 5, n), rng.uniform(0.6, 4.0, n), rng.uniform(-1, 1, (n, dim))
        )
        D = StepSizes(rng.uniform(0.005, 0.05, n))
        x0 = rng.uniform(-1, 1, (n, dim))
        out.append(Setup(seq, suite, D, x0, f"N={n} family={family} seed={idx}"))
    return out


def sensor_suite() -> ObjectiveSuite:
    return make_sensor_suite(SENSOR_A, SENSOR_B, SENSOR_C)


def five_agent_setups(count: int = 20) -> list[Setup]:
    """Five-sensor configurations: partition and random graphs, reference steps scaled and jittered."""
    suite = sensor_suite()
    out = []
    for idx in range(count):
        rng = np.random.default_rng(2000 + idx)
        if idx % 2 == 0:
            seq = make_periodic_partition(5, 2, seed=idx)
        else:
            seq = make_random_sequence(5, 0.3, B0_retry_budget=500, seed=idx, B0=2)
        D = StepSizes(np.asarray(SENSOR_STEP_SIZES) * rng.uniform(0.8, 1.2, 5))
        out.append(Setup(seq, suite, D, rng.uniform(0, 1, (5, 1)), f"five-agent seed={idx}"))
    return out


@st.composite
def digraphs(draw, max_n=7):
    n = draw(st.integers(1, max_n))
    pairs = [(j, i) for j in range(1, n + 1) for i in range(1, n + 1) if i != j]
    edges = draw(st.sets(st.sampled_from(pairs), max_size=len(pairs))) if pairs else set()
    return Digraph(n, frozenset(edges))


def build_cycle(gains, offsets, lam, K, rng, tight=False):
    """Sequences satisfying every cyclic weighted-norm inequality by construction."""
    m = len(gains)
    seqs = [np.zeros(K + 1) for _ in range(m)]
    run = np.zeros(m)  # running weighted maxima
    for k in range(K + 1):
        for i in range(m):
            src = (i - 1) % m
            cap = gains[src] * run[src] + offsets[src]
            u = 1.0 if tight else rng.uniform()
            seqs[i][k] = lam**k * u * cap
            run[i] = max(run[i], seqs[i][k] / lam**k)
    return seqs


def descent_setup(suite, seed, iters=150, noise=0.02):
    """Seeded inexact-descent run with hypothesis-compliant (theta, lambda, beta)."""
    st_ = suite.stats()
    beta = 2 * st_["L_hat"] / st_["mu_hat"]
    cap = min((beta + 1) / (st_["mu_bar"] * beta), 1 / (2 * st_["L_hat"]), 3 / st_["mu_bar"])
    rng = np.random.default_rng(seed)
    theta = rng.uniform(0.05, 0.99) * cap
    floor = math.sqrt(1 - theta * st_["mu_bar"] * beta / (2 * (beta + 1)))
    lam = floor + rng.uniform(0, 0.999) * (1 - floor)
    e = rng.uniform(-noise, noise, (iters, 1))
    pert = rng.uniform(-noise, noise, (iters, 5, 1))
    vs, r = inexact_gd_run(suite, theta, e, lambda k, v: v[None, :] + pert[k], rng.uniform(-2, 3, 1), iters)
    u = vs[:-1, None, :] + pert
    return vs, r, theta, lam, st_, u, e, beta
