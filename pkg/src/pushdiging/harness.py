"""Experiment configuration, orchestration and persistence.

Configurations are INI documents (see ``configs/fig1.cfg``). Every run writes
plain UTF-8 text: one trace CSV per algorithm, a comparison CSV of the
normalized error aligned on ``k``, optional certificate/audit JSON and a
JSON summary.
"""

from __future__ import annotations

import configparser
import csv
import io
import json
import math
import os
import re
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .certify import (
    InadmissibleLambdaError,
    audit_gain_chain,
    certify,
    evaluate_gains,
    lambda_constraints,
    norm_bounds,
    report_to_text,
    trace_omegas,
)
from .engine import (
    DivergenceError,
    StepSizes,
    TraceRecord,
    run_dgd_baseline,
    run_push_diging,
    run_push_sum_baseline,
)
from .graphs import (
    GraphSequence,
    b0_connectivity_report,
    load_sequence,
    make_periodic_partition,
    make_random_sequence,
    make_ring,
)
from .mixing import PushSumSchedule, ScalingFloorError, consensus_constants, empirical_consensus_constants
from .objectives import ObjectiveSuite, make_sensor_suite

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "OUTPUT_ROOT_ENV",
    "ALGORITHMS",
    "bundled_config",
    "load_config",
    "load_config_file",
    "output_root",
    "fit_rate",
    "run_experiment",
    "run_audit",
    "build_certificate",
    "sweep_step_sizes",
    "check_graph",
    "audit_lambda",
]

OUTPUT_ROOT_ENV = "PUSHDIGING_OUTPUT_ROOT"
ALGORITHMS = ("push-diging", "dgd", "push-sum")
GENERATORS = ("ring", "periodic-partition", "random", "file")

_SCHEMA: dict[str, dict[str, bool]] = {
    # key -> required
    "experiment": {"name": True, "horizon": True, "stop_residual": False, "algorithms": True, "fit_window": False},
    "graph": {
        "generator": True, "n_agents": True, "B0": False, "seed": False, "edge_probability": False,
        "retry_budget": False, "n_windows": False, "path": False,
    },
    "objective": {"suite": True, "a": True, "b": True, "c": True, "dimension": False},
    "step_sizes": {"alphas": True, "scale": False},
    "baselines": {"alpha0": False},
    "init": {"values": False, "low": False, "high": False, "seed": False},
    "certificate": {"mode": False, "B": False, "beta": False, "eta": False},
    "output": {"directory": False, "formats": False},
}
_REQUIRED_SECTIONS = ("experiment", "graph", "objective")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    horizon: int
    algorithms: tuple[str, ...]
    graph: dict
    objective: dict
    step_sizes: tuple[float, ...] = ()
    step_scale: float = 1.0
    alpha0: float | None = None
    init: dict = field(default_factory=dict)
    certificate: dict | None = None
    output_dir: str = ""
    formats: tuple[str, ...] = ("csv", "json")
    stop_residual: float = 0.0
    fit_window: float = 0.6
    source: str | None = None

    @property
    def n_agents(self) -> int:
        return int(self.graph["n_agents"])

    def build_sequence(self) -> GraphSequence:
        g = self.graph
        n = self.n_agents
        gen = g["generator"]
        if gen == "ring":
            return make_ring(n)
        if gen == "periodic-partition":
            return make_periodic_partition(n, g.get("B0", 1), g.get("seed", 0))
        if gen == "random":
            return make_random_sequence(
                n, g["edge_probability"], g.get("retry_budget", 100), g.get("seed", 0),
                B0=g.get("B0", 2), n_windows=g.get("n_windows", 2),
            )
        base = Path(self.source).parent if self.source else Path.cwd()
        seq = load_sequence((base / g["path"]).read_text(encoding="utf-8"))
        if seq.n_agents != n:
            raise ConfigError(f"graph.path describes {seq.n_agents} agents but graph.n_agents = {n}")
        return seq

    def build_suite(self) -> ObjectiveSuite:
        o = self.objective
        return make_sensor_suite(o["a"], o["b"], o["c"], o.get("dimension", 1))

    def build_step_sizes(self) -> StepSizes:
        return StepSizes(np.asarray(self.step_sizes) * self.step_scale)

    def baseline_alpha0(self, suite: ObjectiveSuite) -> float:
        return 1.0 / suite.L_hat if self.alpha0 is None else self.alpha0

    def build_x0(self, dimension: int) -> np.ndarray:
        i = self.init
        n = self.n_agents
        if "values" in i:
            vals = np.asarray(i["values"], dtype=float)
            if vals.size == n:
                return np.repeat(vals[:, None], dimension, axis=1)
            if vals.size == n * dimension:
                return vals.reshape(n, dimension)
            raise ConfigError(f"init.values has {vals.size} entries; expected {n} or {n * dimension}")
        rng = np.random.default_rng(i.get("seed", 0))
        return rng.uniform(i.get("low", 0.0), i.get("high", 1.0), (n, dimension))


# -- parsing -------------------------------------------------------------------


def _key_lines(text: str) -> dict[tuple[str, str], int]:
    lines: dict[tuple[str, str], int] = {}
    section = None
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        m = re.match(r"^\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip()
            lines[(section, "")] = no
            continue
        m = re.match(r"^([^=:#;\s][^=:]*?)\s*[=:]", line)
        if m and section is not None:
            lines[(section, m.group(1).strip())] = no
    return lines


def _where(lines, section, key="") -> str:
    no = lines.get((section, key))
    return f"line {no}: " if no else ""


def _floats(text: str, field_name: str) -> list[float]:
    try:
        return [float(v) for v in text.replace("\n", ",").split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"{field_name}: expected a comma-separated list of numbers ({exc})") from None


def _number(text: str, field_name: str, kind=float):
    try:
        v = kind(text)
    except ValueError:
        raise ConfigError(f"{field_name}: expected {kind.__name__}, got {text!r}") from None
    return v


def load_config(document: str, source: str | None = None) -> ExperimentConfig:
    """Parse and validate an INI experiment document.

    Unknown sections or keys, missing required fields and inconsistent sizes
    are rejected with the offending field (and its line) named.
    """
    if not document.strip():
        raise ConfigError("empty configuration document")
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keep B0 / B case
    try:
        parser.read_string(document, source=source or "<config>")
    except configparser.Error as exc:
        raise ConfigError(f"parse error: {exc}") from None
    lines = _key_lines(document)

    for sec in parser.sections():
        if sec not in _SCHEMA:
            raise ConfigError(f"{_where(lines, sec)}unknown section [{sec}]")
        for key in parser[sec]:
            if key not in _SCHEMA[sec]:
                raise ConfigError(f"{_where(lines, sec, key)}unknown key {sec}.{key}")
        for key, required in _SCHEMA[sec].items():
            if required and key not in parser[sec]:
                raise ConfigError(f"{_where(lines, sec)}missing required key {sec}.{key}")
    for sec in _REQUIRED_SECTIONS:
        if not parser.has_section(sec):
            raise ConfigError(f"missing required section [{sec}]")

    ex = parser["experiment"]
    algorithms = tuple(a.strip() for a in ex["algorithms"].split(",") if a.strip())
    for a in algorithms:
        if a not in ALGORITHMS:
            raise ConfigError(f"{_where(lines, 'experiment', 'algorithms')}experiment.algorithms: unknown algorithm {a!r}")
    if not algorithms:
        raise ConfigError("experiment.algorithms is empty")
    horizon = _number(ex["horizon"], "experiment.horizon", int)
    if horizon < 1:
        raise ConfigError("experiment.horizon must be >= 1")
    fit_window = _number(ex.get("fit_window", "0.6"), "experiment.fit_window")
    if not 0 < fit_window <= 1:
        raise ConfigError("experiment.fit_window must lie in (0, 1]")

    gs = parser["graph"]
    graph: dict = {"generator": gs["generator"].strip(), "n_agents": _number(gs["n_agents"], "graph.n_agents", int)}
    if graph["generator"] not in GENERATORS:
        raise ConfigError(f"{_where(lines, 'graph', 'generator')}graph.generator: unknown generator {graph['generator']!r}")
    if graph["n_agents"] < 1:
        raise ConfigError("graph.n_agents must be >= 1")
    for key, kind in (("B0", int), ("seed", int), ("retry_budget", int), ("n_windows", int), ("edge_probability", float)):
        if key in gs:
            graph[key] = _number(gs[key], f"graph.{key}", kind)
    if "path" in gs:
        graph["path"] = gs["path"].strip()
    if graph["generator"] == "random" and "edge_probability" not in graph:
        raise ConfigError("graph.edge_probability is required for the random generator")
    if graph["generator"] == "file" and "path" not in graph:
        raise ConfigError("graph.path is required for the file generator")

    ob = parser["objective"]
    if ob["suite"].strip() != "sensor":
        raise ConfigError(f"{_where(lines, 'objective', 'suite')}objective.suite: only 'sensor' is configurable")
    objective = {
        "suite": "sensor",
        "a": _floats(ob["a"], "objective.a"),
        "b": _floats(ob["b"], "objective.b"),
        "c": _floats(ob["c"], "objective.c"),
        "dimension": _number(ob.get("dimension", "1"), "objective.dimension", int),
    }
    n = graph["n_agents"]
    for key in ("a", "b", "c"):
        if len(objective[key]) != n:
            raise ConfigError(f"objective.{key} has {len(objective[key])} entries for {n} agents")

    steps: tuple[float, ...] = ()
    scale = 1.0
    if parser.has_section("step_sizes"):
        steps = tuple(_floats(parser["step_sizes"]["alphas"], "step_sizes.alphas"))
        scale = _number(parser["step_sizes"].get("scale", "1"), "step_sizes.scale")
    if "push-diging" in algorithms:
        if not steps:
            raise ConfigError("push-diging requires a [step_sizes] section")
        if len(steps) != n:
            raise ConfigError(
                f"{_where(lines, 'step_sizes', 'alphas')}step-size vector length {len(steps)} "
                f"does not match n_agents = {n}"
            )
        if any(not a > 0 for a in steps) or not scale > 0:
            raise ConfigError("step-sizes and step_sizes.scale must be positive")

    alpha0 = None
    if parser.has_section("baselines") and "alpha0" in parser["baselines"]:
        raw = parser["baselines"]["alpha0"].strip()
        if raw != "auto":
            alpha0 = _number(raw, "baselines.alpha0")
            if not alpha0 > 0:
                raise ConfigError("baselines.alpha0 must be positive")

    init: dict = {}
    if parser.has_section("init"):
        it = parser["init"]
        if "values" in it:
            if any(k in it for k in ("low", "high", "seed")):
                raise ConfigError("init: give either values or low/high/seed, not both")
            init["values"] = _floats(it["values"], "init.values")
        for key in ("low", "high"):
            if key in it:
                init[key] = _number(it[key], f"init.{key}")
        if "seed" in it:
            init["seed"] = _number(it["seed"], "init.seed", int)

    cert = None
    if parser.has_section("certificate"):
        cs = parser["certificate"]
        cert = {"mode": cs.get("mode", "empirical").strip()}
        if cert["mode"] not in ("empirical", "certified"):
            raise ConfigError(f"certificate.mode must be 'empirical' or 'certified', got {cert['mode']!r}")
        cert["B"] = _number(cs.get("B", str(n * graph.get("B0", 1))), "certificate.B", int)
        if "beta" in cs:
            cert["beta"] = _number(cs["beta"], "certificate.beta")
        cert["eta"] = _number(cs.get("eta", "1"), "certificate.eta")

    out_dir = ex["name"].strip()
    formats = ("csv", "json")
    if parser.has_section("output"):
        out_dir = parser["output"].get("directory", out_dir).strip()
        if "formats" in parser["output"]:
            formats = tuple(f.strip() for f in parser["output"]["formats"].split(",") if f.strip())
            bad = set(formats) - {"csv", "json"}
            if bad:
                raise ConfigError(f"output.formats: unsupported {sorted(bad)}")

    return ExperimentConfig(
        name=ex["name"].strip(), horizon=horizon, algorithms=algorithms, graph=graph,
        objective=objective, step_sizes=steps, step_scale=scale, alpha0=alpha0, init=init,
        certificate=cert, output_dir=out_dir, formats=formats,
        stop_residual=_number(ex.get("stop_residual", "0"), "experiment.stop_residual"),
        fit_window=fit_window, source=source,
    )


def load_config_file(path) -> ExperimentConfig:
    path = Path(path)
    return load_config(path.read_text(encoding="utf-8"), source=str(path))


def bundled_config(name: str = "fig1") -> ExperimentConfig:
    """A configuration shipped with the package (``fig1`` or ``single_agent``)."""
    ref = resources.files("pushdiging") / "configs" / f"{name}.cfg"
    return load_config(ref.read_text(encoding="utf-8"), source=f"{name}.cfg")


def output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))


# -- analysis ------------------------------------------------------------------


def fit_rate(values: Sequence[float], window: float = 0.6, against: str = "k") -> dict:
    """Least-squares fit of ``log10(values)`` over the last ``window`` fraction.

    ``against="k"`` fits a geometric rate (slope per iteration); ``"log-k"``
    fits a power law in ``k``. Zero entries are dropped before the fit.
    """
    v = np.asarray(values, dtype=float)
    start = int(math.floor(len(v) * (1 - window)))
    k = np.arange(len(v))[start:]
    v = v[start:]
    keep = (v > 0) & np.isfinite(v)
    k, v = k[keep], v[keep]
    if against == "log-k":
        keep = k > 0
        k, v = np.log10(k[keep]), v[keep]
    elif against != "k":
        raise ValueError("against must be 'k' or 'log-k'")
    if len(v) < 3:
        return {"slope": float("nan"), "intercept": float("nan"), "r2": float("nan"), "points": int(len(v))}
    y = np.log10(v)
    slope, intercept = np.polyfit(k, y, 1)
    resid = y - (slope * k + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return {"slope": float(slope), "intercept": float(intercept), "r2": r2, "points": int(len(v))}


def _json(obj) -> str:
    return report_to_text(obj)


def build_certificate(config: ExperimentConfig, seq=None, suite=None, schedule=None):
    """Certificate for the push-diging part of ``config`` (``None`` without a [certificate] section)."""
    if config.certificate is None:
        return None
    seq = seq if seq is not None else config.build_sequence()
    suite = suite if suite is not None else config.build_suite()
    sched = schedule if schedule is not None else PushSumSchedule(seq)
    B = config.certificate["B"]
    norms = norm_bounds(seq, config.horizon, sched)
    if config.certificate["mode"] == "certified":
        consts = consensus_constants(seq.n_agents, seq.claimed_B0, B)
    else:
        consts = empirical_consensus_constants(seq, B, config.horizon, schedule=sched)
    return certify(
        suite.stats(), norms, consts, config.build_step_sizes(),
        beta=config.certificate.get("beta"), eta=config.certificate["eta"],
    )


def _run_one(alg: str, config, seq, suite, x0, sched, record_aux=False) -> TraceRecord:
    if alg == "push-diging":
        return run_push_diging(
            seq, suite, config.build_step_sizes(), x0, config.horizon,
            stop_residual=config.stop_residual, record_aux=record_aux, schedule=sched,
        )
    if alg == "dgd":
        return run_dgd_baseline(seq, suite, config.baseline_alpha0(suite), x0, config.horizon)
    return run_push_sum_baseline(seq, suite, config.baseline_alpha0(suite), x0, config.horizon, schedule=sched)


def _comparison_csv(traces: dict[str, TraceRecord], horizon: int) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    names = list(traces)
    w.writerow(["k", *names])
    for k in range(horizon + 1):
        row = [str(k)]
        for n in names:
            t = traces[n]
            row.append(f"{t.fig1_metric[k]:.17g}" if k < len(t.fig1_metric) else "")
        w.writerow(row)
    return buf.getvalue()


def run_experiment(config: ExperimentConfig, output_dir=None, write: bool = True) -> dict:
    """Run every configured algorithm and persist the artifact bundle.

    Returns the summary dict; ``summary["exit_status"]`` is 0 iff no run
    diverged. The returned dict also carries the in-memory traces under the
    non-persisted key ``"_traces"``.
    """
    seq = config.build_sequence()
    suite = config.build_suite()
    sched = PushSumSchedule(seq)
    x0 = config.build_x0(suite.dimension)
    traces: dict[str, TraceRecord] = {}
    runs: dict[str, dict] = {}
    for alg in config.algorithms:
        try:
            tr = _run_one(alg, config, seq, suite, x0, sched)
        except (DivergenceError, ScalingFloorError) as exc:
            runs[alg] = {"status": "diverged", "k": exc.k, "diagnostic": f"[{config.name}/{alg}] {exc}"}
            continue
        traces[alg] = tr
        runs[alg] = {
            "status": "completed",
            "iterations": tr.iterations,
            "final_residual_q": float(tr.residual_q[-1]),
            "final_fig1_metric": float(tr.fig1_metric[-1]),
            "residual_rate": fit_rate(tr.residual_q, config.fit_window),
            "fig1_fit_linear": fit_rate(tr.fig1_metric, config.fit_window),
            "fig1_fit_loglog": fit_rate(tr.fig1_metric, config.fit_window, against="log-k"),
        }
        if alg == "push-diging":
            runs[alg]["max_tracking_error"] = float(np.max(tr.tracking_error))
        if alg != "push-diging":
            runs[alg]["alpha0"] = config.baseline_alpha0(suite)

    summary: dict = {
        "name": config.name,
        "n_agents": seq.n_agents,
        "horizon": config.horizon,
        "fit_window": config.fit_window,
        "runs": runs,
    }
    cert = None
    if config.certificate is not None and "push-diging" in config.algorithms:
        cert = build_certificate(config, seq, suite, sched)
        summary["certificate"] = {"valid": cert.valid, "lambda": cert.lam, "mode": cert.mode, "reasons": cert.reasons}
    summary["exit_status"] = 0 if all(r["status"] == "completed" for r in runs.values()) else 1

    if write:
        out = Path(output_dir) if output_dir is not None else output_root() / config.output_dir
        out.mkdir(parents=True, exist_ok=True)
        if "csv" in config.formats:
            for alg, tr in traces.items():
                (out / f"trace_{alg}.csv").write_text(tr.to_csv(), encoding="utf-8")
            (out / "comparison.csv").write_text(_comparison_csv(traces, config.horizon), encoding="utf-8")
        if "json" in config.formats:
            if cert is not None:
                (out / "certificate.json").write_text(_json(cert), encoding="utf-8")
            (out / "summary.json").write_text(_json(summary), encoding="utf-8")
        summary["output_dir"] = str(out)
    summary["_traces"] = traces
    summary["_certificate"] = cert
    return summary


def audit_lambda(stats, D: StepSizes, consts, norms, beta: float, eta: float, margin: float = 0.01) -> float:
    """Smallest lambda meeting the descent floor, ``delta^(1/B) < lambda`` and ``lambda >= 0.5``,
    nudged by ``margin`` towards 1. Constraint ``||JR||_max < lambda`` is deliberately not imposed."""
    floor23 = math.sqrt(max(0.0, 1 - D.alpha_max * stats["mu_bar"] * beta / (2 * (beta + 1))))
    root = consts.delta ** (1.0 / consts.B) if consts.applicable else 0.0
    lo = max(floor23, root, 0.5)
    return lo + margin * (1 - lo)


def run_audit(config: ExperimentConfig, output_dir=None, write: bool = True, strict: bool = True) -> dict:
    """Run Push-DIGing with auxiliary recording and audit the gain cycle.

    The audit uses the certificate's lambda when the certificate is valid.
    Otherwise it evaluates at :func:`audit_lambda`; if that lambda is not
    admissible for the ``z -> h`` arrow, the arrow is reported as not
    established and, with ``strict``, the audit fails.
    """
    if config.certificate is None:
        config = replace(config, certificate={"mode": "empirical", "B": config.n_agents * config.graph.get("B0", 1), "eta": 1.0})
    seq = config.build_sequence()
    suite = config.build_suite()
    sched = PushSumSchedule(seq)
    D = config.build_step_sizes()
    st = suite.stats()
    beta = config.certificate.get("beta", 2 * st["L_hat"] / st["mu_hat"])
    eta = config.certificate["eta"]
    x0 = config.build_x0(suite.dimension)
    trace = run_push_diging(seq, suite, D, x0, config.horizon, record_aux=True, schedule=sched)
    cert = build_certificate(config, seq, suite, sched)
    B = config.certificate["B"]
    if config.certificate["mode"] == "certified":
        consts = consensus_constants(seq.n_agents, seq.claimed_B0, B)
    else:
        consts = empirical_consensus_constants(seq, B, config.horizon, schedule=sched)
    norms = norm_bounds(seq, config.horizon, sched)
    if cert.valid:
        lam, waive = cert.lam, ()
    else:
        lam = audit_lambda(st, D, consts, norms, beta, eta)
        waive = ("projection-norm",)
    violated = lambda_constraints(lam, D.alpha_max, st, consts, norms, beta, eta, enforce_half=True)
    report: dict = {"name": config.name, "lambda": lam, "lambda_constraints_violated": violated}
    try:
        gains = evaluate_gains(st, norms, D, consts, lam, beta, eta, waive=waive, **trace_omegas(trace, B))
    except InadmissibleLambdaError as exc:
        report.update({"status": "refused", "diagnostic": str(exc), "passed": False})
    else:
        chain = audit_gain_chain(trace, gains, norms, consts, st["L_hat"])
        report.update({
            "gains": {k: v for k, v in gains.__dict__.items() if k != "params"},
            "gain_params": gains.params,
            "chain": chain,
            "passed": chain["all_arrows_established"] if strict else chain["passed"],
        })
    report["exit_status"] = 0 if report["passed"] else 1
    if write:
        out = Path(output_dir) if output_dir is not None else output_root() / config.output_dir
        out.mkdir(parents=True, exist_ok=True)
        (out / "audit.json").write_text(_json(report), encoding="utf-8")
        report["output_dir"] = str(out)
    return report


def sweep_step_sizes(base: ExperimentConfig, scale_grid: Sequence[float], output_dir=None, write: bool = True) -> dict:
    """Run push-diging with ``D`` scaled by each grid value.

    A run is ``converged`` when its fitted residual slope is negative,
    ``diverging`` when the slope is nonnegative and ``diverged`` when the
    engine aborted. Failed runs are recorded and the sweep continues. Each
    scale writes to its own subdirectory.
    """
    if "push-diging" not in base.algorithms:
        raise ConfigError("step-size sweeps need push-diging in experiment.algorithms")
    root = Path(output_dir) if output_dir is not None else output_root() / base.output_dir / "sweep"
    rows = []
    for scale in scale_grid:
        if not scale > 0:
            raise ConfigError(f"sweep scales must be positive, got {scale}")
        cfg = replace(base, algorithms=("push-diging",), step_scale=base.step_scale * scale)
        sub = root / f"scale_{scale:g}"
        row: dict = {"scale": float(scale), "alpha_max": cfg.build_step_sizes().alpha_max}
        try:
            summ = run_experiment(cfg, sub, write=write)
        except Exception as exc:  # record and continue
            row.update({"status": "error", "diagnostic": str(exc)})
            rows.append(row)
            continue
        run = summ["runs"]["push-diging"]
        if run["status"] == "diverged":
            row.update({"status": "diverged", "k": run["k"]})
        else:
            slope = run["residual_rate"]["slope"]
            row.update({
                "status": "converged" if slope < 0 else "diverging",
                "rate_slope": run["residual_rate"]["slope"],
                "final_residual_q": run["final_residual_q"],
            })
        cert = summ.get("_certificate")
        if cert is not None:
            row["certificate_valid"] = cert.valid
            row["alpha_max_bound"] = cert.alpha_max_bound
        rows.append(row)
    conv = [r["scale"] for r in rows if r["status"] == "converged"]
    report = {"name": base.name, "rows": rows, "largest_converging_scale": max(conv) if conv else None}
    if write and rows:
        root.mkdir(parents=True, exist_ok=True)
        (root / "sweep.json").write_text(_json(report), encoding="utf-8")
    return report


def check_graph(config: ExperimentConfig) -> dict:
    seq = config.build_sequence()
    horizon = max(config.horizon, seq.claimed_B0)
    return b0_connectivity_report(seq, seq.claimed_B0, horizon)
