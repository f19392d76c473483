"""Command line entry point: ``pushdiging {run,sweep,certify,audit,check-graph}``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .certify import report_to_text
from .harness import (
    OUTPUT_ROOT_ENV,
    ConfigError,
    build_certificate,
    bundled_config,
    check_graph,
    load_config_file,
    output_root,
    run_audit,
    run_experiment,
    sweep_step_sizes,
)


_CONFIG_HELP = "config file, or the name of a bundled config (fig1, single_agent)"


def _load(path: Path):
    if not path.exists() and not path.suffix and path.name == str(path):
        try:
            return bundled_config(path.name)
        except FileNotFoundError:
            pass
    return load_config_file(path)


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="pushdiging",
        description=f"Push-DIGing simulation and rate certification. Outputs go under ${OUTPUT_ROOT_ENV} (default ./runs).",
    )
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("run", "run every configured algorithm and write traces"),
        ("certify", "evaluate the rate certificate"),
        ("audit", "run Push-DIGing and audit the gain cycle"),
        ("check-graph", "verify B0-strong connectivity of the configured graph"),
    ):
        s = sub.add_parser(name, help=help_)
        s.add_argument("config", type=Path, help=_CONFIG_HELP)
        s.add_argument("-o", "--output", type=Path, default=None, help="output directory override")
    s = sub.add_parser("sweep", help="scale the step-sizes over a grid")
    s.add_argument("config", type=Path, help=_CONFIG_HELP)
    s.add_argument("--scales", type=float, nargs="*", default=[0.25, 0.5, 1, 2, 4, 8])
    s.add_argument("-o", "--output", type=Path, default=None)
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = _load(args.config)
    except (ConfigError, OSError) as exc:
        print(f"error: {args.config}: {exc}", file=sys.stderr)
        return 2
    out = args.output

    if args.command == "run":
        summary = run_experiment(cfg, out)
        for alg, r in summary["runs"].items():
            if r["status"] == "completed":
                print(f"{alg:12s} final fig1 {r['final_fig1_metric']:.3e}  slope {r['residual_rate']['slope']:.4g}")
            else:
                print(f"{alg:12s} {r['diagnostic']}")
        print(f"wrote {summary['output_dir']}")
        return summary["exit_status"]

    if args.command == "sweep":
        rep = sweep_step_sizes(cfg, args.scales, out)
        for row in rep["rows"]:
            print(f"scale {row['scale']:<6g} alpha_max {row['alpha_max']:.4g}  {row['status']}")
        print(f"largest converging scale: {rep['largest_converging_scale']}")
        return 0

    if args.command == "certify":
        if cfg.certificate is None:
            print("error: config has no [certificate] section", file=sys.stderr)
            return 2
        cert = build_certificate(cfg)
        text = report_to_text(cert)
        dest = (out or output_root() / cfg.output_dir)
        dest.mkdir(parents=True, exist_ok=True)
        (dest / "certificate.json").write_text(text, encoding="utf-8")
        print(f"valid: {cert.valid}  lambda: {cert.lam:.6g}  mode: {cert.mode}")
        for r in cert.reasons:
            print(f"  - {r}")
        return 0 if cert.valid else 1

    if args.command == "audit":
        rep = run_audit(cfg, out)
        for a in rep.get("chain", {}).get("arrows", []) + rep.get("chain", {}).get("sub_inequalities", []):
            print(f"{a['name']:22s} {a['status']}")
        if "diagnostic" in rep:
            print(rep["diagnostic"])
        print(f"wrote {rep['output_dir']}")
        return rep["exit_status"]

    rep = check_graph(cfg)
    print(json.dumps(rep, sort_keys=True))
    return 0 if rep["connected"] else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
