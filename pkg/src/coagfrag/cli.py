"""Command line entry point: ``coagfrag {audit,homo,dsmc,verify}``.

Exit status is 0 when every check passes, 1 when a check fails and 2 on
usage, configuration or I/O errors.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .config import (
    ConfigError,
    audit_from,
    dsmc_from,
    homogeneous_from,
    load,
    suite_from,
)
from .diagnostics import HOMO_COLUMNS, RunManifest, Table, write_json
from .dsmc import RateConstraintError
from .stochastics import KernelContractError

OK, CHECK_FAILED, USAGE = 0, 1, 2


def _kernels(suite) -> dict:
    return {"A": suite.A.name, "A_params": suite.A.params, "B": suite.B.name, "B_params": suite.B.params,
            "s": suite.s, "delta": suite.delta}


def _outdir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_audit(args) -> int:
    from .audit import run_audit

    cfg = load(args.config)
    suite = suite_from(cfg)
    acfg = audit_from(cfg)
    if args.budget is not None:
        acfg.samples = args.budget
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    report = run_audit(suite, acfg, seed=seed, include_weight=not args.skip_weight)
    out = Path(args.out)
    if out.suffix == ".json":
        out.parent.mkdir(parents=True, exist_ok=True)
        report_path, manifest_path = out, out.with_name(out.stem + ".manifest.json")
    else:
        out = _outdir(args.out)
        report_path, manifest_path = out / "audit_report.json", out / "manifest.json"
    report_path.write_text(report.to_json())
    man = RunManifest.build(cfg, seed, _kernels(suite), "audit", audit_report=str(report_path), outputs=[str(report_path)])
    manifest_path.write_text(man.to_json())
    for e in report.entries:
        flag = "" if e.mandatory else " (informational)"
        print(f"{e.assumption:12s} {e.status}{flag}")
    return OK if report.passed else CHECK_FAILED


def cmd_homo(args) -> int:
    from .homogeneous import ls_dissipation_check, mass_drift, run

    cfg = load(args.config)
    hcfg, state = homogeneous_from(cfg)
    result = run(hcfg, state)
    out = _outdir(args.out)
    table = Table(HOMO_COLUMNS, result.rows)
    table.to_csv(out / "series.csv")
    ls = ls_dissipation_check(result)
    drift = mass_drift(result)
    summary = {"mass_drift": drift, "mass_ok": drift <= 1e-10, "ls_check": ls,
               "steps": result.steps, "rejected_steps": result.rejected}
    write_json(out / "checks.json", summary)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    man = RunManifest.build(cfg, seed, _kernels(hcfg.suite), "homo",
                            outputs=[str(out / "series.csv"), str(out / "checks.json")])
    (out / "manifest.json").write_text(man.to_json())
    print(f"N(T) = {result.rows[-1][1]:.10g}  mass drift = {drift:.3g}  Ls check ({ls['label']}): "
          f"{'pass' if ls['pass'] else 'fail'}")
    return OK if (summary["mass_ok"] and ls["pass"]) else CHECK_FAILED


def cmd_dsmc(args) -> int:
    from .dsmc import run

    cfg = load(args.config)
    dcfg = dsmc_from(cfg, seed=args.seed, workers=args.workers)
    if args.budget is not None:
        dcfg.n_particles = args.budget
    result = run(dcfg)
    out = _outdir(args.out)
    result.series.to_csv(out / "moments.csv")
    result.ledger.to_csv(out / "ledger.csv")
    checks = {
        "estimates": result.estimates,
        "gronwall": result.gronwall,
        "max_event_residual": result.ledger.max_residual(),
        "max_drift": result.ledger.max_drift(),
        "events": result.ledger.totals(),
        "skip_rate": result.skip_rate,
        "initial": result.initial,
        "B1_cache": result.cache,
    }
    write_json(out / "checks.json", checks)
    man = RunManifest.build(cfg, dcfg.seed, _kernels(dcfg.suite), "dsmc",
                            outputs=[str(out / n) for n in ("moments.csv", "ledger.csv", "checks.json")])
    (out / "manifest.json").write_text(man.to_json())
    ok = (
        (result.estimates is None or result.estimates["passed"])
        and checks["max_event_residual"] <= 1e-12
        and checks["max_drift"] <= 1e-9
    )
    last = result.series.last()
    print(f"N(T) = {last['N']:.10g}  events = {checks['events']}  max residual = {checks['max_event_residual']:.3g}")
    return OK if ok else CHECK_FAILED


def cmd_verify(args) -> int:
    from .verify import run_suite

    seed = args.seed if args.seed is not None else 0
    try:
        checks = run_suite(args.suite, seed=seed)
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return USAGE
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name:28s} value={c.value:.4g}  threshold={c.threshold:g}  ({c.seconds:.2f}s)")
    if args.out:
        out = _outdir(args.out)
        write_json(out / "verify.json", [c.to_dict() for c in checks])
        man = RunManifest.build({"suite": args.suite}, seed, {}, "verify", outputs=[str(out / "verify.json")])
        (out / "manifest.json").write_text(man.to_json())
    return OK if all(c.passed for c in checks) else CHECK_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coagfrag", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True, out_required=True):
        if config:
            p.add_argument("--config", required=True, metavar="PATH", help="JSON configuration file")
        p.add_argument("--seed", type=int, default=None, metavar="U64")
        p.add_argument("--out", required=out_required, metavar="PATH")
        p.add_argument("--budget", type=int, default=None, metavar="N", help="sample or particle budget override")

    p = sub.add_parser("audit", help="check the kernel hypotheses, write an AuditReport")
    common(p)
    p.add_argument("--skip-weight", action="store_true", help="omit the weight-integrability quadrature")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("homo", help="run the deterministic sectional solver")
    common(p)
    p.set_defaults(func=cmd_homo)

    p = sub.add_parser("dsmc", help="run the particle simulator")
    common(p)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_dsmc)

    p = sub.add_parser("verify", help="run built-in property suites")
    common(p, config=False, out_required=False)
    p.add_argument("--suite", default="all", metavar="NAME", help="kinematics, samplers, moments or all")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return USAGE
    except RateConstraintError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return USAGE
    except KernelContractError as exc:
        print(f"kernel contract violated: {exc}; witness: {exc.witness}", file=sys.stderr)
        return CHECK_FAILED
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
