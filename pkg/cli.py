"""
Command line driver: gsconvex <subcommand> --config <path> --out <dir>

Writes report.json (canonical, deterministic for a fixed config and seed)
and CSV tables next to it. Exit codes: 0 every check passes, 1 a valid run
with a negative verdict, 2 configuration or evaluation error.
"""
import argparse
import logging
import sys
import time
from pathlib import Path

import pandas as pd
from sqlalchemy.exc import SQLAlchemyError

import algebra
import cert
import diff
import epigraph
import opt
import oracle
from config_loader import build_function, build_grid, build_modmap, load_config
from errors import ConfigError, LabError, PreconditionError
from utils import config_hash, finite_or_none, point_columns, read_table, write_json, write_table

logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_NEGATIVE = 1
EXIT_ERROR = 2

REPLAY_TOLERANCE = 1e-12
SUBCOMMANDS = ("check", "classes", "minimal-g", "epi", "bounds", "diff", "minimize", "certify", "oracle")


class Outcome:
    """What a subcommand hands back to the report writer."""

    def __init__(self):
        self.verdicts = []
        self.witnesses = []
        self.details = {}
        self.tables = {}
        self.passed = True

    def verdict(self, label, verdict, passed, worst=None, **extra):
        self.verdicts.append({"label": label, "verdict": verdict, "worst": finite_or_none(worst), **extra})
        self.passed = self.passed and passed

    def witness(self, kind, value, s=None, a=None, m1=None, m2=None, **extra):
        self.witnesses.append({"kind": kind, "value": finite_or_none(value), "s": s, "a": a,
                               "m1": None if m1 is None else list(m1), "m2": None if m2 is None else list(m2),
                               **extra})


class Context:
    def __init__(self, config, seed, threads):
        self.config = config
        self.seed = seed
        self.threads = threads
        self.Q = build_function(config)
        self.G = build_modmap(config)
        self.grid = build_grid(config, seed)


def _report_verdict(outcome, report, label=None):
    worst = report.worst
    outcome.verdict(label or report.function, report.verdict, report.passed, worst.residual,
                    class_id=report.class_id, tolerance=report.tolerance, sample_count=report.sample_count)
    outcome.witness(f"worst-residual:{report.class_id}", worst.residual, worst.s, worst.a, worst.m1, worst.m2)


def run_check(ctx, outcome):
    report = cert.check_gs_convex(ctx.Q, ctx.G, None, ctx.grid, ctx.config.tolerance, ctx.threads)
    _report_verdict(outcome, report)
    outcome.tables["witnesses"] = report.witnesses

    if ctx.config.family:
        pairs = [algebra.GSPair(build_function(ctx.config, name), ctx.G) for name in ctx.config.family]
        family = algebra.sup_family(pairs)
        sup_report = cert.check_gs_convex(family.pair.Q, family.pair.G, None, ctx.grid,
                                          ctx.config.tolerance, ctx.threads)
        _report_verdict(outcome, sup_report, label=family.pair.Q.name)
        outcome.details["supremum"] = {
            "finite_points": int(family.finite.sum()),
            "probe_points": int(family.probe.size),
            "contiguous": family.contiguous,
            "interval": family.pair.Q.domain.bounds()[0],
        }
        outcome.tables["supremum_witnesses"] = sup_report.witnesses


def run_classes(ctx, outcome):
    tables = []
    for class_id in ctx.config.classes:
        s_values = (1.0,) if class_id == cert.ClassId.EXPONENTIAL_KIND.value else ctx.grid.s_values
        uses_g = class_id in (cert.ClassId.GS_EXPONENTIAL.value, cert.ClassId.SUB_B_S_CONVEX.value)
        for s in s_values:
            label = f"{class_id} s={s:g}"
            try:
                report = cert.check_class(class_id, ctx.Q, ctx.G if uses_g else None, s, ctx.grid,
                                          ctx.config.tolerance, ctx.threads)
            except PreconditionError as e:
                outcome.verdict(label, "not-applicable", True, class_id=class_id, reason=str(e))
                continue
            _report_verdict(outcome, report, label=label)
            tables.append(report.witnesses.assign(class_id=class_id))
    if tables:
        outcome.tables["classes"] = pd.concat(tables, ignore_index=True)
    try:
        outcome.details["reduction_equivalent"] = cert.reduction_equivalence(ctx.Q, ctx.grid, ctx.config.tolerance,
                                                                             ctx.threads)
    except PreconditionError as e:
        logger.info("Reduction check skipped: %s", e)
        outcome.details["reduction_equivalent"] = None


def run_minimal_g(ctx, outcome):
    tables = []
    for s in ctx.grid.s_values:
        if ctx.config.pairs:
            a_values = [a for a in ctx.grid.a_values if a > 0]
            rows = []
            for m1, m2 in ctx.config.pairs:
                result = cert.minimal_g(ctx.Q, s, m1, m2, a_values)
                row = dict(zip(point_columns("m1", ctx.Q.dimension), m1))
                row.update(zip(point_columns("m2", ctx.Q.dimension), m2))
                row.update(result._asdict())
                rows.append(row)
            table = pd.DataFrame(rows)
        else:
            table = cert.minimal_g_landscape(ctx.Q, s, ctx.grid, ctx.threads)
        table.insert(0, "s", s)
        tables.append(table)
        feasible = bool(table["endpoint_feasible"].all())
        worst = table.loc[table["gstar"].idxmax()]
        outcome.verdict(f"minimal-g s={s:g}", "feasible" if feasible else "endpoint-infeasible", feasible,
                        float(worst["gstar"]), sample_count=len(table))
        outcome.witness("largest-gstar", float(worst["gstar"]), s, float(worst["argmax_a"]),
                        [float(worst[c]) for c in point_columns("m1", ctx.Q.dimension)],
                        [float(worst[c]) for c in point_columns("m2", ctx.Q.dimension)])
    outcome.tables["minimal_g"] = pd.concat(tables, ignore_index=True)


def run_epi(ctx, outcome):
    tables = []
    for s in ctx.grid.s_values:
        report = epigraph.check_epigraph_theorem(ctx.Q, ctx.G, s, ctx.grid, ctx.config.tolerance,
                                                 ctx.config.deltas, ctx.threads)
        worst = report.worst_escape
        outcome.verdict(f"epigraph s={s:g}", "consistent" if report.consistent else "inconsistent",
                        report.consistent, worst.excess if worst else None, sweep=report.gs_verdict,
                        escapes=report.escapes, sample_count=report.combinations,
                        inconsistencies=list(report.inconsistencies))
        if worst:
            outcome.witness("worst-escape", worst.excess, s, worst.a, worst.m1, worst.m2,
                            alpha1=worst.alpha1, alpha2=worst.alpha2)
        tables.append(report.escape_table.assign(s=s))
    outcome.tables["epigraph_escapes"] = pd.concat(tables, ignore_index=True)


def run_bounds(ctx, outcome):
    report = epigraph.boundedness_scan(ctx.Q, ctx.config.interval, ctx.config.scan_points, ctx.config.g_bound)
    outcome.verdict(ctx.Q.name, "bounded" if report.bounded else "unbounded-evidence", report.bounded,
                    report.sup, sample_count=report.points)
    outcome.details["boundedness"] = {key: finite_or_none(value) if isinstance(value, float) else value
                                      for key, value in report.to_dict().items()}
    if not report.bounded:
        outcome.witness("unbounded-evidence", None, m1=report.witness)


def _diff_passed(curve, tolerance):
    checks = [(curve["secant_margin"] >= -tolerance).all()]
    for column, strict in (("margin_i", True), ("margin_ii", True), ("margin_nonpositive", False),
                           ("margin_symmetric", False)):
        values = curve[column].dropna()
        checks.append(((values > 0) if strict else (values >= 0)).all())
    return bool(all(checks))


def run_diff(ctx, outcome):
    if not ctx.config.pairs:
        raise ConfigError("'diff' needs at least one entry in 'pairs'")
    tables = []
    for index, (m1, m2) in enumerate(ctx.config.pairs):
        gap = diff.secant_gap(ctx.Q, m1, m2)
        outcome.details.setdefault("secant_gap_decreasing", []).append(gap.decreasing)
        for s in ctx.grid.s_values:
            curve = diff.margin_curve(ctx.Q, ctx.G, s, m1, m2, ctx.config.diff_a_values, ctx.config.bound_ii_factor)
            passed = _diff_passed(curve, ctx.config.tolerance)
            margins = curve.drop(columns="a").min(skipna=True)
            worst_column = margins.idxmin()
            worst_row = curve.loc[curve[worst_column].idxmin()]
            outcome.verdict(f"pair {index} s={s:g}", "pass" if passed else "fail", passed, float(margins.min()),
                            sample_count=len(curve), worst_bound=worst_column)
            outcome.witness(f"smallest-margin:{worst_column}", float(margins.min()), s, float(worst_row["a"]), m1, m2)
            curve.insert(0, "pair", index)
            curve.insert(1, "s", s)
            tables.append(curve)
    outcome.tables["margins"] = pd.concat(tables, ignore_index=True)
    outcome.details["bound_ii_factor"] = ctx.config.bound_ii_factor


def _minimize(ctx):
    settings = ctx.config.minimize
    return opt.minimize(ctx.Q, starts=settings.starts, seed=ctx.seed, max_iters=settings.max_iters,
                        tolerance=settings.tolerance, method=settings.method, threads=ctx.threads)


def run_minimize(ctx, outcome):
    result = _minimize(ctx)
    converged = any(t.converged and t.point == result.best_point for t in result.traces)
    outcome.verdict(ctx.Q.name, "converged" if converged else "not-converged", converged, result.best_value,
                    sample_count=result.starts)
    outcome.witness("minimizer", result.best_value, m1=result.best_point)
    outcome.details["optimization"] = opt.build_report([result], [])


def run_certify(ctx, outcome):
    results = []
    candidate = ctx.config.candidate
    if candidate is None:
        results.append(_minimize(ctx))
        candidate = results[0].best_point
    n_grid = ctx.grid.m_points(ctx.Q.domain)
    certificates = []
    tables = []
    for s in ctx.grid.s_values:
        certificate = opt.certify_unconstrained(ctx.Q, ctx.G, s, ctx.config.certificate_a, candidate, n_grid)
        certificates.append(certificate)
        outcome.verdict(f"certificate s={s:g}", "holds" if certificate.holds else "fails", certificate.holds,
                        certificate.worst_margin, sample_count=certificate.samples)
        outcome.witness("worst-margin", certificate.worst_margin, s, certificate.a, certificate.candidate,
                        certificate.witness)
        tables.append(certificate.margins.assign(s=s))
        if certificate.holds:
            sweep = cert.check_gs_convex(ctx.Q, ctx.G, [s], ctx.grid, ctx.config.tolerance, ctx.threads)
            if sweep.passed:
                findings = opt.consistency_findings(ctx.Q, certificate, n_grid, ctx.config.tolerance)
                outcome.details.setdefault("consistency_findings", []).extend(list(n) for n in findings)
    outcome.tables["certificate_margins"] = pd.concat(tables, ignore_index=True)
    outcome.details["optimization"] = opt.build_report(results, certificates)


def run_oracle(ctx, outcome):
    if ctx.config.replay:
        table = read_table(ctx.config.replay)
        replayed = oracle.replay_witnesses(ctx.Q, ctx.G, table)
        worst = float(replayed["discrepancy"].max()) if len(replayed) else 0.0
        passed = worst <= REPLAY_TOLERANCE
        outcome.verdict("replay", "reproduced" if passed else "mismatch", passed, worst, sample_count=len(replayed))
        outcome.tables["replay"] = replayed
        return
    result = oracle.brute_force_worst_residual(ctx.Q, ctx.G, None, ctx.grid)
    sweep = cert.check_gs_convex(ctx.Q, ctx.G, None, ctx.grid, ctx.config.tolerance, ctx.threads)
    witness = result.witness
    verdict = "fail" if result.worst > ctx.config.tolerance else "pass"
    agree = (abs(result.worst - sweep.worst.residual) <= REPLAY_TOLERANCE
             and (witness.s, witness.a, witness.m1, witness.m2) == sweep.worst.key())
    if not agree:
        logger.warning("Oracle and sweep disagree: %.17g at %s vs %.17g at %s", result.worst,
                       witness, sweep.worst.residual, sweep.worst.key())
    outcome.verdict(ctx.Q.name, verdict, verdict == "pass" and agree, result.worst,
                    class_id=cert.ClassId.GS_EXPONENTIAL.value, tolerance=ctx.config.tolerance,
                    sample_count=result.sample_count, agrees_with_sweep=agree)
    outcome.witness("oracle-worst-residual", witness.residual, witness.s, witness.a, witness.m1, witness.m2)


HANDLERS = {
    "check": run_check,
    "classes": run_classes,
    "minimal-g": run_minimal_g,
    "epi": run_epi,
    "bounds": run_bounds,
    "diff": run_diff,
    "minimize": run_minimize,
    "certify": run_certify,
    "oracle": run_oracle,
}


def _record(report, exit_code, out_dir):
    from database.db_config import resolve_database_url
    from database.db_operations import init_db, record_run

    url = resolve_database_url(out_dir=out_dir)
    try:
        init_db(url)
        record_run(url, report, exit_code)
    except SQLAlchemyError as e:
        logger.error("Run not recorded: %s", e)


def run(subcommand, config_path, out_dir, threads=1, seed=None, record=False, timings=False):
    """
    Execute one subcommand and write its report

    Args:
        subcommand: One of SUBCOMMANDS
        config_path: JSON run configuration
        out_dir: Directory for report.json and CSV tables
        threads: Worker threads for sweeps and starts
        seed: Overrides the configuration's seed
        record: Store the run in the ledger
        timings: Include wall-clock timings in the report

    Returns:
        int: 0, 1 or 2
    """
    started = time.perf_counter()
    out_dir = Path(out_dir)
    try:
        if subcommand not in HANDLERS:
            raise ConfigError(f"unknown subcommand '{subcommand}'")
        config = load_config(config_path)
        seed = config.seed if seed is None else seed
        ctx = Context(config, seed, threads)
        outcome = Outcome()
        HANDLERS[subcommand](ctx, outcome)
    except LabError as e:
        logger.error("%s failed: %s", subcommand, e)
        return EXIT_ERROR

    exit_code = EXIT_PASS if outcome.passed else EXIT_NEGATIVE
    report = {
        "run-id": config_hash({"config": config.source, "subcommand": subcommand, "seed": seed}),
        "config-hash": config_hash(config.source),
        "subcommand": subcommand,
        "seed": seed,
        "config-echo": config.source,
        "verdicts": outcome.verdicts,
        "worst-witnesses": outcome.witnesses,
        "details": outcome.details,
        "tables": {name: f"{name}.csv" for name in sorted(outcome.tables)},
        "exit-code": exit_code,
        "timings": {"total-seconds": round(time.perf_counter() - started, 6)} if timings else None,
    }
    try:
        for name, table in sorted(outcome.tables.items()):
            write_table(table, out_dir / f"{name}.csv")
        write_json(out_dir / "report.json", report)
    except OSError as e:
        logger.error("%s could not write its output to %s: %s", subcommand, out_dir, e)
        return EXIT_ERROR
    if record:
        _record(report, exit_code, out_dir)
    logger.info("%s finished with exit code %d", subcommand, exit_code)
    return exit_code


def build_parser():
    parser = argparse.ArgumentParser(prog="gsconvex",
                                     description="Numerical checks for GS-exponential kind of convex functions")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON run configuration")
    common.add_argument("--out", required=True, help="Output directory for report.json and CSV tables")
    common.add_argument("--threads", type=int, default=1, help="Worker threads (results do not depend on it)")
    common.add_argument("--seed", type=int, default=None, help="Override the configuration seed")
    common.add_argument("--log-level", default="WARNING",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="Logging level on stderr")
    common.add_argument("--record", action="store_true",
                        help="Store the run in the ledger ($GSCONVEX_DATABASE_URL or SQLite in --out)")
    common.add_argument("--timings", action="store_true", help="Include wall-clock timings in the report")
    subparsers = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        subparsers.add_parser(name, parents=[common])
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level),
                        format="%(asctime)s %(name)s %(levelname)s: %(message)s")
    if args.threads < 1:
        logger.error("--threads must be at least 1")
        return EXIT_ERROR
    return run(args.subcommand, args.config, args.out, threads=args.threads, seed=args.seed,
               record=args.record, timings=args.timings)


if __name__ == "__main__":
    sys.exit(main())
