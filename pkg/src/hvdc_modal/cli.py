"""Command-line entry point: ``hvdc-modal {run,sweep,oracle,acceptance}``.

Exit codes: 0 success, 1 usage or parse error, 2 solver error,
3 acceptance (or oracle) failure.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import yaml

from .errors import (BuildError, InvalidParameterError, NumericalInstabilityError,
                     ScenarioParseError, SolverError)

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_FAIL = 0, 1, 2, 3

log = logging.getLogger("hvdc_modal")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _load(path):
    from .scenario import default_scenario, load_scenario

    if path is None:
        return default_scenario()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ScenarioParseError(f"cannot read scenario file: {exc}") from exc
    return load_scenario(text)


def _apply_overrides(sc, args):
    if getattr(args, "dt", None) is not None:
        if not args.dt > 0:
            raise ScenarioParseError("--dt must be > 0", field="sim.dt")
        sc = sc._replace(sim=replace(sc.sim, dt=args.dt))
    if getattr(args, "seed", None) is not None:
        sc = sc._replace(noise=replace(sc.noise, seed=args.seed))
    return sc


def _load_sweep(path):
    """A sweep file is a scenario file plus a ``sweep`` section of lists."""
    from .harness import SweepSpec
    from .scenario import default_scenario, load_scenario

    if path is None:
        return default_scenario(), SweepSpec()
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ScenarioParseError(f"malformed YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ScenarioParseError("sweep file must be a mapping")
    sw = data.pop("sweep", None) or {}
    base = load_scenario(yaml.safe_dump(data)) if data else default_scenario()
    allowed = {"kinds", "location_d", "r_f", "clr", "snr_db", "seeds"}
    for key in sw:
        if key not in allowed:
            raise ScenarioParseError(f"unknown sweep entry '{key}'", field=f"sweep.{key}")
    kw = {}
    for key, val in sw.items():
        if isinstance(val, dict) and key == "seeds":
            val = list(range(int(val.get("start", 1)), int(val["stop"]) + 1))
        if not isinstance(val, list):
            val = [val]
        if key == "snr_db":
            val = [math.inf if str(v).lower() in ("inf", ".inf", "none") else float(v) for v in val]
        elif key in ("location_d", "r_f", "clr"):
            val = [float(v) for v in val]
        elif key == "seeds":
            val = [int(v) for v in val]
        kw[key] = tuple(val)
    try:
        return base, SweepSpec(**kw)
    except ValueError as exc:
        raise ScenarioParseError(str(exc), field="sweep") from exc


def cmd_run(args):
    from .harness import run_scenario, write_run

    sc = _apply_overrides(_load(args.scenario), args)
    res = run_scenario(sc, args.mode)
    paths = write_run(res, args.out, plots=not args.no_plots)
    if res.decision is not None:
        d = res.decision
        trig = "no trigger" if d.trigger_time is None else \
            f"trigger at {d.trigger_time * 1e3:.3f} ms, latency {d.latency_ms:.3f} ms"
        print(f"{sc.id}: verdict {d.verdict.value} ({trig})")
    if res.analytic_signature is not None:
        print(f"{sc.id}: analytic polarity (V_L120, V_L121) = {res.analytic_signature.pair}")
    if res.oracle is not None:
        print(f"{sc.id}: oracle first-extremum error {res.oracle.rel_error:.3%}")
    for p in paths:
        log.info("wrote %s", p)
    return EXIT_OK


def cmd_sweep(args):
    from .harness import sweep

    base, spec = _load_sweep(args.scenario)
    base = _apply_overrides(base, args)
    spec = replace(spec, mode=args.mode, out_dir=None)
    print(f"sweep: {spec.size} grid points")
    report = sweep(spec, base, workers=args.workers)
    report.write(args.out, plots=not args.no_plots)
    print(f"sweep: {report.passed}/{len(report.rows)} rows pass; report in {args.out}")
    return EXIT_OK


def cmd_oracle(args):
    from .harness import compare_oracle, write_oracle

    sc = _apply_overrides(_load(args.scenario), args)
    rep = compare_oracle(sc, dt=args.dt)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_oracle(out / "oracle.csv", rep)
    if not args.no_plots:
        from .plotting import plot_oracle

        plot_oracle(rep, out)
    status = "PASS" if rep.passed else "FAIL"
    print(f"{sc.id}: {status} first-extremum error {rep.rel_error:.3%} "
          f"(tolerance {rep.tolerance:.0%}), polarity sim/analytic {rep.polarity}, "
          f"inversion discrepancy {rep.inversion_discrepancy:.2e}")
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_acceptance(args):
    from .acceptance import CRITERIA, run_acceptance

    only = None
    if args.only:
        try:
            only = sorted({int(x) for x in args.only.split(",")})
        except ValueError:
            raise ScenarioParseError("--only takes comma-separated criterion numbers") from None
        unknown = [n for n in only if n not in CRITERIA]
        if unknown:
            raise ScenarioParseError(f"unknown criteria {unknown}")
    base = _apply_overrides(_load(args.scenario), args)
    results = run_acceptance(only, base, args.out, echo=lambda r: print(r.line(), flush=True))
    failed = [r.number for r in results if not r.passed]
    print(f"acceptance: {len(results) - len(failed)}/{len(results)} criteria pass")
    return EXIT_FAIL if failed else EXIT_OK


def build_parser():
    p = _Parser(prog="hvdc-modal", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    def common(sp, out_default):
        sp.add_argument("--scenario", help="scenario (or sweep) YAML file")
        sp.add_argument("--out", default=out_default, help="output directory")
        sp.add_argument("--dt", type=float, help="simulation step in seconds")
        sp.add_argument("--seed", type=int, help="noise seed")
        sp.add_argument("--no-plots", action="store_true", help="skip figure rendering")

    sp = sub.add_parser("run", help="simulate one scenario and classify it")
    common(sp, "out/run")
    sp.add_argument("--mode", choices=("simulate", "analytic", "both"), default="simulate")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("sweep", help="run a parameter grid")
    common(sp, "out/sweep")
    sp.add_argument("--mode", choices=("simulate", "analytic", "both"), default="simulate")
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("oracle", help="compare analytic and simulated mode voltages")
    common(sp, "out/oracle")
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("acceptance", help="run the acceptance criteria")
    common(sp, "out/acceptance")
    sp.add_argument("--only", help="comma-separated criterion numbers")
    sp.add_argument("--workers", type=int, default=1, help="accepted for symmetry; runs serially")
    sp.set_defaults(func=cmd_acceptance)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ScenarioParseError, InvalidParameterError, BuildError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SolverError, NumericalInstabilityError) as exc:
        extra = ""
        if isinstance(exc, SolverError) and exc.last_valid_time is not None:
            extra = f" (last valid time {exc.last_valid_time:.6g} s)"
        print(f"solver error: {exc}{extra}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
