"""Command-line front end: ``optomech {simulate,synth,calibrate,selftest}``.

Exit codes: 0 success, 1 configuration error, 2 runtime or numerical error
(including unreadable data files), 3 calibration-stage failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .calibration import FIG5_COLUMNS, run_pipeline
from .errors import CalibrationError, ConfigurationError, OptomechError, RegimeError
from .selftest import CHECKS, run_selftest
from .simulate import simulate
from .synthlab import SCENARIO_PARTS, read_dataset, synth_from_config, write_synth_output
from .traceio import dump_json, write_trace

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_CALIBRATION = 0, 1, 2, 3
MAX_SEED = 2**64 - 1

logger = logging.getLogger("optomech")


class CliError(Exception):
    def __init__(self, code, message):
        self.code = code
        super().__init__(message)


def bundled_configs():
    """Names of the configuration files shipped with the package."""
    root = resources.files("optomech") / "data"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_config(ref):
    """Read a JSON config from a path, or a bundled config by name."""
    path = Path(ref)
    if path.is_file():
        text = path.read_text()
    else:
        name = path.name[:-5] if path.name.endswith(".json") else path.name
        if str(path.parent) not in (".", "") or name not in bundled_configs():
            raise CliError(EXIT_CONFIG, f"config {ref!r} not found (bundled: "
                                        f"{', '.join(bundled_configs())})")
        text = (resources.files("optomech") / "data" / f"{name}.json").read_text()
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_CONFIG, f"{ref}: invalid JSON ({exc})") from None
    if not isinstance(cfg, dict):
        raise CliError(EXIT_CONFIG, f"{ref}: top level must be an object")
    return cfg


def prepare_out(out, force):
    """Create ``out``; refuse a non-empty directory unless ``force``."""
    d = Path(out)
    if d.exists() and not d.is_dir():
        raise CliError(EXIT_CONFIG, f"{d} exists and is not a directory")
    if d.is_dir() and any(d.iterdir()) and not force:
        raise CliError(EXIT_CONFIG, f"{d} is not empty; pass --force to overwrite")
    d.mkdir(parents=True, exist_ok=True)
    return d


def _require(args, *names):
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n) is None]
    if missing:
        raise CliError(EXIT_CONFIG, f"{args.command}: missing {', '.join(missing)}")


def cmd_simulate(args):
    _require(args, "config", "out")
    sim = simulate(load_config(args.config))
    out = prepare_out(args.out, args.force)
    for name, tr in sim.traces.items():
        write_trace(tr, out / f"{name}.csv")
    dump_json(sim.report(), out / "variance.json")
    for q, v in sim.variance.totals.items():
        logger.info("<%s^2> = %.6g (integrated %.6g)", q, v, sim.integrated[q].value)
    print(f"simulate: {sim.regime.value}, C = {sim.C:.6g}; wrote {out}")


def cmd_synth(args):
    _require(args, "config", "out")
    result = synth_from_config(load_config(args.config), args.seed)
    out = prepare_out(args.out, args.force)
    write_synth_output(result, out)
    parts = result if isinstance(result, dict) else {"dataset": result}
    sizes = ", ".join(f"{k}: {len(ds)} traces" for k, ds in parts.items())
    print(f"synth: seed {args.seed}; {sizes}; wrote {out}")


def _write_table(path, columns, rows):
    np.savetxt(path, np.asarray(rows, dtype=float), fmt="%.17g", delimiter=",",
               header=",".join(columns), comments="")


def cmd_calibrate(args):
    _require(args, "data", "out")
    pipeline_cfg = load_config(args.config) if args.config else {}
    data = Path(args.data)
    try:
        parts = {p: read_dataset(data / p) for p in SCENARIO_PARTS}
    except OptomechError as exc:
        raise CliError(EXIT_RUNTIME, f"calibrate [load]: {exc}") from None
    report = run_pipeline(parts["pump"], parts["temperature"], parts["power"], pipeline_cfg)
    out = prepare_out(args.out, args.force)
    dump_json(report.as_dict(), out / "report.json")
    _write_table(out / "fig5.csv", FIG5_COLUMNS, report.fig5_rows())
    t = report.temperature
    _write_table(out / "temperature.csv", ("temperature_K", "flux", "flux_err", "n_m_T", "n_m_T_err"),
                 np.column_stack([t.temperatures, t.flux, t.flux_err, t.n_m_T, t.n_m_T_err]))
    verdict = "evasion demonstrated" if report.evasion.evasion_demonstrated else "not evaded"
    print(f"calibrate: {verdict}; wrote {out}")


def cmd_selftest(args):
    try:
        results = run_selftest(mutate=args.mutate)
    except KeyError as exc:
        raise CliError(EXIT_CONFIG, str(exc.args[0])) from None
    for r in results:
        print(r.line())
    failed = [r.name for r in results if not r.passed]
    print(f"selftest: {len(results) - len(failed)}/{len(results)} checks passed")
    if failed:
        raise CliError(EXIT_RUNTIME, f"selftest: failed {', '.join(failed)}")


def _seed(text):
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}") from None
    if not 0 <= value <= MAX_SEED:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


class _Parser(argparse.ArgumentParser):
    """Usage errors are configuration errors (exit 1), not argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(
        prog="optomech", description="Optomechanics spectra, synthetic data and BAE calibration.")
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="more logging (repeat for debug)")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=False):
        p.add_argument("--config", help="JSON config path or bundled config name")
        p.add_argument("--out", help="output directory (created if absent)")
        p.add_argument("--force", action="store_true", help="overwrite a non-empty --out")
        if seed:
            p.add_argument("--seed", type=_seed, default=0, help="u64 seed (default 0)")

    p = sub.add_parser("simulate", help="spectra and variance report for one operating point")
    common(p)
    p.set_defaults(func=cmd_simulate)
    p = sub.add_parser("synth", help="synthetic noisy dataset or scenario")
    common(p, seed=True)
    p.set_defaults(func=cmd_synth)
    p = sub.add_parser("calibrate", help="calibration pipeline on a scenario directory")
    common(p)
    p.add_argument("--data", help="scenario directory written by 'synth'")
    p.set_defaults(func=cmd_calibrate)
    p = sub.add_parser("selftest", help="oracle and integral consistency checks")
    p.add_argument("--mutate", metavar="CHECK", help=f"perturb one check: {', '.join(CHECKS)}")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (ConfigurationError, RegimeError) as exc:
        print(f"error: {args.command}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CalibrationError as exc:
        print(f"error: {args.command}: {exc}", file=sys.stderr)
        return EXIT_CALIBRATION
    except (OptomechError, ArithmeticError, OSError) as exc:
        print(f"error: {args.command}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
