"""Command-line entry point: ``homeostasis {simulate,train,moduli,verify}``.

Exit codes: 0 success, 1 usage error, 2 parse error, 3 numerical failure (or
failed verification).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import io
from . import presets
from .discovery import Dataset, TrainConfig, train
from .energy_net import moduli
from .errors import (
    DegenerateMaterialError,
    HomeostasisError,
    ParseError,
    SimulationError,
    TrainingAborted,
)
from .material_point import DEFAULT_EPS, simulate

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("homeostasis")

PRESET_PREFIX = "preset:"
PROTOCOLS = {
    "stripe-compress": lambda: presets.stripe_protocol("compress"),
    "stripe-stretch": lambda: presets.stripe_protocol("stretch"),
    "stripe-rest": lambda: presets.stripe_protocol(None, t_end=17.0),
    "cross-biaxial-stretch": lambda: presets.cross_protocol("biaxial", "stretch"),
    "cross-biaxial-compress": lambda: presets.cross_protocol("biaxial", "compress"),
    "cross-semibiaxial-stretch": lambda: presets.cross_protocol("semibiaxial", "stretch"),
    "cross-semibiaxial-compress": lambda: presets.cross_protocol("semibiaxial", "compress"),
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def load_weights(spec: str):
    """Weights from a file, or ``preset:<specimen>-<L1|L2>`` (e.g. ``preset:stripe-L2``)."""
    if spec.startswith(PRESET_PREFIX):
        name = spec[len(PRESET_PREFIX):]
        specimen, _, reg = name.rpartition("-")
        try:
            return presets.discovered_weights(specimen, reg)
        except KeyError:
            raise UsageError(f"unknown weight preset {name!r}") from None
    return io.read_weights(spec)


def load_protocol(spec: str):
    if spec.startswith(PRESET_PREFIX):
        name = spec[len(PRESET_PREFIX):]
        if name not in PROTOCOLS:
            raise UsageError(f"unknown protocol preset {name!r}; choose from {sorted(PROTOCOLS)}")
        return PROTOCOLS[name]()
    return io.read_protocol(spec)


def cmd_simulate(args) -> int:
    if len(args.data) != 1:
        raise UsageError("simulate takes exactly one --data file")
    ew, pw = load_weights(args.weights)
    protocol = load_protocol(args.data[0])
    traj = simulate(protocol, ew, pw, eps=args.eps)
    if args.as_experiment:
        io.write_experiment(args.out, protocol, traj.stresses)
    else:
        io.write_trajectory(args.out, traj)
    s = traj.stresses
    print(f"wrote {len(traj)} rows to {args.out}")
    print(f"terminal stress S11={s[-1, 0]:.6g} S22={s[-1, 1]:.6g} S33={s[-1, 2]:.6g}")
    return EXIT_OK


def _train_config(args) -> TrainConfig:
    cfg = io.read_config(args.config) if args.config else TrainConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.eps is not None:
        overrides["eps"] = args.eps
    if args.epochs is not None:
        overrides["epochs"] = args.epochs
    if overrides:
        mapping = io.config_to_mapping(cfg)
        mapping.pop("dt_policy")
        mapping.update(overrides)
        cfg = TrainConfig(**mapping)
    return cfg


def cmd_train(args) -> int:
    if not args.data:
        raise UsageError("train needs at least one --data file")
    cfg = _train_config(args)
    dataset = Dataset(tuple(io.read_experiment(p) for p in args.data))
    every = max(1, cfg.epochs // 20)

    def progress(epoch, lg):
        if epoch == 1 or epoch % every == 0:
            log.info("epoch %d loss %.6e (data %.6e, penalty %.6e)", epoch, lg.total, lg.data, lg.penalty)

    ew, pw, report = train(dataset, cfg, callback=progress)
    io.write_weights(args.out, ew, pw)
    loss_out = args.loss_out or str(Path(args.out).with_suffix("")) + "_loss.csv"
    io.write_loss(loss_out, report)
    print(f"wrote weights to {args.out} and loss history to {loss_out}")
    print(f"final loss {report.total[-1]:.6e} (data {report.data[-1]:.6e}, penalty {report.penalty[-1]:.6e})")
    try:
        k, mu, e, nu = moduli(ew)
        print(f"kappa={k:.6g} mu={mu:.6g} E={e:.6g} nu={nu:.6g}")
    except DegenerateMaterialError as exc:
        print(f"moduli: {exc}")
    return EXIT_OK


def cmd_moduli(args) -> int:
    ew, _ = load_weights(args.weights)
    k, mu, e, nu = moduli(ew)
    print(f"kappa = {k:.6g}")
    print(f"mu    = {mu:.6g}")
    print(f"E     = {e:.6g}")
    print(f"nu    = {nu:.6g}")
    if mu == 0.0:
        print("warning: shear modulus is zero; the elastic stiffness is singular and "
              "implicit structural analyses with these weights are ill-posed", file=sys.stderr)
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import format_report, run_checks

    seed = 0 if args.seed is None else args.seed
    results = run_checks(seed)
    report = format_report(results, seed)
    if args.out:
        Path(args.out).write_text(report, encoding="utf-8")
    sys.stdout.write(report)
    return EXIT_OK if all(r.passed for r in results) else EXIT_NUMERIC


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="homeostasis", description="Material-point engine and weight discovery for "
                "growth and remodeling with homeostatic surfaces.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="forward simulation of a loading protocol")
    s.add_argument("--weights", required=True, help="weights JSON or preset:<specimen>-<L1|L2>")
    s.add_argument("--data", action="append", default=[], required=True,
                   help="experiment/protocol CSV or preset:<protocol>")
    s.add_argument("--out", required=True, help="output CSV")
    s.add_argument("--eps", type=float, default=DEFAULT_EPS, help="Newton tolerance")
    s.add_argument("--as-experiment", action="store_true",
                   help="write predictions in experiment-file format (usable as training data)")
    s.set_defaults(func=cmd_simulate)

    t = sub.add_parser("train", help="discover weights from experiment files")
    t.add_argument("--data", action="append", default=[], help="experiment CSV (repeatable)")
    t.add_argument("--config", help="run config JSON")
    t.add_argument("--out", required=True, help="output weights JSON")
    t.add_argument("--loss-out", help="per-epoch loss CSV (default: <out>_loss.csv)")
    t.add_argument("--seed", type=int)
    t.add_argument("--eps", type=float)
    t.add_argument("--epochs", type=int)
    t.set_defaults(func=cmd_train)

    m = sub.add_parser("moduli", help="linearized elastic moduli of a weight set")
    m.add_argument("--weights", required=True, help="weights JSON or preset:<specimen>-<L1|L2>")
    m.set_defaults(func=cmd_moduli)

    v = sub.add_parser("verify", help="run the invariant suite")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--out", help="report path")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"homeostasis: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParseError as exc:
        print(f"homeostasis: parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except DegenerateMaterialError as exc:
        print(f"homeostasis: degenerate material: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (SimulationError, TrainingAborted) as exc:
        print(f"homeostasis: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except HomeostasisError as exc:
        print(f"homeostasis: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"homeostasis: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
