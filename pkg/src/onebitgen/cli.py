"""Command-line entry point.

Experiment flags are dotted config keys (``--sensing.lambda 10``) and
override values read from ``--config``.  Exit codes: 0 success,
1 configuration error, 2 numerical failure, 3 I/O failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys

import numpy as np

from . import experiments
from .erm import SolverOptions, recover
from .errors import ConfigurationError, DomainError, NumericalFailure
from .generator import ReluNetwork, forward, group_sparse_network, new_random_gaussian
from .landscape import rho_check_sequence, rho_n
from .sensing import MeasurementSet, measure

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3

SUBCOMMANDS = ("gen-net", "measure", "recover", "landscape", "rate-sweep",
               "dither-ablation", "wdc-check", "rho")


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _bool(text):
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


_SOLVER_KEYS = {
    "step": float, "max_iters": int, "tol_grad": float, "tol_loss": float,
    "negation_period": int, "init_radius": float, "seed": int, "init": _float_list,
    "negation_restarts": _bool, "backtrack_factor": float, "sufficient_decrease": float,
    "max_backtracks": int,
}

_SENSING_KEYS = {"dist": str, "noise": str, "noise_scale": float, "lambda": float}

# experiment config keys exposed as flags, with their parsers
_EXPERIMENT_KEYS = {
    "net.dims": _int_list, "net.seed": int, "net.path": str,
    "net.group_sparse.k": int, "net.group_sparse.d": int,
    **{f"sensing.{k}": v for k, v in _SENSING_KEYS.items()},
    "m_list": _int_list, "trials": int, "output_dir": str, "base_seed": int,
    "x0": _float_list, "x0_norm": float,
    **{f"solver.{k}": v for k, v in _SOLVER_KEYS.items()},
    "grid.lo": float, "grid.hi": float, "grid.resolution": int, "grid.mode": str,
    "grid.m": int, "grid.eps_wdc": float,
    "wdc.n_pairs": int,
    "ablation.d": int, "ablation.m": int, "ablation.separation_m": int,
}


def _add_keyed(parser, key, kind, aliases=(), help_text=""):
    parser.add_argument(f"--{key}", *aliases, dest=key, type=kind, default=None,
                        help=f"{help_text}{' ' if help_text else ''}[config key: {key}]")


def _set_dotted(doc, key, value):
    parts = key.split(".")
    node = doc
    for p in parts[:-1]:
        node = node.setdefault(p, {})
    node[parts[-1]] = value


def _net_overrides(doc, given):
    net_keys = {k: v for k, v in given.items() if k.startswith("net.")}
    if not net_keys:
        return
    if "net.path" in net_keys:
        doc["net"] = {"path": net_keys["net.path"]}
    elif any(k.startswith("net.group_sparse") for k in net_keys):
        old = doc.get("net", {}).get("group_sparse", {})
        doc["net"] = {"group_sparse": {"k": net_keys.get("net.group_sparse.k", old.get("k")),
                                       "d": net_keys.get("net.group_sparse.d", old.get("d"))}}
    else:
        old = doc.get("net", {}) if "dims" in doc.get("net", {}) else {"dims": [2, 64, 1024], "seed": 7}
        doc["net"] = {"dims": net_keys.get("net.dims", old["dims"]),
                      "seed": net_keys.get("net.seed", old.get("seed", 0))}


def build_experiment_config(args, experiment):
    """Merge ``--config`` with inline dotted flags; inline flags win."""
    doc = {}
    if args.config:
        with open(args.config) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigurationError(f"{args.config}: invalid JSON ({exc})") from None
    if doc.get("experiment", experiment) != experiment:
        raise ConfigurationError(
            f"{args.config} describes a {doc['experiment']} experiment, not {experiment}")
    doc["experiment"] = experiment
    given = {k: getattr(args, k) for k in _EXPERIMENT_KEYS if getattr(args, k, None) is not None}
    _net_overrides(doc, given)
    for key, value in given.items():
        if not key.startswith("net."):
            _set_dotted(doc, key, value)
    if args.no_timestamp:
        doc["timestamps"] = False
    elif "timestamps" not in doc:
        doc["timestamps"] = True
    return experiments.ExperimentConfig.from_dict(doc)


def _parser():
    # global options are accepted before or after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS,
                        help="repeat for more logging")
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS,
                        help="worker threads for experiment trials (fallback: ONEBIT_THREADS)")
    common.add_argument("--no-timestamp", action="store_true", default=argparse.SUPPRESS,
                        help="omit timestamps so repeated runs are byte-identical "
                             "[config key: timestamps=false]")
    p = argparse.ArgumentParser(
        prog="onebitgen", parents=[common],
        description="Dithered one-bit compressed sensing with ReLU generative priors.")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", required=True)
    _add = sub.add_parser

    def add_parser(name, **kw):
        return _add(name, parents=[common], **kw)

    sub.add_parser = add_parser

    sp = sub.add_parser("rho", help="print rho_n and the angle sequence")
    sp.add_argument("--n", type=int, required=True, help="network depth [config key: n]")

    sp = sub.add_parser("gen-net", help="write a network JSON")
    _add_keyed(sp, "net.dims", _int_list, ("--dims",), "layer widths, e.g. 2,64,1024")
    _add_keyed(sp, "net.seed", int, ("--seed",), "weight seed")
    _add_keyed(sp, "net.group_sparse.k", int, (), "build the group-sparse net with k blocks")
    _add_keyed(sp, "net.group_sparse.d", int, (), "output dimension of the group-sparse net")
    sp.add_argument("-o", "--output", required=True, help="output path [config key: output]")

    sp = sub.add_parser("measure", help="quantize G(x0) and write a MeasurementSet JSON")
    sp.add_argument("--net", required=True, help="network JSON [config key: net.path]")
    _add_keyed(sp, "x0", _float_list, (), "latent target, comma-separated")
    sp.add_argument("--m", type=int, required=True, help="number of measurements [config key: m]")
    for k, kind in _SENSING_KEYS.items():
        _add_keyed(sp, f"sensing.{k}", kind)
    sp.add_argument("--seed", type=int, default=0, help="measurement seed [config key: seed]")
    sp.add_argument("--labels-csv", default=None, help="also write (i, y_i) pairs [config key: labels_csv]")
    sp.add_argument("-o", "--output", required=True, help="output path [config key: output]")

    sp = sub.add_parser("recover", help="run the ERM solver on stored measurements")
    sp.add_argument("--net", required=True, help="network JSON [config key: net.path]")
    sp.add_argument("--measurements", required=True, help="MeasurementSet JSON [config key: measurements]")
    _add_keyed(sp, "x0", _float_list, (), "true latent, only used to report the error")
    for k, kind in _SOLVER_KEYS.items():
        _add_keyed(sp, f"solver.{k}", kind)
    sp.add_argument("--trace-csv", default=None, help="write the loss trace as CSV [config key: trace_csv]")
    sp.add_argument("-o", "--output", required=True, help="output path [config key: output]")

    for name, help_text in (("landscape", "grid evaluation of the risk"),
                            ("rate-sweep", "median error against sample size"),
                            ("dither-ablation", "dithered vs undithered Rademacher sensing"),
                            ("wdc-check", "sampled WDC constants per layer")):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", default=None, help="experiment JSON file")
        for key, kind in _EXPERIMENT_KEYS.items():
            _add_keyed(sp, key, kind)
    return p


def _cmd_rho(args):
    if args.n < 1:
        raise ConfigurationError("--n must be at least 1")
    print(f"rho_{args.n} = {rho_n(args.n)!r}")
    print("rho_check = " + ", ".join(repr(v) for v in rho_check_sequence(args.n)))


def _cmd_gen_net(args):
    if args.__dict__.get("net.group_sparse.k") is not None:
        net = group_sparse_network(args.__dict__["net.group_sparse.k"], args.__dict__["net.group_sparse.d"] or 0)
    else:
        dims = args.__dict__.get("net.dims")
        if not dims:
            raise ConfigurationError("gen-net needs --dims or --net.group_sparse.k/d")
        net = new_random_gaussian(dims, args.__dict__.get("net.seed") or 0)
    net.save(args.output)


def _cmd_measure(args):
    net = ReluNetwork.load(args.net)
    x0 = args.x0 if args.x0 is not None else [1.0] * net.input_dim
    s = {k: args.__dict__.get(f"sensing.{k}") for k in _SENSING_KEYS}
    ms = measure(forward(net, x0), args.m, dist=s["dist"] or "gaussian", noise=s["noise"] or "none",
                 noise_scale=s["noise_scale"] or 0.0,
                 lam=10.0 if s["lambda"] is None else s["lambda"], seed=args.seed)
    ms.save(args.output)
    if args.labels_csv:
        with open(args.labels_csv, "w") as fh:
            fh.write(ms.labels_csv())


def _cmd_recover(args):
    net = ReluNetwork.load(args.net)
    ms = MeasurementSet.load(args.measurements)
    opts = SolverOptions.from_dict({k: args.__dict__[f"solver.{k}"] for k in _SOLVER_KEYS
                                    if args.__dict__.get(f"solver.{k}") is not None})
    res = recover(net, ms, opts, x0=args.x0)
    with open(args.output, "w") as fh:
        fh.write(res.to_json())
    if args.trace_csv:
        with open(args.trace_csv, "w") as fh:
            fh.write(res.trace_csv())
    msg = f"loss {res.final_loss:.6g} after {res.iterations} iterations"
    if res.relative_error is not None:
        msg += f", relative error {res.relative_error:.4g}"
    print(msg)


def _cmd_experiment(args, experiment, threads):
    cfg = build_experiment_config(args, experiment)
    out = experiments.run(cfg, workers=threads)
    if experiment == "rate_sweep":
        fit = experiments.fit_slope(out)
        for r in out:
            print(f"m={r.m} median={r.median_rel_error:.4g} q25={r.q25:.4g} q75={r.q75:.4g} failures={r.failures}")
        print(f"slope={fit['slope']}")
    elif experiment == "dither_ablation":
        for b in ("no_dither", "dither"):
            r = out[b]
            print(f"{b}: d_H in [{r['d_H_min']:.4g}, {r['d_H_max']:.4g}], "
                  f"separated {r['separation_successes']}/{out['trials']} at m={out['m']}, "
                  f"{r['separation_successes_at_separation_m']}/{out['trials']} at m={out['separation_m']}")
    elif experiment == "landscape":
        print(f"{out.mode} grid argmin {out.argmin().tolist()}, rho_n={out.rho_n!r}")
    else:
        for r in out:
            print(f"layer {r.layer_index}: epsilon_hat={r.epsilon_hat:.4g} over {r.pair_count} pairs")


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    for name, default in (("verbose", 0), ("threads", None), ("no_timestamp", False)):
        if not hasattr(args, name):
            setattr(args, name, default)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    threads = args.threads
    if threads is None:
        threads = int(os.environ.get("ONEBIT_THREADS", "1") or 1)
    try:
        if args.command == "rho":
            _cmd_rho(args)
        elif args.command == "gen-net":
            _cmd_gen_net(args)
        elif args.command == "measure":
            _cmd_measure(args)
        elif args.command == "recover":
            _cmd_recover(args)
        else:
            _cmd_experiment(args, args.command.replace("-", "_"), max(1, threads))
    except (ConfigurationError, DomainError) as exc:
        print(f"onebitgen: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"onebitgen: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        where = f" ({exc.filename})" if getattr(exc, "filename", None) else ""
        print(f"onebitgen: I/O error{where}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
