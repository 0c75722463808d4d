"""Command line entry point: ``gtcs <subcommand> ...``.

Subcommands
-----------
gen      write a phantom or synthetic dataset as GTCS1
sample   draw an ensemble, sample a tensor, write the measurements
recover  recover a tensor from measurements
sweep    run an experiment sweep and write a CSV table
psnr     PSNR between two GTCS1 tensors
bounds   measurement-count bounds for given dims and sparsity

``--config FILE`` reads a JSON object whose keys are flag names (with
underscores); explicit flags win over the file.  For ``sweep`` the keys are
the :class:`~gtcs.harness.ExperimentSpec` fields.
"""
import argparse
import json
import os
import sys

from . import fileio, harness
from .l1 import SolverConfig
from .recovery import RecoveryError
from .sensing import (
    BoundParams,
    VacuousBound,
    bound_gtcs_total,
    bound_kcs,
    bound_per_mode,
    generate_ensemble,
    sample,
)


def _ints(text):
    if isinstance(text, (list, tuple)):
        return [int(t) for t in text]
    return [int(t) for t in str(text).replace("x", ",").split(",") if t.strip()]


def _int_range(text):
    """``"36:42"`` (inclusive), ``"36,38,40"`` or a single number."""
    if isinstance(text, (list, tuple)):
        return [int(t) for t in text]
    text = str(text)
    if ":" in text:
        lo, hi = text.split(":")
        return list(range(int(lo), int(hi) + 1))
    return _ints(text)


def _solver(args):
    return SolverConfig(args.tol, args.max_iters, args.penalty, args.epsilon)


def _ensemble_sidecar(path):
    return path + ".ensemble.json"


def cmd_gen(args):
    dims = tuple(_ints(args.dims)) if args.dims else None
    X = harness.make_dataset(args.dataset, dims, args.seed)
    _require_out(args)
    fileio.save_tensor(args.out, X)
    print("wrote %s %s" % (args.out, "x".join(map(str, X.shape))))


def cmd_sample(args):
    X = fileio.load_tensor(args.input)
    m = _ints(args.m)
    if len(m) == 1:
        m = m * X.ndim
    E = generate_ensemble(X.shape, m, args.distribution, args.seed)
    Y = sample(X, E)
    _require_out(args)
    fileio.save_tensor(args.out, Y)
    with open(_ensemble_sidecar(args.out), "w") as fh:
        json.dump(E.metadata(), fh, indent=1)
    if args.dump_ensemble:
        for i, U in enumerate(E.matrices, start=1):
            fileio.save_tensor("%s_U%d.gtcs" % (args.dump_ensemble, i), U)
    print("wrote %s %s" % (args.out, "x".join(map(str, Y.shape))))


def _load_ensemble(args, Y):
    meta = None
    path = args.ensemble or _ensemble_sidecar(args.input)
    if os.path.exists(path):
        with open(path) as fh:
            meta = json.load(fh)
    if args.dims:
        dims = _ints(args.dims)
    elif meta:
        dims = meta["dims"]
    else:
        raise SystemExit("recover: need --dims or an ensemble file")
    seed = meta["seed"] if meta and args.seed_given is False else args.seed
    dist = meta["distribution"] if meta and args.distribution is None else (args.distribution or "gaussian")
    E = generate_ensemble(dims, Y.shape, dist, seed)
    if meta and list(meta["measures"]) != list(Y.shape):
        raise SystemExit("recover: ensemble measures %s do not match Y %s" % (meta["measures"], Y.shape))
    return E


def cmd_recover(args):
    Y = fileio.load_tensor(args.input)
    E = _load_ensemble(args, Y)
    basis = None
    if args.basis == "dct2":
        basis = harness.SparsifyingBasis.dct(E.dims)
    try:
        rep = harness.recover(args.method, Y, E, _solver(args), R=args.R, seed=args.seed, basis=basis)
    except RecoveryError as exc:
        print("recover failed: %s" % exc, file=sys.stderr)
        return 2
    if args.truth:
        rep.psnr = harness.psnr(fileio.load_tensor(args.truth), rep.recovered)
    if args.out:
        fileio.save_tensor(args.out, rep.recovered)
    text = rep.to_json(indent=1)
    if args.report:
        with open(args.report, "w") as fh:
            fh.write(text)
    print(text)
    return 0


def cmd_sweep(args, config):
    data = dict(config)
    for alias, name in (("m", "m_values"), ("R", "R_values")):
        if alias in data:
            data[name] = _int_range(data.pop(alias))
    overrides = {
        "dataset": args.dataset,
        "dims": _ints(args.dims) if args.dims else None,
        "methods": args.methods.split(",") if args.methods else None,
        "m_values": _int_range(args.m) if args.m is not None else None,
        "R_values": _int_range(args.R) if args.R is not None else None,
        "seeds": _int_range(args.seeds) if args.seeds is not None else None,
        "basis": args.basis,
        "path": args.path,
        "distribution": args.distribution,
        "tol": args.tol,
        "max_iters": args.max_iters,
        "penalty": args.penalty,
        "epsilon": args.epsilon,
        "seed": args.seed,
        "out": args.out,
        "reports_dir": args.reports_dir,
    }
    for k, v in overrides.items():
        if v is not None:
            data[k] = v
    spec = harness.ExperimentSpec.from_dict(data)
    out = spec.out or sys.stdout
    rows = harness.run_sweep(spec, out=out)
    if spec.out:
        print("wrote %d rows to %s" % (len(rows), spec.out), file=sys.stderr)
    return 0


def cmd_psnr(args):
    ref = fileio.load_tensor(args.reference)
    est = fileio.load_tensor(args.estimate)
    print("%.6f" % harness.psnr(ref, est, args.peak))


def cmd_bounds(args):
    dims = _ints(args.dims)
    p = BoundParams(args.s, args.c)
    try:
        out = {
            "dims": dims, "s": p.s, "c": p.c,
            "per_mode": [bound_per_mode(n, p) for n in dims],
            "kcs": bound_kcs(dims, p),
            "gtcs_total": bound_gtcs_total(dims, p),
            "note": "gtcs_total assumes every fiber is s-sparse and is very loose",
        }
    except VacuousBound as exc:
        print("bounds: %s" % exc, file=sys.stderr)
        return 2
    print(json.dumps(out, indent=1))
    return 0


def _require_out(args):
    if not args.out:
        raise SystemExit("--out is required")


def build_parser():
    def global_flags(default):
        # subcommands repeat the global flags; SUPPRESS keeps them from
        # overwriting a value given before the subcommand name
        parser = argparse.ArgumentParser(add_help=False)
        parser.add_argument("--seed", type=int, default=default)
        parser.add_argument("--tol", type=float, default=default, help="solver termination tolerance")
        parser.add_argument("--out", default=default)
        parser.add_argument("--config", default=default, help="JSON file with defaults for any flag")
        return parser

    p = argparse.ArgumentParser(prog="gtcs", description="tensor compressive sensing",
                                parents=[global_flags(None)])
    common = global_flags(argparse.SUPPRESS)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="write a dataset as GTCS1")
    g.add_argument("--dataset", required=False, default=None,
                   choices=[d for d in harness.DATASETS if d != "file"])
    g.add_argument("--dims", default=None, help="e.g. 64x64")

    s = sub.add_parser("sample", parents=[common], help="sample a tensor")
    s.add_argument("input")
    s.add_argument("--m", default=None, help="measurements per mode, one value or one per mode")
    s.add_argument("--distribution", default=None, choices=["gaussian", "bernoulli"])
    s.add_argument("--dump-ensemble", default=None, metavar="PREFIX",
                   help="also write U_i to PREFIX_U<i>.gtcs")

    r = sub.add_parser("recover", parents=[common], help="recover from measurements")
    r.add_argument("input")
    r.add_argument("--method", default=None)
    r.add_argument("--R", type=int, default=None, help="CP rank for MWCS")
    r.add_argument("--ensemble", default=None, help="ensemble JSON written by 'sample'")
    r.add_argument("--dims", default=None)
    r.add_argument("--distribution", default=None, choices=["gaussian", "bernoulli"])
    r.add_argument("--basis", default=None, choices=["identity", "dct2"])
    r.add_argument("--truth", default=None, help="ground truth GTCS1 for PSNR")
    r.add_argument("--report", default=None, help="write the JSON report here")

    w = sub.add_parser("sweep", parents=[common], help="run an experiment sweep")
    w.add_argument("--dataset", default=None, choices=list(harness.DATASETS))
    w.add_argument("--dims", default=None)
    w.add_argument("--methods", default=None, help="comma separated")
    w.add_argument("--m", default=None, help="e.g. 36:42 or 36,39")
    w.add_argument("--R", default=None, help="MWCS ranks, e.g. 1:24")
    w.add_argument("--seeds", default=None, help="e.g. 0:9")
    w.add_argument("--basis", default=None, choices=["identity", "dct2"])
    w.add_argument("--path", default=None, help="GTCS1 input for dataset 'file'")
    w.add_argument("--distribution", default=None, choices=["gaussian", "bernoulli"])
    w.add_argument("--reports-dir", default=None)

    q = sub.add_parser("psnr", parents=[common], help="PSNR of an estimate")
    q.add_argument("reference")
    q.add_argument("estimate")
    q.add_argument("--peak", type=float, default=None)

    b = sub.add_parser("bounds", parents=[common], help="measurement bounds")
    b.add_argument("--dims", default=None)
    b.add_argument("--s", type=int, default=None)
    b.add_argument("--c", type=float, default=None)

    for sp in (g, s, r, w, q, b):
        sp.add_argument("--max-iters", type=int, default=None)
        sp.add_argument("--penalty", type=float, default=None)
        sp.add_argument("--epsilon", type=float, default=None)
    return p


DEFAULTS = {
    "seed": 0, "tol": 1e-6, "max_iters": 10000, "penalty": 1.0, "epsilon": 0.0,
    "dataset": None, "m": None, "method": "GTCS_S", "s": None, "c": 1.0,
    "distribution": None,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    config = {}
    if args.config:
        with open(args.config) as fh:
            config = json.load(fh)
        if not isinstance(config, dict):
            raise SystemExit("config must be a JSON object")
    args.seed_given = args.seed is not None or "seed" in config
    if args.command == "sweep":
        # the sweep merges the config file itself, as ExperimentSpec fields
        return cmd_sweep(args, config) or 0
    # flags > config file > built-in defaults
    for key, value in list(vars(args).items()):
        if value is None:
            if key in config:
                setattr(args, key, config[key])
            elif key in DEFAULTS:
                setattr(args, key, DEFAULTS[key])
    if args.command == "gen":
        if not args.dataset:
            raise SystemExit("gen: --dataset is required")
        return cmd_gen(args) or 0
    if args.command == "sample":
        if args.m is None:
            raise SystemExit("sample: --m is required")
        args.distribution = args.distribution or "gaussian"
        return cmd_sample(args) or 0
    if args.command == "recover":
        return cmd_recover(args)
    if args.command == "psnr":
        return cmd_psnr(args) or 0
    if args.command == "bounds":
        if args.dims is None or args.s is None:
            raise SystemExit("bounds: --dims and --s are required")
        return cmd_bounds(args)
    return 1


if __name__ == "__main__":
    sys.exit(main())
