"""Command-line entry point: ``intforce {rate,outage,fer,reduce}``.

Exit codes: 0 success, 2 usage, 3 capacity or feasibility, 4 I/O.
"""
import argparse
import datetime as _dt
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .channel import BlockChannel, ChannelConfig, make_bundle, sample_channel
from .errors import CapacityExceeded, ConstructionFailed, NotPositiveDefinite, UnsupportedDimension
from .lattice import DEFAULT_L1_BOUND, exhaustive_sivp, kz_reduce_approx, lagrange_reduce, lll_reduce, row_forms
from .numerics import int_det
from .outage import SweepConfig, emit_csv, fmt, sweep
from .receivers import MethodKind, evaluate

EXIT_OK, EXIT_USAGE, EXIT_CAPACITY, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("intforce")


class UsageError(Exception):
    pass


def read_matrix_blocks(path):
    """Whitespace-separated rows; blank lines separate blocks."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror or exc}") from exc
    blocks, cur = [], []
    for line in text.splitlines() + [""]:
        line = line.split("#", 1)[0].strip()
        if line:
            try:
                cur.append([float(v) for v in line.split()])
            except ValueError:
                raise UsageError(f"{path}: non-numeric entry in {line!r}") from None
        elif cur:
            if len({len(r) for r in cur}) != 1:
                raise UsageError(f"{path}: ragged rows")
            blocks.append(np.array(cur))
            cur = []
    if not blocks:
        raise UsageError(f"{path}: no matrix found")
    return blocks


def _fmt_row(row):
    return " ".join(fmt(v) if isinstance(v, float) or np.issubdtype(type(v), np.floating) else str(int(v)) for v in row)


def _methods(text):
    if isinstance(text, (list, tuple)):
        items = text
    else:
        items = [t for t in str(text).split(",") if t.strip()]
    try:
        return [MethodKind.parse(t).value for t in items]
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _load_config(path):
    if not path:
        return {}
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})") from None
    # A manifest carries its resolved config under "config".
    return data.get("config", data) if isinstance(data, dict) else {}


def _merge(args, keys, defaults):
    """Flags override the JSON config, which overrides defaults."""
    cfg = dict(defaults)
    file_cfg = _load_config(getattr(args, "config", None))
    for k in keys:
        if k in file_cfg:
            cfg[k] = file_cfg[k]
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    return cfg


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def write_manifest(out, command, config, seed, started):
    """JSON manifest next to the CSV (``<out>.manifest.json``)."""
    if out in (None, "-"):
        return None
    path = out + ".manifest.json"
    doc = {
        "command": command,
        "config": config,
        "seed": seed,
        "version": __version__,
        "started": started,
        "finished": _now(),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _threads(value):
    return value if value else (os.cpu_count() or 1)


def cmd_rate(args):
    cfg = _merge(args, ["snr_db", "nt", "nr", "blocks", "method", "seed", "trial", "l1_bound"],
                 {"snr_db": 20.0, "nt": 2, "nr": 2, "blocks": 2, "method": "prop2", "seed": 0, "trial": 0,
                  "l1_bound": DEFAULT_L1_BOUND})
    method = MethodKind.parse(_methods([cfg["method"]])[0])
    config = ChannelConfig.from_db(cfg["nt"], cfg["nr"], cfg["blocks"], cfg["snr_db"])
    if args.channel_file:
        h = np.stack(read_matrix_blocks(args.channel_file))
        if h.shape != (config.blocks, config.n_r, config.n_t):
            raise UsageError(f"channel file holds {h.shape}, expected {(config.blocks, config.n_r, config.n_t)}")
        channel = BlockChannel(config, h)
    else:
        channel = sample_channel(config, cfg["seed"], cfg["trial"])
    rep = evaluate(make_bundle(channel), method, cfg["l1_bound"])
    out = sys.stdout
    out.write(f"method {rep.method.value}\n")
    if rep.note:
        out.write(f"note {rep.note}\n")
    out.write("A\n")
    for row in rep.a_matrix:
        out.write(_fmt_row([int(v) for v in row]) + "\n")
    out.write("variance per block (rows) and user (columns)\n")
    for row in rep.per_row_variance:
        out.write(_fmt_row([float(v) for v in row]) + "\n")
    out.write(f"rate {fmt(rep.rate)}\n")
    return EXIT_OK


def _grid(lo, hi, step):
    if step <= 0 or hi < lo:
        raise UsageError("need snr-step > 0 and snr-max >= snr-min")
    n = int(round((hi - lo) / step))
    return [round(lo + i * step, 10) for i in range(n + 1)]


def cmd_outage(args):
    started = _now()
    keys = ["nt", "nr", "blocks", "methods", "snr_min", "snr_max", "snr_step", "nt_list", "snr_db",
            "rho", "trials", "seed", "l1_bound"]
    cfg = _merge(args, keys, {"nt": 2, "nr": 2, "blocks": 2, "methods": "prop1,prop2", "rho": 0.01,
                              "trials": 10_000, "seed": 0, "l1_bound": DEFAULT_L1_BOUND})
    methods = _methods(cfg["methods"])
    cfg["methods"] = ",".join(methods)
    if cfg.get("nt_list"):
        nts = [int(v) for v in str(cfg["nt_list"]).split(",")] if not isinstance(cfg["nt_list"], list) else cfg["nt_list"]
        if cfg.get("snr_db") is None:
            raise UsageError("--nt-list needs --snr-db")
        grid, nt_grid = None, nts
    else:
        if cfg.get("snr_min") is None or cfg.get("snr_max") is None:
            raise UsageError("give --snr-min/--snr-max (and --snr-step) or --nt-list with --snr-db")
        grid, nt_grid = _grid(cfg["snr_min"], cfg["snr_max"], cfg.get("snr_step") or 1.0), None
    try:
        sc = SweepConfig(cfg["nt"], cfg["nr"], cfg["blocks"], methods, int(cfg["trials"]), float(cfg["rho"]),
                         grid, nt_grid, cfg.get("snr_db"), int(cfg["seed"]), int(cfg["l1_bound"]))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    rows, failures = sweep(sc, _threads(args.threads), log=log.info)
    for (point, m), msg in failures.items():
        print(f"warning: {m.value} skipped at {point}: {msg}", file=sys.stderr)
    emit_csv(rows, args.out, sc.kind)
    write_manifest(args.out, "outage", cfg, sc.seed, started)
    if failures and not rows:
        return EXIT_CAPACITY
    return EXIT_OK


def cmd_fer(args):
    from .coded.ldpc import build_root_ldpc
    from .coded.pipeline import emit_fer_csv, fer_sim

    started = _now()
    keys = ["n", "blocks", "nt", "nr", "methods", "snr_db_list", "max_frames", "max_errors", "seed", "code_seed"]
    cfg = _merge(args, keys, {"n": 208, "blocks": 2, "nt": 2, "nr": 2, "methods": "am-if,prop2",
                              "max_frames": 10_000, "max_errors": 100, "seed": 0, "code_seed": 0})
    cfg["methods"] = ",".join(_methods(cfg["methods"]))
    if not cfg.get("snr_db_list"):
        raise UsageError("--snr-db-list is required")
    snrs = cfg["snr_db_list"]
    if not isinstance(snrs, list):
        try:
            snrs = [float(v) for v in str(snrs).split(",")]
        except ValueError:
            raise UsageError("--snr-db-list must be comma-separated numbers") from None
    cfg["snr_db_list"] = snrs
    code = build_root_ldpc(int(cfg["n"]), int(cfg["blocks"]), int(cfg["code_seed"]))
    rows = fer_sim(code, int(cfg["nt"]), int(cfg["nr"]), cfg["methods"].split(","), snrs,
                   int(cfg["max_frames"]), int(cfg["max_errors"]), int(cfg["seed"]), _threads(args.threads))
    emit_fer_csv(rows, args.out)
    write_manifest(args.out, "fer", cfg, int(cfg["seed"]), started)
    return EXIT_OK


def cmd_reduce(args):
    M = read_matrix_blocks(args.gram_file)[0]
    if M.shape[0] != M.shape[1]:
        raise UsageError("Gram matrix must be square")
    algo = args.algo
    if algo == "lll":
        U = lll_reduce(M)
    elif algo == "lagrange":
        U = lagrange_reduce(M)
    elif algo == "kz":
        U = kz_reduce_approx(M)
    else:
        U = exhaustive_sivp(M, args.l1_bound)
    print("U")
    for row in U:
        print(_fmt_row([int(v) for v in row]))
    print("forms " + _fmt_row([float(v) for v in row_forms(U, M)]))
    print(f"det {int_det(np.asarray(U, dtype=np.int64))}")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="intforce", description="Integer-forcing receivers over block-fading MIMO MAC.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("rate", help="rate of one method on one channel")
    r.add_argument("--config")
    r.add_argument("--snr-db", type=float)
    r.add_argument("--nt", type=int)
    r.add_argument("--nr", type=int)
    r.add_argument("--blocks", type=int)
    r.add_argument("--method")
    r.add_argument("--seed", type=int)
    r.add_argument("--trial", type=int)
    r.add_argument("--l1-bound", type=int)
    r.add_argument("--channel-file")
    r.set_defaults(func=cmd_rate)

    o = sub.add_parser("outage", help="outage-rate sweep to CSV")
    o.add_argument("--config")
    o.add_argument("--nt", type=int)
    o.add_argument("--nr", type=int)
    o.add_argument("--blocks", type=int)
    o.add_argument("--methods")
    o.add_argument("--snr-min", type=float)
    o.add_argument("--snr-max", type=float)
    o.add_argument("--snr-step", type=float)
    o.add_argument("--nt-list")
    o.add_argument("--snr-db", type=float)
    o.add_argument("--rho", type=float)
    o.add_argument("--trials", type=int)
    o.add_argument("--seed", type=int)
    o.add_argument("--l1-bound", type=int)
    o.add_argument("--threads", type=int)
    o.add_argument("--out")
    o.set_defaults(func=cmd_outage)

    f = sub.add_parser("fer", help="coded frame-error-rate simulation to CSV")
    f.add_argument("--config")
    f.add_argument("--n", type=int)
    f.add_argument("--blocks", type=int)
    f.add_argument("--nt", type=int)
    f.add_argument("--nr", type=int)
    f.add_argument("--methods")
    f.add_argument("--snr-db-list")
    f.add_argument("--max-frames", type=int)
    f.add_argument("--max-errors", type=int)
    f.add_argument("--seed", type=int)
    f.add_argument("--code-seed", type=int)
    f.add_argument("--threads", type=int)
    f.add_argument("--out")
    f.set_defaults(func=cmd_fer)

    d = sub.add_parser("reduce", help="reduce a Gram matrix")
    d.add_argument("--gram-file", required=True)
    d.add_argument("--algo", choices=["lll", "lagrange", "kz", "exhaustive"], default="lll")
    d.add_argument("--l1-bound", type=int, default=DEFAULT_L1_BOUND)
    d.set_defaults(func=cmd_reduce)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)  # argparse exits with 2 on bad usage
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CapacityExceeded, UnsupportedDimension) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except ConstructionFailed as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NotPositiveDefinite, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
