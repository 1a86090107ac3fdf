"""Monte-Carlo outage-rate engine.

Trials are keyed by (seed, trial index) and evaluated independently, so the
records of a sweep do not depend on how many worker processes ran them.
"""
import io
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelConfig, make_bundle, sample_channel
from .errors import CapacityExceeded, OutOfRange, UnsupportedDimension
from .lattice import DEFAULT_L1_BOUND
from .receivers import MethodKind, evaluate_all

SNR_HEADER = "snr_db,method,trials,rho,outage_rate_bits_per_dim"
NT_HEADER = "n_users,method,trials,rho,outage_rate_bits_per_dim"


def fmt(x):
    """Six significant digits, the float format of every emitted file."""
    return f"{float(x):.6g}"


@dataclass
class SweepConfig:
    n_t: int = 2
    n_r: int = 2
    blocks: int = 2
    methods: list = field(default_factory=lambda: [MethodKind.PROP1, MethodKind.PROP2])
    trials: int = 10_000
    rho: float = 0.01
    snr_grid_db: list = None
    nt_grid: list = None
    snr_db: float = None  # fixed SNR of an N_T sweep
    seed: int = 0
    l1_bound: int = DEFAULT_L1_BOUND

    def __post_init__(self):
        self.methods = [m if isinstance(m, MethodKind) else MethodKind.parse(m) for m in self.methods]
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not 0 < self.rho <= 1:
            raise ValueError("rho must lie in (0, 1]")
        if (self.snr_grid_db is None) == (self.nt_grid is None):
            raise ValueError("give exactly one of snr_grid_db and nt_grid")
        if self.nt_grid is not None and self.snr_db is None:
            raise ValueError("an N_T sweep needs a fixed snr_db")

    @property
    def kind(self):
        return "snr_db" if self.snr_grid_db is not None else "n_users"

    @property
    def points(self):
        return list(self.snr_grid_db if self.snr_grid_db is not None else self.nt_grid)

    def channel_config(self, point):
        """Channel at one sweep point; N_T sweeps use N_R = N_T."""
        if self.kind == "snr_db":
            return ChannelConfig.from_db(self.n_t, self.n_r, self.blocks, point)
        n = int(point)
        return ChannelConfig.from_db(n, n, self.blocks, self.snr_db)

    def to_dict(self):
        return {
            "n_t": self.n_t,
            "n_r": self.n_r,
            "blocks": self.blocks,
            "methods": [m.value for m in self.methods],
            "trials": self.trials,
            "rho": self.rho,
            "snr_grid_db": self.snr_grid_db,
            "nt_grid": self.nt_grid,
            "snr_db": self.snr_db,
            "seed": self.seed,
            "l1_bound": self.l1_bound,
        }


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    rates: dict


@dataclass(frozen=True)
class OutageRow:
    point: float
    method: MethodKind
    trials: int
    rho: float
    rate: float


def evaluate_trial(config, methods, seed, trial, l1_bound=DEFAULT_L1_BOUND):
    bundle = make_bundle(sample_channel(config, seed, trial))
    reports = evaluate_all(bundle, methods, l1_bound)
    return TrialRecord(trial, {m: r.rate for m, r in reports.items()})


def _chunk(args):
    config, methods, seed, lo, hi, l1_bound = args
    return [evaluate_trial(config, methods, seed, t, l1_bound) for t in range(lo, hi)]


def _chunks(n, parts):
    step = max(1, math.ceil(n / parts))
    return [(lo, min(n, lo + step)) for lo in range(0, n, step)]


def run_trials(cfg, point, threads=1, methods=None):
    """Trial records at one sweep point, ordered by trial index."""
    config = cfg.channel_config(point)
    methods = list(methods or cfg.methods)
    if threads <= 1:
        return _chunk((config, methods, cfg.seed, 0, cfg.trials, cfg.l1_bound))
    jobs = [(config, methods, cfg.seed, lo, hi, cfg.l1_bound) for lo, hi in _chunks(cfg.trials, 4 * threads)]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(_chunk, jobs))
    return [rec for part in parts for rec in part]


def outage_rate(records, method, rho):
    """Empirical outage rate: the floor(rho*N)-th smallest rate (0 if that index is 0)."""
    if not records:
        raise ValueError("no records")
    method = MethodKind(method)
    rates = np.sort(np.array([r.rates[method] for r in records], dtype=float))
    k = math.floor(rho * len(rates) + 1e-9)
    if k < 1:
        return 0.0
    return float(rates[k - 1])


def isotonic(values):
    """Running maximum, making a noisy rate-vs-SNR curve nondecreasing."""
    return np.maximum.accumulate(np.asarray(values, dtype=float))


def crossing_snr(curve, target_rate):
    """SNR (dB) at which the cleaned curve first reaches target_rate (linear interpolation)."""
    pts = sorted((float(s), float(r)) for s, r in curve)
    if not pts:
        raise OutOfRange("empty curve")
    snr = np.array([p[0] for p in pts])
    rate = isotonic([p[1] for p in pts])
    if target_rate < rate[0] or target_rate > rate[-1]:
        raise OutOfRange(f"target {target_rate} outside [{rate[0]}, {rate[-1]}]")
    j = int(np.argmax(rate >= target_rate))
    if j == 0 or rate[j] == target_rate:
        return float(snr[j])
    s0, s1, r0, r1 = snr[j - 1], snr[j], rate[j - 1], rate[j]
    return float(s0 + (target_rate - r0) / (r1 - r0) * (s1 - s0))


def feasible_methods(cfg, point):
    """Split methods into those that run at this point and those that cannot."""
    config = cfg.channel_config(point)
    bundle = make_bundle(sample_channel(config, cfg.seed, 0))
    ok, failed = [], {}
    for m in cfg.methods:
        try:
            evaluate_all(bundle, [m], cfg.l1_bound)
            ok.append(m)
        except (CapacityExceeded, UnsupportedDimension) as exc:
            failed[m] = str(exc)
    return ok, failed


def sweep(cfg, threads=1, log=None):
    """Outage rows for every (point, method); infeasible methods are skipped and returned."""
    rows, failures = [], {}
    for point in cfg.points:
        methods, failed = feasible_methods(cfg, point)
        for m, msg in failed.items():
            failures[(point, m)] = msg
            if log:
                log(f"{cfg.kind}={point} method={m.value}: {msg}")
        if not methods:
            continue
        records = run_trials(cfg, point, threads, methods)
        for m in methods:
            rows.append(OutageRow(point, m, cfg.trials, cfg.rho, outage_rate(records, m, cfg.rho)))
        if log:
            log(f"{cfg.kind}={point} done")
    return rows, failures


def curve(rows, method):
    method = MethodKind(method)
    return [(r.point, r.rate) for r in rows if r.method == method]


def snr_gap(rows, better, worse, target_rate):
    """How many dB earlier ``better`` reaches target_rate than ``worse``."""
    return crossing_snr(curve(rows, worse), target_rate) - crossing_snr(curve(rows, better), target_rate)


def format_csv(rows, kind="snr_db"):
    out = io.StringIO()
    out.write((SNR_HEADER if kind == "snr_db" else NT_HEADER) + "\n")
    for r in rows:
        point = fmt(r.point) if kind == "snr_db" else str(int(r.point))
        out.write(f"{point},{r.method.value},{r.trials},{fmt(r.rho)},{fmt(r.rate)}\n")
    return out.getvalue()


def emit_csv(rows, destination, kind="snr_db"):
    """Write rows to a path, a text stream, or stdout when destination is None or '-'."""
    text = format_csv(rows, kind)
    if destination is None or destination == "-":
        sys.stdout.write(text)
        return
    if hasattr(destination, "write"):
        destination.write(text)
        return
    try:
        with open(destination, "w", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {destination}: {exc.strerror or exc}") from exc


def parse_csv(text):
    lines = text.strip("\n").split("\n")
    header = lines[0].split(",")
    rows = []
    for line in lines[1:]:
        p, m, trials, rho, rate = line.split(",")
        rows.append(OutageRow(float(p), MethodKind(m), int(trials), float(rho), float(rate)))
    return header, rows
