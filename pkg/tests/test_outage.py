import io

import numpy as np
import pytest

from intforce.errors import OutOfRange
from intforce.outage import (
    SNR_HEADER,
    OutageRow,
    SweepConfig,
    TrialRecord,
    crossing_snr,
    format_csv,
    isotonic,
    outage_rate,
    parse_csv,
    run_trials,
    sweep,
)
from intforce.receivers import MethodKind


def records(values):
    return [TrialRecord(i, {MethodKind.PROP2: v}) for i, v in enumerate(values)]


def test_order_statistic():
    recs = records(np.arange(100, 0, -1) / 100)
    assert outage_rate(recs, MethodKind.PROP2, 0.01) == pytest.approx(0.01)
    assert outage_rate(recs, MethodKind.PROP2, 0.05) == pytest.approx(0.05)
    assert outage_rate(records([0.3] * 50), MethodKind.PROP2, 0.01) == 0.0


def test_isotonic_and_crossing():
    assert np.array_equal(isotonic([0, 2, 1, 3]), [0, 2, 2, 3])
    curve = [(0, 0.0), (1, 1.0), (2, 2.0)]
    assert crossing_snr(curve, 1.5) == pytest.approx(1.5)
    assert crossing_snr(curve, 0.0) == 0.0
    with pytest.raises(OutOfRange):
        crossing_snr(curve, 2.5)


def test_config_validation():
    with pytest.raises(ValueError):
        SweepConfig(snr_grid_db=[0], nt_grid=[2], snr_db=10)
    with pytest.raises(ValueError):
        SweepConfig(nt_grid=[2])
    with pytest.raises(ValueError):
        SweepConfig(snr_grid_db=[0], rho=0)


def test_threads_do_not_change_records():
    cfg = SweepConfig(methods=["prop2", "prop4"], trials=24, snr_grid_db=[15], seed=3)
    a = run_trials(cfg, 15, threads=1)
    b = run_trials(cfg, 15, threads=2)
    assert [r.trial for r in b] == list(range(24))
    assert all(x.rates == y.rates for x, y in zip(a, b))


def test_outage_monotone_in_snr():
    cfg = SweepConfig(methods=["prop2"], trials=400, snr_grid_db=[5, 15, 25], seed=1)
    rows, failures = sweep(cfg)
    assert not failures
    rates = [r.rate for r in rows]
    assert rates == sorted(rates)


def test_infeasible_method_skipped():
    cfg = SweepConfig(n_t=3, n_r=3, methods=["prop2", "exh-gm-sif"], trials=5, snr_grid_db=[10])
    rows, failures = sweep(cfg)
    assert [r.method for r in rows] == [MethodKind.PROP2]
    assert (10, MethodKind.EXH_GM_SIF) in failures


def test_csv_roundtrip():
    rows = [OutageRow(10.0, MethodKind.PROP1, 100, 0.01, 1.2345678), OutageRow(10.5, MethodKind.PROP2, 100, 0.01, 2.0)]
    text = format_csv(rows)
    assert text.splitlines()[0] == SNR_HEADER
    assert text.splitlines()[1] == "10,prop1,100,0.01,1.23457"
    header, parsed = parse_csv(text)
    assert parsed[1].method is MethodKind.PROP2 and parsed[1].point == 10.5


def test_nt_sweep_uses_square_channel():
    cfg = SweepConfig(methods=["prop1"], trials=5, nt_grid=[2, 3], snr_db=20)
    assert cfg.channel_config(3).n_r == 3
    out = io.StringIO()
    rows, _ = sweep(cfg)
    from intforce.outage import emit_csv

    emit_csv(rows, out, cfg.kind)
    assert out.getvalue().splitlines()[2].startswith("3,prop1,5,")
