import statistics

import pytest
from scipy import stats

from conftest import GOLDEN_DIR
from wmsnsim.batch import (
    CSV_COLUMNS,
    CSV_FILE,
    CSV_SCHEMA,
    DEBUG_FILE,
    METRICS,
    NA,
    RESULT_FILE,
    BatchSpec,
    compare_golden,
    read_summary,
    run_batch,
    t_half_width,
)
from wmsnsim.cli import EXIT_ERROR, EXIT_MISMATCH, EXIT_OK, main
from wmsnsim.mobility import parse_bonnmotion
from wmsnsim.video import parse_encoder_trace

SHORT = """\
sim-time-limit = 30s
seed-set = 1
SN.intruder.xCoor = 56
SN.intruder.yCoor = 56
SN.wirelessChannel.PLd0 = 46
SN.node[*].Communication.Routing.minLinkQuality = 0.95
SN.node[*].Application.frameSizeI = 500
SN.node[*].Application.frameSizeP = 100
SN.node[*].Application.frameSizeB = 50
SN.node[*].Application.mtuPayload = 100
"""


@pytest.fixture
def short_ini(tmp_path):
    p = tmp_path / "short.ini"
    p.write_text(SHORT)
    return p


def test_t_half_width_oracle():
    vals = [0.2, 0.5, 0.4, 0.9, 0.3]
    sem = statistics.stdev(vals) / len(vals) ** 0.5
    assert t_half_width(vals) == pytest.approx(stats.t.ppf(0.975, 4) * sem, rel=1e-12)
    assert t_half_width([0.7] * 6) == 0.0
    assert t_half_width([0.7]) is None


def test_replicate_seeds():
    assert BatchSpec.replicate(1) == list(range(1, 21))
    with pytest.raises(ValueError):
        BatchSpec.replicate(1, 0)


def test_batch_rows_and_aggregate(short_ini, tmp_path):
    text = short_ini.read_text().replace("seed-set = 1", "seed-set = 1\nSN.node[*].Application.fecMode = ${fec=\"none\", \"qoe_aware\"}")
    short_ini.write_text(text)
    out = tmp_path / "out"
    res = run_batch(BatchSpec(short_ini, [1, 2, 3], out))
    rows = read_summary(out / CSV_FILE)
    assert len(rows) == 2 * 3 + 2
    assert (out / CSV_FILE).read_text().splitlines()[:2] == [CSV_SCHEMA, ",".join(CSV_COLUMNS)]
    for point in ("0", "1"):
        data = [r for r in rows if r["point"] == point and r["row"] == "data"]
        (agg,) = [r for r in rows if r["point"] == point and r["row"] == "aggregate"]
        assert [r["seed"] for r in data] == ["1", "2", "3"]
        for m in METRICS:
            vals = [float(r[m]) for r in data if r[m] != NA]
            if vals:
                assert float(agg[m]) == pytest.approx(statistics.fmean(vals), rel=1e-12)
    assert rows[0]["sweep"] == "fec=none"
    assert len(res.reports) == 6


def test_single_seed_ci_not_applicable(short_ini, tmp_path):
    run_batch(BatchSpec(short_ini, [4], tmp_path / "o"))
    agg = [r for r in read_summary(tmp_path / "o" / CSV_FILE) if r["row"] == "aggregate"][0]
    assert all(agg[m + "_ci95"] == NA for m in METRICS)


def test_parallel_batch_matches_serial(short_ini, tmp_path):
    run_batch(BatchSpec(short_ini, [1, 2], tmp_path / "a", frozenset({"result"})))
    run_batch(BatchSpec(short_ini, [1, 2], tmp_path / "b", frozenset({"result"}), jobs=2))
    ok, report = compare_golden(tmp_path / "a", tmp_path / "b")
    assert ok, report
    assert (tmp_path / "a" / "point-0" / "seed-2" / RESULT_FILE).exists()


def test_cli_run_twice_identical(short_ini, tmp_path):
    for name in ("x", "y"):
        assert main(["run", "--config", str(short_ini), "--seed", "3", "--out", str(tmp_path / name)]) == EXIT_OK
    assert {p.name for p in (tmp_path / "x").iterdir()} >= {RESULT_FILE, DEBUG_FILE}
    assert main(["compare", "--golden", str(tmp_path / "x"), "--produced", str(tmp_path / "y")]) == EXIT_OK


def test_missing_config_leaves_nothing(tmp_path, capsys):
    out = tmp_path / "never"
    assert main(["run", "--config", str(tmp_path / "nope.ini"), "--out", str(out)]) == EXIT_ERROR
    assert not out.exists() or not any(out.iterdir())
    assert "error" in capsys.readouterr().err


def test_parse_error_reports_location(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("sim-time-limit = 10s\nSN.a = 1\nSN.a = 2\n")
    assert main(["run", "--config", str(bad), "--out", str(tmp_path / "o")]) == EXIT_ERROR
    err = capsys.readouterr().err
    assert "bad.ini" in err and "3" in err


def test_sweep_config_rejected_by_run(short_ini, tmp_path):
    short_ini.write_text(SHORT + "SN.node[*].Application.fecMode = ${fec=\"none\", \"simple\"}\n")
    assert main(["run", "--config", str(short_ini), "--out", str(tmp_path / "o")]) == EXIT_ERROR


def test_compare_flipped_byte(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        d.mkdir()
        (d / "f.txt").write_bytes(b"hello world\n")
    assert main(["compare", "--golden", str(a), "--produced", str(b)]) == EXIT_OK
    (b / "f.txt").write_bytes(b"hello_world\n")
    assert main(["compare", "--golden", str(a), "--produced", str(b)]) == EXIT_MISMATCH
    assert "DIFF f.txt: first difference at byte 5" in capsys.readouterr().out


def test_compare_missing_and_extra(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir(), b.mkdir()
    (a / "only-golden").write_text("x")
    (b / "only-produced").write_text("x")
    ok, report = compare_golden(b, a)
    assert not ok
    assert "MISSING only-golden: absent from produced" in report
    assert "EXTRA only-produced: absent from golden" in report


def test_gen_mobility_and_trace(tmp_path):
    mob = tmp_path / "m.txt"
    assert main(["gen-mobility", "--model", "rwp", "--nodes", "3", "--duration", "50", "--out", str(mob)]) == 0
    assert len(parse_bonnmotion(mob.read_text(), (80, 80))) == 3
    walk = tmp_path / "w.txt"
    assert main(["gen-mobility", "--model", "walk", "--start", "10,10", "--out", str(walk)]) == 0
    assert main(["gen-mobility", "--model", "gauss-markov", "--out", str(tmp_path / "g.txt")]) == 0
    tr = tmp_path / "t.txt"
    assert main(["gen-trace", "--pattern", "IPPP", "--frames", "8", "--out", str(tr)]) == 0
    assert "".join(f.frame_type for f in parse_encoder_trace(tr.read_text())) == "IPPPIPPP"


def test_bad_emit_kind(short_ini, tmp_path):
    assert main(["run", "--config", str(short_ini), "--out", str(tmp_path / "o"), "--emit", "pdf"]) == EXIT_ERROR
