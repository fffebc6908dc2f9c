import json
import math

import numpy as np
import pytest

from mdepld import cli, harness
from mdepld.exact import BernoulliChain, pmf_dp, two_runs
from mdepld.families import Poisson, tail
from mdepld.ldcore import HeinrichInstability


def run(capsys, *argv):
    code = cli.main(list(argv))
    return code, capsys.readouterr().out


def _csv_rows(text):
    header = {}
    rows = []
    cols = None
    for line in text.splitlines():
        if line.startswith("# "):
            k, _, v = line[2:].partition("=")
            header[k] = v
        elif cols is None:
            cols = line.split(",")
        else:
            rows.append(dict(zip(cols, line.split(","))))
    return header, rows


def test_exact_mean_header(capsys):
    code, out = run(capsys, "exact", "--stat", "two-runs", "--n", "1000", "--p", "0.05")
    assert code == 0
    header, _ = _csv_rows(out)
    assert float(header["mean"]) == pytest.approx(2.5, rel=1e-12)


def test_exact_small_table(capsys):
    _, out = run(capsys, "exact", "--stat", "two-runs", "--n", "2", "--p", "0.5")
    _, rows = _csv_rows(out)
    assert [float(r["prob"]) for r in rows] == pytest.approx([5 / 8, 1 / 4, 1 / 8], rel=1e-15)
    assert [r["x"] for r in rows] == ["0", "1", "2"]


def test_exact_point_mass(capsys):
    _, out = run(capsys, "exact", "--stat", "two-runs", "--n", "7", "--p", "0", "--format", "json")
    doc = json.loads(out)
    assert doc["masses"][0] == 1.0 or math.exp(doc["masses"][0]) == 1.0


def test_exact_memory_guard_exit_code(capsys):
    code = cli.main(["exact", "--n", "100000000", "--p", "0.5", "--method", "dp"])
    assert code == 2


def test_output_env_and_file(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path))
    assert cli.main(["exact", "--n", "5", "--p", "0.3"]) == 0
    assert (tmp_path / "pmf.csv").read_text().startswith("# schema=1")
    target = tmp_path / "sub" / "x.json"
    assert cli.main(["exact", "--n", "5", "--p", "0.3", "--format", "json", "--out", str(target)]) == 0
    assert json.loads(target.read_text())["truncated"] is False


def test_approx_outputs_and_regime_error(capsys):
    code, out = run(capsys, "approx", "--family", "poisson", "--lam", "2", "--x", "0:3")
    assert code == 0
    assert "Poisson" in out
    assert cli.main(["approx", "--family", "nb", "--n", "2", "--p", "0.9", "--x", "1"]) == 2


def test_ratio_theorem3_example(capsys):
    _, out = run(capsys, "ratio", "--theorem", "3", "--n", "20000", "--p", "0.05", "--x", "50")
    header, rows = _csv_rows(out)
    assert len(rows) == 1 and rows[0]["x"] == "50"
    assert 0.9 <= float(rows[0]["ratio"]) <= 1.1
    assert float(header["mean"]) == pytest.approx(50.0, rel=1e-12)


def test_ratio_theorem1_at_mean(capsys):
    _, out = run(capsys, "ratio", "--theorem", "1", "--stat", "two-runs", "--m", "1",
                 "--n", "400", "--p", "0.5", "--x", "100")
    _, rows = _csv_rows(out)
    assert float(rows[0]["y"]) == 0
    assert float(rows[0]["log_main_term"]) == 0


def test_ratio_theorem2_at_mean_uses_plain_poisson():
    setup = harness.make_setup(2, 400, 0.5, stat="two-runs", m=1)
    rep = harness.ratio_report(setup, xs=[100])
    row = rep.rows[0]
    assert row["log_approx"] == pytest.approx(tail(Poisson(100.0), 100).logval, rel=1e-14)


def test_ratio_report_invariants():
    for th, n, p in ((1, 3000, 0.02), (2, 3000, 0.02), (3, 2000, 0.1), (4, 2000, 0.05)):
        rep = harness.ratio_report(harness.make_setup(th, n, p, mode="relaxed"), "sd:2")
        xs = [r["x"] for r in rep.rows]
        assert xs == sorted(xs) and xs
        for row in rep.rows:
            assert row["log_exact"] <= 0 and row["log_approx"] <= 0
            assert row["ratio"] == pytest.approx(math.exp(row["log_exact"] - row["log_approx"]), rel=1e-12)


def test_ratio_report_matches_independent_dp():
    setup = harness.make_setup(3, 300, 0.2)
    rep = harness.ratio_report(setup, xs=[10, 12])
    pmf = pmf_dp(two_runs(), BernoulliChain(300, 0.2))
    for r in rep.rows:
        assert r["log_exact"] == pytest.approx(float(pmf.log_masses[r["x"]]), rel=1e-12)


def test_ratio_rejects_wrong_statistic():
    with pytest.raises(ValueError):
        harness.make_setup(3, 100, 0.1, stat="n11")


def test_resolve_xs_rules():
    assert harness.resolve_xs("absolute:3:5", 10.0) == [3, 4, 5]
    assert harness.resolve_xs("list:7,3,7", 10.0) == [3, 7]
    assert harness.resolve_xs("sd:1", 16.0) == list(range(12, 21))
    assert harness.resolve_xs("y:0.1", 100.0) == list(range(90, 111))
    assert harness.resolve_xs("sd-points:1,2", 100.0) == [110, 120]
    assert harness.resolve_xs("zone:1", 50.0, 2.5) == list(range(48, 53))
    with pytest.raises(ValueError):
        harness.resolve_xs("nope:1", 1.0)


def test_check_conditions_command(capsys):
    code, out = run(capsys, "check-conditions", "--stat", "n11", "--m", "2", "--n", "3000000",
                    "--p", "6.7e-6", "--x", "21")
    assert code == 0
    doc = json.loads(out)
    assert doc["inputs"]["n_blocks"] == 1_500_000
    assert {c["clause"]: c["pass"] for c in doc["clauses"]}["nu1_small"]


SWEEP = """\
[sweep]
theorem = 3
x_rule = sd:2
mode = relaxed

[schedule]
n = 2000, 20000
p = power:0.5:-0.25
"""


def test_sweep_config_grammar(tmp_path):
    path = tmp_path / "s.ini"
    path.write_text(SWEEP + "\n[thresholds]\ny_bound = 0.3\n")
    cfg = harness.load_sweep_config(path)
    assert cfg.theorem == 3 and cfg.x_rule == "sd:2"
    assert cfg.points == ((2000, 0.5 * 2000**-0.25), (20000, 0.5 * 20000**-0.25))
    assert cfg.thresholds.y_bound == 0.3
    bad = tmp_path / "bad.ini"
    bad.write_text("[sweep]\ntheorem = 3\n[schedule]\nn =\n")
    with pytest.raises(ValueError):
        harness.load_sweep_config(bad)


def test_sweep_writes_reports_and_is_deterministic(tmp_path, capsys):
    path = tmp_path / "s.ini"
    path.write_text(SWEEP)
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["sweep", str(path), "--out", str(a), "--seed", "3"]) == 0
    assert cli.main(["sweep", str(path), "--out", str(b), "--seed", "3", "--workers", "2"]) == 0
    capsys.readouterr()
    names = sorted(p.name for p in a.iterdir())
    assert names == ["point-000.csv", "point-001.csv", "summary.csv"]
    for name in names:
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert "# strictly_decreasing=1" in (a / "summary.csv").read_text()


def test_sweep_skips_empty_zone_and_flags_errors(tmp_path, capsys):
    path = tmp_path / "s.ini"
    path.write_text("[sweep]\ntheorem = 3\nx_rule = absolute:5:4\n[schedule]\nn = 2000\np = 0.1\n")
    assert cli.main(["sweep", str(path), "--out", str(tmp_path / "o")]) == 0
    assert ",skipped" in capsys.readouterr().out
    path.write_text("[sweep]\ntheorem = 3\n[schedule]\nn = 2, 2000\np = 0.9, 0.1\n")
    assert cli.main(["sweep", str(path), "--out", str(tmp_path / "e")]) == 2
    summary = (tmp_path / "e" / "summary.csv").read_text()
    assert "error:" in summary and ",ok" in summary


def test_verify_lemmas_default_and_deterministic(capsys, tmp_path):
    code, first = run(capsys, "verify-lemmas", "--seed", "5")
    assert code == 0
    assert "overall PASS" in first
    _, second = run(capsys, "verify-lemmas", "--seed", "5")
    assert first == second
    assert cli.main(["verify-lemmas", "--only", "poisson-tilt", "--out", str(tmp_path / "l.json")]) == 0
    assert json.loads((tmp_path / "l.json").read_text())["pass"] is True


def test_verify_gamma_alias_grid(capsys):
    code, out = run(capsys, "verify-lemmas", "--only", "gamaf", "--grid", "1:1000:0.5")
    assert code == 0
    assert "gamma-bounds" in out and "cases=1999" in out


def test_lemma_failure_exit_code(monkeypatch, capsys):
    bad = harness.LemmaCheck("forced")
    bad.record(-1.0, "forced failure")
    monkeypatch.setattr(harness, "run_lemma_suite", lambda *a, **k: [bad])
    assert cli.main(["verify-lemmas"]) == cli.EXIT_VERIFY


def test_instability_exit_code(monkeypatch, capsys):
    def boom(*a, **k):
        raise HeinrichInstability("factor too small")

    monkeypatch.setattr(harness, "ratio_report", boom)
    assert cli.main(["ratio", "--theorem", "3", "--n", "100", "--p", "0.1", "--x", "1"]) == 3


def test_fitted_constant_header():
    setup = harness.make_setup(1, 3_000_000, 6.7e-6)
    rep = harness.ratio_report(setup, "y:0.1")
    k = rep.header["fitted_K"]
    assert math.isfinite(k) and k < 100
    for row in rep.rows:
        if row["conditions_ok"]:
            assert abs(row["ratio_over_main"] - 1) <= k * row["error_scale"] * (1 + 1e-12)


def test_csv_floats_round_trip():
    v = 0.1 + 0.2
    assert float(harness.fmt(v)) == v
    assert np.isnan(float(harness.fmt(math.nan)))
