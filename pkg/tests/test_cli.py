import csv
import json
import subprocess
import sys

import pytest

from percolab.cli import ESTIMATE_COLUMNS, main, read_estimates


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows_of(text):
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def data_lines(text):
    # drop comment lines (manifest holds timestamps) and the wall_time column
    return [ln.rsplit(",", 1)[0] for ln in text.splitlines() if not ln.startswith("#")]


def test_enumerate_golden(capsys):
    assert run(capsys, "enumerate", "--event", "crossing_v(d=2,k=1,m=1)", "--p", "1/2")[1] == "7/16\n"
    code, out, _ = run(capsys, "enumerate", "--event", "two_arms(d=2,n=1)", "--p", "1/2", "--float")
    assert code == 0 and out.split() == ["123/512", "0.240234375"]


def test_estimate_rows(capsys):
    code, out, _ = run(capsys, "estimate", "--event", "crossing_v(d=2,k=1,m=1)", "--p", "1.0",
                       "--trials", "10")
    assert code == 0
    (row,) = rows_of(out)
    assert float(row["p_hat"]) == 1.0 and list(row) == ESTIMATE_COLUMNS
    assert out.startswith("# schema: percolab-estimate/1\n# manifest: {")
    code, out, _ = run(capsys, "estimate", "--event", "two_arms(d=2,n=4)", "--p", "0.5927",
                       "--trials", "10000", "--seed", "7")
    (row,) = rows_of(out)
    assert 0 <= float(row["p_hat"]) <= 1 and row["seed"] == "7" and row["trials"] == "10000"


def test_estimate_deterministic(capsys):
    args = ("estimate", "--event", "a2(d=2,m=1,n=5)", "--p", "pc", "--trials", "3000", "--seed", "3")
    first = run(capsys, *args)[1]
    second = run(capsys, *args)[1]
    assert data_lines(first) == data_lines(second)


def test_exit_codes(capsys):
    assert run(capsys, "estimate", "--p", "0.5")[0] == 2
    assert run(capsys, "estimate", "--event", "bogus(d=2)", "--p", "0.5")[0] == 2
    assert run(capsys, "estimate", "--event", "two_arms(d=2,n=2)", "--p", "1.5")[0] == 2
    assert run(capsys, "estimate", "--event", "two_arms(d=2,n=2)", "--p", "0.5", "--trials", "0")[0] == 2
    assert run(capsys, "enumerate", "--event", "two_arms(d=2,n=3)", "--p", "1/2")[0] == 3
    assert run(capsys, "estimate", "--event", "two_arms(d=3,n=300)", "--p", "0.3",
               "--trials", "1")[0] == 3
    assert run(capsys, "nonsense")[0] == 2


def test_verify_inclusions_ok(capsys):
    code, out, _ = run(capsys, "verify", "--check", "inclusions", "--d", "2", "--n", "1", "--M", "2")
    assert code == 0 and json.loads(out)["violations"] == 0


def test_verify_gluing_small(capsys):
    code, out, _ = run(capsys, "verify", "--check", "gluing", "--d", "2", "--n", "2", "--M", "2",
                       "--trials", "200", "--p", "0.3,0.5,0.7")
    assert code == 0 and json.loads(out)["counts"]["violation"] == 0


def test_verify_fault_exit_4(capsys, tmp_path):
    out_path = tmp_path / "v.json"
    code, _, err = run(capsys, "verify", "--check", "annulus", "--p", "1.0", "--trials", "3",
                       "--inject-fault", "crossing-false", "--out", str(out_path))
    assert code == 4
    summary = json.loads(out_path.read_text())
    assert summary["violations"] == 3 and summary["witnesses"][0]["check"] == "annulus"
    assert "violation" in err


def test_hidden_fault_flag_not_in_help(capsys):
    code, out, _ = run(capsys, "verify", "--help")
    assert code == 0 and "--check" in out and "inject" not in out


def test_help_documents_columns(capsys):
    code, out, _ = run(capsys, "--help")
    assert code == 0 and ",".join(ESTIMATE_COLUMNS) in out


def test_sweep_p0_and_schedule(capsys):
    code, out, _ = run(capsys, "sweep", "--family", "two_arms", "--d", "2", "--p", "0",
                       "--n", "1,2,4,8", "--trials", "100")
    assert code == 0
    assert [float(r["p_hat"]) for r in rows_of(out)] == [0.0] * 4
    code, out, _ = run(capsys, "sweep", "--family", "two_arms", "--d", "2", "--p", "0.5",
                       "--n-min", "1", "--n-max", "100", "--ratio", "16", "--M", "2", "--trials", "50")
    assert "# ratios_within_bound: True" in out and "# ratio_bound_8M: 16" in out


def test_sweep_a2_ratio_min(capsys):
    code, out, _ = run(capsys, "sweep", "--family", "a2_ratio", "--d", "2", "--M", "3", "--n", "2,4,8",
                       "--p", "pc", "--trials", "2000")
    assert code == 0
    specs = [r["spec"] for r in rows_of(out)]
    assert specs == ["a2(d=2,m=2,n=6)", "a2(d=2,m=4,n=12)", "a2(d=2,m=8,n=24)"]
    assert "# min_p_hat: " in out


def test_sweep_ratio_family(capsys):
    code, out, _ = run(capsys, "sweep", "--family", "ratio", "--d", "2", "--M", "2", "--n", "2,4",
                       "--p", "pc", "--trials", "2000")
    assert code == 0
    reports = [json.loads(ln.split("ratio: ", 1)[1]) for ln in out.splitlines()
               if ln.startswith("# ratio: ")]
    assert [r["n"] for r in reports] == [2, 4] and all(r["flag"] == "ok" for r in reports)


def test_sweep_fit_round_trip(tmp_path, capsys):
    sweep = tmp_path / "s.csv"
    code, _, _ = run(capsys, "sweep", "--family", "two_arms", "--d", "2", "--p", "pc", "--n", "2,4,8,16",
                     "--trials", "4000", "--out", str(sweep))
    assert code == 0 and (tmp_path / "s.csv.manifest.json").exists()
    rows = read_estimates(str(sweep))
    assert len(rows) == 4 and rows[0]["spec"] == "two_arms(d=2,n=2)"
    code, out, _ = run(capsys, "fit", "--input", str(sweep))
    fit = json.loads(out)
    assert code == 0 and len(fit["points"]) == 4 and fit["lower_bound"] == pytest.approx(11 / 21)


def test_fit_synthetic(tmp_path, capsys):
    path = tmp_path / "syn.csv"
    with open(path, "w", newline="") as fh:
        fh.write("# schema: percolab-estimate/1\n")
        w = csv.writer(fh)
        w.writerow(ESTIMATE_COLUMNS)
        for n in (2, 4, 8, 16):
            trials = 2**40
            succ = trials // n**2
            w.writerow([f"two_arms(d=2,n={n})", 2, 0.5, trials, succ, succ / trials, 0, 1, 0, 0.0])
    code, out, _ = run(capsys, "fit", "--input", str(path))
    assert code == 0 and json.loads(out)["alpha_hat"] == pytest.approx(2, abs=1e-9)


def test_replay_identical_tallies(tmp_path, capsys, monkeypatch):
    first = tmp_path / "e.csv"
    assert run(capsys, "estimate", "--event", "two_arms(d=2,n=6)", "--p", "pc", "--trials", "9000",
               "--seed", "5", "--out", str(first))[0] == 0
    manifest = json.loads((tmp_path / "e.csv.manifest.json").read_text())
    assert manifest["argv"][0] == "estimate" and manifest["outputs"] == [str(first)]
    ref = data_lines(first.read_text())
    for threads in ("1", "4", "16"):
        monkeypatch.setenv("PERCOLAB_THREADS", threads)
        again = tmp_path / f"e{threads}.csv"
        assert run(capsys, "replay", str(tmp_path / "e.csv.manifest.json"), "--out", str(again))[0] == 0
        assert data_lines(again.read_text()) == ref


def test_renorm_columns(capsys):
    code, out, _ = run(capsys, "renorm", "--d", "2", "--n", "1", "--M", "2", "--K", "1", "--p", "pc",
                       "--trials", "3", "--locality-trials", "10")
    assert code == 0
    (row,) = rows_of(out)
    assert list(row) == ["d", "n", "M", "p", "K", "density", "dependence_radius_checked"]
    assert row["dependence_radius_checked"] == "64"


def test_config_override(tmp_path, capsys):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[estimate]\norigin_policy = exclude\n[thresholds]\nd2 = 0.5\n")
    code, out, _ = run(capsys, "--config", str(cfg), "estimate", "--event", "two_arms(d=2,n=2)",
                       "--p", "pc", "--trials", "10")
    (row,) = rows_of(out)
    assert row["spec"] == "two_arms(d=2,n=2,origin=exclude)" and row["p"] == "0.5"


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "percolab", "enumerate", "--event",
                          "crossing_v(d=3,k=1,m=1)", "--p", "1/2"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip() == "175/256"
