import csv
import io
import json
import math
import subprocess
import sys

import pytest

from sizebias.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def rows_of(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_bound_example(capsys):
    code, out, _ = run(capsys, "bound", "--a", "2", "--c", "1", "--x", "4", "--format", "csv")
    assert code == 0
    rows = {r["bound"]: r for r in rows_of(out)}
    assert float(rows["product"]["value"]) == pytest.approx(1 / 3, rel=1e-11)
    assert float(rows["gamma"]["value"]) == pytest.approx(1 / 3, rel=1e-11)
    assert rows["product"]["best"] == "True"


def test_bound_at_mean_all_one(capsys):
    _, out, _ = run(capsys, "bound", "--a", "5", "--c", "1", "--x", "5", "--format", "json")
    rows = json.loads(out)
    assert {r["side"] for r in rows} == {"upper", "lower"}
    assert all(r["value"] == 1.0 for r in rows)


def test_bound_best_lower(capsys):
    _, out, _ = run(capsys, "bound", "--a", "5", "--c", "1", "--x", "2", "--format", "json")
    best = [r for r in json.loads(out) if r["best"]]
    assert len(best) == 1 and best[0]["bound"] == "mgf"
    assert best[0]["value"] == pytest.approx(0.3112, abs=1e-4)
    assert best[0]["value_log10"] == pytest.approx(math.log10(best[0]["value"]), abs=1e-12)


def test_bound_range_and_hoeffding(capsys):
    code, out, _ = run(capsys, "bound", "--a", "2", "--c", "1", "--x-range", "2:6:0.5", "--n", "6")
    assert code == 0
    assert "hoeffding" in out
    assert out.count("\n") > 9


@pytest.mark.parametrize("argv", [
    ["bound", "--a", "-1", "--c", "1", "--x", "1"],
    ["bound", "--a", "1", "--c", "0", "--x", "1"],
    ["bound", "--a", "1", "--c", "1", "--x", "-2"],
    ["bound", "--a", "1", "--c", "1"],
    ["bound", "--a", "1", "--c", "1", "--x", "1", "--x-range", "0:1:1"],
    ["bound", "--a", "1", "--c", "1", "--x-range", "0:1"],
    ["dickman", "--u", "80"],
    ["sample", "poisson:mean=zz"],
    ["verify", "poisson:mean=5", "--delta", "2"],
    ["couple", "uniform-sum:b=1,m=2", "--size-bias"],
    ["couple", "poisson:mean=1"],
])
def test_usage_errors_exit_one(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 1
    assert "error" in err


def test_argparse_errors_exit_one(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["nosuchcommand"])
    assert exc.value.code == 1


def test_spec_error_names_token(capsys):
    _, _, err = run(capsys, "sample", "binomial:n=3,q=0.5")
    assert "'q'" in err


def test_dickman_table(capsys):
    _, out, _ = run(capsys, "dickman", "--u", "0.5,2,10", "--format", "json")
    rows = json.loads(out)
    assert rows[0]["rho"] == 1.0
    assert rows[1]["rho"] == pytest.approx(1 - math.log(2), rel=1e-10)
    assert rows[2]["rho"] <= 1 / math.factorial(10)
    assert all(r["rho_le_inv_gamma"] for r in rows)


def test_dickman_range(capsys):
    _, out, _ = run(capsys, "dickman", "--u-range", "0:32:0.25", "--format", "csv")
    rows = rows_of(out)
    assert len(rows) == 129
    assert all(r["rho_le_inv_gamma"] == "True" for r in rows)


def test_sample_dickman(capsys):
    _, out, _ = run(capsys, "sample", "dickman", "-n", "1000000", "--seed", "1", "--format", "json")
    (row,) = json.loads(out)
    se = math.sqrt(0.5 / 1e6)
    assert abs(row["mean"] - (1 - 1e-8)) < 4 * se
    assert row["variance"] == pytest.approx(0.5, abs=0.01)
    assert row["truncation_bias"] == pytest.approx(1e-8)


def test_sample_text_has_bias_line(capsys):
    _, out, _ = run(capsys, "sample", "dickman", "-n", "1000")
    assert out.startswith("# truncation at eps=1e-08")


def test_sample_levy_point_is_poisson(capsys):
    _, out, _ = run(capsys, "sample", "levy:a=2,c=1,alpha=point:1", "-n", "100000", "--format", "json")
    (row,) = json.loads(out)
    assert abs(row["mean"] - 2) < 4 * math.sqrt(2 / 1e5)
    assert abs(row["variance"] - 2) < 0.05


def test_sample_env_budget(capsys, monkeypatch):
    monkeypatch.setenv("SIZEBIAS_SAMPLES", "1234")
    _, out, _ = run(capsys, "sample", "poisson:mean=2", "--format", "json")
    assert json.loads(out)[0]["n"] == 1234


def test_sample_raw(capsys):
    _, out, _ = run(capsys, "sample", "poisson:mean=2", "-n", "50", "--raw", "--seed", "4")
    assert len(out.splitlines()) == 50


def test_verify_examples(capsys):
    code, out, _ = run(capsys, "verify", "poisson:mean=5", "--x", "8,10,12", "-n", "100000")
    assert code == 0 and "PASS" in out
    code, out, _ = run(capsys, "verify", "bernoulli-sum:p=0.5,0.5", "--x", "0", "-n", "20000", "--format", "json")
    d = json.loads(out)
    row = d["rows"][0]
    assert row["exact"] == 0.25
    mgf = next(b for b in row["bounds"] if b["name"] == "mgf")
    assert mgf["value"] == pytest.approx(math.exp(-1))
    code, out, _ = run(capsys, "verify", "collisions:b=100,n=50", "--x", "52,60,62", "-n", "50000",
                       "--format", "json")
    d = json.loads(out)
    assert code == 0 and d["c"] == 1.0
    assert d["a"] == pytest.approx(100 - 50 * (1 - 0.98 ** 100))


def test_verify_failure_exit_two(capsys):
    code, out, _ = run(capsys, "verify", "poisson:mean=5", "--x", "10", "--c", "0.2", "-n", "1000")
    assert code == 2 and "FAIL" in out


def test_couple_examples(capsys):
    _, out, _ = run(capsys, "couple", "uniform:b=1", "--size-bias", "--format", "json")
    (row,) = json.loads(out)
    assert row["c_hi"] == pytest.approx(0.25, abs=1e-6)
    _, out, _ = run(capsys, "couple", "poisson:mean=3", "--size-bias", "--format", "json")
    (row,) = json.loads(out)
    assert row["gap_values"] == [1.0]
    _, out, _ = run(capsys, "couple", "binomial:n=4,p=0.3", "binomial:n=4,p=0.3", "--c", "0.1", "--format", "json")
    (row,) = json.loads(out)
    assert row["gap_values"] == [0.0] and row["kind"] == "c-bounded-monotone"


def _numbers(fmt_rows):
    out = []
    for r in fmt_rows:
        for k in ("value", "value_log10"):
            out.append(float(r[k]))
    return out


def test_formats_agree_to_twelve_digits(capsys):
    argv = ["bound", "--a", "3.7", "--c", "0.9", "--x", "0,1.3,3.7,8.1"]
    _, js, _ = run(capsys, *argv, "--format", "json")
    _, cs, _ = run(capsys, *argv, "--format", "csv")
    _, tx, _ = run(capsys, *argv, "--format", "text")
    a = _numbers(json.loads(js))
    b = _numbers(rows_of(cs))
    lines = [ln.split() for ln in tx.splitlines()[1:]]
    header, body = lines[0], lines[1:]
    c = _numbers([dict(zip(header, ln)) for ln in body])
    for x, y, z in zip(a, b, c):
        assert y == pytest.approx(x, rel=1e-11, abs=1e-300)
        assert z == pytest.approx(x, rel=1e-11, abs=1e-300)


def test_byte_identical_with_seed(capsys):
    argv = ["verify", "dickman", "-n", "70000", "--seed", "5", "--format", "json"]
    _, first, _ = run(capsys, *argv)
    _, second, _ = run(capsys, *argv)
    assert first == second
    argv = ["sample", "uniform-sum:b=4,m=3", "-n", "5000", "--seed", "5"]
    assert run(capsys, *argv)[1] == run(capsys, *argv)[1]


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "sizebias", "bound", "--a", "2", "--c", "1", "--x", "4"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0
    assert "product" in res.stdout
