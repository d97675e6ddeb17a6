import io
import json

import pytest

from qent import cli
from qent.cumulants import hs_cumulants
from qent.ensemble import NumericalFailure


def run(argv):
    out = io.StringIO()
    code = cli.main(argv, out=out)
    return code, out.getvalue()


def run_json(argv):
    code, text = run(argv)
    return code, json.loads(text)


def strip_timestamp(text):
    doc = json.loads(text)
    doc.pop("timestamp")
    return doc


def test_cumulants_degenerate():
    code, doc = run_json(["cumulants", "--m", "1", "--n", "9", "--format", "json"])
    assert code == 0
    assert doc["schema"] == "qent/1"
    assert doc["config"] == {"m": 1, "n": 9, "format": "json", "precise": False}
    assert all(abs(v) <= 1e-12 for v in doc["result"]["cumulants"].values())
    assert doc["result"]["kurtosis"] is None and doc["result"]["degenerate"]


def test_cumulants_csv_round_trip():
    code, text = run(["cumulants", "--m", "3", "--n", "5", "--format", "csv"])
    assert code == 0
    lines = [l for l in text.splitlines() if not l.startswith("#")]
    assert lines[0] == "quantity,value"
    rows = dict(l.split(",") for l in lines[1:])
    assert float(rows["k4"]) == hs_cumulants(3, 5).k4
    assert float(rows["d1"]) == -1
    assert "# schema=qent/1" in text


def test_determinism_modulo_timestamp():
    argv = ["mc", "--m", "3", "--n", "4", "--samples", "20000", "--seed", "9", "--threads", "2", "--quiet"]
    a, b = run(argv)[1], run(argv)[1]
    assert strip_timestamp(a) == strip_timestamp(b)
    one = strip_timestamp(run(argv[:-3] + ["--threads", "1", "--quiet"])[1])
    two = strip_timestamp(a)
    assert one["result"] == two["result"]


def test_mc_example():
    code, doc = run_json(["mc", "--m", "2", "--n", "2", "--samples", "1000000", "--seed", "42", "--quiet"])
    assert code == 0
    k1 = doc["result"]["S"]["k"][0]
    assert k1["exact"] == pytest.approx(1 / 3)
    assert abs(k1["estimate"] - 1 / 3) <= 5 * k1["stderr"]


def test_threads_env_fallback(monkeypatch):
    monkeypatch.setenv("QENT_THREADS", "3")
    code, doc = run_json(["mc", "--m", "2", "--n", "3", "--samples", "6400", "--quiet"])
    assert code == 0 and doc["config"]["threads"] == 3


def test_density_csv():
    code, text = run(["density", "--m", "4", "--n", "4", "--samples", "20000", "--grid=-3:3:0.5",
                      "--order", "k3,k4", "--seed", "1", "--quiet"])
    assert code == 0
    rows = [l for l in text.splitlines() if not l.startswith("#")]
    assert rows[0] == "x,empirical,k3,k4"
    assert len(rows) == 13
    assert float(rows[1].split(",")[0]) == -2.75


def test_density_degenerate_is_numeric_failure():
    code, doc = run_json(["density", "--m", "1", "--n", "4", "--samples", "1000", "--quiet"])
    assert code == 3
    assert doc["result"]["failure"]["type"] == "DegenerateDistributionError"


def test_verify_identities_suite_b():
    code, doc = run_json(["verify", "identities", "--suite", "B", "--tol", "1e-9", "--threads", "1"])
    assert code == 0
    assert doc["result"]["checked"] == 25 and doc["result"]["failed"] == []


def test_verify_identities_dump_and_mutant(tmp_path):
    dump = tmp_path / "catalog.json"
    code, _ = run(["verify", "identities", "--suite", "B", "--threads", "1", "--dump", str(dump)])
    assert code == 0
    doc = json.loads(dump.read_text())
    for e in doc["entries"]:
        if e["id"] == "B2":
            e["rhs"] = e["rhs"].replace("/", "*", 1)
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    code, out = run_json(["verify", "identities", "--suite", "B", "--threads", "1", "--catalog", str(bad)])
    assert code == 1 and out["result"]["failed"] == ["B2"]


def test_verify_integrals_and_oracle():
    code, doc = run_json(["verify", "integrals", "--m", "2", "--n", "3"])
    assert code == 0 and doc["result"]["rel_error"] < 1e-6
    code, doc = run_json(["verify", "integrals", "--m", "2", "--n", "3", "--tol", "1e-30"])
    assert code == 1
    code, doc = run_json(["verify", "oracle", "--n", "3"])
    assert code == 0 and doc["result"]["passed"]


def test_kurtosis_scan():
    code, doc = run_json(["kurtosis-scan", "--sizes", "5,10,20"])
    assert code == 0
    assert [r["m"] for r in doc["result"]["scan"]] == [5, 10, 20]
    assert doc["result"]["strictly_decreasing"]


@pytest.mark.parametrize("argv", [
    ["bogus"],
    ["cumulants", "--m", "2"],
    ["cumulants", "--m", "2", "--n", "3", "--wat"],
    ["cumulants", "--m", "4", "--n", "2"],
    ["cumulants", "--m", "0", "--n", "2"],
    ["density", "--m", "2", "--n", "2", "--grid", "1:0:0.1"],
    ["density", "--m", "2", "--n", "2", "--order", "k5"],
    ["kurtosis-scan", "--sizes", "a,b"],
    ["verify", "identities", "--suite", "C"],
])
def test_usage_errors(argv, capsys):
    code, _ = run(argv)
    assert code == 2


def test_numeric_failure_exit_code(monkeypatch):
    def boom(*a, **k):
        raise NumericalFailure("Jacobi eigensolver did not converge", failures=2, m=2, n=2)

    monkeypatch.setattr("qent.ensemble.monte_carlo", boom)
    code, doc = run_json(["mc", "--m", "2", "--n", "2", "--samples", "100", "--quiet"])
    assert code == 3
    assert doc["result"]["failure"] == {"error": "Jacobi eigensolver did not converge",
                                        "failures": 2, "m": 2, "n": 2}


def test_progress_goes_to_stderr(capsys):
    out = io.StringIO()
    cli.main(["mc", "--m", "2", "--n", "2", "--samples", "640", "--streams", "4", "--threads", "1"], out=out)
    err = capsys.readouterr().err
    assert "mc streams: 4/4" in err
    json.loads(out.getvalue())
