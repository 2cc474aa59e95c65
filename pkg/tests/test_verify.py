import json

from thetasum import cli
from thetasum.verify import SUITES, report_json, verify


def test_cutoff_suite_passes():
    rep = verify("cutoff", seed=0)
    assert rep["passed"] and rep["suites"]["cutoff"]["passed"]
    for c in rep["suites"]["cutoff"]["checks"]:
        assert {"name", "observed", "tolerance", "margin", "passed"} <= set(c)


def test_verify_all_deterministic():
    a = report_json(verify("all", seed=1))
    b = report_json(verify("all", seed=1))
    assert a == b
    rep = json.loads(a)
    assert set(rep["suites"]) == set(SUITES)
    assert rep["passed"], [c for s in rep["suites"].values() for c in s["checks"] if not c["passed"]]


def test_mutation_fails_theta_suite(tmp_path, capsys):
    out = tmp_path / "report.json"
    code = cli.main(["verify", "--suite", "theta", "--seed", "1", "--mutate", "theta-phase-sign", "--out", str(out)])
    assert code == cli.EXIT_VERIFY
    rep = json.loads(out.read_text())
    auto = next(c for c in rep["suites"]["theta"]["checks"] if c["name"] == "automorphy modulus")
    assert not auto["passed"] and auto["observed"] - auto["tolerance"] > 1e-3
