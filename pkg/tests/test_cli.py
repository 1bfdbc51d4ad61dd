import json
import math
import subprocess
import sys

import numpy as np
import pytest
from scipy import integrate as sint

from renorm.cli import dumps, main
from renorm.cutoff import theta
from renorm.geometry import set_from_json
from renorm.kernel import FeynmanGraph, kernel_from_json
from renorm.scheme import RenormScheme

POINT = {"variant": "point", "coordinates": [0.0]}
HALF_LINE = json.dumps({"type": "power_log", "p": 1, "half_line": True, "set": POINT})
BUMP = json.dumps({"type": "bump", "center": [0.0], "radius": 2.0})


def _run(capsys, argv):
    code = main(argv)
    captured = capsys.readouterr()
    return code, json.loads(captured.out), captured.err


def test_pair_golden_case(capsys, tmp_path):
    csv_path = tmp_path / "terms.csv"
    code, out, _ = _run(capsys, ["pair", "--kernel", HALF_LINE, "--phi", BUMP, "--order", "0",
                                 "--csv", str(csv_path)])
    assert code == 0
    c, _ = sint.quad(lambda u: (1 - theta(u)) / u, 0.125, 1, epsabs=1e-15, limit=200)
    b = math.exp(-c)

    def f(x):
        return math.exp(-1 / (1 - x * x / 4)) if abs(x) < 2 else 0.0

    oracle = sint.quad(lambda x: (f(x) - f(0)) / x, 0, b, epsabs=1e-14, limit=200)[0]
    oracle += sint.quad(lambda x: f(x) / x, b, 2, epsabs=1e-14, limit=200)[0]
    assert out["value"] == pytest.approx(oracle, rel=1e-5)
    assert set(out) >= {"value", "err", "terms", "tail", "diagnostics"}
    rows = csv_path.read_text().splitlines()
    assert rows[0] == "j,term,term_error" and len(rows) == len(out["terms"]) + 1


def test_pair_refuses_low_order(capsys):
    k = json.dumps({"type": "power_log", "p": 2, "set": POINT})
    code, out, err = _run(capsys, ["pair", "--kernel", k, "--phi", BUMP, "--order", "0"])
    assert code == 2
    assert out["required_order"] == 1 and "required order 1" in err


def test_usage_errors(capsys):
    assert main(["pair", "--kernel", "missing.json", "--phi", BUMP]) == 1
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 1
    capsys.readouterr()


def test_set_given_separately_and_file_inputs(capsys, tmp_path):
    kpath = tmp_path / "k.json"
    kpath.write_text(json.dumps({"type": "power_log", "p": 0.5}))
    spath = tmp_path / "s.json"
    spath.write_text(json.dumps(POINT))
    code, out, _ = _run(capsys, ["pair", "--kernel", str(kpath), "--set", str(spath), "--phi", BUMP])
    assert code == 0 and out["order"] == 0


def test_emitted_objects_round_trip(capsys):
    code, out, _ = _run(capsys, ["pair", "--kernel", HALF_LINE, "--phi", BUMP, "--order", "1",
                                 "--base-scale", "0.5"])
    assert code == 0
    sch = RenormScheme.from_json(out["scheme"])
    assert sch.order == 1 and sch.base_scale == 0.5 and sch.to_json() == out["scheme"]
    assert kernel_from_json(out["kernel"]).to_json() == out["kernel"]
    assert set_from_json(out["scheme"]["set"]).to_json() == out["scheme"]["set"]


def test_output_is_deterministic(capsys):
    argv = ["pair", "--kernel", HALF_LINE, "--phi", BUMP, "--seed", "3"]
    main(argv)
    first = capsys.readouterr().out
    main(argv)
    assert capsys.readouterr().out == first


def test_seventeen_digit_floats():
    assert dumps({"x": 0.1, "y": [1.0, 2], "z": float("nan")}) == '{"x": 0.10000000000000001, "y": [1.0, 2], "z": null}'
    assert json.loads(dumps({"v": 1 / 3}))["v"] == 1 / 3


def test_fit_growth_scaling_degree_and_measure(capsys):
    k = json.dumps({"type": "power_log", "p": 1, "set": POINT})
    code, out, _ = _run(capsys, ["fit-growth", "--kernel", k])
    assert code == 0 and 0.9 <= out["s"] <= 1.1
    line = {"variant": "affine", "basepoint": [0, 0], "tangent": [[1, 0]]}
    k2 = json.dumps({"type": "power_log", "p": 1.5, "set": line})
    code, out, _ = _run(capsys, ["scaling-degree", "--kernel", k2])
    assert code == 0 and out["value"] == pytest.approx(-1.5, abs=0.05)
    assert out["moderate_growth_bound"] == pytest.approx(0.5, abs=0.05)
    phi = json.dumps({"type": "bump", "center": [0.0], "radius": 1.0})
    code, out, _ = _run(capsys, ["measure-extend", "--kernel", k, "--phi", phi])
    assert code == 2 and out["diagnostic"] == "not locally finite"


def test_product(capsys):
    k = json.dumps({"type": "power_log", "p": 1, "set": POINT})
    off = json.dumps({"type": "bump", "center": [1.5], "radius": 0.4})
    code, out, _ = _run(capsys, ["product", "--kernel", k, "--factor", k, "--phi", off])
    assert code == 0 and out["order"] == 1

    def f(x):
        u = (x - 1.5) / 0.4
        return math.exp(-1 / (1 - u * u)) if abs(u) < 1 else 0.0

    assert out["value"] == pytest.approx(sint.quad(lambda x: f(x) / x ** 2, 1.1, 1.9, epsabs=1e-14)[0], rel=1e-8)


def test_qft_verify_axioms_three_point_chain(capsys, tmp_path):
    suite = [{"phi": {"type": "tensor", "factors": [{"type": "bump", "center": [-2.0], "radius": 0.6},
                                                    {"type": "bump", "center": [0.1, 0.3], "radius": 0.7}]},
              "split": [[1], [2, 3]]}]
    path = tmp_path / "suite.json"
    path.write_text(json.dumps(suite))
    graph = json.dumps({"d": 1, "n": 3, "edges": [[1, 2, 1], [2, 3, 1]], "p": 1.0, "q": 0})
    code, out, _ = _run(capsys, ["qft", "--graph", graph, "--orders", "[0, 0]", "--phi", str(path),
                                 "--verify-axioms"])
    assert code == 0
    assert out["axiom_residuals"]["factorization"] <= 1e-4
    assert len(out["pairings"]) == 1
    assert FeynmanGraph.from_json(out["graph"]) == FeynmanGraph.from_json(json.loads(graph))


def test_selftest_console_script():
    proc = subprocess.run([sys.executable, "-m", "renorm.cli", "selftest"], capture_output=True, text=True,
                          timeout=120)
    assert proc.returncode == 0
    out = json.loads(proc.stdout)
    assert out["passed"] and all(np.isfinite(c["value"]) for c in out["checks"])
