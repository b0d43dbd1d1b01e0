"""Quick end-to-end check of the Python bindings.

Build and install first:  pip install --no-build-isolation crates/python
"""

import json
import math
import tempfile

import pyclassicality as pc


def main():
    ho = pc.System.harmonic_oscillator()
    assert ho.variables == ["q", "p"], ho.variables
    assert ho.fundamental_sequences([0.5, 1.0, 2.0]) == ["(q)", "(p)"]
    q, p = ho.flow([1.0, 0.0], math.pi / 2)
    assert abs(q) < 1e-12 and abs(p + 1.0) < 1e-12

    coupled = pc.System.coupled(1.0, 2.0, 0.1)
    assert len(coupled.fundamental_sequences([1.0, 2.5, 5.0])) == 8
    data4 = pc.ClassicalData([0.0, 0.0, 0.5, 0.2], [0.2, 0.3, 0.25, 0.1])
    mc = coupled.margin_containment(data4, 2.0, samples=2000, seed=3)
    assert mc["violations"] == 0, mc

    data = pc.ClassicalData([1.0, 0.0], [1.5, 1.5])
    state = pc.GridState.gaussian(1.0, 0.0, 0.5, 2048, -25.0, 25.0)
    assert abs(state.norm() - 1.0) < 1e-12
    assert abs(state.variance(0) - 0.25) < 1e-9

    first = pc.consistency_first(state, data)
    assert first["aggregate"]["pass"], first
    times = [k * 2 * math.pi / 8 for k in range(1, 9)]
    cls = pc.classicality_first(state, data, ho, 1, times)
    closed = pc.gaussian_classicality([(1.0, 0.0, 0.5)], data, ho, 1, times)
    assert cls["aggregate"]["pass"] and closed["aggregate"]["pass"]
    for a, b in zip(cls["rows"], closed["rows"]):
        assert abs(a["norm_sq"] / b["norm_sq"] - 1.0) < 1e-8

    period = 2 * math.pi
    back = state.evolve(ho, period / 500, 500)
    assert back.overlap(state) > 1 - 1e-6

    times = [k * 4 * math.pi / 20 for k in range(21)]
    rec = pc.evolve_consistency(state, data, ho, times, [0.5, 0.99])
    assert rec["aggregate"]["violations"] == 0, rec["aggregate"]

    cfg = {
        "system": {"builtin": "harmonic_oscillator"},
        "classical": {"values": {"q": 0, "p": 0}, "margins": {"q": 1, "p": 1}},
        "criteria": {"method": "gaussian_closed_form"},
        "scan": {"start": 0.1, "stop": 2.0, "points": 12, "orders": [1]},
    }
    with tempfile.TemporaryDirectory() as out:
        res = pc.run("scan", json.dumps(cfg), out_dir=out)
        assert res["exit_code"] in (0, 1), res
        report = json.load(open(f"{out}/report.json"))
        assert report["contiguous"]

    try:
        pc.ClassicalData([0.0], [-1.0])
    except ValueError:
        pass
    else:
        raise AssertionError("negative margin accepted")

    st = pc.run_selftest(0)
    assert all(c["pass"] for c in st["checks"]), st
    print("smoke test ok")


if __name__ == "__main__":
    main()
