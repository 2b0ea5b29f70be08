"""Smoke tests for the _oacsim extension module (run via ctest)."""

import json
import math
import sys

import _oacsim as oac


def scenario(seed=42, trials=3, horizon=40):
    return {
        "name": "smoke",
        "topology": {"kind": "static", "graph": {"kind": "complete", "n": 5}},
        "channel": {"rho": 1.0, "p": 0.5, "sigma2": 0.01, "lambda": 1.0},
        "schedule": {"kind": "power_law", "p": 0.75, "scale": "auto_dmax"},
        "protocol": "proposed",
        "init": {"kind": "explicit", "values": [1, 2, 3, 4, 5]},
        "horizon": horizon,
        "trials": trials,
        "seed": seed,
    }


def test_fiedler():
    # complete graph on 5 nodes: algebraic connectivity equals 5
    lap = [[4 if i == j else -1 for j in range(5)] for i in range(5)]
    assert abs(oac.fiedler(lap) - 5.0) < 1e-9
    # two-agent expected Laplacian with weight 1/2
    assert abs(oac.fiedler([[0.5, -0.5], [-0.5, 0.5]]) - 1.0) < 1e-12


def test_lyapunov():
    assert oac.lyapunov([3.0, 3.0, 3.0]) == 0.0
    assert abs(oac.lyapunov([1, 2, 3, 4, 5]) - 10.0) < 1e-12


def test_expected_laplacian():
    l_bar = oac.expected_laplacian(
        json.dumps({"rho": 1.0, "p": 0.5, "sigma2": 0.1, "lambda": 1.0}),
        json.dumps({"kind": "complete", "n": 2}),
    )
    assert abs(l_bar[0][0] - 0.5) < 1e-12
    assert abs(l_bar[0][1] + 0.5) < 1e-12


def test_run_deterministic():
    a = json.loads(oac.run_json(json.dumps(scenario())))
    b = json.loads(oac.run_json(json.dumps(scenario())))
    assert a["v_mean"] == b["v_mean"]
    assert a["trials"] == 3
    # disagreement shrinks from the start on this easy instance
    assert a["v_mean"][-1] < a["v_mean"][0]
    # the network mean stays in the initial hull
    assert 0.0 < a["final_mean"]["avg"] < 10.0


def test_validate():
    good = json.loads(oac.validate_json(json.dumps(scenario())))
    assert good["all_pass"]
    bad_scenario = scenario()
    bad_scenario["schedule"]["p"] = 0.4  # square sum diverges
    bad = json.loads(oac.validate_json(json.dumps(bad_scenario)))
    assert not bad["all_pass"]


def test_moments():
    rep = json.loads(
        oac.moments_json(
            json.dumps({"rho": 1.0, "p": 0.5, "sigma2": 0.1, "lambda": 1.0}),
            json.dumps({"kind": "complete", "n": 3}),
            [1.0, 2.0, 3.0],
            draws=20000,
            seed=7,
        )
    )
    assert rep["draws"] == 20000
    names = {e["name"] for e in rep["entries"]}
    assert "power_mean[0]" in names and "gamma_sq_mean[0,1]" in names


def test_package_import():
    import oacsim

    assert abs(oacsim.fiedler([[1.0, -1.0], [-1.0, 1.0]]) - 2.0) < 1e-9


def test_compare_identical_is_zero():
    rep = json.loads(
        oac.compare_json(json.dumps(scenario()), json.dumps(scenario()), "channel.sigma2")
    )
    assert rep["pairs"] == 3
    assert rep["b_final_mse_greater"] == 0
    assert all(d == 0.0 for d in rep["mse_diff"])


def main():
    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_")]
    for test in tests:
        test()
        print(f"{test.__name__}: ok")
    print(f"{len(tests)} smoke tests passed")


if __name__ == "__main__":
    sys.exit(main())
