"""Smoke test for the Python bindings.

Build and install first:

    pip install --no-build-isolation -e crates/python
    python crates/python/python/smoke_test.py
"""

import json
import random

import nncegar_py as nc


def tiny_network():
    # y = relu(x1 + x2) + relu(x1 - x2)
    return nc.Network(2, [
        ([[1.0, 1.0], [1.0, -1.0]], [0.0, 0.0]),
        ([[1.0, 1.0]], [0.0]),
    ])


def main():
    net = tiny_network()
    assert net.evaluate([0.5, 0.25]) == [1.0]
    assert net.hidden_count == 2
    assert nc.Network.parse(net.to_nnet()).evaluate([0.3, 0.1]) == net.evaluate([0.3, 0.1])

    pre = net.preprocess()
    for _ in range(50):
        x = [random.uniform(0, 1), random.uniform(0, 1)]
        assert abs(pre.evaluate(x)[0] - net.evaluate(x)[0]) < 1e-9

    table = nc.bounds(net, [(0.0, 1.0), (0.0, 1.0)])
    assert all(lo <= hi for lo, hi in table.values())

    # The maximum over [0,1]^2 is 2, at (1, 0) and (1, 1).
    holds = nc.solve(nc.Problem(net, [(0.0, 1.0), (0.0, 1.0)], 2.5))
    assert holds.verdict == "holds", holds
    violated = nc.solve(nc.Problem(net, [(0.0, 1.0), (0.0, 1.0)], 1.5), engine="pattern")
    assert violated.verdict == "violated", violated
    assert net.evaluate(violated.counterexample)[0] > 1.5
    assert json.loads(violated.json)["verdict"] == "violated"

    problem = nc.Problem(net, [(0.0, 1.0), (0.0, 1.0)], 2.5)
    abstracted, steps = nc.abstract_network(problem)
    assert abstracted.hidden_count <= pre.hidden_count
    print(f"abstraction took {steps} steps")

    classifier = nc.Network(2, [
        ([[1.0, 0.0], [0.0, 1.0]], [0.0, 0.0]),
        ([[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]], [0.0, 0.0, 0.0]),
    ])
    sub = nc.encode_robustness(classifier, [1.0, 0.2], 0.05, 0)
    assert [a for a, _ in sub] == [1, 2]
    assert all(nc.solve(p).verdict == "holds" for _, p in sub)
    print("smoke test passed")


if __name__ == "__main__":
    main()
