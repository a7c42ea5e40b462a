#!/usr/bin/env python3
"""Writes the demo / test fixture models into fixtures/.

Binary spins s = 2x - 1. Pairwise Hamiltonians are cumulative:
H_ij(x) = -J s_i s_j - h_i s_i - h_j s_j and H_i(x) = -h_i s_i.
"""
import json
import pathlib

OUT = pathlib.Path(__file__).resolve().parent.parent / "fixtures"


def spin(x):
    return 2 * x - 1


def pairwise(vertices, edges, fields, couplings):
    """Ising-style model with cumulative Hamiltonians."""
    ham = {}
    for v in vertices:
        h = fields.get(v, 0.0)
        ham[v] = [-h * spin(x) for x in (0, 1)]
    for (i, j), J in zip(edges, couplings):
        hi, hj = fields.get(i, 0.0), fields.get(j, 0.0)
        ham[f"{i},{j}"] = [
            -J * spin(a) * spin(b) - hi * spin(a) - hj * spin(b) for a in (0, 1) for b in (0, 1)
        ]
    return {
        "variables": {v: 2 for v in vertices},
        "hyperedges": [[i, j] for i, j in edges],
        "hamiltonians": ham,
    }


def write(name, model):
    (OUT / f"{name}.json").write_text(json.dumps(model, indent=2) + "\n")


def main():
    OUT.mkdir(exist_ok=True)
    write("single_node", {"variables": {"1": 2}, "hyperedges": [], "hamiltonians": {"1": [0.3, -0.4]}})
    write("singleton_edge", {"variables": {"i": 2}, "hyperedges": [["i"]],
                             "hamiltonians": {"i": [0.2, -0.1], "{i}": [0.7, -0.5]}})
    write("p3_zero", {"variables": {"1": 2, "2": 2, "3": 2}, "hyperedges": [["1", "2"], ["2", "3"]]})
    write("p3", pairwise(["1", "2", "3"], [("1", "2"), ("2", "3")],
                         {"1": 0.3, "2": -0.2, "3": 0.5}, [0.8, -0.6]))
    write("triangle", pairwise(["1", "2", "3"], [("1", "2"), ("2", "3"), ("1", "3")],
                               {"1": 0.2, "2": -0.1, "3": 0.15}, [0.5, -0.4, 0.3]))
    write("triangle_pendant", pairwise(["1", "2", "3", "4"], [("1", "2"), ("2", "3"), ("1", "3"), ("3", "4")],
                                       {"1": 0.05, "2": -0.03, "3": 0.02, "4": 0.1}, [1.4, 1.4, 1.4, 0.7]))
    write("grid2x2", pairwise(["1", "2", "3", "4"], [("1", "2"), ("2", "4"), ("3", "4"), ("1", "3")],
                              {"1": 0.1, "2": -0.2, "3": 0.3, "4": -0.05}, [0.6, -0.5, 0.4, 0.7]))
    k4 = [("1", "2"), ("1", "3"), ("1", "4"), ("2", "3"), ("2", "4"), ("3", "4")]
    k4_fields = {"1": 0.05, "2": -0.03, "3": 0.02, "4": 0.01}
    write("k4_ferro", pairwise(["1", "2", "3", "4"], k4, k4_fields, [1.0] * 6))
    write("k4_pendant", pairwise(["1", "2", "3", "4", "5"], k4 + [("4", "5")], dict(k4_fields, **{"5": 0.1}),
                                 [1.0] * 6 + [0.7]))
    write("triangle_antiferro", pairwise(["1", "2", "3"], [("1", "2"), ("2", "3"), ("1", "3")],
                                         {"1": 0.05, "2": -0.03, "3": 0.02}, [-2.0, -2.0, -2.0]))


if __name__ == "__main__":
    main()
