"""Write tests/data/tree_fixture.json.

The minimal capital for the two-period tree is computed here by brute-force
vertex enumeration in exact rational arithmetic, independently of the
package's simplex solver. Run once; the JSON is committed as test data.
"""
from __future__ import annotations

import itertools
import json
from fractions import Fraction as F
from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "tests" / "data" / "tree_fixture.json"

S0 = F(10)
FACTORS = [F(6, 5), F(4, 5)]  # branch 0 = up, branch 1 = down
P_STEP = [F(1, 2), F(1, 2)]
LOWER, UPPER = F(-1, 2), F(1)
Q1 = {(0, 0): F(9, 16), (0, 1): F(3, 16), (1, 0): F(3, 16), (1, 1): F(1, 16)}
Q2 = {(0, 0): F(1, 10), (0, 1): F(3, 10), (1, 0): F(7, 20), (1, 1): F(1, 4)}
ALPHAS = [F(1), F(1, 2)]

# information sets: root (t=0), after up, after down (t=1)
NODES = [(), (0,), (1,)]


def prices(path):
    s = [S0]
    for b in path:
        s.append(s[-1] * FACTORS[b])
    return s


def coefficient_matrix():
    """C[i][j] = E^{Q_i}[(S_{t+1} - S_t) 1{path passes node j}]."""
    rows = []
    for q in (Q1, Q2):
        row = []
        for node in NODES:
            t = len(node)
            acc = F(0)
            for path, prob in q.items():
                if path[:t] == node:
                    s = prices(path)
                    acc += prob * (s[t + 1] - s[t])
            row.append(acc)
        rows.append(row)
    return rows


def solve(a, b):
    """Gauss-Jordan over Fractions; None when singular."""
    n = len(a)
    m = [list(r) + [v] for r, v in zip(a, b)]
    for col in range(n):
        piv = next((r for r in range(col, n) if m[r][col] != 0), None)
        if piv is None:
            return None
        m[col], m[piv] = m[piv], m[col]
        for r in range(n):
            if r != col and m[r][col] != 0:
                k = m[r][col] / m[col][col]
                m[r] = [x - k * y for x, y in zip(m[r], m[col])]
    return [m[r][n] / m[r][r] for r in range(n)]


def vertex_minimum():
    c = coefficient_matrix()
    nx = len(NODES)
    # constraints as (row, rhs) meaning row . (w0, xi...) >= rhs
    cons = []
    for i, alpha in enumerate(ALPHAS):
        cons.append(([F(1)] + c[i], alpha))
    for j in range(nx):
        e = [F(0)] * (nx + 1)
        e[j + 1] = F(1)
        cons.append((e, LOWER))
        cons.append(([-x for x in e], -UPPER))
    best = None
    for combo in itertools.combinations(range(len(cons)), nx + 1):
        x = solve([cons[k][0] for k in combo], [cons[k][1] for k in combo])
        if x is None:
            continue
        if all(sum(r * v for r, v in zip(row, x)) >= rhs for row, rhs in cons):
            if best is None or x[0] < best[0]:
                best = x
    return best


def main():
    best = vertex_minimum()
    one_period = {
        "s0": 10.0, "factors": [1.2, 0.8], "probs": [0.5, 0.5],
        "q_step": [0.75, 0.25], "lower": 0.0, "upper": 1.0,
        # v_0 = E^Q[S_1 - S_0] = 1, lambda_0(s) = s, xi_0 = Phi(s): E[W f] = Phi(s)
        "expected_wf": {"0.0": 0.5, "1.0": 0.8413447460685429, "-2.0": 0.022750131948179195},
    }
    fixture = {
        "two_period": {
            "s0": float(S0),
            "factors": [float(x) for x in FACTORS],
            "probs": [float(x) for x in P_STEP],
            "lower": float(LOWER),
            "upper": float(UPPER),
            "path_order": ["uu", "ud", "du", "dd"],
            "q_paths": [[float(q[p]) for p in sorted(q)] for q in (Q1, Q2)],
            "alphas": [float(a) for a in ALPHAS],
            "coefficients": [[str(x) for x in row] for row in coefficient_matrix()],
            "w0_min": float(best[0]),
            "w0_min_exact": str(best[0]),
            "xi_nodes": [str(x) for x in best[1:]],
        },
        "one_period": one_period,
    }
    OUT.write_text(json.dumps(fixture, indent=2) + "\n")
    print(json.dumps(fixture["two_period"], indent=2))


if __name__ == "__main__":
    main()
