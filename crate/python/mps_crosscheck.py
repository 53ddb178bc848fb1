"""Solve exported MPS files with both the bml simplex and SciPy's HiGHS.

    bml export-mps --case cases/two_zone.json --n 20 --seed 3 --design stochastic --out /tmp/mps
    python3 python/mps_crosscheck.py target/release /tmp/mps/*.mps

Exits non-zero when any objective differs by more than 1e-6 relative.
"""

import math
import sys

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import csr_matrix

from smoke_test import import_bml


def read_mps(path):
    rows, cols, entries, rhs, bounds = {}, {}, [], {}, {}
    objective, section = None, None
    with open(path) as fh:
        for raw in fh:
            if not raw.strip() or raw.startswith("*"):
                continue
            if not raw[0].isspace():
                section = raw.split()[0]
                continue
            f = raw.split()
            if section == "ROWS":
                if f[0] == "N":
                    objective = f[1]
                else:
                    rows[f[1]] = (len(rows), f[0])
            elif section == "COLUMNS":
                j = cols.setdefault(f[0], len(cols))
                for name, val in zip(f[1::2], f[2::2]):
                    entries.append((name, j, float(val)))
            elif section == "RHS":
                for name, val in zip(f[1::2], f[2::2]):
                    rhs[name] = float(val)
            elif section == "BOUNDS":
                kind, col = f[0], f[2]
                lo, hi = bounds.get(col, (0.0, math.inf))
                val = float(f[3]) if len(f) > 3 else None
                if kind == "UP":
                    hi = val
                elif kind == "LO":
                    lo = val
                elif kind == "FX":
                    lo = hi = val
                elif kind == "FR":
                    lo, hi = -math.inf, math.inf
                elif kind == "MI":
                    lo = -math.inf
                elif kind == "PL":
                    hi = math.inf
                bounds[col] = (lo, hi)
    n = len(cols)
    cost = np.zeros(n)
    triples = []
    for name, j, val in entries:
        if name == objective:
            cost[j] += val
        else:
            triples.append((rows[name][0], j, val))
    lb = np.zeros(n)
    ub = np.full(n, math.inf)
    for col, (lo, hi) in bounds.items():
        lb[cols[col]], ub[cols[col]] = lo, hi
    senses = [None] * len(rows)
    b = np.zeros(len(rows))
    for name, (i, s) in rows.items():
        senses[i] = s
        b[i] = rhs.get(name, 0.0)
    return cost, triples, senses, b, lb, ub


def solve_highs(cost, triples, senses, b, lb, ub):
    m = len(senses)
    r, c, v = zip(*triples) if triples else ((), (), ())
    a = csr_matrix((v, (r, c)), shape=(m, len(cost)))
    sign = np.array([1.0 if s == "L" else -1.0 for s in senses])
    ineq = np.array([s != "E" for s in senses])
    eq = ~ineq
    res = linprog(
        cost,
        A_ub=(a[ineq].multiply(sign[ineq][:, None])).tocsr() if ineq.any() else None,
        b_ub=(b[ineq] * sign[ineq]) if ineq.any() else None,
        A_eq=a[eq] if eq.any() else None,
        b_eq=b[eq] if eq.any() else None,
        bounds=list(zip(lb, [None if math.isinf(u) else u for u in ub])),
        method="highs",
    )
    return res


def solve_bml(bml, cost, triples, senses, b, lb, ub):
    lp = bml.LinearProgram()
    for j in range(len(cost)):
        lp.add_variable(lb[j], ub[j], cost[j])
    by_row = [[] for _ in senses]
    for i, j, v in triples:
        by_row[i].append((j, v))
    sense = {"L": "<=", "G": ">=", "E": "="}
    for i, s in enumerate(senses):
        lp.add_constraint(by_row[i], sense[s], b[i])
    return lp.solve()


def main():
    bml = import_bml(sys.argv[1])
    worst = 0.0
    for path in sys.argv[2:]:
        model = read_mps(path)
        ours = solve_bml(bml, *model)
        ref = solve_highs(*model)
        if ours["status"] != "optimal" or ref.status != 0:
            print(f"{path}: status bml={ours['status']} highs={ref.message}")
            worst = math.inf
            continue
        rel = abs(ours["objective"] - ref.fun) / max(1.0, abs(ref.fun))
        worst = max(worst, rel)
        print(f"{path}: vars={len(model[0])} rows={len(model[2])} "
              f"bml={ours['objective']:.9g} highs={ref.fun:.9g} rel={rel:.2e}")
    print(f"worst relative gap {worst:.2e}")
    sys.exit(0 if worst <= 1e-6 else 1)


if __name__ == "__main__":
    main()
