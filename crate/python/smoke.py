"""Quick end-to-end exercise of the pmc_py extension.

Run after `pip install -e . --no-build-isolation`:

    python3 python/smoke.py
"""

import math

import pmc_py


def close(a, b, tol):
    assert abs(a - b) <= tol, f"{a} vs {b} (tol {tol})"


def main():
    # threshold constants for N = 3
    large, borderline = pmc_py.thresholds(3)
    omega = 4.0 * math.pi / 3.0
    close(large, 3.0 * omega ** (1.0 / 3.0), 1e-12)
    close(borderline, 2.0 * omega ** (1.0 / 3.0), 1e-12)

    # constant datum on the unit square: absorption bounds the solution
    grid = pmc_py.Grid.rectangle(17, 17)
    sol = pmc_py.solve(grid, 10.0)
    assert 0.0 < sol.sup_norm <= 10.0 + 1e-8, sol.sup_norm
    assert sol.flux_max <= 1.0 + 1e-12, sol.flux_max
    assert sol.pairing_defect_max <= 1e-10, sol.pairing_defect_max
    assert len(sol.u) == grid.nodes
    assert len(sol.steps()) >= 2

    # the same datum fails the no-absorption necessary condition
    report = pmc_py.scan(grid, 10.0)
    close(report["worst_ratio"], 2.5, 1e-9)

    # callable datum on an interval, fixed exponent
    line = pmc_py.Grid.interval(41)
    bump = pmc_py.solve_p(line, lambda x: 12.0 * x * (1.0 - x), 1.5)
    assert 0.0 < bump.sup_norm < 12.0

    # closed-form radial solution: sup matches rmin^-1 - 1
    shell = pmc_py.Grid.radial(801, 0.1)
    r, u_exact, f_exact = pmc_py.radial_example(shell, 1.0)
    close(max(u_exact), 1.0 / 0.1 - 1.0, 1e-9)
    assert len(r) == len(u_exact) == len(f_exact) == shell.nodes

    # implicit curvature flow shrinks a cone towards zero
    cone = pmc_py.Grid.interval(101, a=-1.0, b=1.0)
    states, monitors = pmc_py.evolve(cone, lambda x: 1.0 - abs(x), lam=0.05, steps=10)
    sups = [m["sup_norm"] for m in monitors]
    assert len(states) == 11
    assert all(b <= a + 1e-12 for a, b in zip(sups, sups[1:])), sups
    assert sups[-1] < sups[0]

    # truncation chain on an unbounded integrable datum
    spike = pmc_py.Grid.interval(21, a=-1.0, b=1.0)
    limit, rows = pmc_py.truncation_chain(
        spike, lambda x: 1.0 / math.sqrt(abs(x) + 0.01)
    )
    assert len(rows) >= 2
    assert rows[0]["capped_diff"] is None
    assert limit.sup_norm > 0.0

    print("smoke: all checks passed")


if __name__ == "__main__":
    main()
