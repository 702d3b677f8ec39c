"""Smoke test for the compiled extension.

Build with `cargo build -p urysohn-python --release`, then run this script
from the repository root. It links the shared library as `urysohn.so` in a
temporary directory and imports it from there.
"""

import json
import os
import shutil
import sys
import tempfile

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def load():
    for profile in ("release", "debug"):
        lib = os.path.join(ROOT, "target", profile, "liburysohn.so")
        if os.path.exists(lib):
            tmp = tempfile.mkdtemp()
            shutil.copy(lib, os.path.join(tmp, "urysohn.so"))
            sys.path.insert(0, tmp)
            import urysohn

            return urysohn
    sys.exit("liburysohn.so not found; run `cargo build -p urysohn-python --release`")


def main():
    u = load()

    zero = u.Problem.from_json(json.dumps({
        "T": 1.0,
        "forcing": {"family": "constant", "c": 1.0},
        "f1": {"family": "zero"},
        "f2": {"family": "zero"},
    }))
    sol = u.solve(zero, grid_n=10)
    assert sol.converged and sol.x == [1.0] * 11, sol
    assert zero.swapped() == zero

    corpus = dict(u.corpus())
    unit = corpus["unit-affine"]
    assert u.audit(unit)["hypotheses_ok"]
    b = u.bounds(unit)
    assert b["radius"] > 0

    fam = u.extremal(unit, sign="plus", grid_n=50, count=3)
    x = u.solve(unit, grid_n=50).x
    assert fam["ordering_ok"] and len(fam["members"]) == 3
    verdict = u.sandwich(x, upper=fam["estimate"], slack=1e-3)
    assert verdict["holds"], verdict

    order = u.convergence_order(json.dumps({"family": "exp", "scale": 1.0, "rate": 1.0}), 0.0, 1.0, [16, 32, 64, 128])
    assert order is not None and abs(order - 2.0) < 0.1, order

    harness = u.comparison_harness(seed=7, problems=20)
    assert harness["passed"], harness

    rows = u.run_corpus(grid_n=200, max_error=1e-5)
    assert all(r["passed"] for r in rows), rows

    try:
        u.Problem.from_json('{"T": -1}')
    except ValueError:
        pass
    else:
        raise AssertionError("invalid problem accepted")

    print(f"ok: {len(corpus)} corpus problems, order {order:.3f}, {len(rows)} corpus rows")


if __name__ == "__main__":
    main()
