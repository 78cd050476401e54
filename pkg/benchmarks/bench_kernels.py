"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 200]

Inputs match one agent's horizon-15 problem with two neighbours, which is
what the solver evaluates on every line-search trial.
"""

import argparse
import timeit

import numpy as np

from jointmpc._kernels import _fallback
from jointmpc.channel import LinkBudget
from jointmpc.cost import CostWeights, kernel_consts
from jointmpc.dynamics import DynamicsParams
from jointmpc.surrogate import stencil_offsets

try:
    from jointmpc._kernels import _core
except ImportError:
    _core = None


def make_inputs(N=15, J=2, seed=0):
    rng = np.random.default_rng(seed)
    w = CostWeights()
    pos = np.c_[rng.normal(0, 3, (N, 2)), 10 + rng.normal(0, 0.5, N)]
    nbr = np.ascontiguousarray(pos[:, None, :] + rng.uniform(-12, 12, (N, J, 3)) * [1, 1, 0.1])
    yaw = rng.uniform(-np.pi, np.pi, N)
    consts = kernel_consts(w, LinkBudget(), DynamicsParams())
    off = np.ascontiguousarray(stencil_offsets(0.05))
    x0 = np.r_[pos[0], rng.normal(size=3), 0.3]
    U = np.ascontiguousarray(rng.uniform(-3, 3, (N, 4)))
    refs = np.ascontiguousarray(pos + rng.normal(size=(N, 3)))
    return {
        "comm_value_grad": (np.ascontiguousarray(pos), yaw, nbr, consts, off),
        "horizon_eval": (x0, U, refs, nbr, nbr, w.q_pos, w.r_diag, consts, off),
    }


def bench(repeat):
    inputs = make_inputs()
    rows = []
    for name, args in inputs.items():
        row = {"kernel": name}
        for label, mod in (("python", _fallback), ("cython", _core)):
            if mod is None:
                row[label] = float("nan")
                continue
            fn = getattr(mod, name)
            t = timeit.Timer(lambda: fn(*args))
            n, _ = t.autorange()
            row[label] = min(t.repeat(3, max(n, repeat // 10))) / max(n, repeat // 10) * 1e6
        rows.append(row)
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=200)
    args = ap.parse_args()
    if _core is None:
        print("compiled core not built; only the fallback is timed")
    print(f"{'kernel':<18}{'python [us]':>14}{'cython [us]':>14}{'speedup':>10}")
    for r in bench(args.repeat):
        print(f"{r['kernel']:<18}{r['python']:>14.1f}{r['cython']:>14.1f}{r['python'] / r['cython']:>9.1f}x")


if __name__ == "__main__":
    main()
