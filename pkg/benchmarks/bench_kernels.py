"""Time the compiled and pure-numpy kernel backends on the sampler's hot call.

    python3 benchmarks/bench_kernels.py --repeat 200

Both backends are imported directly, so the comparison does not depend on
the ANNULUSGP_PURE_PYTHON switch.
"""
import argparse
import timeit

import numpy as np

from annulusgp import _kernels_py
from annulusgp.core import PROBE_RADII, HarmonicModel
from annulusgp.kernels import fourier_design_matrix

try:
    from annulusgp import _kernels_ext
except ImportError:  # extension not built
    _kernels_ext = None


def problem(n_rakes, model, seed=0):
    rng = np.random.default_rng(seed)
    theta = np.tile(np.sort(rng.uniform(0, 360, n_rakes)), len(PROBE_RADII))
    r = np.repeat(PROBE_RADII, n_rakes)
    FT = np.ascontiguousarray(fourier_design_matrix(theta, model).T)
    lam2 = rng.uniform(0.1, 1.0, model.n_modes)
    f = rng.normal(size=r.size)
    return FT, lam2, np.ascontiguousarray(r), f


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=200)
    args = parser.parse_args()
    cases = [(7, HarmonicModel((1, 4, 7, 12, 14))), (12, HarmonicModel.up_to(20))]
    backends = [_kernels_py] + ([_kernels_ext] if _kernels_ext is not None else [])
    print(f"{'N':>4} {'modes':>6} " + " ".join(f"{b.NAME + ' [us]':>14}" for b in backends)
          + ("  speedup   max |diff|" if len(backends) == 2 else ""))
    for n_rakes, model in cases:
        FT, lam2, r, f = problem(n_rakes, model)
        args_ = (FT, lam2, r, f, 1.1, 0.4, 0.01, 1e-8)
        times, outs = [], []
        for b in backends:
            b.loglik_grad(*args_)
            t = min(timeit.repeat(lambda: b.loglik_grad(*args_), number=args.repeat, repeat=3))
            times.append(1e6 * t / args.repeat)
            outs.append(np.concatenate([np.atleast_1d(np.asarray(x, float)) for x in b.loglik_grad(*args_)]))
        line = f"{r.size:>4} {model.n_modes:>6} " + " ".join(f"{t:>14.1f}" for t in times)
        if len(backends) == 2:
            diff = np.max(np.abs(outs[0] - outs[1]) / np.maximum(1.0, np.abs(outs[0])))
            line += f"  {times[0] / times[1]:>7.2f}   {diff:.1e}"
        print(line)


if __name__ == "__main__":
    main()
