"""Time the compiled kernels against their numpy twins.

    python benchmarks/bench_kernels.py [--repeat 20] [--end-to-end]

Each row reports the best-of-``repeat`` wall time per call for both
back ends and their ratio. ``--end-to-end`` also times one criterion and
gradient evaluation on a mid-size problem with each back end.
"""
import argparse
import timeit

import numpy as np

from pathoed import _accel
from pathoed.kernels import bernstein, de_casteljau, locate_p1


def best_time(fn, repeat):
    fn()  # warm-up (and JIT compilation)
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def kernel_cases(rng):
    pts = rng.uniform(0, 1, (20_000, 2))
    s = rng.uniform(0, 1, 20_000)
    ctrl = rng.uniform(0, 1, (6, 2))
    return {
        "locate_p1 (20k points, n_side=35)": lambda: locate_p1(pts, 35),
        "bernstein (20k times, degree 5)": lambda: bernstein(s, 5),
        "de_casteljau (20k times, degree 5)": lambda: de_casteljau(s, ctrl),
    }


def end_to_end_case():
    from pathoed.forward import ForwardModel
    from pathoed.mesh import build_mesh
    from pathoed.observation import ObservationSchedule
    from pathoed.oed import GoalFunctional, ProblemSetup, criterion_and_gradient
    from pathoed.paths import BezierPath
    from pathoed.prior import EllipticPrior

    mesh = build_mesh(20)
    model = ForwardModel(mesh, 0.15, "constant-diagonal", "oscillating", T=1.0, n_t=100,
                         dirichlet_edges=("left", "top"))
    prior = EllipticPrior(mesh, 0.55, 0.006, M=model.M)
    sched = ObservationSchedule.from_window(model.times, (0.2, 0.4), 2)
    path = BezierPath(5, (0.2, 0.4))
    setup = ProblemSetup(prior, model, path, sched, 1e-3, hessian="tabulated")
    goal = GoalFunctional(model, ((0.5, 0.9), (0.1, 0.5)), (0.8, 1.0))
    setup.response_table()
    xi = np.random.default_rng(0).uniform(0.2, 0.8, path.n_design)
    return lambda: criterion_and_gradient(setup, xi, goal)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--end-to-end", action="store_true")
    args = ap.parse_args(argv)
    if not _accel.HAVE_NUMBA:
        print("numba unavailable or disabled; only the numpy back end can be timed")

    cases = kernel_cases(np.random.default_rng(0))
    if args.end_to_end:
        cases["criterion + gradient (n_side=20, n_t=100)"] = end_to_end_case()

    print(f"{'case':<44}{'numba [ms]':>12}{'numpy [ms]':>12}{'ratio':>8}")
    for name, fn in cases.items():
        times = {}
        for backend in (True, False):
            if backend and not _accel.HAVE_NUMBA:
                continue
            _accel.USE_NUMBA = backend
            times[backend] = best_time(fn, args.repeat) * 1e3
        _accel.USE_NUMBA = _accel.HAVE_NUMBA
        jit = times.get(True, float("nan"))
        print(f"{name:<44}{jit:>12.3f}{times[False]:>12.3f}{times[False] / jit:>8.2f}")


if __name__ == "__main__":
    main()
