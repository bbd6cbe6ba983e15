"""Small problem builders shared by the test modules."""
from types import SimpleNamespace

import numpy as np

from pathoed import forward as fw
from pathoed.mesh import build_mesh
from pathoed.observation import ObscuredRegion, ObservationSchedule
from pathoed.oed import GoalFunctional, ProblemSetup
from pathoed.paths import BezierPath, FourierPath
from pathoed.prior import EllipticPrior

from oracle import DenseProblem


def make_problem(n_side=5, n_t=12, T=1.0, window=(0.25, 0.75), stride=2, family="bezier",
                 degree=3, mode="free", start=None, end=None, modes=2, alpha=0.15,
                 velocity="constant-diagonal", amplitude="oscillating", dirichlet=("left", "top"),
                 a1=0.55, a2=0.05, sigma2=1e-3, region=None, gamma=0.0, hessian="assembled",
                 rank=None, goal_box=((0.5, 1.0), (0.0, 0.5)), goal_window=(0.75, 1.0),
                 indices=None):
    mesh = build_mesh(n_side)
    model = fw.ForwardModel(mesh, alpha, velocity, amplitude, T=T, n_t=n_t,
                            dirichlet_edges=dirichlet)
    prior = EllipticPrior(mesh, a1, a2, M=model.M)
    if indices is None:
        schedule = ObservationSchedule.from_window(model.times, window, stride)
    else:
        schedule = ObservationSchedule(np.asarray(indices), n_t)
    if family == "bezier":
        path = BezierPath(degree, window, mode, start, end)
    else:
        path = FourierPath(modes, window)
    if region is not None and not isinstance(region, ObscuredRegion):
        region = ObscuredRegion(*region)
    goal = GoalFunctional(model, goal_box, goal_window)
    setup = ProblemSetup(prior, model, path, schedule, sigma2, region=region, gamma=gamma,
                         hessian=hessian, rank=rank)
    return SimpleNamespace(mesh=mesh, model=model, prior=prior, schedule=schedule, path=path,
                           goal=goal, setup=setup, n_side=n_side, n_t=n_t, T=T, alpha=alpha,
                           a1=a1, a2=a2, sigma2=sigma2)


def dense_twin(p):
    """The oracle model matching a problem from :func:`make_problem`."""
    return DenseProblem(p.n_side, p.n_t, p.T, p.alpha, p.model.velocity, p.model.amplitude,
                        p.model.dirichlet, p.a1, p.a2, p.sigma2, p.schedule.indices,
                        p.goal.box, p.goal.window)


def measurement_points(p, xi):
    t = p.model.times[p.schedule.indices]
    return p.path.evaluate(t, xi)


def interior_margin(n_side, points):
    """Smallest distance of any point to an element edge (including diagonals)."""
    h = 1.0 / (n_side - 1)
    s = points[:, 0] / h - np.floor(points[:, 0] / h)
    t = points[:, 1] / h - np.floor(points[:, 1] / h)
    d = np.minimum.reduce([s, 1 - s, t, 1 - t, np.abs(s - t) / np.sqrt(2)])
    inside = np.all((points > 0) & (points < 1), axis=1)
    return float(np.min(np.where(inside, d * h, -1.0)))


def interior_design(p, rng, lo, hi, margin=2e-3, tries=500):
    """Random design whose measurement points are all well inside elements."""
    for _ in range(tries):
        xi = rng.uniform(lo, hi, p.path.n_design)
        if interior_margin(p.n_side, measurement_points(p, xi)) > margin:
            return xi
    raise RuntimeError("no interior design found")


def central_fd(f, x, h=1e-6):
    g = np.zeros_like(x)
    for j in range(len(x)):
        e = np.zeros_like(x)
        e[j] = h
        g[j] = (f(x + e) - f(x - e)) / (2 * h)
    return g
