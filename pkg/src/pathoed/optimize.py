"""Bound- or ball-constrained quasi-Newton minimization with Latin hypercube
multi-start, and uniform random design baselines."""
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

log = logging.getLogger(__name__)


class OptimizationError(RuntimeError):
    """Raised when no optimization run produced a usable design."""


class _NonFinite(Exception):
    pass


@dataclass
class RunResult:
    x: np.ndarray
    f: float
    iterations: int
    converged: bool
    message: str = ""
    n_eval: int = 0


@dataclass
class OptimizeConfig:
    """Admissible set and stopping rules.

    Give finite ``lower``/``upper`` for a box, ``radius`` for the Euclidean
    ball ``||x|| <= radius`` (both may be combined).
    """

    lower: np.ndarray = None
    upper: np.ndarray = None
    radius: float = None
    coarse_tol: float = 1e-4
    fine_tol: float = 1e-7
    coarse_max_iter: int = 200
    fine_max_iter: int = 500
    n_starts: int = 10
    seed: int = 0
    memory: int = 10

    def __post_init__(self):
        if self.lower is not None:
            self.lower = np.asarray(self.lower, dtype=float)
            self.upper = np.asarray(self.upper, dtype=float)
            if self.lower.shape != self.upper.shape or np.any(self.lower > self.upper):
                raise ValueError("inconsistent bounds")
        if self.radius is not None and self.radius <= 0:
            raise ValueError("ball radius must be positive")
        if self.lower is None and self.radius is None:
            raise ValueError("need box bounds or a ball radius")

    @property
    def dim(self):
        return len(self.lower) if self.lower is not None else None

    def project(self, x):
        x = np.asarray(x, dtype=float)
        if self.lower is not None:
            x = np.clip(x, self.lower, self.upper)
        if self.radius is not None:
            nrm = np.linalg.norm(x)
            if nrm > self.radius:
                x = x * (self.radius / nrm)
        return x


def _guarded(f_and_grad, counter, best):
    def fun(x):
        counter[0] += 1
        f, g = f_and_grad(x)
        f = float(f)
        g = np.asarray(g, dtype=float)
        if not np.isfinite(f) or not np.all(np.isfinite(g)):
            raise _NonFinite(f"non-finite objective at evaluation {counter[0]}")
        if f < best[0]:
            best[0], best[1] = f, x.copy()
        return f, g
    return fun


def lbfgs_b(f_and_grad, x0, lower, upper, tol=1e-7, max_iter=500, memory=10):
    """Box-constrained L-BFGS (SciPy's L-BFGS-B).

    Stops when the projected gradient infinity norm or the relative decrease
    of ``f`` falls below ``tol``. A non-finite value aborts the run and the
    best feasible iterate seen so far is returned.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    x0 = np.clip(np.asarray(x0, dtype=float), lower, upper)
    counter, best = [0], [np.inf, x0.copy()]
    fun = _guarded(f_and_grad, counter, best)
    try:
        res = minimize(fun, x0, jac=True, method="L-BFGS-B", bounds=list(zip(lower, upper)),
                       options={"maxcor": memory, "gtol": tol, "ftol": tol, "maxiter": max_iter})
    except _NonFinite as exc:
        if not np.isfinite(best[0]):
            raise OptimizationError(str(exc)) from exc
        return RunResult(best[1], best[0], counter[0], False, str(exc), counter[0])
    x = np.clip(res.x, lower, upper)
    f = float(res.fun)
    if best[0] < f:
        x, f = best[1], best[0]
    return RunResult(x, f, int(res.nit), bool(res.success), str(res.message), counter[0])


def _two_loop(g, S, Y):
    q = g.copy()
    alphas = []
    for s, y in zip(reversed(S), reversed(Y)):
        rho = 1.0 / (y @ s)
        a = rho * (s @ q)
        alphas.append((rho, a))
        q -= a * y
    if S:
        q *= (S[-1] @ Y[-1]) / (Y[-1] @ Y[-1])
    for (s, y), (rho, a) in zip(zip(S, Y), reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return q


def projected_lbfgs(f_and_grad, x0, project, tol=1e-7, max_iter=500, memory=10,
                    c1=1e-4, max_backtrack=40):
    """L-BFGS with projection onto a convex set after every trial step.

    The line search backtracks along the projected path. Memory is cleared
    whenever the accepted step was cut by the projection, which keeps the
    curvature pairs consistent with an unconstrained model.
    """
    x = project(np.asarray(x0, dtype=float))
    counter, best = [0], [np.inf, x.copy()]
    fun = _guarded(f_and_grad, counter, best)
    S, Y = [], []
    try:
        f, g = fun(x)
        for it in range(max_iter):
            pg = x - project(x - g)
            if np.max(np.abs(pg)) <= tol:
                return RunResult(x, f, it, True, "projected gradient below tolerance", counter[0])
            d = -_two_loop(g, S, Y)
            if g @ d >= 0:
                S, Y = [], []
                d = -g
            step = 1.0 if S else min(1.0, 1.0 / max(np.max(np.abs(g)), 1e-300))
            for _ in range(max_backtrack):
                trial = x + step * d
                x_new = project(trial)
                f_new, g_new = fun(x_new)
                if f_new <= f + c1 * (g @ (x_new - x)):
                    break
                step *= 0.5
            else:
                if S:
                    S, Y = [], []
                    continue
                return RunResult(x, f, it, False, "line search failed", counter[0])
            clipped = not np.allclose(x_new, trial, rtol=0.0, atol=1e-15)
            s, y = x_new - x, g_new - g
            decrease = f - f_new
            x, f_old, f, g = x_new, f, f_new, g_new
            if clipped:
                S, Y = [], []
            elif s @ y > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
                S.append(s)
                Y.append(y)
                if len(S) > memory:
                    S.pop(0)
                    Y.pop(0)
            if decrease <= tol * max(abs(f_old), abs(f), 1.0):
                return RunResult(x, f, it + 1, True, "relative decrease below tolerance", counter[0])
        return RunResult(x, f, max_iter, False, "iteration limit reached", counter[0])
    except _NonFinite as exc:
        if not np.isfinite(best[0]):
            raise OptimizationError(str(exc)) from exc
        return RunResult(best[1], best[0], counter[0], False, str(exc), counter[0])


def run_local(f_and_grad, x0, config, tol, max_iter):
    if config.radius is None:
        return lbfgs_b(f_and_grad, x0, config.lower, config.upper, tol, max_iter, config.memory)
    return projected_lbfgs(f_and_grad, x0, config.project, tol, max_iter, config.memory)


def latin_hypercube(lower, upper, n_samples, seed=None):
    """``n_samples`` points, one in each of ``n_samples`` strata per coordinate."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if n_samples == 0:
        return np.zeros((0, len(lower)))
    if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
        raise ValueError("Latin hypercube sampling needs finite bounds")
    sample = qmc.LatinHypercube(d=len(lower), seed=np.random.default_rng(seed)).random(n_samples)
    return qmc.scale(sample, lower, upper) if np.any(upper > lower) else np.tile(lower, (n_samples, 1))


def _sampling_box(config, dim):
    if config.lower is not None:
        lo, hi = config.lower, config.upper
    else:
        lo, hi = np.full(dim, -np.inf), np.full(dim, np.inf)
    if config.radius is not None:
        lo = np.maximum(lo, -config.radius)
        hi = np.minimum(hi, config.radius)
    return lo, hi


@dataclass
class MultistartResult:
    x: np.ndarray
    f: float
    refined: RunResult
    runs: list = field(default_factory=list)

    def audit(self):
        """JSON-friendly record of every run, enough to replay each one."""
        rows = []
        for i, (x0, r) in enumerate(self.runs):
            rows.append({"start": i, "x0": x0.tolist(), "x": r.x.tolist(), "f": r.f,
                         "iterations": r.iterations, "converged": r.converged,
                         "message": r.message, "n_eval": r.n_eval})
        return {"runs": rows, "refined": {"x0": self.refined_start.tolist(), "x": self.x.tolist(),
                                          "f": self.f, "iterations": self.refined.iterations,
                                          "converged": self.refined.converged,
                                          "message": self.refined.message}}

    @property
    def refined_start(self):
        best = min((r for _, r in self.runs if np.isfinite(r.f)), key=lambda r: r.f)
        return best.x


def multistart_optimize(f_and_grad, config, dim):
    """Coarse runs from Latin hypercube starts, then a fine run from the best.

    Starts are drawn in the box (intersected with the ball's bounding box)
    and projected into the admissible set.
    """
    lo, hi = _sampling_box(config, dim)
    starts = [config.project(x) for x in latin_hypercube(lo, hi, config.n_starts, config.seed)]
    runs = []
    errors = []
    for i, x0 in enumerate(starts):
        try:
            r = run_local(f_and_grad, x0, config, config.coarse_tol, config.coarse_max_iter)
        except OptimizationError as exc:
            errors.append(f"start {i}: {exc}")
            r = RunResult(x0, np.inf, 0, False, str(exc))
        log.info("start %d: f=%.6e iterations=%d converged=%s", i, r.f, r.iterations, r.converged)
        runs.append((x0, r))
    finite = [r for _, r in runs if np.isfinite(r.f)]
    if not finite:
        raise OptimizationError("all starts failed: " + "; ".join(errors))
    best = min(finite, key=lambda r: r.f)
    refined = run_local(f_and_grad, best.x, config, config.fine_tol, config.fine_max_iter)
    if refined.f > best.f:
        refined = RunResult(best.x, best.f, refined.iterations, refined.converged,
                            refined.message + " (kept coarse iterate)", refined.n_eval)
    log.info("refined: f=%.6e iterations=%d", refined.f, refined.iterations)
    return MultistartResult(refined.x, refined.f, refined, runs)


def uniform_designs(config, dim, n, seed=None):
    """``n`` uniform draws from the admissible box or ball."""
    rng = np.random.default_rng(seed)
    if n == 0:
        return np.zeros((0, dim))
    if config.radius is not None and config.lower is None:
        z = rng.standard_normal((n, dim))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        return z * (config.radius * rng.uniform(size=(n, 1)) ** (1.0 / dim))
    X = rng.uniform(config.lower, config.upper, size=(n, dim))
    if config.radius is not None:
        # rejection keeps the distribution uniform on box-and-ball
        inside = np.linalg.norm(X, axis=1) <= config.radius
        while not inside.all():
            X[~inside] = rng.uniform(config.lower, config.upper, size=((~inside).sum(), dim))
            inside = np.linalg.norm(X, axis=1) <= config.radius
    return X


def random_baseline(psi, config, dim, n=1000, seed=None):
    """Criterion values at ``n`` uniform designs, sorted, with summary stats."""
    X = uniform_designs(config, dim, n, seed)
    values = np.sort(np.array([psi(x) for x in X], dtype=float))
    if n == 0:
        return values, {"n": 0}
    stats = {"n": int(n), "min": float(values[0]), "max": float(values[-1]),
             "mean": float(values.mean()), "median": float(np.median(values))}
    return values, stats
