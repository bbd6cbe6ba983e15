"""End-to-end workflows on a configured experiment."""
import dataclasses
from dataclasses import dataclass

import numpy as np

from .config import ConfigError
from .observation import build_phi, observe
from .oed import (build_low_rank, compute_map, criterion, design_objective,
                  gaussian_density, goal_density, goal_variance, posterior_sample,
                  variance_field)
from .optimize import multistart_optimize, random_baseline
from .paths import eval_path


def setup_for_path(exp, path):
    """Copy of the experiment's problem setup with a different path family,
    sharing any tabulated responses (they depend only on the schedule)."""
    if path is exp.path:
        return exp.setup
    setup = dataclasses.replace(exp.setup, path=path, gamma=0.0)
    setup._table = exp.setup._table
    return setup


def noiseless_data(exp, path, xi, m):
    """Noiseless measurements of ``S m`` along ``path``."""
    idx = exp.schedule.indices
    n_steps = idx[-1] + 1 if len(idx) else 0
    U = exp.model.solve_forward(m, n_steps=n_steps)
    phi = build_phi(exp.mesh, path, xi, exp.model.times)
    return observe(phi, exp.schedule, U)


def prepare_truth(exp):
    """Ground-truth parameter; also sets the prior mean per configuration.

    With ``amplitude: auto`` the bump is scaled so that the noise standard
    deviation is ``noise_fraction`` times the RMS of the noiseless data along
    the nominal path.
    """
    t = exp.cfg.get("truth", {"kind": "gaussian-bump"})
    shape = exp.truth_shape()
    amp = t.get("amplitude", "auto") if t["kind"] == "gaussian-bump" else 1.0
    if amp == "auto":
        path, xi = exp.nominal_design()
        d = noiseless_data(exp, path, xi, shape)
        rms = np.sqrt(np.mean(d ** 2)) if len(d) else 0.0
        if not rms > 0:
            raise ConfigError("nominal data vanish; give truth/amplitude explicitly",
                              "truth/amplitude")
        amp = np.sqrt(exp.setup.sigma2) / (t.get("noise_fraction", 0.01) * rms)
    m_true = float(amp) * shape
    mean = exp.cfg["prior"].get("mean", {"kind": "truth-average"})
    if mean["kind"] == "zero":
        value = 0.0
    elif mean["kind"] == "constant":
        value = mean.get("value", 0.0)
    else:
        ones = np.ones(exp.mesh.n_nodes)
        value = float(ones @ (exp.model.M @ m_true))
    exp.prior.mean = np.full(exp.mesh.n_nodes, float(value))
    return m_true


@dataclass
class SyntheticData:
    times: np.ndarray
    positions: np.ndarray
    clean: np.ndarray
    noisy: np.ndarray


def simulate_data(exp, path, xi, m_true, seed):
    clean = noiseless_data(exp, path, xi, m_true)
    rng = np.random.default_rng(seed)
    noisy = clean + np.sqrt(exp.setup.sigma2) * rng.standard_normal(len(clean))
    t = exp.model.times[exp.schedule.indices]
    pos = eval_path(path, t, xi) if len(t) else np.zeros((0, 2))
    return SyntheticData(t, pos, clean, noisy)


@dataclass
class Inversion:
    posterior: object
    map: np.ndarray
    variance: np.ndarray
    samples: list


def invert(exp, path, xi, y, n_samples=0, seed=0):
    """Posterior at a design; obscured measurements are discarded."""
    setup = setup_for_path(exp, path)
    post = build_low_rank(setup, xi, weighting="hard")
    m_map = compute_map(setup, xi, post, y)
    rng = np.random.default_rng(seed)
    samples = [posterior_sample(post, m_map, rng=rng) for _ in range(n_samples)]
    return Inversion(post, m_map, variance_field(post), samples)


def optimize_design(exp, log_scale=True):
    cfg = exp.optimize_config()
    res = multistart_optimize(design_objective(exp.setup, exp.goal, log_scale), cfg,
                              exp.path.n_design)
    return res


def baseline(exp, n=None, seed=None):
    b = exp.cfg.get("baseline", {})
    n = b.get("n", 1000) if n is None else n
    seed = b.get("seed", exp.seed) if seed is None else seed
    return random_baseline(lambda x: criterion(exp.setup, x, exp.goal), exp.optimize_config(),
                           exp.path.n_design, n, seed)


@dataclass
class GoalStats:
    mean: float
    variance: float
    cv: float

    def density(self, n=401):
        return gaussian_density(self.mean, self.variance, n)


def prior_goal_stats(exp):
    return GoalStats(*goal_density(exp.prior.apply_gamma_pr, exp.model.M, exp.goal.c, exp.prior.mean))


def posterior_goal_stats(exp, path, xi, m_true, seed):
    """Goal statistics after inverting synthetic data collected at ``xi``.

    The variance is the design criterion (soft filter), the mean is the goal
    at the MAP point computed from the retained measurements.
    """
    data = simulate_data(exp, path, xi, m_true, seed)
    inv = invert(exp, path, xi, data.noisy)
    setup = setup_for_path(exp, path)
    soft = build_low_rank(setup, xi, weighting="soft")
    mean = exp.goal(inv.map)
    var, _ = goal_variance(soft, exp.goal.c)
    cv = np.sqrt(max(var, 0.0)) / abs(mean) if mean != 0 else np.inf
    return GoalStats(mean, var, cv), inv, data
