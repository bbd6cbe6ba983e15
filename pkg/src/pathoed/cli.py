"""Command-line experiment runner.

Every subcommand reads a YAML configuration (``--config``) and writes CSV
files for fields, curves and histograms and JSON files for scalars and audit
trails into the output directory. Each file records the configuration hash
and the seeds that produced it.
"""
import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, build_experiment, load_config
from .oed import design_objective, evaluate_criterion
from .optimize import OptimizationError, multistart_optimize
from .paths import eval_path
from .pipeline import (baseline, invert, noiseless_data, posterior_goal_stats, prepare_truth,
                       prior_goal_stats)

log = logging.getLogger("pathoed")


class CommandError(RuntimeError):
    pass


class _Context:
    def __init__(self, args):
        self.cfg = load_config(args.config)
        self.exp = build_experiment(self.cfg)
        out = args.out or self.cfg.get("output", {}).get("dir", ".")
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)

    @property
    def seeds(self):
        c = self.cfg
        return {"experiment": self.exp.seed,
                "opt": c.get("opt", {}).get("seed", self.exp.seed),
                "baseline": c.get("baseline", {}).get("seed", self.exp.seed),
                "inversion": c.get("inversion", {}).get("seed", self.exp.seed)}

    def header(self):
        seeds = ",".join(f"{k}:{v}" for k, v in sorted(self.seeds.items()))
        return f"# config={self.exp.hash} seeds={seeds}\n"

    def write_csv(self, name, columns, rows):
        path = self.out / name
        with open(path, "w") as fh:
            fh.write(self.header())
            fh.write(",".join(columns) + "\n")
            for row in rows:
                fh.write(",".join(_fmt(v) for v in row) + "\n")
        return path

    def write_json(self, name, payload):
        doc = {"config_hash": self.exp.hash, "seeds": self.seeds, **payload}
        path = self.out / name
        with open(path, "w") as fh:
            json.dump(_jsonable(doc), fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if np.isfinite(f) else str(f)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def read_csv(path):
    """Columns of a CSV written by this tool, keyed by header name."""
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#") and ln.strip()]
    if not lines:
        raise CommandError(f"{path}: empty file")
    names = lines[0].strip().split(",")
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]]).reshape(-1, len(names))
    return {n: data[:, i] for i, n in enumerate(names)}


def _load_design(ctx, design_file):
    """Design from a JSON file produced by ``optimize`` (or ``{"xi": [...]}``)."""
    with open(design_file) as fh:
        doc = json.load(fh)
    if "xi" not in doc:
        raise CommandError(f"{design_file}: missing key 'xi'")
    xi = np.asarray(doc["xi"], dtype=float)
    if xi.shape != (ctx.exp.path.n_design,):
        raise CommandError(f"{design_file}: design has {xi.size} entries, "
                           f"the configured path needs {ctx.exp.path.n_design}")
    return ctx.exp.path, xi


def _design(ctx, args):
    if getattr(args, "design", None):
        return _load_design(ctx, args.design)
    return ctx.exp.nominal_design()


def cmd_forward(ctx, args):
    exp = ctx.exp
    m_true = prepare_truth(exp)
    path, xi = _design(ctx, args)
    idx = exp.schedule.indices
    n_steps = int(idx[-1]) + 1 if len(idx) else 0
    U = exp.model.solve_forward(m_true, n_steps=exp.model.n_t)
    clean = noiseless_data(exp, path, xi, m_true)
    rng = np.random.default_rng(exp.seed)
    noise = np.sqrt(exp.setup.sigma2) * rng.standard_normal(len(clean))
    value = clean if args.noiseless else clean + noise
    t = exp.model.times[idx]
    pos = eval_path(path, t, xi) if len(t) else np.zeros((0, 2))
    ctx.write_csv("measurements.csv", ["t", "x1", "x2", "value", "noiseless"],
                  zip(t, pos[:, 0], pos[:, 1], value, clean))
    np.save(ctx.out / "snapshots.npy", U)
    ctx.write_csv("snapshot_times.csv", ["column", "t"], enumerate(exp.model.times))
    ctx.write_csv("truth.csv", ["node", "x1", "x2", "value"],
                  ((i, *exp.mesh.nodes[i], m_true[i]) for i in range(exp.mesh.n_nodes)))
    ctx.write_json("forward.json", {"n_measurements": len(t), "n_steps_observed": n_steps,
                                    "noiseless": bool(args.noiseless), "xi": xi,
                                    "goal_truth": exp.goal(m_true),
                                    "snapshot_shape": list(U.shape)})
    return {"measurements": len(t)}


def cmd_invert(ctx, args):
    exp = ctx.exp
    if not args.data:
        raise CommandError("invert needs --data (measurements written by 'forward')")
    m_true = prepare_truth(exp)
    data = read_csv(args.data)
    if "value" not in data:
        raise CommandError(f"{args.data}: missing column 'value'")
    y = data["value"]
    if len(y) != exp.schedule.n_y:
        raise CommandError(f"{args.data}: {len(y)} measurements, schedule has {exp.schedule.n_y}")
    path, xi = _design(ctx, args)
    inv_cfg = exp.cfg.get("inversion", {})
    n_samples = args.samples if args.samples is not None else inv_cfg.get("n_samples", 3)
    seed = ctx.seeds["inversion"]
    inv = invert(exp, path, xi, y, n_samples=n_samples, seed=seed)
    cols = ["node", "x1", "x2", "map", "variance"] + [f"sample_{i}" for i in range(n_samples)]
    ctx.write_csv("posterior_fields.csv", cols,
                  ((i, *exp.mesh.nodes[i], inv.map[i], inv.variance[i], *(s[i] for s in inv.samples))
                   for i in range(exp.mesh.n_nodes)))
    ctx.write_json("invert.json", {
        "goal_map": exp.goal(inv.map), "goal_prior_mean": exp.goal(exp.prior.mean),
        "goal_truth": exp.goal(m_true), "rank": inv.posterior.rank,
        "eigenvalues": inv.posterior.eigenvalues, "n_samples": n_samples, "xi": xi})
    return {"goal_map": exp.goal(inv.map)}


def cmd_optimize(ctx, args):
    exp = ctx.exp
    log_scale = exp.cfg.get("opt", {}).get("log_scale", True)
    objective = design_objective(exp.setup, exp.goal, log_scale)
    trace = []

    def traced(x):
        f, g = objective(x)
        trace.append(f)
        return f, g

    res = multistart_optimize(traced, exp.optimize_config(), exp.path.n_design)
    final = evaluate_criterion(exp.setup, res.x, exp.goal, gradient=False)
    t = np.linspace(*exp.path.window, args.samples)
    pts = eval_path(exp.path, t, res.x)
    ctx.write_csv("optimal_path.csv", ["t", "x1", "x2"], zip(t, pts[:, 0], pts[:, 1]))
    ctx.write_csv("criterion_trace.csv", ["evaluation", "objective"], enumerate(trace))
    ctx.write_json("optimal_design.json", {
        "xi": res.x, "psi": final.psi, "penalty": final.penalty, "value": final.value,
        "objective": res.f, "log_scale": log_scale, "family": exp.cfg["path"]["family"],
        "audit": res.audit()})
    return {"psi": final.psi}


def cmd_baseline(ctx, args):
    exp = ctx.exp
    if args.optimal:
        _, xi = _load_design(ctx, args.optimal)
    else:
        xi = multistart_optimize(design_objective(exp.setup, exp.goal), exp.optimize_config(),
                                 exp.path.n_design).x
    opt = evaluate_criterion(exp.setup, xi, exp.goal, gradient=False).psi
    values, stats = baseline(exp, n=args.n)
    ctx.write_csv("baseline.csv", ["index", "psi", "optimal_psi"],
                  ((i, v, opt) for i, v in enumerate(values)))
    ctx.write_json("baseline.json", {"stats": stats, "optimal_psi": opt, "optimal_xi": xi,
                                     "beats_all": bool(len(values) == 0 or opt < values[0])})
    return {"optimal_psi": opt, **stats}


def cmd_goal_density(ctx, args):
    exp = ctx.exp
    m_true = prepare_truth(exp)
    prior = prior_goal_stats(exp)
    if args.design:
        path, xi = _load_design(ctx, args.design)
    else:
        path, xi = exp.nominal_design()
    post, _, _ = posterior_goal_stats(exp, path, xi, m_true, exp.seed)
    zp, dp = prior.density(args.samples)
    zq, dq = post.density(args.samples)
    ctx.write_csv("goal_density.csv", ["prior_z", "prior_pdf", "posterior_z", "posterior_pdf"],
                  zip(zp, dp, zq, dq))
    ctx.write_json("goal_density.json", {
        "prior": vars(prior), "posterior": vars(post), "goal_truth": exp.goal(m_true), "xi": xi})
    return {"prior_cv": prior.cv, "posterior_cv": post.cv}


COMMANDS = {
    "forward": cmd_forward,
    "invert": cmd_invert,
    "optimize": cmd_optimize,
    "baseline": cmd_baseline,
    "goal-density": cmd_goal_density,
}


def build_parser():
    p = argparse.ArgumentParser(prog="pathoed", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, help_):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", required=True, help="YAML experiment configuration")
        s.add_argument("--out", help="output directory (default: output.dir or .)")
        s.add_argument("-v", "--verbose", action="store_true")
        return s

    s = add("forward", "simulate the truth and measure along a path")
    s.add_argument("--design", help="design JSON; default is the nominal Bezier path")
    s.add_argument("--noiseless", action="store_true", help="write data without noise")
    s = add("invert", "posterior MAP, variance and samples from data")
    s.add_argument("--data", help="measurements CSV")
    s.add_argument("--design", help="design JSON; default is the nominal Bezier path")
    s.add_argument("--samples", type=int, help="number of posterior samples")
    s = add("optimize", "optimal sensor path")
    s.add_argument("--samples", type=int, default=201, help="points on the path polyline")
    s = add("baseline", "criterion at random designs with the optimal marker")
    s.add_argument("--optimal", help="design JSON from 'optimize' (else optimize first)")
    s.add_argument("--n", type=int, help="number of random designs (default baseline.n)")
    s = add("goal-density", "prior and posterior law of the goal")
    s.add_argument("--design", help="design JSON; default is the nominal Bezier path")
    s.add_argument("--samples", type=int, default=401, help="points per density curve")
    return p


def _fail(kind, message, code, **extra):
    sys.stderr.write(json.dumps({"error": kind, "message": message, **extra}, sort_keys=True) + "\n")
    return code


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        ctx = _Context(args)
        summary = COMMANDS[args.command](ctx, args)
    except ConfigError as exc:
        return _fail("config", str(exc), 2, key=exc.path)
    except (CommandError, OptimizationError, ValueError, OSError) as exc:
        return _fail(type(exc).__name__, str(exc), 1)
    print(json.dumps(_jsonable({"command": args.command, "output": str(ctx.out), **summary}),
                     sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
