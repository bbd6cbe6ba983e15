"""Experiment configuration: YAML files validated against a JSON schema and
turned into model objects."""
import copy
import hashlib
import json
from dataclasses import dataclass

import jsonschema
import numpy as np
import yaml

from .forward import AMPLITUDE_PRESETS, VELOCITY_PRESETS, ForwardModel
from .mesh import EDGES, build_mesh
from .observation import ObscuredRegion, ObservationSchedule
from .oed import HESSIAN_MODES, GoalFunctional, ProblemSetup
from .optimize import OptimizeConfig
from .paths import (BezierPath, FourierPath, box_constraint_bounds, disk_constraint_radius,
                    hull_box_bounds)
from .prior import EllipticPrior

_point = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_interval = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_pos = {"type": "number", "exclusiveMinimum": 0}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False}


SCHEMA = _obj({
    "experiment": _obj({"name": {"type": "string"}, "seed": {"type": "integer", "minimum": 0}},
                       ["name"]),
    "output": _obj({"dir": {"type": "string"}}),
    "mesh": _obj({"n_side": {"type": "integer", "minimum": 2}}, ["n_side"]),
    "model": _obj({
        "alpha": _pos,
        "velocity": {"oneOf": [{"enum": sorted(VELOCITY_PRESETS)},
                               {"type": "array", "items": {"type": "string"},
                                "minItems": 2, "maxItems": 2}]},
        "amplitude": {"type": "string"},
    }, ["alpha", "velocity", "amplitude"]),
    "time": _obj({"T": _pos, "n_t": {"type": "integer", "minimum": 1}}, ["T", "n_t"]),
    "bc": _obj({"dirichlet_edges": {"type": "array", "items": {"enum": list(EDGES)},
                                    "uniqueItems": True}}),
    "prior": _obj({
        "a1": _pos, "a2": _pos,
        "mean": _obj({"kind": {"enum": ["zero", "constant", "truth-average"]},
                      "value": {"type": "number"}}, ["kind"]),
    }, ["a1", "a2"]),
    "noise": _obj({"sigma2": _pos}, ["sigma2"]),
    "truth": _obj({
        "kind": {"enum": ["gaussian-bump", "nodal"]},
        "center": _point, "width": _pos,
        "amplitude": {"oneOf": [{"type": "number"}, {"const": "auto"}]},
        "noise_fraction": _pos,
        "file": {"type": "string"},
    }, ["kind"]),
    "obs": _obj({"window": _interval, "stride": {"type": "integer", "minimum": 1}},
                ["window", "stride"]),
    "path": _obj({
        "family": {"enum": ["bezier", "fourier"]},
        "degree": {"type": "integer", "minimum": 1},
        "mode": {"enum": ["free", "fixed", "closed"]},
        "start": _point, "end": _point,
        "modes": {"type": "integer", "minimum": 1},
        "center": _point,
        "constraint": {"enum": ["hull-box", "fourier-box", "disk"]},
        "radius": _pos,
        "half_widths": _point,
        "box": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
        "gamma": {"type": "number", "minimum": 0},
    }, ["family", "constraint"]),
    "nominal": _obj({"control_points": {"type": "array", "items": _point, "minItems": 2}},
                    ["control_points"]),
    "obscured": _obj({"center": _point, "radius": _pos, "beta": _pos},
                     ["center", "radius", "beta"]),
    "goal": _obj({"box": {"type": "array", "items": _interval, "minItems": 2, "maxItems": 2},
                  "window": _interval}, ["box", "window"]),
    "lowrank": _obj({"r": {"type": ["integer", "null"], "minimum": 0},
                     "k": {"type": ["integer", "null"], "minimum": 1},
                     "hessian": {"enum": list(HESSIAN_MODES)}}),
    "opt": _obj({"n_starts": {"type": "integer", "minimum": 1},
                 "seed": {"type": "integer", "minimum": 0},
                 "coarse_tol": _pos, "fine_tol": _pos,
                 "coarse_max_iter": {"type": "integer", "minimum": 1},
                 "fine_max_iter": {"type": "integer", "minimum": 1},
                 "log_scale": {"type": "boolean"}}),
    "baseline": _obj({"n": {"type": "integer", "minimum": 0},
                      "seed": {"type": "integer", "minimum": 0}}),
    "inversion": _obj({"n_samples": {"type": "integer", "minimum": 0},
                       "seed": {"type": "integer", "minimum": 0}}),
}, ["experiment", "mesh", "model", "time", "prior", "noise", "obs", "path", "goal"])


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the offending key."""

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


def validate(cfg):
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as exc:
        key = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(exc.message, key) from None
    path = cfg["path"]
    if path["family"] == "bezier":
        if "degree" not in path:
            raise ConfigError("Bezier paths need a degree", "path/degree")
        if path["constraint"] != "hull-box":
            raise ConfigError("Bezier paths use the hull-box constraint", "path/constraint")
    else:
        if "modes" not in path:
            raise ConfigError("Fourier paths need a number of modes", "path/modes")
        if path["constraint"] == "disk" and "radius" not in path:
            raise ConfigError("disk constraint needs a radius", "path/radius")
        if path["constraint"] == "fourier-box" and "half_widths" not in path:
            raise ConfigError("fourier-box constraint needs half_widths", "path/half_widths")
        if path["constraint"] == "hull-box":
            raise ConfigError("hull-box applies to Bezier paths only", "path/constraint")
    amp = cfg["model"]["amplitude"]
    if amp not in AMPLITUDE_PRESETS:
        try:
            compile(amp, "<amplitude>", "eval")
        except SyntaxError as exc:
            raise ConfigError(f"bad amplitude expression: {exc.msg}", "model/amplitude") from None
    return cfg


def load_config(path):
    with open(path) as fh:
        cfg = yaml.safe_load(fh)
    if not isinstance(cfg, dict):
        raise ConfigError("configuration must be a mapping")
    return validate(cfg)


def config_hash(cfg):
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def gaussian_bump(center, width):
    cx, cy = center

    def f(x):
        return np.exp(-((x[:, 0] - cx) ** 2 + (x[:, 1] - cy) ** 2) / (2.0 * width ** 2))
    return f


@dataclass
class Experiment:
    """Model objects built from a validated configuration."""

    cfg: dict
    mesh: object
    model: object
    prior: object
    schedule: object
    path: object
    goal: object
    region: object
    setup: object

    @property
    def seed(self):
        return int(self.cfg["experiment"].get("seed", 0))

    @property
    def hash(self):
        return config_hash(self.cfg)

    def optimize_config(self):
        c = self.cfg.get("opt", {})
        p = self.cfg["path"]
        kw = dict(n_starts=c.get("n_starts", 10), seed=c.get("seed", self.seed),
                  coarse_tol=c.get("coarse_tol", 1e-4), fine_tol=c.get("fine_tol", 1e-7),
                  coarse_max_iter=c.get("coarse_max_iter", 200),
                  fine_max_iter=c.get("fine_max_iter", 500))
        if p["constraint"] == "hull-box":
            lo, hi = p.get("box", [0.0, 1.0])
            return OptimizeConfig(*hull_box_bounds(self.path, lo, hi), **kw)
        if p["constraint"] == "fourier-box":
            return OptimizeConfig(*box_constraint_bounds(self.path, p["half_widths"]), **kw)
        return OptimizeConfig(radius=disk_constraint_radius(self.path, p["radius"]), **kw)

    def nominal_design(self):
        nom = self.cfg.get("nominal")
        if nom is None:
            raise ConfigError("no nominal path configured", "nominal")
        ctrl = np.asarray(nom["control_points"], dtype=float)
        path = BezierPath(len(ctrl) - 1, tuple(self.cfg["obs"]["window"]))
        return path, path.design_from_control_points(ctrl)

    def truth_shape(self):
        t = self.cfg.get("truth")
        if t is None:
            raise ConfigError("no ground truth configured", "truth")
        if t["kind"] == "nodal":
            vals = np.loadtxt(t["file"], delimiter=",", comments="#")
            vals = np.asarray(vals, dtype=float).reshape(-1)
            if len(vals) != self.mesh.n_nodes:
                raise ConfigError(f"expected {self.mesh.n_nodes} nodal values", "truth/file")
            return vals
        return self.mesh.interpolate(gaussian_bump(t.get("center", (0.25, 0.75)), t.get("width", 0.1)))


def build_experiment(cfg):
    cfg = validate(copy.deepcopy(cfg))
    mesh = build_mesh(cfg["mesh"]["n_side"])
    m = cfg["model"]
    model = ForwardModel(mesh, m["alpha"], m["velocity"], m["amplitude"], T=cfg["time"]["T"],
                         n_t=cfg["time"]["n_t"],
                         dirichlet_edges=tuple(cfg.get("bc", {}).get("dirichlet_edges", ())))
    prior = EllipticPrior(mesh, cfg["prior"]["a1"], cfg["prior"]["a2"], M=model.M)
    window = tuple(cfg["obs"]["window"])
    schedule = ObservationSchedule.from_window(model.times, window, cfg["obs"]["stride"])
    p = cfg["path"]
    if p["family"] == "bezier":
        path = BezierPath(p["degree"], window, p.get("mode", "free"),
                          tuple(p["start"]) if "start" in p else None,
                          tuple(p["end"]) if "end" in p else None)
    else:
        path = FourierPath(p["modes"], window, tuple(p.get("center", (0.5, 0.5))))
    g = cfg["goal"]
    goal = GoalFunctional(model, tuple(map(tuple, g["box"])), tuple(g["window"]))
    o = cfg.get("obscured")
    region = ObscuredRegion(tuple(o["center"]), o["radius"], o["beta"]) if o else None
    lr = cfg.get("lowrank", {})
    setup = ProblemSetup(prior, model, path, schedule, cfg["noise"]["sigma2"], region=region,
                         gamma=p.get("gamma", 0.0), rank=lr.get("r"), lanczos_iter=lr.get("k"),
                         hessian=lr.get("hessian", "tabulated"))
    exp = Experiment(cfg, mesh, model, prior, schedule, path, goal, region, setup)
    return exp
