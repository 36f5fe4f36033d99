"""Case and sweep configuration files.

Configs are YAML documents with a fixed schema (see ``SCHEMA``). Unknown keys
are rejected, missing optional keys are filled from the defaults below and
every diagnostic names the file and line of the offending entry.

A case file has the sections ``case``, ``units``, ``spacecraft``,
``transfer`` and ``scvx``. A sweep file has the same sections plus
``sweep``.
"""

import copy
import math
from dataclasses import dataclass
from typing import List, Optional

import yaml

from .errors import ConfigError
from .problems import cr3bp_problem, mee_problem
from .scvx import ADAPTIVE, UNIFORM, ScvxOptions

MODELS = ("cr3bp", "mee")
STRATEGIES = tuple(f"{mesh}/nl-{nl}" for mesh in (UNIFORM, ADAPTIVE) for nl in ("on", "off"))

_REQ = object()


def _num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _pos(v):
    return _num(v) and v > 0


def _nonneg(v):
    return _num(v) and v >= 0


def _int_ge(lo):
    return lambda v: isinstance(v, int) and not isinstance(v, bool) and v >= lo


def _vec(n, pred=_num):
    return lambda v: isinstance(v, list) and len(v) == n and all(pred(x) for x in v)


def _onoff(v):
    return isinstance(v, bool) or v in ("on", "off")


# section -> key -> (default or _REQ, validator, description)
SCHEMA = {
    "case": {
        "name": ("case", lambda v: isinstance(v, str) and v != "", "label used in outputs"),
        "model": (_REQ, lambda v: v in MODELS, f"one of {MODELS}"),
        "nodes": (300, _int_ge(2), "node count K (integer >= 2)"),
        "seed": (0, _int_ge(0), "non-negative integer"),
        "out_dir": ("runs", lambda v: isinstance(v, str) and v != "", "output directory"),
    },
    "units": {
        "length_km": (_REQ, _pos, "positive length unit [km]"),
        "time_s": (_REQ, _pos, "positive time unit [s]"),
        "mu": (_REQ, _pos, "mass ratio (cr3bp) or GM [km^3/s^2] (mee)"),
    },
    "spacecraft": {
        "m0_kg": (_REQ, _pos, "positive initial mass [kg]"),
        "isp_s": (_REQ, _pos, "positive specific impulse [s]"),
        "g0": (9.80665, _pos, "positive standard gravity [m/s^2]"),
        "tmax_n": (_REQ, _pos, "positive maximum thrust [N]"),
    },
    "transfer": {
        "tof_days": (_REQ, _pos, "positive time of flight [days]"),
        "r0": (_REQ, _vec(3), "3-vector"),
        "v0": (_REQ, _vec(3), "3-vector"),
        "rf": (_REQ, _vec(3), "3-vector"),
        "vf": (_REQ, _vec(3), "3-vector"),
        "n_rev": (0, _int_ge(0), "non-negative integer (mee only)"),
    },
    "scvx": {
        "eps_tol": (2.5e-3, _nonneg, "non-negative tolerance"),
        "penalty": (5.0, _pos, "positive penalty coefficient"),
        "trust_region": ([0.1] * 7, _vec(7, _pos), "7 positive radii [r_x (6), r_s]"),
        "alpha": (1.5, lambda v: _num(v) and v > 1, "number > 1"),
        "beta": (1.5, lambda v: _num(v) and v > 1, "number > 1"),
        "rho0": (0.04, _num, "number in (0, 1)"),
        "rho1": (0.2, _num, "number in (0, 1)"),
        "rho2": (0.7, _num, "number in (0, 1)"),
        "mesh": (ADAPTIVE, lambda v: v in (UNIFORM, ADAPTIVE), f"'{UNIFORM}' or '{ADAPTIVE}'"),
        "nl_index": (True, _onoff, "on/off"),
        "eta": (0.1, _pos, "positive scaling parameter"),
        "gamma_clamp": ([0.5, 20.0], _vec(2, _pos), "[gamma_min, gamma_max]"),
        "max_iterations": (200, _int_ge(1), "integer >= 1"),
        "max_rejections": (15, _int_ge(1), "integer >= 1"),
        "solver_tol": (1e-8, _pos, "positive solver tolerance"),
        "solver_max_iter": (200, _int_ge(1), "integer >= 1"),
    },
    "sweep": {
        "nodes": (_REQ, lambda v: isinstance(v, list) and v != [] and all(_int_ge(2)(k) for k in v),
                  "non-empty list of integers >= 2"),
        "strategies": (list(STRATEGIES),
                       lambda v: isinstance(v, list) and v != [] and all(s in STRATEGIES for s in v),
                       f"non-empty list drawn from {STRATEGIES}"),
        "repetitions": (1, _int_ge(1), "integer >= 1"),
    },
}

CASE_SECTIONS = ("case", "units", "spacecraft", "transfer", "scvx")


def _as_bool(v):
    return v if isinstance(v, bool) else v == "on"


@dataclass
class CaseConfig:
    """A validated single-case configuration (``data`` mirrors the file layout)."""

    data: dict
    source: Optional[str] = None

    def section(self, name):
        return self.data[name]

    @property
    def name(self):
        return self.data["case"]["name"]

    @property
    def nodes(self):
        return self.data["case"]["nodes"]

    @property
    def seed(self):
        return self.data["case"]["seed"]

    @property
    def out_dir(self):
        return self.data["case"]["out_dir"]

    def problem(self):
        c, u, sc, tr = (self.data[k] for k in ("case", "units", "spacecraft", "transfer"))
        if c["model"] == "cr3bp":
            return cr3bp_problem(u["mu"], u["length_km"], u["time_s"], sc["m0_kg"], sc["isp_s"],
                                 sc["tmax_n"], tr["tof_days"], tr["r0"], tr["v0"], tr["rf"],
                                 tr["vf"], g0=sc["g0"], name=c["name"])
        return mee_problem(u["mu"], u["length_km"], u["time_s"], sc["m0_kg"], sc["isp_s"],
                           sc["tmax_n"], tr["tof_days"], tr["r0"], tr["v0"], tr["rf"], tr["vf"],
                           tr["n_rev"], g0=sc["g0"], name=c["name"])

    def options(self):
        s = self.data["scvx"]
        tr = s["trust_region"]
        nl = _as_bool(s["nl_index"])
        gmin, gmax = s["gamma_clamp"]
        return ScvxOptions(
            eps_tol=float(s["eps_tol"]), rho0=float(s["rho0"]), rho1=float(s["rho1"]),
            rho2=float(s["rho2"]), alpha=float(s["alpha"]), beta=float(s["beta"]),
            penalty=float(s["penalty"]), r_x=tuple(tr[:6]), r_s=float(tr[6]), mesh=s["mesh"],
            nl_index=nl, eta=float(s["eta"]), gamma_min=float(gmin), gamma_max=float(gmax),
            max_iterations=s["max_iterations"], max_rejections=s["max_rejections"],
            solver_tol=float(s["solver_tol"]), solver_max_iter=s["solver_max_iter"])

    def with_overrides(self, nodes=None, mesh=None, nl_index=None, max_iters=None,
                       out_dir=None, seed=None):
        """Copy with CLI overrides applied (``None`` keeps the file value)."""
        data = copy.deepcopy(self.data)
        for sec, key, val in (("case", "nodes", nodes), ("scvx", "mesh", mesh),
                              ("scvx", "nl_index", nl_index),
                              ("scvx", "max_iterations", max_iters),
                              ("case", "out_dir", out_dir), ("case", "seed", seed)):
            if val is not None:
                data[sec][key] = val
        out = type(self)(data, self.source)
        _check_relations(out.data, {}, self.source or "<overrides>")
        return out


@dataclass
class SweepConfig(CaseConfig):
    @property
    def node_list(self) -> List[int]:
        return list(self.data["sweep"]["nodes"])

    @property
    def strategies(self) -> List[str]:
        return list(self.data["sweep"]["strategies"])

    @property
    def repetitions(self):
        return self.data["sweep"]["repetitions"]

    def cell(self, nodes, strategy):
        """CaseConfig for one sweep cell."""
        mesh, nl = strategy.split("/")
        data = {k: copy.deepcopy(v) for k, v in self.data.items() if k != "sweep"}
        cfg = CaseConfig(data, self.source)
        return cfg.with_overrides(nodes=nodes, mesh=mesh, nl_index=nl == "nl-on")


# -- loading -------------------------------------------------------------------

def _plain(node, marks, path):
    """Convert a composed YAML node to Python data, recording line numbers by key path."""
    marks[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        out = {}
        for knode, vnode in node.value:
            key = knode.value
            if key in out:
                raise ConfigError(f"{knode.start_mark.line + 1}: duplicate key '{key}'")
            out[key] = _plain(vnode, marks, path + (key,))
            marks[path + (key,)] = knode.start_mark.line + 1
        return out
    if isinstance(node, yaml.SequenceNode):
        return [_plain(v, marks, path + (i,)) for i, v in enumerate(node.value)]
    return _CONSTRUCTOR.construct_object(node, deep=True)


class _Constructor(yaml.SafeLoader):
    def __init__(self):
        super().__init__("")


_CONSTRUCTOR = _Constructor()


def _where(src, marks, path):
    line = None
    p = tuple(path)
    while p and line is None:
        line = marks.get(p)
        p = p[:-1]
    return f"{src}:{line}" if line else src


def _validate(raw, marks, src):
    if not isinstance(raw, dict):
        raise ConfigError(f"{src}: top level must be a mapping of sections")
    is_sweep = "sweep" in raw
    allowed = CASE_SECTIONS + (("sweep",) if is_sweep else ())
    errors = []
    for sec in raw:
        if sec not in allowed:
            errors.append(f"{_where(src, marks, (sec,))}: unknown section '{sec}'")
    data = {}
    for sec in allowed:
        body = raw.get(sec, {})
        if body is None:
            body = {}
        if not isinstance(body, dict):
            errors.append(f"{_where(src, marks, (sec,))}: section '{sec}' must be a mapping")
            continue
        spec = SCHEMA[sec]
        out = {}
        for key in body:
            if key not in spec:
                errors.append(f"{_where(src, marks, (sec, key))}: unknown key '{sec}.{key}'")
        for key, (default, check, desc) in spec.items():
            if key in body:
                val = body[key]
                if isinstance(val, list):
                    val = [float(v) if isinstance(v, int) and not isinstance(v, bool)
                           and key not in ("nodes",) else v for v in val]
                if not check(val):
                    errors.append(f"{_where(src, marks, (sec, key))}: '{sec}.{key}' "
                                  f"must be {desc}, got {body[key]!r}")
                out[key] = val
            elif default is _REQ:
                errors.append(f"{_where(src, marks, (sec,))}: missing required field "
                              f"'{sec}.{key}' ({desc})")
            else:
                out[key] = copy.deepcopy(default)
        data[sec] = out
    if errors:
        raise ConfigError("\n".join(errors))
    _check_relations(data, marks, src)
    return data, is_sweep


def _check_relations(data, marks, src):
    s = data["scvx"]
    if not 0 < s["rho0"] < s["rho1"] < s["rho2"] < 1:
        raise ConfigError(f"{_where(src, marks, ('scvx', 'rho0'))}: thresholds must satisfy "
                          f"0 < rho0 < rho1 < rho2 < 1")
    gmin, gmax = s["gamma_clamp"]
    if gmin > gmax:
        raise ConfigError(f"{_where(src, marks, ('scvx', 'gamma_clamp'))}: "
                          f"gamma_clamp must be [min, max] with min <= max")
    if data["case"]["model"] == "cr3bp" and not data["units"]["mu"] < 0.5:
        raise ConfigError(f"{_where(src, marks, ('units', 'mu'))}: cr3bp mass ratio must be < 0.5")


def loads(text, source="<string>"):
    """Parse and validate config text; returns CaseConfig or SweepConfig."""
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{source}:{mark.line + 1}" if mark else source
        raise ConfigError(f"{where}: parse error: {getattr(exc, 'problem', exc)}") from None
    if node is None:
        raise ConfigError(f"{source}: empty config")
    marks = {}
    try:
        raw = _plain(node, marks, ())
    except ConfigError as exc:
        raise ConfigError(f"{source}:{exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    data, is_sweep = _validate(raw, marks, source)
    return (SweepConfig if is_sweep else CaseConfig)(data, source)


def load_config(path):
    """Load a config file (see module docstring for the layout)."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    return loads(text, str(path))


def serialize(config):
    """YAML text for ``config`` with every field explicit; ``loads`` inverts it."""
    return yaml.safe_dump(config.data, sort_keys=False, default_flow_style=None)
