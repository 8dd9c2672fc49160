"""Scenario configuration files.

A configuration is an INI file with the sections ``[operator]``,
``[terms.N]`` (``N = 0, 1, ...``), ``[history]``, ``[stepper]`` and
``[certify]``. Values are numbers, names, or arithmetic expressions in
``pi``, ``e`` and (for spatial coefficients) ``x``, for example
``a = -0.5 - 0.2*cos(x)``. Unknown sections or keys are errors.
"""
import ast
import configparser
import math
import operator as _op
from dataclasses import dataclass, field

import numpy as np

from . import nonlinearity as nl
from . import scenarios as sc
from .errors import ConfigurationError
from .history import HistoryBuffer

REQUIRED = object()

_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "sqrt": np.sqrt, "log": np.log, "ln": np.log,
          "abs": np.abs, "tanh": np.tanh, "cosh": np.cosh, "sinh": np.sinh}
_CONSTS = {"pi": math.pi, "e": math.e}
_BINOPS = {ast.Add: _op.add, ast.Sub: _op.sub, ast.Mult: _op.mul, ast.Div: _op.truediv,
           ast.Pow: _op.pow}
_UNOPS = {ast.USub: _op.neg, ast.UAdd: _op.pos}


def _eval_node(node, env):
    if isinstance(node, ast.Expression):
        return _eval_node(node.body, env)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return node.value
    if isinstance(node, ast.Name):
        if node.id in env:
            return env[node.id]
        if node.id in _CONSTS:
            return _CONSTS[node.id]
        raise ConfigurationError(f"unknown name {node.id!r} in expression")
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval_node(node.left, env), _eval_node(node.right, env))
    if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
        return _UNOPS[type(node.op)](_eval_node(node.operand, env))
    if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
            and node.func.id in _FUNCS and not node.keywords):
        return _FUNCS[node.func.id](*(_eval_node(a, env) for a in node.args))
    raise ConfigurationError(f"unsupported expression element {ast.dump(node)}")


def _parse_expr(text):
    try:
        return ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise ConfigurationError(f"cannot parse expression {text!r}") from exc


def _names(tree):
    return {n.id for n in ast.walk(tree) if isinstance(n, ast.Name)}


def number(text):
    """Evaluate a constant expression."""
    tree = _parse_expr(text)
    if "x" in _names(tree):
        raise ConfigurationError(f"{text!r} must not depend on x")
    return float(_eval_node(tree, {}))


def coefficient(text):
    """A constant or a vectorised function of ``x``."""
    tree = _parse_expr(text)
    if "x" not in _names(tree):
        return float(_eval_node(tree, {}))

    def func(x):
        return np.asarray(_eval_node(tree, {"x": np.asarray(x, dtype=float)}), dtype=float)

    func.expression = text.strip()
    return func


def integer(text):
    v = number(text)
    if v != int(v):
        raise ConfigurationError(f"{text!r} is not an integer")
    return int(v)


def boolean(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigurationError(f"{text!r} is not a boolean")


def word(text):
    return text.strip()


def words(text):
    return [w.strip() for w in text.split(",") if w.strip()]


_DOMAIN = {"length": (number, math.pi), "d_coef": (number, 1.0), "modes": (integer, 16)}

OPERATOR_SCHEMA = {
    "diffusion": dict(_DOMAIN, boundary=(word, "dirichlet"), eps=(number, None),
                      robin=(number, 0.0)),
    "damped_wave": dict(_DOMAIN, a0=(number, REQUIRED)),
    "scalar": {"lambda": (number, REQUIRED), "general": (boolean, False)},
    "competition": {"length": (number, math.pi), "modes": (integer, 16),
                    "boundary1": (word, "dirichlet"), "boundary2": (word, "dirichlet"),
                    "d1": (number, 1.0), "d2": (number, 1.0), "eps1": (number, 0.0),
                    "eps2": (number, 0.0), "robin1": (number, 0.0), "robin2": (number, 0.0)},
}

TERM_SCHEMA = {
    "hutchinson": {"alpha": (number, REQUIRED), "tau": (number, REQUIRED), "radius": (number, 0.0)},
    "logistic": {"a": (coefficient, REQUIRED), "b": (coefficient, 0.0), "c": (coefficient, 0.0),
                 "tau": (number, REQUIRED), "radius": (number, None)},
    "modified_hutchinson": {"alpha": (number, REQUIRED), "beta": (number, 0.0),
                            "gamma": (number, 0.0), "delta": (number, 0.0),
                            "tau": (number, REQUIRED)},
    "cubic": {"tau": (number, REQUIRED)},
    "affine": {"x_coef": (number, 0.0), "y_coef": (number, 1.0), "tau": (number, REQUIRED)},
    "sine": {"x_coef": (number, 0.0), "y_coef": (number, 1.0), "tau": (number, REQUIRED)},
    "competition": dict({k: (coefficient, v) for k, v in (
        ("a1", -1.0), ("a2", -1.0), ("a11", 0.0), ("a22", 0.0), ("ap11", 0.0), ("ap12", 0.0),
        ("ap21", 0.0), ("ap22", 0.0))},
        **{k: (number, 1.0) for k in ("tau11", "tau12", "tau21", "tau22")}),
}

HISTORY_SCHEMA = {"kind": (word, "first_mode"), "amplitude": (number, 0.1),
                  "value": (number, None), "fraction": (number, 0.9), "path": (word, None),
                  "n": (integer, None)}
STEPPER_SCHEMA = {"h": (number, None), "scheme": (word, "exp_rk2"), "T": (number, 10.0),
                  "record_every": (integer, 1), "h_oracle": (number, None)}
CERTIFY_SCHEMA = {"theorems": (words, None), "M": (number, None), "omega": (number, None),
                  "gamma": (number, None), "k": (number, None), "norm_b": (number, None),
                  "gamma_g": (number, 0.0), "tau": (number, None), "d": (integer, 1),
                  "tol": (number, 0.05)}

_ALLOWED_TERMS = {
    "diffusion": {"hutchinson", "logistic", "modified_hutchinson", "cubic"},
    "damped_wave": {"affine", "sine"},
    "scalar": {"affine", "sine", "logistic", "hutchinson", "cubic", "modified_hutchinson"},
    "competition": {"competition"},
}


def _read_section(name, raw, schema):
    unknown = set(raw) - set(schema)
    if unknown:
        raise ConfigurationError(f"unknown key(s) in [{name}]: {', '.join(sorted(unknown))}")
    out = {}
    for key, (conv, default) in schema.items():
        if key in raw:
            try:
                out[key] = conv(raw[key])
            except ConfigurationError as exc:
                raise ConfigurationError(f"[{name}] {key}: {exc}") from None
        elif default is REQUIRED:
            raise ConfigurationError(f"missing required key '{key}' in [{name}]")
        else:
            out[key] = default
    return out


@dataclass
class Config:
    operator_kind: str
    operator: dict
    terms: list
    history: dict
    stepper: dict
    certify: dict
    raw: dict = field(default_factory=dict)

    def set_value(self, path, value):
        """Override ``section.key`` (``terms.N.key`` for terms) with a number."""
        parts = path.split(".")
        if parts[0] == "terms" and len(parts) == 3:
            idx = int(parts[1])
            if not 0 <= idx < len(self.terms):
                raise ConfigurationError(f"no section [terms.{idx}]")
            kind, params = self.terms[idx]
            if parts[2] not in TERM_SCHEMA[kind]:
                raise ConfigurationError(f"unknown key {parts[2]!r} for {kind} term")
            params[parts[2]] = value
            return
        if len(parts) != 2:
            raise ConfigurationError(f"parameter path {path!r} must be section.key")
        section = {"operator": self.operator, "history": self.history,
                   "stepper": self.stepper, "certify": self.certify}.get(parts[0])
        if section is None or parts[1] not in section:
            raise ConfigurationError(f"unknown parameter {path!r}")
        section[parts[1]] = value


def parse_config(text):
    """Parse configuration text into a :class:`Config`."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"malformed configuration: {exc}") from None
    sections = cp.sections()
    for s in sections:
        if s not in ("operator", "history", "stepper", "certify") and not s.startswith("terms."):
            raise ConfigurationError(f"unknown section [{s}]")
    if "operator" not in sections:
        raise ConfigurationError("missing required section [operator]")
    raw_op = dict(cp["operator"])
    if "kind" not in raw_op:
        raise ConfigurationError("missing required key 'kind' in [operator]")
    kind = raw_op.pop("kind").strip()
    if kind not in OPERATOR_SCHEMA:
        raise ConfigurationError(f"unknown operator kind {kind!r}")
    operator = _read_section("operator", raw_op, OPERATOR_SCHEMA[kind])

    term_sections = sorted((s for s in sections if s.startswith("terms.")),
                           key=lambda s: int(s.split(".", 1)[1]) if s.split(".", 1)[1].isdigit() else -1)
    terms = []
    for i, s in enumerate(term_sections):
        if s != f"terms.{i}":
            raise ConfigurationError(f"term sections must be numbered terms.0, terms.1, ...; got [{s}]")
        raw = dict(cp[s])
        if "kind" not in raw:
            raise ConfigurationError(f"missing required key 'kind' in [{s}]")
        tkind = raw.pop("kind").strip()
        if tkind not in TERM_SCHEMA:
            raise ConfigurationError(f"unknown term kind {tkind!r} in [{s}]")
        if tkind not in _ALLOWED_TERMS[kind]:
            raise ConfigurationError(f"term kind {tkind!r} is not available for a {kind} operator")
        terms.append((tkind, _read_section(s, raw, TERM_SCHEMA[tkind])))
    if kind == "competition" and len(terms) != 1:
        raise ConfigurationError("a competition operator takes exactly one [terms.0] section")
    if kind == "diffusion" and len(terms) > 1:
        raise ConfigurationError("a diffusion operator takes at most one [terms.0] section")

    def opt(name, schema):
        return _read_section(name, dict(cp[name]) if name in sections else {}, schema)

    return Config(kind, operator, terms, opt("history", HISTORY_SCHEMA),
                  opt("stepper", STEPPER_SCHEMA), opt("certify", CERTIFY_SCHEMA),
                  {s: dict(cp[s]) for s in sections})


def load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigurationError(f"cannot read configuration {path}: {exc}") from None
    return parse_config(text)


# -- scenario assembly -----------------------------------------------------------

def _domain(op, boundary=None, d=None, eps=None, robin=None):
    return sc.Domain1D(op.get("length", math.pi), op.get("d_coef", 1.0) if d is None else d,
                       boundary or op.get("boundary", "dirichlet"), op.get("modes", 16),
                       (op.get("eps") or 0.0) if eps is None else eps,
                       op.get("robin", 0.0) if robin is None else robin)


def _scalar_term(kind, p):
    if kind == "affine":
        return nl.affine_gate(p["tau"], p["x_coef"], p["y_coef"])
    if kind == "sine":
        return nl.sine_lipschitz(p["tau"], p["x_coef"], p["y_coef"])
    if kind == "logistic":
        return nl.logistic_delay(p["tau"], p["a"], p["b"], p["c"])
    if kind == "hutchinson":
        a = p["alpha"]
        return nl.logistic_delay(p["tau"], a, 0.0, -a, lipschitz=abs(a) * (1 + p["radius"]))
    if kind == "cubic":
        return nl.cubic_delay(p["tau"])
    return nl.modified_hutchinson(p["tau"], p["alpha"], p["beta"], p["gamma"], p["delta"])


def build_scenario(cfg, seed=None, modes=None):
    """Assemble the :class:`~delaystab.scenarios.Scenario` described by ``cfg``."""
    op = dict(cfg.operator)
    if modes is not None and "modes" in op:
        op["modes"] = modes
    hist = cfg.history
    small = hist["kind"] == "small_data"
    amp = hist["amplitude"]
    kind = cfg.operator_kind
    if kind == "diffusion" and not cfg.terms:
        if small:
            raise ConfigurationError("small_data history needs a [terms.0] section")
        scn = sc.heat(_domain(op), amp)
    elif kind == "diffusion":
        tkind, p = cfg.terms[0]
        dom = _domain(op)
        if tkind == "hutchinson":
            scn = sc.hutchinson(p["alpha"], p["tau"], dom, amp, p["radius"])
            if small:
                scn = sc.small_data_history(scn, hist["fraction"])
        elif tkind == "logistic":
            scn = sc.logistic(p["a"], p["b"], p["c"], p["tau"], dom, eps=op["eps"], amplitude=amp,
                              radius=p["radius"])
            if small:
                scn = sc.small_data_history(scn, hist["fraction"])
        elif tkind == "modified_hutchinson":
            scn = sc.modified_hutchinson_preset(p["alpha"], p["beta"], p["gamma"], p["delta"],
                                                p["tau"], dom, eps=op["eps"], amplitude=amp)
            if small:
                scn = sc.small_data_history(scn, hist["fraction"])
        else:
            if small and dom.boundary == "neumann" and not (op["eps"] or 0) > 0:
                raise ConfigurationError("cubic nonlinearity under Neumann needs a positive shift")
            scn = sc.cubic(p["tau"], dom, eps=op["eps"], amplitude=amp)
            if small:
                scn = sc.small_data_history(scn, hist["fraction"])
    elif small:
        raise ConfigurationError(f"small_data history is not available for a {kind} operator")
    elif kind == "damped_wave":
        dom = _domain(op, boundary="dirichlet")
        specs = [("affine" if k == "affine" else "sine", p["tau"], (p["x_coef"], p["y_coef"]))
                 for k, p in cfg.terms]
        scn = sc.damped_wave(op["a0"], dom, specs, amplitude=amp)
    elif kind == "scalar":
        terms = [_scalar_term(k, p) for k, p in cfg.terms]
        value = hist["value"] if hist["value"] is not None else amp
        scn = sc.scalar(op["lambda"], terms, value, general=op["general"])
    else:
        _, p = cfg.terms[0]
        f1 = _domain(op, op["boundary1"], op["d1"], op["eps1"], op["robin1"])
        f2 = _domain(op, op["boundary2"], op["d2"], op["eps2"], op["robin2"])
        spec = sc.CompetitionSpec(f1, f2, **p)
        scn = sc.competition(spec, amplitude=amp, small_data_run=small,
                             d=cfg.certify["d"])

    hk = hist["kind"]
    if hk == "random":
        rng = np.random.default_rng(seed)
        k = np.arange(1, scn.op.dim + 1)
        state = amp * rng.standard_normal(scn.op.dim) / k ** 2
        scn.history = HistoryBuffer.constant(state, scn.tau_max or 1.0)
    elif hk == "constant" and hist["value"] is not None and kind != "scalar":
        scn.history = HistoryBuffer.constant(np.full(scn.op.dim, hist["value"]), scn.tau_max or 1.0)
    elif hk == "csv":
        if not hist["path"]:
            raise ConfigurationError("history kind csv needs 'path'")
        scn.history = HistoryBuffer.from_csv(hist["path"], tau_max=scn.tau_max or None, n=hist["n"])
        if scn.history.states[0].shape != (scn.op.dim,):
            raise ConfigurationError(
                f"history table has {scn.history.states[0].size} columns, state dimension is {scn.op.dim}")
    elif hk not in ("first_mode", "small_data", "constant"):
        raise ConfigurationError(f"unknown history kind {hk!r}")
    return scn
