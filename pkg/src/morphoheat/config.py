"""Flat ``key = value`` run configuration.

Grammar, one entry per line:

    # comment (also after a value)
    key = value

Values are Python literals (numbers, quoted strings, ``[...]`` lists,
``(...)`` tuples, True/False); anything that is not a literal is kept as a
bare string, so ``scenario = split2d`` works without quotes.  Keys are
lowercase identifiers; repeating a key is an error.
"""
import ast
import hashlib
import re
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import ArgumentError
from .levelset import SCENARIOS, field_from_expression, scenario, scenario_time_interval

_KEY = re.compile(r"^[a-z_][a-z0-9_]*$")

# shared keys
_FIELD_KEYS = {
    "scenario": "catalog name (one of the built-in transitions)",
    "field": "expression in x1..x3 and t, used instead of scenario",
    "dim": "spatial dimension for an expression field (1, 2 or 3)",
    "time_interval": "(t0, T) for an expression field",
    "a": "half-width of the box [-a, a]^dim (default 1.0)",
}

SCHEMAS = {
    "classify": {**_FIELD_KEYS, "grid_density": "seed grid points per axis (default 8)"},
    "evolve": {**_FIELD_KEYS,
               "n": "background grid points per axis (default 65)",
               "t_list": "times at which the topology is reported (default 9 even samples)",
               "n_seeds": "boundary points advected by the flow map (default 16)",
               "n_steps": "RK4 steps between the first and last time (default 200)"},
    "constants": {**_FIELD_KEYS,
                  "quantity": "poincare | trace_plain | trace_weighted | hardy",
                  "n": "grid points per axis (default 129)",
                  "t_list": "slice times",
                  "hardy_a": "Hardy left endpoint (default 0)",
                  "hardy_b": "Hardy right endpoint (default 1)",
                  "hardy_p": "Hardy weight exponent (default 0)",
                  "n_list": "Hardy resolutions (default [256, 1024, 4096])"},
    "cutoff": {**_FIELD_KEYS,
               "n": "grid points per axis (default 257 in 2D, 65 in 3D)",
               "eps_list": "cut-off widths (default [0.05, 0.025, 0.0125])",
               "n_slabs": "time slabs of the quadrature (default 64, minimum 64)",
               "u": "minus_phi | one (test function, default minus_phi)"},
    "counterexample": {"xi_list": "values of xi in [10, 1e6]"},
    "solve": {**_FIELD_KEYS,
              "n": "grid points per axis (default 65)",
              "n_t": "number of time slabs (default 64)",
              "f": "source: number or expression in x1..x3 and t (default 1.0)",
              "u0": "initial value: number or expression (default 0)",
              "form": "heat | advection (default heat)",
              "vtk": "write one VTK file per time level (default False)"},
    "verify": {"criteria": "list of criterion numbers 1..13 (default all)"},
}

_DEFAULTS = {"a": 1.0, "grid_density": 8, "n_seeds": 16, "n_steps": 200,
             "hardy_a": 0.0, "hardy_b": 1.0, "hardy_p": 0.0, "n_list": [256, 1024, 4096],
             "eps_list": [0.05, 0.025, 0.0125], "n_slabs": 64, "u": "minus_phi",
             "n_t": 64, "f": 1.0, "u0": 0.0, "form": "heat", "vtk": False,
             "criteria": list(range(1, 14))}

_LISTS = {"t_list", "n_list", "eps_list", "xi_list", "criteria"}


def _parse_value(text):
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def parse_text(text):
    """Parse config text into an ordered dict of values."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ArgumentError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not _KEY.match(key):
            raise ArgumentError(f"line {lineno}: invalid key {key!r}")
        if key in out:
            raise ArgumentError(f"line {lineno}: duplicate key {key!r}")
        if not value:
            raise ArgumentError(f"line {lineno}: empty value for {key!r}")
        out[key] = _parse_value(value)
    return out


@dataclass
class RunConfig:
    subcommand: str
    values: dict
    digest: str
    seed: int = 0
    extra: dict = dc_field(default_factory=dict)

    def get(self, key, default=None):
        if key in self.values:
            return self.values[key]
        return _DEFAULTS.get(key, default)

    def require(self, key):
        if key not in self.values:
            raise ArgumentError(f"{self.subcommand}: missing required key {key!r}")
        return self.values[key]

    def number_list(self, key, kind=float):
        vals = self.get(key)
        if vals is None:
            raise ArgumentError(f"{self.subcommand}: missing required key {key!r}")
        if not isinstance(vals, (list, tuple)):
            vals = [vals]
        if len(vals) == 0:
            raise ArgumentError(f"{self.subcommand}: {key} must not be empty")
        try:
            return [kind(v) for v in vals]
        except (TypeError, ValueError) as exc:
            raise ArgumentError(f"{self.subcommand}: {key} must hold numbers") from exc

    def box(self):
        a = self.get("a")
        if not isinstance(a, (int, float)) or a <= 0:
            raise ArgumentError("a must be a positive number")
        return float(a)

    def field(self):
        """The level-set field selected by ``scenario`` or ``field``."""
        a = self.box()
        if "scenario" in self.values and "field" in self.values:
            raise ArgumentError("give either scenario or field, not both")
        if "scenario" in self.values:
            name = str(self.values["scenario"])
            if name not in SCENARIOS:
                raise ArgumentError(f"unknown scenario {name!r}; known: {', '.join(SCENARIOS)}")
            return scenario(name, a)
        if "field" in self.values:
            dim = self.values.get("dim")
            if dim not in (1, 2, 3):
                raise ArgumentError("an expression field needs dim = 1, 2 or 3")
            ti = self.values.get("time_interval", (-0.5 * a * a, 0.5 * a * a))
            if not (isinstance(ti, (list, tuple)) and len(ti) == 2 and ti[0] < ti[1]):
                raise ArgumentError("time_interval must be (t0, T) with t0 < T")
            try:
                return field_from_expression(str(self.values["field"]), dim, tuple(map(float, ti)), box=a)
            except Exception as exc:
                raise ArgumentError(f"cannot parse field expression: {exc}") from exc
        raise ArgumentError(f"{self.subcommand}: need scenario or field")

    def field_name(self):
        return str(self.values.get("scenario", self.values.get("field", "")))


def load(subcommand, text, seed=0):
    if subcommand not in SCHEMAS:
        raise ArgumentError(f"unknown subcommand {subcommand!r}")
    values = parse_text(text)
    unknown = sorted(set(values) - set(SCHEMAS[subcommand]))
    if unknown:
        raise ArgumentError(f"{subcommand}: unknown keys {', '.join(unknown)}")
    for key in _LISTS & set(values):
        v = values[key]
        if isinstance(v, (list, tuple)) and len(v) == 0:
            raise ArgumentError(f"{subcommand}: {key} must not be empty")
    digest = hashlib.sha256(text.encode()).hexdigest()
    return RunConfig(subcommand, values, digest, int(seed))


def usage(subcommand):
    lines = [f"config keys for '{subcommand}':"]
    for key, doc in SCHEMAS[subcommand].items():
        lines.append(f"  {key:<14} {doc}")
    return "\n".join(lines)


def expression_function(expr, dim):
    """Vectorized f(points, t) from a number or an expression in x1..x<dim>, t."""
    if isinstance(expr, (int, float)) and not isinstance(expr, bool):
        return float(expr)
    import sympy

    xs = sympy.symbols(" ".join(f"x{i + 1}" for i in range(dim)) + " t")
    try:
        e = sympy.sympify(str(expr), locals={str(s): s for s in xs})
    except (sympy.SympifyError, TypeError) as exc:
        raise ArgumentError(f"cannot parse expression {expr!r}") from exc
    extra = e.free_symbols - set(xs)
    if extra:
        raise ArgumentError(f"unknown symbols in {expr!r}: {sorted(map(str, extra))}")
    fn = sympy.lambdify(xs, e, "numpy")

    def f(pts, t):
        pts = np.asarray(pts, dtype=float)
        return np.asarray(fn(*[pts[..., i] for i in range(dim)], t), dtype=float) * np.ones(pts.shape[:-1])

    return f


def default_time_list(field, n=9):
    t0, T = field.time_interval
    return list(np.linspace(t0, T, n))


__all__ = ["RunConfig", "SCHEMAS", "load", "parse_text", "usage", "expression_function",
           "default_time_list", "scenario_time_interval"]
