"""Scenario files: flat ``key = value`` lines with ``#`` comments.

Coefficient fields (``V``, ``a``, ``b``) and custom nonlinearities are
numpy expressions evaluated in a small whitelisted namespace.  Field
expressions see the coordinates ``x`` (and ``y`` when ``d = 2``) and the
radius ``r``; nonlinearity expressions see ``t``.
"""
from __future__ import annotations

import ast
import json
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .grid import build_grid
from .nonlinearity import custom, log_power, power_sum
from .problem import ProblemSpec


class ConfigError(ValueError):
    """Invalid scenario file; carries the offending line number when known."""

    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        where = "" if line is None else f"line {line}: "
        super().__init__(where + message)
        self.line = line
        self.path = path
        self.message = message

    def to_json(self) -> dict:
        return {"error": "config", "message": self.message, "line": self.line, "path": self.path}


_FUNCS = {
    "exp": np.exp,
    "log": np.log,
    "log1p": np.log1p,
    "sqrt": np.sqrt,
    "sin": np.sin,
    "cos": np.cos,
    "tanh": np.tanh,
    "cosh": np.cosh,
    "abs": np.abs,
    "sign": np.sign,
    "minimum": np.minimum,
    "maximum": np.maximum,
    "where": np.where,
    "pi": np.pi,
}


def compile_expression(expr: str, names, line: int | None = None):
    """Check ``expr`` and return ``fn(**values)`` evaluating it.

    Only arithmetic, the whitelisted functions and ``names`` are allowed.
    """
    try:
        tree = ast.parse(expr, mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse expression {expr!r}: {exc.msg}", line) from None
    allowed = set(_FUNCS) | set(names)
    for node in ast.walk(tree):
        if isinstance(node, (ast.Attribute, ast.Subscript, ast.Lambda, ast.comprehension)):
            raise ConfigError(f"construct not allowed in expression {expr!r}", line)
        if isinstance(node, ast.Name) and node.id not in allowed:
            raise ConfigError(f"unknown name {node.id!r} in expression {expr!r}", line)
    code = compile(tree, "<config>", "eval")

    def fn(**values):
        try:
            return eval(code, {"__builtins__": {}}, {**_FUNCS, **values})
        except Exception as exc:  # arithmetic errors surface as config errors
            raise ConfigError(f"evaluating {expr!r} failed: {exc}", line) from None

    return fn


def eval_expression(expr: str, variables: dict, line: int | None = None):
    return compile_expression(expr, variables, line)(**variables)


@dataclass
class ScenarioConfig:
    name: str = "scenario"
    # grid
    d: int = 1
    n: int = 256
    L: float = 8.0
    s: float = 0.4
    allow_any_s: bool = False
    # problem
    q: float = 1.5
    p: float = 4.0
    lam: float | None = None
    lambda_fraction: float | None = None
    V: str = "1 + 0.25*x**2"
    a: str = "exp(-x**2/4)"
    b: str = "1"
    V_bound: float = 0.0
    b1_C0: float = 1.0
    b1_alpha: float = 2.0
    b1_R0: float = 0.0
    nonlinearity: str = "power_sum"
    exponents: tuple = (4.0,)
    f: str | None = None
    fprime: str | None = None
    F: str | None = None
    # runs
    seed: int = 0
    starts: int = 2
    budget: int = 100
    basis_size: int = 32
    workers: int = 1
    probes: int = 200
    solver_tol: float = 1e-8
    max_iter: int = 3000
    sample_count: int = 400
    t_max: float = 1e3
    fiber_field: str = "exp(-x**2/2)"
    fiber_t_min: float = 1e-3
    fiber_t_max: float = 1e2
    fiber_count: int = 200
    out: str = "out"
    lines: dict = field(default_factory=dict, repr=False, compare=False)

    # -- resolved objects ---------------------------------------------------
    def variables(self, grid) -> dict:
        coords = grid.coords()
        out = {"x": coords[0], "r": grid.radius()}
        if grid.d == 2:
            out["y"] = coords[1]
        return out

    def field_from(self, key: str, grid, expr: str | None = None) -> np.ndarray:
        expr = getattr(self, key) if expr is None else expr
        val = eval_expression(expr, self.variables(grid), self.lines.get(key))
        arr = np.broadcast_to(np.asarray(val, dtype=float), grid.shape).copy()
        if not np.all(np.isfinite(arr)):
            raise ConfigError(f"{key} = {expr!r} is not finite on the grid", self.lines.get(key))
        return arr

    def build_nonlinearity(self):
        kind = self.nonlinearity
        if kind == "power_sum":
            return power_sum(*self.exponents)
        if kind == "log_power":
            return log_power()
        if kind == "linear":
            return custom(lambda t: t, lambda t: 1.0, lambda t: 0.5 * t * t, label="linear")
        if kind == "custom":
            if self.f is None or self.fprime is None:
                raise ConfigError("custom nonlinearity needs f and fprime", self.lines.get("nonlinearity"))

            def make(key):
                fn = compile_expression(getattr(self, key), ("t",), self.lines.get(key))
                return lambda t: float(fn(t=float(t)))

            F = make("F") if self.F is not None else None
            return custom(make("f"), make("fprime"), F, label=f"custom f={self.f}")
        raise ConfigError(f"unknown nonlinearity {kind!r}", self.lines.get("nonlinearity"))

    def build_spec(self, lam: float | None = None) -> ProblemSpec:
        grid = build_grid(self.d, self.n, self.L, self.s, allow_any_s=self.allow_any_s)
        if lam is None:
            lam = self.lam if self.lam is not None else 1.0
        return ProblemSpec(
            grid=grid,
            q=self.q,
            p=self.p,
            lam=lam,
            V=self.field_from("V", grid),
            a=self.field_from("a", grid),
            b=self.field_from("b", grid),
            nonlinearity=self.build_nonlinearity(),
            V_bound=self.V_bound,
            b1_C0=self.b1_C0,
            b1_alpha=self.b1_alpha,
            b1_R0=self.b1_R0,
        )

    def to_json(self) -> dict:
        out = {}
        for f_ in fields(self):
            if f_.name == "lines":
                continue
            v = getattr(self, f_.name)
            out[_KEY_OF.get(f_.name, f_.name)] = list(v) if isinstance(v, tuple) else v
        return out

    def to_text(self) -> str:
        rows = []
        for key, v in self.to_json().items():
            if v is None:
                continue
            if isinstance(v, list):
                v = ", ".join(repr(float(e)) for e in v)
            elif isinstance(v, bool):
                v = "true" if v else "false"
            rows.append(f"{key} = {v}")
        return "\n".join(rows) + "\n"


# file key -> attribute name where they differ
_ATTR_OF = {"lambda": "lam"}
_KEY_OF = {v: k for k, v in _ATTR_OF.items()}


def _convert(attr: str, raw: str, line: int, path: str | None = None):
    default = ScenarioConfig.__dataclass_fields__[attr].default
    kind = type(default)
    try:
        if attr == "exponents":
            vals = tuple(float(v) for v in raw.split(",") if v.strip())
            if not vals:
                raise ValueError("empty list")
            return vals
        if attr in ("lam", "lambda_fraction"):
            return float(raw)
        if attr in ("f", "fprime", "F"):
            return raw
        if kind is bool:
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(f"expected a boolean, got {raw!r}")
            return low in ("true", "1", "yes")
        if kind is int:
            val = float(raw)
            if val != int(val):
                raise ValueError(f"expected an integer, got {raw!r}")
            return int(val)
        if kind is float:
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {_KEY_OF.get(attr, attr)}: {exc}", line, path) from None


def parse_config(text: str, path: str | None = None) -> ScenarioConfig:
    """Parse scenario text; every problem is reported with its line number."""
    values, lines = {}, {}
    known = {f_.name for f_ in fields(ScenarioConfig)} - {"lines"}
    for no, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", no, path)
        key, val = (part.strip() for part in body.split("=", 1))
        attr = _ATTR_OF.get(key, key)
        if attr not in known:
            raise ConfigError(f"unknown key {key!r}", no, path)
        if attr in values:
            raise ConfigError(f"duplicate key {key!r} (first on line {lines[attr]})", no, path)
        if not val:
            raise ConfigError(f"empty value for {key!r}", no, path)
        values[attr] = _convert(attr, val, no, path)
        lines[attr] = no
    if "lam" in values and "lambda_fraction" in values:
        raise ConfigError("give either lambda or lambda_fraction, not both", lines["lambda_fraction"], path)
    cfg = ScenarioConfig(**values)
    cfg.lines = lines
    return cfg


def load_config(path: str | Path) -> ScenarioConfig:
    """Read a scenario file, or the ``config`` block of an emitted ``report.json``."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}", path=str(path)) from None
    if path.suffix == ".json":
        try:
            block = json.loads(text)["config"]
        except (ValueError, KeyError, TypeError):
            raise ConfigError("JSON file has no 'config' block", path=str(path)) from None
        cfg = ScenarioConfig()
        for key, val in block.items():
            attr = _ATTR_OF.get(key, key)
            if attr not in ScenarioConfig.__dataclass_fields__ or attr == "lines":
                raise ConfigError(f"unknown key {key!r} in embedded config", path=str(path))
            setattr(cfg, attr, tuple(val) if isinstance(val, list) else val)
        return cfg
    return parse_config(text, str(path))


SCENARIO_DIR = Path(__file__).parent / "scenarios"


def bundled_scenarios() -> list[str]:
    return sorted(p.stem for p in SCENARIO_DIR.glob("*.cfg"))


def bundled_path(name: str) -> Path:
    path = SCENARIO_DIR / f"{name}.cfg"
    if not path.is_file():
        raise ConfigError(f"no bundled scenario {name!r}; available: {', '.join(bundled_scenarios())}")
    return path
