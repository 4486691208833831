"""Experiment configuration files (JSON)."""
import ast
import hashlib
import json
import math
import operator
from dataclasses import dataclass, field

import numpy as np

from .lattice import ProjectionMatrix
from .qpfield import TermList
from .solver import SolverConfig

KINDS = ("solve", "pam-compare", "homogenize", "condition", "convergence-table")
RHS_MODES = ("alias", "truncate", "strict")

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv}
_SQRT_ARGS = (2, 3, 5)


class ConfigError(ValueError):
    pass


def eval_expr(text):
    """Evaluate a whitelisted frequency expression such as '2*pi*sqrt(2)'."""
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        return float(text)
    if not isinstance(text, str):
        raise ConfigError(f"expected number or expression, got {text!r}")
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as e:
        raise ConfigError(f"bad expression {text!r}: {e.msg}") from None

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id == "sqrt"
                and len(node.args) == 1 and not node.keywords
                and isinstance(node.args[0], ast.Constant) and node.args[0].value in _SQRT_ARGS):
            return math.sqrt(node.args[0].value)
        raise ConfigError(f"expression {text!r} uses something outside the whitelist "
                          f"(numbers, pi, sqrt of {_SQRT_ARGS}, + - * /)")

    return ev(tree)


@dataclass
class ExperimentConfig:
    kind: str
    P: ProjectionMatrix
    coefficient: TermList = None
    exact: TermList = None
    beta: TermList = None
    N: list = field(default_factory=list)
    L: list = field(default_factory=list)
    pam_N: list = field(default_factory=list)
    solver: SolverConfig = field(default_factory=SolverConfig)
    rhs: str = "alias"
    cell: str = "centered"
    reference_N: int = 18
    reference_rel_tol: float = 1e-15
    stem: str = None
    expected: list = field(default_factory=list)
    source_hash: str = ""


class _Locator:
    """Maps config keys back to a line of the source text for error messages."""

    def __init__(self, text, path):
        self.lines = text.splitlines()
        self.path = path

    def line_of(self, key):
        needle = f'"{key}"'
        for i, ln in enumerate(self.lines, 1):
            if needle in ln:
                return i
        return None

    def error(self, key, msg):
        ln = self.line_of(key)
        where = f"{self.path}:{ln}" if ln else str(self.path)
        return ConfigError(f"{where}: {key}: {msg}")


def _int_list(raw, key, loc, even=False):
    if not isinstance(raw, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in raw):
        raise loc.error(key, "expected a list of integers")
    if any(v < 1 for v in raw):
        raise loc.error(key, "values must be positive")
    if even and any(v % 2 for v in raw):
        raise loc.error(key, "values must be even")
    out = []
    for v in raw:
        if v not in out:
            out.append(v)
    return out


def parse_terms(raw, P, key, loc):
    if not isinstance(raw, list):
        raise loc.error(key, "expected a list of {k, re, im} terms")
    acc = {}
    for t in raw:
        if not isinstance(t, dict) or "k" not in t:
            raise loc.error(key, f"term {t!r} lacks 'k'")
        k = t["k"]
        if not isinstance(k, list) or len(k) != P.n or not all(isinstance(v, int) for v in k):
            raise loc.error(key, f"index {k!r} must be {P.n} integers")
        extra = set(t) - {"k", "re", "im"}
        if extra:
            raise loc.error(key, f"unknown term fields {sorted(extra)}")
        c = complex(eval_expr(t.get("re", 0)), eval_expr(t.get("im", 0)))
        if tuple(k) in acc:
            raise loc.error(key, f"duplicate index {k}")
        acc[tuple(k)] = c
    return TermList.from_dict(acc, P) if acc else TermList(np.zeros((0, P.n)), np.zeros(0), P)


def load_config(path, text=None):
    if text is None:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as e:
            raise ConfigError(f"{path}: cannot read config: {e.strerror}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}:{e.lineno}: invalid JSON: {e.msg}") from None
    loc = _Locator(text, path)
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    known = {"kind", "projection", "coefficient", "exact", "beta", "N", "L", "pam_N", "solver", "rhs",
             "cell", "reference_N", "reference_rel_tol", "output", "expected", "comment"}
    for k in raw:
        if k not in known:
            raise loc.error(k, "unknown key")
    kind = raw.get("kind")
    if kind not in KINDS:
        raise loc.error("kind", f"must be one of {KINDS}, got {kind!r}")
    if "projection" not in raw:
        raise ConfigError(f"{path}: missing 'projection'")
    try:
        rows = raw["projection"]
        P = ProjectionMatrix(np.array([[eval_expr(v) for v in r] for r in rows], dtype=float))
    except (ConfigError, ValueError, TypeError) as e:
        raise loc.error("projection", str(e)) from None

    cfg = ExperimentConfig(kind=kind, P=P)
    cfg.source_hash = hashlib.sha256(text.encode()).hexdigest()
    if "coefficient" not in raw:
        raise loc.error("kind", "missing 'coefficient'")
    cfg.coefficient = parse_terms(raw["coefficient"], P, "coefficient", loc)
    if "exact" in raw:
        cfg.exact = parse_terms(raw["exact"], P, "exact", loc)
    if "beta" in raw:
        cfg.beta = parse_terms(raw["beta"], P, "beta", loc)
    cfg.N = _int_list(raw.get("N", []), "N", loc, even=True)
    if not cfg.N:
        raise loc.error("N", "at least one N is required") if "N" in raw else ConfigError(f"{path}: missing 'N'")
    cfg.L = _int_list(raw.get("L", []), "L", loc)
    cfg.pam_N = _int_list(raw.get("pam_N", []), "pam_N", loc, even=False)

    s = raw.get("solver", {})
    try:
        cfg.solver = SolverConfig(rel_tol=float(s.get("rel_tol", 1e-14)), max_iter=int(s.get("max_iter", 1000)))
    except (ValueError, TypeError) as e:
        raise loc.error("solver", str(e)) from None
    cfg.rhs = raw.get("rhs", "alias")
    if cfg.rhs not in RHS_MODES:
        raise loc.error("rhs", f"must be one of {RHS_MODES}")
    cfg.cell = raw.get("cell", "centered")
    if cfg.cell not in ("centered", "origin"):
        raise loc.error("cell", "must be 'centered' or 'origin'")
    cfg.reference_N = int(raw.get("reference_N", 18))
    if cfg.reference_N < 2 or cfg.reference_N % 2:
        raise loc.error("reference_N", "must be even and >= 2")
    cfg.reference_rel_tol = float(raw.get("reference_rel_tol", 1e-15))
    cfg.stem = raw.get("output", {}).get("stem")
    cfg.expected = raw.get("expected", [])

    if kind in ("solve", "convergence-table", "pam-compare") and cfg.exact is None:
        raise loc.error("kind", f"'{kind}' needs an 'exact' term list")
    if kind == "homogenize":
        if P.d != 2:
            raise loc.error("projection", "homogenize needs d=2")
        if cfg.beta is None:
            raise loc.error("kind", "'homogenize' needs a 'beta' term list")
    if kind == "pam-compare" and not cfg.L:
        raise loc.error("L", "pam-compare needs at least one L")
    Nmax = max(cfg.N + ([cfg.reference_N] if kind == "homogenize" else []))
    for key, t in (("coefficient", cfg.coefficient), ("exact", cfg.exact), ("beta", cfg.beta)):
        if t is not None and not t.fits((Nmax,) * P.n):
            raise loc.error(key, f"term indices do not fit the largest N={Nmax}")
    if not cfg.coefficient.is_real_valued():
        raise loc.error("coefficient", "coefficient must be real-valued (conjugate-symmetric terms)")
    if cfg.coefficient.mean().real <= 0:
        raise loc.error("coefficient", "coefficient mean must be positive")
    return cfg
