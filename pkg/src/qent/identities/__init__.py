"""Catalog and numerical verification of the polygamma summation identities.

Identities are stored as data in ``catalog.json``: each side is a restricted
Python expression over ``psi0..psi3``, ``fac``, ``Sum(lambda k: ..., lo, hi)``
and ``Omega(i)``. Expressions are parsed with :mod:`ast` and rejected unless
every node is on a small whitelist, then compiled once and evaluated per grid
point. The left side is always the literal finite sum, the right side the
closed or semi-closed form.

First-type identities take ``(n, a)``; second-type take ``(m, n)`` and B12 also
``a``. Factorials of integers are exact Python ints, so factorial ratios are
correctly rounded on division.
"""
from __future__ import annotations

import ast
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from importlib import resources
from types import MappingProxyType
from typing import Callable, Iterable, Mapping

from .._series import Laurent, gamma_series, psi_series
from ..specfun import PolyGammaTable, polygamma

__all__ = [
    "SCHEMA",
    "DomainError",
    "RestrictedDomainError",
    "IdentityRecord",
    "VerificationReport",
    "load_catalog",
    "catalog_document",
    "omega",
    "identity_eval",
    "default_grid",
    "verify_identity",
    "verify_catalog",
    "flip_sign",
    "first_type_reduce",
    "second_type_recursion",
    "limit_at_n_equals_m",
    "A_GRID_A",
    "A_GRID_N",
    "B_GRID_MAX",
]

SCHEMA = "qent-identities/1"
A_GRID_N = tuple(range(1, 26))
A_GRID_A = (0.0, 0.5, 1.0, 2.75, 7.0)
B_GRID_MAX = 25
B_GRID_A = (0.0, 0.5, 2.75)
TOLERANCE = {"first-type": 1e-10, "second-type": 1e-9}


class DomainError(ValueError):
    """Parameters outside the identity's declared domain."""


class RestrictedDomainError(DomainError):
    """n = m for an identity whose right side contains psi_j(n - m) or 1/(n - m)."""


# ----------------------------------------------------------- expression core

_ALLOWED_NODES = (
    ast.Expression, ast.BinOp, ast.UnaryOp, ast.Add, ast.Sub, ast.Mult, ast.Div,
    ast.Pow, ast.USub, ast.UAdd, ast.Constant, ast.Name, ast.Load, ast.Call,
    ast.Lambda, ast.arguments, ast.arg,
)
_FUNCTIONS = {"psi0", "psi1", "psi2", "psi3", "fac", "Sum", "Omega"}
_VARIABLES = {"a", "n", "m", "k", "l"}


def _check(tree: ast.AST, source: str) -> None:
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED_NODES):
            raise ValueError(f"disallowed syntax {type(node).__name__} in {source[:60]!r}")
        if isinstance(node, ast.Constant) and not isinstance(node.value, int):
            raise ValueError("only integer literals are allowed")
        if isinstance(node, ast.Name) and node.id not in _FUNCTIONS | _VARIABLES:
            raise ValueError(f"unknown name {node.id!r}")
        if isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCTIONS or node.keywords:
                raise ValueError("calls are limited to the catalog functions")
        if isinstance(node, ast.Lambda):
            args = node.args
            if len(args.args) != 1 or args.vararg or args.kwarg or args.defaults or args.kwonlyargs:
                raise ValueError("Sum bodies take exactly one index argument")


@lru_cache(maxsize=None)
def _compile(source: str):
    tree = ast.parse(source, mode="eval")
    _check(tree, source)
    return compile(tree, "<identity>", "eval")


_TABLE = PolyGammaTable(64)


def _is_int(x) -> bool:
    return isinstance(x, int) or (isinstance(x, float) and x.is_integer())


@lru_cache(maxsize=1 << 16)
def _psi_real(order: int, x: float) -> float:
    return float(polygamma(order, x))


def _make_psi(order: int):
    def psi(x):
        if isinstance(x, int):
            if x < 1:
                raise DomainError(f"psi_{order} pole at {x}")
            return _TABLE(order, x)
        if _is_int(x) and x < 1:
            raise DomainError(f"psi_{order} pole at {x}")
        return _psi_real(order, float(x))

    return psi


def fac(x):
    """x! as an exact int for integers, Gamma(x+1) otherwise."""
    if isinstance(x, int):
        if x < 0:
            raise DomainError(f"factorial of negative integer {x}")
        return math.factorial(x)
    if x.is_integer():
        if x < 0:
            raise DomainError(f"factorial of negative integer {x}")
        if x <= 170:
            return math.factorial(int(x))
    return math.gamma(x + 1.0)


_PSI = {f"psi{j}": _make_psi(j) for j in range(4)}


class _Evaluator:
    """Namespace for one parameter point; Sum results memoized when ``cache`` is set."""

    def __init__(self, params: Mapping[str, float], omegas: Mapping[int, str], cache: bool):
        self.params = dict(params)
        self.omegas = omegas
        self.cache = {} if cache else None
        self.ns = {"__builtins__": {}, "fac": fac, "Sum": self.sum, "Omega": self.omega, **_PSI}
        self.ns.update(self.params)

    def sum(self, body: Callable, lo, hi):
        if not (_is_int(lo) and _is_int(hi)):
            raise DomainError("summation limits must be integers")
        lo, hi = int(lo), int(hi)
        key = None
        if self.cache is not None:
            key = (body.__code__, lo, hi)
            hit = self.cache.get(key)
            if hit is not None:
                return hit
        val = math.fsum(body(k) for k in range(lo, hi + 1))
        if key is not None:
            self.cache[key] = val
        return val

    def omega(self, index: int):
        return omega(index, self.params["m"], self.params["n"], _defs=self.omegas)

    def __call__(self, source: str) -> float:
        return float(eval(_compile(source), self.ns))  # noqa: S307 - whitelisted AST


# ---------------------------------------------------------------- records


@dataclass(frozen=True)
class IdentityRecord:
    id: str
    family: str
    lhs: str
    rhs: str
    params: tuple
    n_gt_m: bool = False
    notes: tuple = ()

    def __post_init__(self):
        _compile(self.lhs)
        _compile(self.rhs)

    def check_domain(self, params: Mapping[str, float]) -> None:
        missing = set(self.params) - set(params)
        if missing:
            raise DomainError(f"{self.id} needs parameters {sorted(missing)}")
        if "a" in self.params and not params["a"] > -1:
            raise DomainError(f"{self.id}: a must exceed -1")
        if self.family == "first-type":
            n = params["n"]
            if not (_is_int(n) and n >= 1):
                raise DomainError(f"{self.id}: n must be an integer >= 1")
            return
        m, n = params["m"], params["n"]
        if not (_is_int(m) and m >= 1):
            raise DomainError(f"{self.id}: m must be an integer >= 1")
        if _is_int(n):
            if n < m:
                raise DomainError(f"{self.id}: requires m <= n")
            if self.n_gt_m and n == m:
                raise RestrictedDomainError(
                    f"{self.id} contains psi_j(n-m) terms; n = m is outside the verified domain")
        elif not n > m - 1:
            raise DomainError(f"{self.id}: continued n must exceed m - 1")

    def evaluate(self, params: Mapping[str, float], cache: bool = True, omegas=None):
        self.check_domain(params)
        p = {k: (int(v) if k in ("m", "n") and _is_int(v) else v) for k, v in params.items()}
        if "a" in p:
            p["a"] = float(p["a"])
        ev = _Evaluator(p, omegas if omegas is not None else _catalog_omegas(), cache)
        return ev(self.lhs), ev(self.rhs)

    def to_json(self) -> dict:
        domain = {"params": list(self.params)}
        if self.family == "second-type":
            domain["n_gt_m"] = self.n_gt_m
        return {"id": self.id, "family": self.family, "domain": domain,
                "lhs": self.lhs, "rhs": self.rhs, "notes": list(self.notes)}


@dataclass
class VerificationReport:
    id: str
    points: int
    max_rel_error: float
    tolerance: float
    passed: bool
    worst: dict = field(default_factory=dict)
    errors: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"id": self.id, "points": self.points, "max_rel_error": self.max_rel_error,
                "tolerance": self.tolerance, "passed": self.passed, "worst": self.worst,
                "errors": self.errors}


def _catalog_path() -> str:
    return str(resources.files(__name__).joinpath("catalog.json"))


@lru_cache(maxsize=None)
def catalog_document(path: str | None = None) -> dict:
    with open(path or _catalog_path()) as fh:
        doc = json.load(fh)
    if doc.get("schema") != SCHEMA:
        raise ValueError(f"unsupported catalog schema {doc.get('schema')!r}")
    return doc


@lru_cache(maxsize=None)
def _catalog_omegas(path: str | None = None) -> Mapping[int, str]:
    doc = catalog_document(path)
    return MappingProxyType({int(k): v for k, v in doc["omega"].items()})


@lru_cache(maxsize=None)
def load_catalog(path: str | None = None) -> Mapping[str, IdentityRecord]:
    """Immutable id -> IdentityRecord mapping, in catalog order."""
    doc = catalog_document(path)
    out = {}
    for e in doc["entries"]:
        dom = e["domain"]
        out[e["id"]] = IdentityRecord(
            id=e["id"], family=e["family"], lhs=e["lhs"], rhs=e["rhs"],
            params=tuple(dom["params"]), n_gt_m=bool(dom.get("n_gt_m", False)),
            notes=tuple(e.get("notes", ())))
    return MappingProxyType(out)


# ------------------------------------------------------------------- Omega


@lru_cache(maxsize=1 << 14)
def _omega_cached(index: int, m: int, n: int, source: str) -> float:
    ev = _Evaluator({"m": m, "n": n}, {}, cache=False)
    if index == 17:
        return _omega_cached(1, m, n, _catalog_omegas()[1]) ** 2
    return ev.sum(eval(compile(ast.parse(f"lambda k: {source}", mode="eval"), "<omega>", "eval"),
                       ev.ns), 1, m)


def omega(index: int, m: int, n: int, _defs=None) -> float:
    """Unsimplifiable basis Omega_index(m, n), by direct compensated summation."""
    if not (isinstance(index, int) and 1 <= index <= 17):
        raise ValueError(f"Omega index must be 1..17, got {index!r}")
    if not (1 <= m <= n):
        raise DomainError("Omega needs 1 <= m <= n")
    defs = _defs or _catalog_omegas()
    _compile(f"Sum(lambda k: {defs[1 if index == 17 else index]}, 1, m)")
    return _omega_cached(index, int(m), int(n), defs[1 if index == 17 else index])


# ------------------------------------------------------------- evaluation


def _record(id_or_record) -> IdentityRecord:
    if isinstance(id_or_record, IdentityRecord):
        return id_or_record
    cat = load_catalog()
    if id_or_record not in cat:
        raise KeyError(f"unknown identity {id_or_record!r}")
    return cat[id_or_record]


def identity_eval(id_or_record, params: Mapping[str, float], cache: bool = True):
    """(lhs, rhs) of one identity at one parameter point."""
    return _record(id_or_record).evaluate(params, cache=cache)


def default_grid(record: IdentityRecord) -> list:
    rec = _record(record)
    if rec.family == "first-type":
        return [{"n": n, "a": a} for n in A_GRID_N for a in A_GRID_A]
    lo = 1 if rec.n_gt_m else 0
    pts = [{"m": m, "n": n} for n in range(1, B_GRID_MAX + 1) for m in range(1, n + 1 - lo)]
    if "a" in rec.params:
        pts = [dict(p, a=a) for p in pts for a in B_GRID_A]
    return pts


def verify_identity(id_or_record, grid: Iterable[Mapping] | None = None,
                    tolerance: float | None = None) -> VerificationReport:
    """Max of |lhs - rhs| / max(1, |lhs|) over the grid; failures are reported, not raised."""
    rec = _record(id_or_record)
    tol = TOLERANCE[rec.family] if tolerance is None else tolerance
    grid = default_grid(rec) if grid is None else list(grid)
    worst, worst_at, errors, count = 0.0, {}, [], 0
    for p in grid:
        try:
            lhs, rhs = rec.evaluate(p)
        except (DomainError, ArithmeticError, ValueError) as exc:
            errors.append({"params": dict(p), "error": str(exc)})
            continue
        count += 1
        err = abs(lhs - rhs) / max(1.0, abs(lhs))
        if not err <= worst and not (math.isnan(err) and worst_at):
            worst, worst_at = err, dict(p, lhs=lhs, rhs=rhs)
    passed = not errors and count > 0 and worst <= tol
    return VerificationReport(rec.id, count, worst, tol, passed, worst_at, errors)


def _verify_one(args):
    rid, tol = args
    return verify_identity(rid, tolerance=tol)


def verify_catalog(suite: str = "all", tolerance: float | None = None, threads: int = 1,
                   ids: Iterable[str] | None = None, path: str | None = None) -> list:
    """Run the default grid for every identity in a suite ("A", "B" or "all").

    ``path`` verifies a catalog file other than the shipped one.
    """
    if suite not in ("A", "B", "all"):
        raise ValueError(f"suite must be A, B or all, got {suite!r}")
    cat = load_catalog(path)
    if ids is None:
        ids = [i for i in cat if suite == "all" or i.startswith(suite)]
    jobs = [(cat[i] if path else i, tolerance) for i in ids]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(_verify_one, jobs))
    return [_verify_one(j) for j in jobs]


def flip_sign(record: IdentityRecord, occurrence: int = 0) -> IdentityRecord:
    """Copy of ``record`` with the n-th binary +/- of the rhs inverted (mutation testing)."""
    tree = ast.parse(record.rhs, mode="eval")
    seen = 0
    for node in ast.walk(tree):
        if isinstance(node, ast.BinOp) and isinstance(node.op, (ast.Add, ast.Sub)):
            if seen == occurrence:
                node.op = ast.Sub() if isinstance(node.op, ast.Add) else ast.Add()
                return replace(record, id=f"{record.id}~{occurrence}", rhs=ast.unparse(tree))
            seen += 1
    raise ValueError(f"rhs has fewer than {occurrence + 1} additive operators")


# ------------------------------------------------------ reduction recursions


def first_type_reduce(f: Callable[[int], float], i1: int, n: int, a1: float) -> float:
    """sum_{k<=n} f(k) psi_{i1}(k + a1) by swapping the order of summation.

    psi_{i1}(k + a1) is expanded as psi_{i1}(a1) plus its recurrence terms,
    after which the double sum collapses onto tail sums of f.
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    if a1 <= 0 and float(a1).is_integer():
        raise DomainError("psi(a1) has a pole at non-positive integers")
    vals = [float(f(k)) for k in range(1, n + 1)]
    tails = [0.0] * (n + 2)
    for k in range(n, 0, -1):
        tails[k] = tails[k + 1] + vals[k - 1]
    c = (-1.0) ** i1 * math.factorial(i1)
    head = float(polygamma(i1, a1)) * tails[1]
    return head + math.fsum(c / (a1 + l - 1) ** (i1 + 1) * tails[l] for l in range(1, n + 1))


def second_type_recursion(f0: Callable[[int], float], m: int, n: int) -> float:
    """S_f(m, n) for f(k) = f0(k)/k through the m-fold recursion in m and n.

    At n = m the vanishing factor (n - m) meets (n - m - 1)!; their product
    tends to 1, so only the k = m - i terms survive.
    """
    if not (1 <= m <= n):
        raise DomainError("requires 1 <= m <= n")
    terms = []
    for i in range(m):
        for k in range(1, m - i + 1):
            if n == m:
                if k != m - i:
                    continue
                num = math.factorial(n) * math.factorial(m - i - 1)
                den = math.factorial(m) * math.factorial(n - i)
            else:
                num = (math.factorial(n) * (n - m) * math.factorial(m - i - 1)
                       * math.factorial(n - i - 1 - k))
                den = math.factorial(m) * math.factorial(n - i) * math.factorial(m - i - k)
            terms.append(num / den * float(f0(k)))
    return math.fsum(terms)


# --------------------------------------------------- n = m through eps-limits


def _series_arg(x, hi):
    # arguments are c + eps exactly; anything else is outside this machinery
    if isinstance(x, Laurent):
        c = x.coeff(0)
        if x.val < 0 or abs(x.coeff(1) - 1.0) > 0 or any(x.coeff(j) for j in range(2, x.hi)):
            raise ValueError("series argument must be c + eps")
        return c
    return None


def limit_at_n_equals_m(id_or_record, m: int, hi: int = 10, params: Mapping | None = None):
    """Both sides at n = m as the eps^0 term of their expansion in n = m + eps.

    Returns ``(lhs, rhs, residue)`` where ``residue`` is the largest pole
    coefficient left on the right side (zero when the indeterminate forms
    cancel as they should).
    """
    rec = _record(id_or_record)
    if rec.family != "second-type":
        raise DomainError("only second-type identities are continued in n")
    eps_n = Laurent([float(m), 1.0], 0, hi)

    def psi_s(order):
        plain = _PSI[f"psi{order}"]

        def psi(x):
            c = _series_arg(x, hi)
            return plain(x) if c is None else psi_series(order, c, hi)
        return psi

    def fac_s(x):
        c = _series_arg(x, hi)
        return fac(x) if c is None else gamma_series(c + 1.0, hi)

    def sum_s(body, lo, hi_):
        acc = 0.0
        for k in range(int(lo), int(hi_) + 1):
            acc = acc + body(k)
        return acc

    ns = {"__builtins__": {}, "fac": fac_s, "Sum": sum_s, "m": int(m), "n": eps_n,
          **{f"psi{j}": psi_s(j) for j in range(4)}, **dict(params or {})}
    defs = _catalog_omegas()

    def omega_s(index):
        base = eval(_compile(f"Sum(lambda k: {defs[1 if index == 17 else index]}, 1, m)"), ns)  # noqa: S307
        return base * base if index == 17 else base

    ns["Omega"] = omega_s
    lhs = eval(_compile(rec.lhs), ns)  # noqa: S307
    rhs = eval(_compile(rec.rhs), ns)  # noqa: S307

    def at0(v):
        return v.coeff(0) if isinstance(v, Laurent) else float(v)

    residue = 0.0
    if isinstance(rhs, Laurent):
        residue = max((abs(rhs.coeff(j)) for j in range(rhs.val, 0)), default=0.0)
    return at0(lhs), at0(rhs), residue


def default_threads() -> int:
    env = os.environ.get("QENT_THREADS")
    return max(1, int(env)) if env else (os.cpu_count() or 1)
