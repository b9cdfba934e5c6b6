"""Closed catalog of metric generators.

Each entry knows how to evaluate its matrix at arbitrary points (so fields
can be re-sampled exactly at any resolution, which mollification relies on)
and, when the entries are rational in ``z, zbar``, how to build the exact
:class:`~singherm.symbolic.RationalMatrix`.

Adding a metric means adding a builder to ``_BUILDERS``; there is
deliberately no expression parser.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .symbolic import RationalExpr, RationalMatrix

SMOOTH, CONTINUOUS, MEASURABLE = "smooth", "continuous", "measurable"


class UnknownMetricError(KeyError):
    pass


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    rank: int
    dim: int
    smoothness: str
    params: tuple = ()
    griffiths_negative: bool = False
    declared_delta: float | None = None
    evaluate: Callable = field(default=None, repr=False, compare=False)
    symbolic_builder: Callable | None = field(default=None, repr=False, compare=False)

    @property
    def symbolic_available(self) -> bool:
        return self.symbolic_builder is not None

    def symbolic(self) -> RationalMatrix | None:
        return None if self.symbolic_builder is None else self.symbolic_builder()

    def __call__(self, zs):
        """Matrix values at points ``zs`` (list of ``dim`` complex arrays)."""
        zs = [np.asarray(z, dtype=complex) for z in zs]
        zs = np.broadcast_arrays(*zs)
        return self.evaluate(zs)

    def describe(self) -> dict:
        return {
            "name": self.name,
            "rank": self.rank,
            "dim": self.dim,
            "smoothness": self.smoothness,
            "params": dict(self.params),
            "symbolic": self.symbolic_available,
            "griffiths_negative": self.griffiths_negative,
            "declared_delta": self.declared_delta,
        }


def _abs2(zs):
    return sum(z.real ** 2 + z.imag ** 2 for z in zs)


def _scalar_times_identity(fn, r):
    def ev(zs):
        s = fn(zs)
        return s[..., None, None] * np.eye(r)
    return ev


def _sym_abs2(dim):
    return sum((RationalExpr.z(dim, j) * RationalExpr.zbar(dim, j) for j in range(dim)),
               RationalExpr.const(dim, 0))


def _sym_scalar_identity(expr_fn, r, dim):
    def build():
        e = expr_fn()
        zero = RationalExpr.const(dim, 0)
        return RationalMatrix([[e if a == b else zero for b in range(r)] for a in range(r)], dim, hermitian=True)
    return build


def identity(r: int = 1, n: int = 1) -> CatalogEntry:
    return CatalogEntry(
        "identity", r, n, SMOOTH, (("r", r), ("n", n)), griffiths_negative=True,
        evaluate=_scalar_times_identity(lambda zs: np.ones(zs[0].shape), r),
        symbolic_builder=lambda: RationalMatrix.identity(r, n),
    )


def paper_counterexample(r: int = 2, n: int = 1) -> CatalogEntry:
    if r != 2 or n != 1:
        raise ValueError("paper-counterexample has rank 2 over a disc")

    def ev(zs):
        z = zs[0]
        a2 = z.real ** 2 + z.imag ** 2
        out = np.empty(z.shape + (2, 2), dtype=complex)
        out[..., 0, 0] = 1 + a2
        out[..., 0, 1] = z
        out[..., 1, 0] = np.conj(z)
        out[..., 1, 1] = a2
        return out

    def build():
        z, zb = RationalExpr.z(1), RationalExpr.zbar(1)
        return RationalMatrix([[1 + z * zb, z], [zb, z * zb]], 1, hermitian=True)

    return CatalogEntry("paper-counterexample", 2, 1, SMOOTH, (), griffiths_negative=True,
                        evaluate=ev, symbolic_builder=build)


def lelong(a: float = 1.0, r: int = 1, n: int = 1) -> CatalogEntry:
    """``|z|^{2a}`` (times the identity), psh with Lelong number ``a`` at 0."""
    a = float(a)
    if a <= 0:
        raise ValueError("lelong exponent must be positive")
    integer = a.is_integer()

    def scalar(zs):
        return _abs2(zs) ** a

    builder = None
    if integer:
        builder = _sym_scalar_identity(lambda: _sym_abs2(n) ** int(a), r, n)
    return CatalogEntry("lelong", r, n, SMOOTH if integer else CONTINUOUS,
                        (("a", a), ("r", r), ("n", n)), griffiths_negative=True,
                        evaluate=_scalar_times_identity(scalar, r), symbolic_builder=builder)


def fubini(sign: int, r: int = 1, n: int = 1) -> CatalogEntry:
    """``(1 + |z|^2)^{sign}`` times the identity."""
    name = "fubini+" if sign > 0 else "fubini-"
    s = 1 if sign > 0 else -1
    return CatalogEntry(
        name, r, n, SMOOTH, (("r", r), ("n", n)), griffiths_negative=s > 0,
        evaluate=_scalar_times_identity(lambda zs: (1.0 + _abs2(zs)) ** s, r),
        symbolic_builder=_sym_scalar_identity(lambda: (1 + _sym_abs2(n)) ** s, r, n),
    )


def gauss(sign: int, r: int = 1, n: int = 1) -> CatalogEntry:
    """``exp(sign * |z|^2)`` times the identity; ``gauss+`` is strictly negatively curved."""
    name = "gauss+" if sign > 0 else "gauss-"
    s = 1.0 if sign > 0 else -1.0
    return CatalogEntry(
        name, r, n, SMOOTH, (("r", r), ("n", n)), griffiths_negative=s > 0,
        declared_delta=1.0 if s > 0 else None,
        evaluate=_scalar_times_identity(lambda zs: np.exp(s * _abs2(zs)), r),
    )


_PROFILES = ("abs2", "relu", "log")


def _profile(name, a, zs):
    if name == "abs2":
        return _abs2(zs)
    if name == "relu":
        return np.maximum(zs[0].real, 0.0)
    if name == "log":
        with np.errstate(divide="ignore"):
            return a * np.log(_abs2(zs))
    raise ValueError(f"unknown psh profile {name!r}; choose from {_PROFILES}")


def diag_psh(profiles: str = "abs2,relu", a: float = 1.0, n: int = 1) -> CatalogEntry:
    """``diag(exp(phi_1), ..., exp(phi_r))`` with each ``phi_i`` from a fixed set of psh profiles.

    ``log`` stands for ``a * log|z|^2``; its exponential ``|z|^{2a}`` is
    continuous and vanishes at the origin.
    """
    names = tuple(p.strip() for p in profiles.split(",") if p.strip())
    for p in names:
        if p not in _PROFILES:
            raise ValueError(f"unknown psh profile {p!r}; choose from {_PROFILES}")
    if "log" in names and a <= 0:
        raise ValueError("log profile needs a > 0")
    r = len(names)

    def ev(zs):
        out = np.zeros(zs[0].shape + (r, r), dtype=complex)
        for i, p in enumerate(names):
            if p == "log":
                out[..., i, i] = _abs2(zs) ** a
            else:
                out[..., i, i] = np.exp(_profile(p, a, zs))
        return out

    smooth = SMOOTH if all(p == "abs2" for p in names) else CONTINUOUS
    return CatalogEntry("diag-psh", r, n, smooth, (("profiles", ",".join(names)), ("a", float(a)), ("n", n)),
                        griffiths_negative=True, evaluate=ev)


def cont_nakano(r: int = 1, n: int = 1) -> CatalogEntry:
    """``exp(|z|^2 + max(Re z_1, 0))`` times the identity.

    Continuous but not C^1 across ``Re z_1 = 0``, strictly Nakano negative
    with constant 1.
    """
    return CatalogEntry(
        "cont-nakano", r, n, CONTINUOUS, (("r", r), ("n", n)), griffiths_negative=True, declared_delta=1.0,
        evaluate=_scalar_times_identity(lambda zs: np.exp(_abs2(zs) + np.maximum(zs[0].real, 0.0)), r),
    )


_BUILDERS = {
    "identity": identity,
    "paper-counterexample": paper_counterexample,
    "lelong": lelong,
    "fubini+": lambda **kw: fubini(+1, **kw),
    "fubini-": lambda **kw: fubini(-1, **kw),
    "gauss+": lambda **kw: gauss(+1, **kw),
    "gauss-": lambda **kw: gauss(-1, **kw),
    "diag-psh": diag_psh,
    "cont-nakano": cont_nakano,
}

ALIASES = {"gauss-neg": "gauss+", "gauss-pos": "gauss-", "counterexample": "paper-counterexample"}


def names() -> list[str]:
    return sorted(_BUILDERS) + sorted(ALIASES)


def get(name: str, **params) -> CatalogEntry:
    """Build a catalog entry; ``params`` are passed to the entry's builder."""
    key = ALIASES.get(name, name)
    if key not in _BUILDERS:
        raise UnknownMetricError(name)
    return _BUILDERS[key](**params)
