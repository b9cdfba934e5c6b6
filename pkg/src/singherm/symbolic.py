"""Exact rational functions of ``z_j`` and ``zbar_j`` with Gaussian-rational coefficients.

``z_j`` and ``zbar_j`` are independent commuting indeterminates, so formal
Wirtinger derivatives are ordinary partial derivatives and "hermitian" means
invariance under the conjugation that swaps ``z_j <-> zbar_j`` and conjugates
coefficients.  Polynomial arithmetic and gcds are delegated to sympy's sparse
polynomial rings over ``QQ_I``.

The kernel only sees rational functions: a distributional mass sitting at a
pole (e.g. ``dbar(1/z)``) is invisible to it.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache

import numpy as np
from sympy import QQ_I
from sympy.polys.rings import ring

from .grid import GridSpec, MatrixField, ScalarField


@lru_cache(maxsize=None)
def polynomial_ring(dim: int):
    names = [f"z{j + 1}" for j in range(dim)] + [f"zb{j + 1}" for j in range(dim)]
    return ring(",".join(names), QQ_I)[0]


def _gauss(c) -> object:
    if isinstance(c, RationalExpr):
        raise TypeError
    c = complex(c) if not isinstance(c, (int, Fraction)) else c
    if isinstance(c, complex):
        return QQ_I(Fraction(c.real), Fraction(c.imag))
    return QQ_I(c, 0)


class RationalExpr:
    """Canonical quotient ``numer / denom`` of polynomials in ``z, zbar``.

    Canonical form: ``gcd(numer, denom) = 1`` and the leading coefficient of
    ``denom`` (lex order) is 1.  Two expressions are equal as functions iff
    their canonical forms coincide.
    """

    __slots__ = ("dim", "numer", "denom")

    def __init__(self, dim: int, numer, denom=None):
        R = polynomial_ring(dim)
        numer = R(numer)
        denom = R.one if denom is None else R(denom)
        if not denom:
            raise ZeroDivisionError("zero denominator")
        if not numer:
            denom = R.one
        else:
            numer, denom = numer.cancel(denom)
        lc = denom.LC
        if lc != QQ_I.one:
            inv = QQ_I.one / lc
            numer, denom = numer * inv, denom * inv
        self.dim = dim
        self.numer = numer
        self.denom = denom

    # constructors
    @classmethod
    def z(cls, dim: int, j: int = 0):
        return cls(dim, polynomial_ring(dim).gens[j])

    @classmethod
    def zbar(cls, dim: int, j: int = 0):
        return cls(dim, polynomial_ring(dim).gens[dim + j])

    @classmethod
    def const(cls, dim: int, c):
        return cls(dim, polynomial_ring(dim)(_gauss(c)))

    def _coerce(self, other):
        if isinstance(other, RationalExpr):
            if other.dim != self.dim:
                raise ValueError("dimension mismatch")
            return other
        return RationalExpr.const(self.dim, other)

    # arithmetic
    def __add__(self, other):
        o = self._coerce(other)
        return RationalExpr(self.dim, self.numer * o.denom + o.numer * self.denom, self.denom * o.denom)

    __radd__ = __add__

    def __neg__(self):
        return RationalExpr(self.dim, -self.numer, self.denom)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        o = self._coerce(other)
        return RationalExpr(self.dim, self.numer * o.numer, self.denom * o.denom)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if not o.numer:
            raise ZeroDivisionError("division by the zero rational function")
        return RationalExpr(self.dim, self.numer * o.denom, self.denom * o.numer)

    def __rtruediv__(self, other):
        return self._coerce(other) / self

    def __pow__(self, k: int):
        if k < 0:
            return RationalExpr.const(self.dim, 1) / self ** (-k)
        return RationalExpr(self.dim, self.numer ** k, self.denom ** k)

    def __eq__(self, other):
        try:
            o = self._coerce(other)
        except (TypeError, ValueError):
            return NotImplemented
        return self.numer == o.numer and self.denom == o.denom

    def __hash__(self):
        return hash((self.dim, tuple(self.numer.terms()), tuple(self.denom.terms())))

    def is_zero(self) -> bool:
        return not self.numer

    def __repr__(self):
        if self.denom == polynomial_ring(self.dim).one:
            return f"RationalExpr({self.numer})"
        return f"RationalExpr(({self.numer}) / ({self.denom}))"

    # calculus
    def d(self, j: int = 0):
        """Formal ``d/dz_j`` (``zbar`` held fixed)."""
        return self._diff(polynomial_ring(self.dim).gens[j])

    def dbar(self, k: int = 0):
        """Formal ``d/dzbar_k``."""
        return self._diff(polynomial_ring(self.dim).gens[self.dim + k])

    def _diff(self, x):
        p, q = self.numer, self.denom
        return RationalExpr(self.dim, p.diff(x) * q - p * q.diff(x), q * q)

    def conj(self):
        return RationalExpr(self.dim, _conj_poly(self.numer, self.dim), _conj_poly(self.denom, self.dim))

    def degree_in(self, j: int = 0, bar: bool = False) -> tuple[int, int]:
        """Degrees of numerator and denominator in ``z_j`` (or ``zbar_j``)."""
        gen = polynomial_ring(self.dim).gens[j + (self.dim if bar else 0)]
        return self.numer.degree(gen), self.denom.degree(gen)

    def evaluate(self, z) -> complex:
        """Exact value at the point ``z`` (complex numbers taken as exact binary fractions)."""
        vals, ok = evaluate_exact(self, [np.asarray([complex(zj)]) for zj in np.atleast_1d(z)])
        if not ok[0]:
            raise ZeroDivisionError("pole at evaluation point")
        return complex(vals[0])


def _conj_poly(p, dim):
    R = polynomial_ring(dim)
    terms = {}
    for exp, c in p.terms():
        swapped = tuple(exp[dim:]) + tuple(exp[:dim])
        terms[swapped] = QQ_I(c.x, -c.y)
    return R.from_dict(terms) if terms else R.zero


def sym_d(e: RationalExpr, j: int = 0) -> RationalExpr:
    return e.d(j)


def sym_dbar(e: RationalExpr, k: int = 0) -> RationalExpr:
    return e.dbar(k)


# ---------------------------------------------------------------- matrices


class RationalMatrix:
    """Square matrix of :class:`RationalExpr`.

    ``hermitian=True`` is checked against the conj-swap symmetry at
    construction and raises if it fails.
    """

    def __init__(self, rows, dim: int | None = None, hermitian: bool = False):
        rows = [list(r) for r in rows]
        r = len(rows)
        if any(len(row) != r for row in rows):
            raise ValueError("rational matrix must be square")
        if dim is None:
            dim = next((e.dim for row in rows for e in row if isinstance(e, RationalExpr)), 1)
        self.dim = dim
        self.entries = [[e if isinstance(e, RationalExpr) else RationalExpr.const(dim, e) for e in row]
                        for row in rows]
        self.hermitian = False
        if hermitian:
            if not self.is_formal_hermitian():
                raise ValueError("matrix is not formally hermitian")
            self.hermitian = True

    @classmethod
    def identity(cls, r: int, dim: int = 1):
        return cls([[1 if a == b else 0 for b in range(r)] for a in range(r)], dim, hermitian=True)

    @classmethod
    def zeros(cls, r: int, dim: int = 1):
        return cls([[0] * r for _ in range(r)], dim)

    @property
    def r(self) -> int:
        return len(self.entries)

    def __getitem__(self, idx):
        a, b = idx
        return self.entries[a][b]

    def map(self, fn):
        return RationalMatrix([[fn(e) for e in row] for row in self.entries], self.dim)

    def __add__(self, other):
        return RationalMatrix([[x + y for x, y in zip(r1, r2)] for r1, r2 in zip(self.entries, other.entries)],
                              self.dim)

    def __sub__(self, other):
        return RationalMatrix([[x - y for x, y in zip(r1, r2)] for r1, r2 in zip(self.entries, other.entries)],
                              self.dim)

    def __matmul__(self, other):
        n = self.r
        zero = RationalExpr.const(self.dim, 0)
        out = []
        for a in range(n):
            row = []
            for b in range(n):
                acc = zero
                for c in range(n):
                    if not self.entries[a][c].is_zero() and not other.entries[c][b].is_zero():
                        acc = acc + self.entries[a][c] * other.entries[c][b]
                row.append(acc)
            out.append(row)
        return RationalMatrix(out, self.dim)

    def scale(self, c):
        return self.map(lambda e: e * c)

    def conj_transpose(self):
        return RationalMatrix([[self.entries[b][a].conj() for b in range(self.r)] for a in range(self.r)],
                              self.dim)

    def transpose(self):
        return RationalMatrix([[self.entries[b][a] for b in range(self.r)] for a in range(self.r)], self.dim)

    def is_formal_hermitian(self) -> bool:
        return self == self.conj_transpose()

    def __eq__(self, other):
        if not isinstance(other, RationalMatrix) or other.r != self.r:
            return NotImplemented
        return all(x == y for r1, r2 in zip(self.entries, other.entries) for x, y in zip(r1, r2))

    def is_zero(self) -> bool:
        return all(e.is_zero() for row in self.entries for e in row)

    def __repr__(self):
        return f"RationalMatrix({self.entries!r})"

    def det(self) -> RationalExpr:
        n = self.r
        if n == 1:
            return self.entries[0][0]
        total = RationalExpr.const(self.dim, 0)
        for b in range(n):
            if self.entries[0][b].is_zero():
                continue
            cof = self.minor(0, b).det() * (-1) ** b
            total = total + self.entries[0][b] * cof
        return total

    def minor(self, i, j):
        return RationalMatrix([[e for c, e in enumerate(row) if c != j]
                               for r_, row in enumerate(self.entries) if r_ != i], self.dim)

    def adjugate(self):
        n = self.r
        if n == 1:
            return RationalMatrix([[1]], self.dim)
        return RationalMatrix([[self.minor(b, a).det() * (-1) ** (a + b) for b in range(n)] for a in range(n)],
                              self.dim)

    def d(self, j=0):
        return self.map(lambda e: e.d(j))

    def dbar(self, k=0):
        return self.map(lambda e: e.dbar(k))


def sym_inverse(a: RationalMatrix) -> RationalMatrix:
    """``adj(A) / det(A)``, canonicalized entrywise."""
    d = a.det()
    if d.is_zero():
        raise ZeroDivisionError("matrix is identically singular")
    return a.adjugate().map(lambda e: e / d)


def sym_connection(h: RationalMatrix) -> list[RationalMatrix]:
    """``theta_j = h^{-1} dh/dz_j`` for each coordinate."""
    inv = sym_inverse(h)
    return [inv @ h.d(j) for j in range(h.dim)]


def sym_curvature(h: RationalMatrix) -> list[list[RationalMatrix]]:
    """Blocks ``Theta[j][k] = dbar_k theta_j`` (same layout as :func:`singherm.chern.curvature`)."""
    theta = sym_connection(h)
    return [[theta[j].dbar(k) for k in range(h.dim)] for j in range(h.dim)]


# ------------------------------------------------------------ exact sampling


def _exact_coords(arrays):
    """Common power-of-two denominator and integer numerators of float coordinates."""
    shift = 0
    for arr in arrays:
        for v in np.concatenate([arr.real.ravel(), arr.imag.ravel()]):
            den = float(v).as_integer_ratio()[1]
            shift = max(shift, den.bit_length() - 1)
    scale = 1 << shift
    out = []
    for arr in arrays:
        re = np.array([int(Fraction(float(v)) * scale) for v in arr.real.ravel()], dtype=object)
        im = np.array([int(Fraction(float(v)) * scale) for v in arr.imag.ravel()], dtype=object)
        out.append((re, im))
    return shift, out


def _gmul(a, b):
    return a[0] * b[0] - a[1] * b[1], a[0] * b[1] + a[1] * b[0]


def _gpow(base, k, cache):
    key = (id(base), k)
    if key not in cache:
        if k == 0:
            cache[key] = (np.ones_like(base[0]), np.zeros_like(base[0]))
        elif k == 1:
            cache[key] = base
        else:
            cache[key] = _gmul(_gpow(base, k - 1, cache), base)
    return cache[key]


def _eval_poly_int(p, dim, zs, zbs, shift, cache):
    """Gaussian-integer value of ``L * 2^(shift*D) * p``; returns (re, im, L, D)."""
    terms = p.terms()
    D = max(sum(e) for e, _ in terms)
    L = 1
    for _, c in terms:
        for part in (Fraction(int(c.x.numerator), int(c.x.denominator)),
                     Fraction(int(c.y.numerator), int(c.y.denominator))):
            L = L * part.denominator // np.gcd(L, part.denominator)
    n = zs[0][0].size
    re = np.zeros(n, dtype=object)
    im = np.zeros(n, dtype=object)
    for exp, c in terms:
        cre = int(Fraction(int(c.x.numerator), int(c.x.denominator)) * L)
        cim = int(Fraction(int(c.y.numerator), int(c.y.denominator)) * L)
        mono = (np.ones(n, dtype=object), np.zeros(n, dtype=object))
        for j in range(dim):
            if exp[j]:
                mono = _gmul(mono, _gpow(zs[j], exp[j], cache))
            if exp[dim + j]:
                mono = _gmul(mono, _gpow(zbs[j], exp[dim + j], cache))
        w = 1 << (shift * (D - sum(exp)))
        t = _gmul((cre, cim), mono)
        re = re + t[0] * w
        im = im + t[1] * w
    return re, im, L, D


def evaluate_exact(e: RationalExpr, coords) -> tuple[np.ndarray, np.ndarray]:
    """Exact values of ``e`` at the points ``coords`` (one flat complex array per ``z_j``).

    Node coordinates are read as exact binary fractions; numerator and
    denominator are evaluated in Gaussian integers and the quotient is
    rounded once (Python's correctly rounded ``int / int``).  Returns the
    complex values and a mask that is False at poles.
    """
    dim = e.dim
    shift, ints = _exact_coords([np.asarray(c, dtype=complex) for c in coords])
    zs = [(re, im) for re, im in ints]
    zbs = [(re, -im) for re, im in ints]
    cache: dict = {}
    n = zs[0][0].size
    if not e.numer:
        return np.zeros(n, dtype=complex), np.ones(n, dtype=bool)
    pr, pi, lp, dp = _eval_poly_int(e.numer, dim, zs, zbs, shift, cache)
    qr, qi, lq, dq = _eval_poly_int(e.denom, dim, zs, zbs, shift, cache)
    # value = (P/lp) / (Q/lq) * 2^(shift*(dq - dp))
    num_r = (pr * qr + pi * qi) * lq
    num_i = (pi * qr - pr * qi) * lq
    den = (qr * qr + qi * qi) * lp
    k = shift * (dq - dp)
    if k >= 0:
        num_r, num_i = num_r * (1 << k), num_i * (1 << k)
    else:
        den = den * (1 << (-k))
    ok = np.array([d != 0 for d in den], dtype=bool)
    out = np.zeros(n, dtype=complex)
    for idx in np.flatnonzero(ok):
        out[idx] = complex(num_r[idx] / den[idx], num_i[idx] / den[idx])
    return out, ok


def sample(e, spec: GridSpec, exact: bool = True):
    """Sample a :class:`RationalExpr` or :class:`RationalMatrix` on a grid.

    Poles on grid nodes are masked.  ``exact=False`` evaluates the same
    formula in floating point (faster, not correctly rounded).
    """
    coords = [np.asarray(c).ravel() for c in spec.coordinates()]
    if isinstance(e, RationalMatrix):
        r = e.r
        vals = np.zeros(spec.shape + (r, r), dtype=complex)
        mask = np.ones(spec.shape, dtype=bool)
        for a in range(r):
            for b in range(r):
                v, ok = _sample_flat(e[a, b], coords, exact)
                vals[..., a, b] = v.reshape(spec.shape)
                mask &= ok.reshape(spec.shape)
        return MatrixField(spec, vals, mask)
    v, ok = _sample_flat(e, coords, exact)
    return ScalarField(spec, v.reshape(spec.shape), ok.reshape(spec.shape))


def _sample_flat(e: RationalExpr, coords, exact):
    if exact:
        return evaluate_exact(e, coords)
    p = _eval_poly_float(e.numer, e.dim, coords)
    q = _eval_poly_float(e.denom, e.dim, coords)
    ok = q != 0
    out = np.zeros_like(p)
    out[ok] = p[ok] / q[ok]
    return out, ok


def _eval_poly_float(p, dim, coords):
    n = coords[0].size
    out = np.zeros(n, dtype=complex)
    for exp, c in p.terms():
        t = np.full(n, complex(float(c.x), float(c.y)))
        for j in range(dim):
            if exp[j]:
                t = t * coords[j] ** exp[j]
            if exp[dim + j]:
                t = t * np.conj(coords[j]) ** exp[dim + j]
        out += t
    return out


# ------------------------------------------------------------ counterexample


def counterexample_metric() -> RationalMatrix:
    """``[[1 + |z|^2, z], [zbar, |z|^2]]`` on the unit disc (rank 2, dim 1)."""
    z, zb = RationalExpr.z(1), RationalExpr.zbar(1)
    return RationalMatrix([[1 + z * zb, z], [zb, z * zb]], 1, hermitian=True)


def verify_counterexample(h: RationalMatrix | None = None) -> dict:
    """Exact checks of the rank-2 counterexample.

    Compares ``dh``, ``h^{-1}`` and ``theta = h^{-1} dh`` with their closed
    forms, checks the norm identity ``|u|^2_h = |z u1|^2 + |u1 + z u2|^2`` as a
    polynomial identity in generic section values, and flags ``theta_21`` as
    the entry whose denominator has degree 2 in ``z``.
    """
    h = counterexample_metric() if h is None else h
    z, zb = RationalExpr.z(1), RationalExpr.zbar(1)
    one = RationalExpr.const(1, 1)
    r2 = z * zb

    expected_dh = RationalMatrix([[zb, one], [0, zb]], 1)
    expected_inv = RationalMatrix([[r2, -z], [-zb, 1 + r2]], 1).scale(one / r2 ** 2)
    expected_theta = RationalMatrix([[one / z, 0], [-one / z ** 2, one / z]], 1)

    dh = h.d(0)
    inv = sym_inverse(h) if not h.det().is_zero() else None
    theta = sym_connection(h)[0] if inv is not None else None
    curv = theta.dbar(0) if theta is not None else None

    # |u|^2_h for u = (a, b) with a, b treated as fresh holomorphic values:
    # expand u^* h u in the ring Q(i)[z, zb, a, b, abar, bbar].
    norm_identity = _norm_identity_holds(h)

    checks = {
        "dh": dh == expected_dh,
        "inverse": inv is not None and inv == expected_inv,
        "theta": theta is not None and theta == expected_theta,
        "norm_identity": norm_identity,
        "inverse_product": inv is not None and (h @ inv) == RationalMatrix.identity(2, 1),
    }
    witness = None
    if theta is not None:
        witness = {"entry": [1, 0], "denominator_degree_z": theta[1, 0].degree_in(0)[1],
                   "value": repr(theta[1, 0])}
    return {
        "checks": checks,
        "all_exact": all(checks.values()),
        "dh": _mat_repr(dh),
        "inverse": _mat_repr(inv) if inv is not None else None,
        "theta": _mat_repr(theta) if theta is not None else None,
        "curvature_rational_part": _mat_repr(curv) if curv is not None else None,
        "non_integrable_witness": witness,
        "note": ("dbar of theta vanishes as a rational function away from z = 0; the derivative "
                 "of the delta mass at 0 carried by dbar(-1/z^2) is not representable here"),
    }


def _mat_repr(m):
    return [[repr(e) for e in row] for row in m.entries]


def _norm_identity_holds(h: RationalMatrix) -> bool:
    R, z, zb, a, b, ab, bb = ring("z,zb,a,b,ab,bb", QQ_I)

    def lift(e: RationalExpr):
        num = R.from_dict({(ex[0], ex[1], 0, 0, 0, 0): c for ex, c in e.numer.terms()}) if e.numer else R.zero
        den = R.from_dict({(ex[0], ex[1], 0, 0, 0, 0): c for ex, c in e.denom.terms()})
        return num, den

    u = [a, b]
    ubar = [ab, bb]
    num_total, den_total = R.zero, R.one
    for i in range(2):
        for k in range(2):
            num, den = lift(h[i, k])
            num_total = num_total * den + ubar[i] * num * u[k] * den_total
            den_total = den_total * den
    rhs = (z * a) * (zb * ab) + (a + z * b) * (ab + zb * bb)
    return num_total == rhs * den_total
