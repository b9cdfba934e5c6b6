"""Plurisubharmonicity tests for sampled scalar fields and the section-based negativity tests.

Two methods are offered.  ``hessian`` looks at the smallest eigenvalue of
the discrete complex Hessian and needs C^2 data.  ``submean`` compares
circle averages on coordinate discs with the center value and only needs
continuity.  Both report margins in the same unit: for the sub-mean test
the margin at radius ``rho`` is ``(mean - f(z)) / rho^2``, which tends to
``ddbar f`` along the coordinate direction as ``rho -> 0``.
"""

from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass, field

import numpy as np

from . import chern
from . import hermitian as herm
from .grid import GridError, MatrixField, ScalarField, _erode, wirtinger_d, wirtinger_dbar
from .metric import MetricField, SectionField, SectionTuple, eval_norm_sq, pairing

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"
SUBMEAN_ANGLES = 32


@dataclass
class PshReport:
    verdict: str
    worst_margin: float
    worst_location: tuple | None
    method: str
    tol: float
    point_count: int
    params: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == PASS

    def to_dict(self) -> dict:
        return asdict(self)


def _verdict(margin: float, tol: float) -> str:
    if margin < -tol:
        return FAIL
    if margin < -tol / 10:
        return INCONCLUSIVE
    return PASS


def default_tol(f: ScalarField) -> float:
    """``10 * spacing^2 * (1 + max |f|)`` over the valid nodes."""
    scale = float(np.abs(f.values[f.mask]).max()) if f.mask.any() else 0.0
    return 10.0 * f.spec.max_spacing ** 2 * (1.0 + scale)


def complex_hessian(f: ScalarField) -> MatrixField:
    """``H_jk = dbar_k d_j f``, hermitian-symmetrized."""
    n = f.spec.dim
    rows = []
    mask = f.mask
    for j in range(n):
        dj = wirtinger_d(f, j)
        row = []
        for k in range(n):
            b = wirtinger_dbar(dj, k)
            mask = mask & b.mask
            row.append(b.values)
        rows.append(row)
    if not mask.any():
        raise GridError("field too small for the complex Hessian")
    H = np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)
    return MatrixField(f.spec, herm.hermitian_part(H), mask, copy=False)


def _report_from(margins: np.ndarray, mask: np.ndarray, method: str, tol: float, params: dict) -> PshReport:
    if not mask.any():
        raise GridError("no valid interior points to test")
    vals = np.where(mask, margins, np.inf)
    i = int(np.argmin(vals))
    loc = tuple(int(v) for v in np.unravel_index(i, mask.shape))
    worst = float(vals.reshape(-1)[i])
    return PshReport(_verdict(worst, tol), worst, loc, method, float(tol), int(mask.sum()), params)


def _shift(values: np.ndarray, mask: np.ndarray, offsets: dict) -> tuple[np.ndarray, np.ndarray]:
    """``values[i + offset]`` with the shifted validity; out-of-range reads are invalid."""
    out = np.zeros_like(values)
    ok = np.zeros_like(mask)
    src = [slice(None)] * values.ndim
    dst = [slice(None)] * values.ndim
    for ax, k in offsets.items():
        n = values.shape[ax]
        if abs(k) >= n:
            return out, ok
        if k >= 0:
            src[ax], dst[ax] = slice(k, n), slice(0, n - k)
        else:
            src[ax], dst[ax] = slice(0, n + k), slice(-k, n)
    out[tuple(dst)] = values[tuple(src)]
    ok[tuple(dst)] = mask[tuple(src)]
    return out, ok


def circle_means(f: ScalarField, j: int, rho: float, angles: int = SUBMEAN_ANGLES):
    """Average of ``f`` over ``{z + rho e^{i phi} e_j}`` at every node, by bilinear interpolation.

    Returns the means and the mask of nodes whose whole circle stencil is valid.
    """
    spec = f.spec
    h = spec.spacing[j]
    ax, ay = 2 * j, 2 * j + 1
    acc = np.zeros(spec.shape)
    ok = f.mask.copy()
    vals = f.values.real
    cache = {}
    for phi in 2 * np.pi * np.arange(angles) / angles:
        px, py = rho * np.cos(phi) / h, rho * np.sin(phi) / h
        ix, iy = int(np.floor(px)), int(np.floor(py))
        tx, ty = px - ix, py - iy
        for dx, dy, w in ((0, 0, (1 - tx) * (1 - ty)), (1, 0, tx * (1 - ty)),
                          (0, 1, (1 - tx) * ty), (1, 1, tx * ty)):
            key = (ix + dx, iy + dy)
            if key not in cache:
                cache[key] = _shift(vals, f.mask, {ax: key[0], ay: key[1]})
            sv, sm = cache[key]
            acc += w * sv
            ok &= sm
    return acc / angles, ok


def is_psh(f: ScalarField, method: str = "hessian", tol: float | None = None, mask=None,
           radii=None, angles: int = SUBMEAN_ANGLES) -> PshReport:
    """Test plurisubharmonicity of a real sampled field.

    Parameters
    ----------
    f : ScalarField
        Real-valued on its mask.
    method : {"hessian", "submean"}
    tol : float, optional
        Defaults to :func:`default_tol`.
    mask : array of bool, optional
        Extra restriction of the tested nodes.
    radii : sequence of float, optional
        Sub-mean radii in units of the grid spacing, default ``(2, 4, 8)``.

    Returns
    -------
    PshReport
        ``fail`` if the worst margin is below ``-tol``, ``inconclusive`` if
        it lies in ``[-tol, -tol/10)``, else ``pass``.
    """
    if np.any(np.abs(f.values.imag[f.mask]) > 1e-9 * (1 + np.abs(f.values[f.mask]).max())):
        raise ValueError("is_psh needs a real-valued field")
    f = ScalarField(f.spec, f.values.real, f.mask)
    tol = default_tol(f) if tol is None else float(tol)
    restrict = f.spec.interior_mask() if mask is None else (np.asarray(mask, bool) & f.spec.interior_mask())
    if method == "hessian":
        H = complex_hessian(f)
        m = H.mask & restrict
        lam = np.zeros(f.spec.shape)
        if m.any():
            lam[m] = herm.eigenvalues(H.values[m])[:, 0]
        return _report_from(lam, m, "hessian", tol, {})
    if method == "submean":
        radii = (2, 4, 8) if radii is None else tuple(radii)
        best = np.full(f.spec.shape, np.inf)
        tested = np.zeros(f.spec.shape, dtype=bool)
        for j in range(f.spec.dim):
            for k in radii:
                rho = k * f.spec.spacing[j]
                mean, ok = circle_means(f, j, rho, angles)
                ok &= restrict
                margin = (mean - f.values.real) / rho ** 2
                best = np.where(ok, np.minimum(best, margin), best)
                tested |= ok
        return _report_from(best, tested, "submean", tol, {"radii": list(radii), "angles": angles})
    raise ValueError(f"unknown method {method!r}")


def _combine(reports: list[PshReport], tol: float, method: str, params: dict) -> PshReport:
    worst = min(reports, key=lambda r: r.worst_margin)
    params = dict(params, members=len(reports), worst_member=reports.index(worst))
    return PshReport(_verdict(worst.worst_margin, tol), worst.worst_margin, worst.worst_location,
                     method, tol, sum(r.point_count for r in reports), params)


def default_corpus(rank: int, dim: int, seed: int = 0, n_random: int = 16, degree: int = 2) -> list[SectionField]:
    """Monomials of total degree <= ``degree`` in every slot, plus random sections."""
    exps = [e for e in itertools.product(range(degree + 1), repeat=dim) if sum(e) <= degree]
    out = [SectionField.monomial(e, a, rank) for e in exps for a in range(rank)]
    rng = np.random.default_rng(seed)
    out += [SectionField.random(rng, rank, dim, degree) for _ in range(n_random)]
    return out


def griffiths_negative_test(h: MetricField, corpus=None, method: str = "hessian", tol: float | None = None,
                            mask=None, seed: int = 0) -> PshReport:
    """``|u|_h^2`` plurisubharmonic for every ``u`` in the corpus.

    ``tol`` defaults per section to :func:`default_tol` of ``|u|_h^2``.
    """
    corpus = default_corpus(h.rank, h.spec.dim, seed) if corpus is None else list(corpus)
    if not corpus:
        raise ValueError("empty section corpus")
    reports = []
    for u in corpus:
        f = eval_norm_sq(h, u)
        reports.append(is_psh(f, method, tol, mask))
    # the verdict uses each member's own tolerance; report the loosest one
    worst = min(reports, key=lambda r: r.worst_margin / r.tol)
    verdict = FAIL if any(r.verdict == FAIL for r in reports) else (
        INCONCLUSIVE if any(r.verdict == INCONCLUSIVE for r in reports) else PASS)
    return PshReport(verdict, worst.worst_margin, worst.worst_location, method, worst.tol,
                     sum(r.point_count for r in reports),
                     {"members": len(reports), "worst_member": reports.index(worst)})


def default_q_corpus(dim: int) -> list[dict]:
    """A few holomorphic polynomials ``q`` as ``{exponent: coefficient}``."""
    zero = (0,) * dim
    out = [{zero: 0.0}]
    for j in range(dim):
        e = tuple(1 if i == j else 0 for i in range(dim))
        e2 = tuple(2 if i == j else 0 for i in range(dim))
        out += [{e: 1.0}, {e: 1j}, {e: -0.5}, {e2: 0.5}, {e: 0.3, e2: -0.4j}]
    return out


def _eval_q(q: dict, spec) -> np.ndarray:
    out = np.zeros(spec.shape, dtype=complex)
    for e, c in q.items():
        t = np.full(spec.shape, complex(c))
        for j, k in enumerate(e):
            if k:
                t = t * spec.coordinate(j) ** k
        out += t
    return out


@dataclass
class LogPshReport:
    weighted: PshReport
    log: PshReport

    @property
    def consistent(self) -> bool:
        return self.weighted.passed == self.log.passed

    def to_dict(self) -> dict:
        return {"weighted": self.weighted.to_dict(), "log": self.log.to_dict(), "consistent": self.consistent}


def log_psh_equivalence_test(h: MetricField, u: SectionField, q_corpus=None, method: str = "hessian",
                             tol: float | None = None, floor: float = 1e-12) -> LogPshReport:
    """Two routes to ``log |u|_h^2`` plurisubharmonic.

    ``weighted``: ``|u e^q|_h^2 = |u|_h^2 e^{2 Re q}`` is psh for every ``q``
    in the corpus, with ``u e^q`` evaluated pointwise.  ``log``: the field
    ``log |u|_h^2`` itself, tested on ``{|u|_h^2 > floor}``.
    """
    spec = h.spec
    base = eval_norm_sq(h, u)
    zero = h.mask & (base.values.real <= floor)
    if _erode(zero, range(2 * spec.dim)).any():
        raise ValueError("|u|_h^2 vanishes on an open set")
    q_corpus = default_q_corpus(spec.dim) if q_corpus is None else list(q_corpus)
    uv = u.values(spec)
    reports = []
    for q in q_corpus:
        w = np.exp(_eval_q(q, spec))
        f = eval_norm_sq(h, uv * w[..., None])
        reports.append(is_psh(f, method, tol))
    worst = min(reports, key=lambda r: r.worst_margin / r.tol)
    verdict = FAIL if any(r.verdict == FAIL for r in reports) else (
        INCONCLUSIVE if any(r.verdict == INCONCLUSIVE for r in reports) else PASS)
    weighted = PshReport(verdict, worst.worst_margin, worst.worst_location, method, worst.tol,
                         sum(r.point_count for r in reports), {"members": len(reports)})
    pos = h.mask & (base.values.real > floor)
    logf = np.zeros(spec.shape)
    logf[pos] = np.log(base.values.real[pos])
    log_rep = is_psh(ScalarField(spec, logf, pos), method, tol)
    return LogPshReport(weighted, log_rep)


def nakano_form_coefficient(h: MetricField, U: SectionTuple) -> ScalarField:
    """``S_U = sum_jk d_j dbar_k (u_j, u_k)_h``, the density of ``i ddbar T_U``.

    Sign chosen so that ``S_U >= 0`` for Nakano negative metrics; for
    ``h = exp(|z|^2) I`` in two variables and ``U = (e_1, e_2)`` it equals 2
    at the origin.
    """
    n = h.spec.dim
    if len(U) != n or U[0].dim != n:
        raise GridError("section tuple must have one section per coordinate")
    acc, mask = 0, h.mask
    for j in range(n):
        for k in range(n):
            p = pairing(h, U[j], U[k])
            b = wirtinger_dbar(wirtinger_d(p, j), k)
            acc = acc + b.values
            mask = mask & b.mask
    return ScalarField(h.spec, np.where(mask, acc, 0), mask)


def default_tuple_corpus(rank: int, dim: int, seed: int = 0, n_random: int = 4) -> list[SectionTuple]:
    """Constant tuples built from basis vectors plus random degree-1 tuples."""
    out = []
    for a in range(rank):
        basis = SectionField.constant(np.eye(rank)[a], dim)
        null = SectionField.constant(np.zeros(rank), dim)
        for j in range(dim):
            out.append(SectionTuple([basis if i == j else null for i in range(dim)]))
        out.append(SectionTuple([basis] * dim))
    rng = np.random.default_rng(seed)
    for _ in range(n_random):
        out.append(SectionTuple([SectionField.random(rng, rank, dim, 1) for _ in range(dim)]))
    return out


@dataclass
class NakanoReport:
    verdict: str
    part_i: PshReport
    part_ii: list = field(default_factory=list)
    delta: float = 0.0

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "delta": self.delta, "part_i": self.part_i.to_dict(),
                "part_ii": [dict(nu=nu, **r.to_dict()) for nu, r in self.part_ii]}


def nakano_negative_test(h: MetricField, tuple_corpus=None, delta: float = 0.0, tol: float | None = None,
                         floor: float = 1e-12, nu_schedule=None, seed: int = 0) -> NakanoReport:
    """Nakano negativity through ``T_U`` (part i) and the pointwise pencil (part ii).

    Part (ii) runs :func:`singherm.chern.nakano_test` on ``{det h >= floor}``
    for smooth metrics, and on the mollified metrics ``h_nu`` for every
    ``nu`` in ``nu_schedule`` otherwise.
    """
    from .regularize import mollify

    corpus = default_tuple_corpus(h.rank, h.spec.dim, seed) if tuple_corpus is None else list(tuple_corpus)
    if not corpus:
        raise ValueError("empty tuple corpus")
    reports = []
    for U in corpus:
        S = nakano_form_coefficient(h, U)
        t = default_tol(S) if tol is None else tol
        m = S.mask & h.spec.interior_mask()
        reports.append(_report_from(S.values.real, m, "hessian", t, {}))
    t_i = max(r.tol for r in reports)
    part_i = _combine(reports, t_i, "hessian", {})
    ptol = 1e-9 if tol is None else tol
    part_ii = []
    if h.smoothness == "smooth":
        part_ii.append((None, chern.nakano_test(h, chern.curvature(h, floor), delta, ptol)))
    else:
        for nu in (nu_schedule or (2.0, 4.0, 8.0, 16.0)):
            hn = mollify(h, nu)
            part_ii.append((float(nu), chern.nakano_test(hn, chern.curvature(hn, floor), delta, ptol)))
    ok = part_i.verdict == PASS and all(r.passed for _, r in part_ii)
    verdict = PASS if ok else (FAIL if part_i.verdict == FAIL or not all(r.passed for _, r in part_ii)
                               else INCONCLUSIVE)
    return NakanoReport(verdict, part_i, part_ii, float(delta))
