"""Chern connection and curvature of sampled metrics, with pointwise negativity tests.

Conventions
-----------
``theta_j = h^{-1} dh/dz_j`` and the stored curvature blocks are
``Theta_jk = d/dzbar_k theta_j``.  The contracted curvature

    Theta~(xi) = c * sum_jk Theta_jk xi_j conj(xi_k),   c = CURVATURE_SIGN = -1,

is normalized so that ``h = exp(|z|^2) I`` gives ``Theta~ = -I``: negatively
curved metrics have negative definite ``Theta~`` with respect to ``h``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import hermitian as herm
from .grid import GridError, MatrixField, ScalarField, _erode, wirtinger_d, wirtinger_dbar
from .metric import MetricField, SectionField, det_field, eval_norm_sq, log_det_field

CURVATURE_SIGN = -1.0

# points per batch in the pencil eigen-solves, keeps peak memory bounded on 4d grids
_CHUNK = 1 << 19


@dataclass(frozen=True)
class ConnectionField:
    """Matrices ``theta_j`` (coefficient of ``dz_j``) on the mask where ``det h >= floor``."""

    theta: tuple
    mask: np.ndarray
    floor: float

    @property
    def dim(self) -> int:
        return len(self.theta)

    @property
    def spec(self):
        return self.theta[0].spec


@dataclass(frozen=True)
class CurvatureField:
    """Blocks ``Theta[j][k] = dbar_k theta_j`` together with the metric they came from."""

    blocks: tuple
    mask: np.ndarray
    metric: MetricField = field(repr=False)
    connection: ConnectionField | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return len(self.blocks)

    @property
    def spec(self):
        return self.metric.spec

    def block(self, j: int, k: int) -> MatrixField:
        return self.blocks[j][k]


def _det_mask(h: MetricField, floor: float, region):
    d = det_field(h).values.real
    ok = h.mask & (d >= floor)
    if region is not None:
        region = np.asarray(region, dtype=bool)
        if np.any(region & ~ok):
            raise herm.SingularMetricError(f"det h < {floor:.3g} inside the requested region")
        ok = ok & region
    return ok


def _stencil_mask(mask, j):
    return _erode(mask, (2 * j, 2 * j + 1))


def connection(h: MetricField, floor: float = 1e-12, region=None) -> ConnectionField:
    """``theta_j = h^{-1} dh/dz_j`` on ``{det h >= floor}``, eroded by one stencil.

    If ``region`` is given, ``det h >= floor`` must hold on all of it
    (:class:`~singherm.hermitian.SingularMetricError` otherwise) and the
    result is restricted to it.
    """
    ok = _det_mask(h, floor, region)
    hinv = np.where(ok[..., None, None], h.values, np.eye(h.rank))
    hinv = herm.inverse(hinv)
    thetas = []
    mask = ok
    for j in range(h.spec.dim):
        mask = mask & _stencil_mask(h.mask, j)
    if not mask.any():
        raise GridError("connection mask is empty")
    for j in range(h.spec.dim):
        dh = wirtinger_d(h.samples, j)
        thetas.append(MatrixField(h.spec, hinv @ dh.values, mask, copy=False))
        del dh
    del hinv
    return ConnectionField(tuple(thetas), mask, floor)


def curvature(h: MetricField, floor: float = 1e-12, region=None, theta: ConnectionField | None = None) -> CurvatureField:
    """``Theta_jk = dbar_k theta_j``; the mask loses one more stencil."""
    if theta is None:
        theta = connection(h, floor, region)
    n = theta.dim
    blocks = [[wirtinger_dbar(theta.theta[j], k) for k in range(n)] for j in range(n)]
    mask = blocks[0][0].mask
    for row in blocks:
        for b in row:
            mask = mask & b.mask
    if not mask.any():
        raise GridError("curvature mask is empty")
    # every block was eroded the same way, so the masks already agree
    blocks = tuple(tuple(b if np.array_equal(b.mask, mask) else b.with_mask(mask) for b in row)
                   for row in blocks)
    return CurvatureField(blocks, mask, h, theta)


def _as_xi(xi, n):
    xi = np.atleast_1d(np.asarray(xi, dtype=complex))
    if xi.shape != (n,):
        raise ValueError(f"xi must have {n} components")
    if not np.any(xi != 0):
        raise ValueError("xi must be nonzero")
    return xi


def contract(theta: CurvatureField, xi) -> MatrixField:
    """``Theta~(xi) = c * sum_jk Theta_jk xi_j conj(xi_k)`` with ``c = CURVATURE_SIGN``."""
    n = theta.dim
    xi = _as_xi(xi, n)
    acc = None
    for j in range(n):
        for k in range(n):
            w = complex(CURVATURE_SIGN) * xi[j] * np.conj(xi[k])
            term = w * theta.blocks[j][k].values
            acc = term if acc is None else acc + term
    return MatrixField(theta.spec, acc, theta.mask)


def default_xi_set(n: int, seed: int = 0, n_random: int = 8) -> list[np.ndarray]:
    """Coordinate directions plus ``n_random`` random unit vectors."""
    rng = np.random.default_rng(seed)
    out = [np.eye(n, dtype=complex)[j] for j in range(n)]
    for _ in range(n_random):
        v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        out.append(v / np.linalg.norm(v))
    return out


@dataclass
class CurvatureReport:
    """Outcome of a pointwise pencil test.

    ``worst_margin`` is ``min(-delta |xi|^2 - lambda_max)`` over points and
    directions, so the test passes iff ``worst_margin >= -tol``.
    ``empirical_delta`` is the largest ``delta`` that would pass at ``tol=0``.
    """

    test: str
    passed: bool
    delta: float
    tol: float
    worst_margin: float
    worst_location: tuple
    failing_points: int
    point_count: int
    empirical_delta: float
    directions: int = 1

    def to_dict(self) -> dict:
        return asdict(self)

    def same_numbers(self, other: "CurvatureReport") -> bool:
        keys = ("passed", "delta", "tol", "worst_margin", "worst_location",
                "failing_points", "point_count", "empirical_delta")
        return all(getattr(self, k) == getattr(other, k) for k in keys)


def _pencil_max(build, mask: np.ndarray) -> np.ndarray:
    """Largest pencil eigenvalue at every masked node (flattened, C order).

    ``build(sel)`` returns the pencil ``(a, b)`` for the flat node indices
    ``sel``; nodes are processed in batches so 4d grids stay affordable.
    """
    idx = np.flatnonzero(mask)
    out = np.empty(idx.size)
    for s in range(0, idx.size, _CHUNK):
        sel = idx[s:s + _CHUNK]
        a, b = build(sel)
        try:
            out[s:s + _CHUNK] = herm.pencil_eigenvalues(a, b)[:, -1]
        except np.linalg.LinAlgError as exc:
            raise herm.SingularMetricError("metric is not positive definite on the test mask") from exc
    return out


def _flat(values: np.ndarray) -> np.ndarray:
    return values.reshape((-1,) + values.shape[-2:])


def _pencil_report(test, lam_sets, mask, delta, tol) -> CurvatureReport:
    """Aggregate ``[(lambda_max array, |xi|^2), ...]`` into a report."""
    idx = np.flatnonzero(mask)
    worst = np.inf
    worst_at = None
    emp = np.inf
    failing = np.zeros(idx.size, dtype=bool)
    for lam, xi2 in lam_sets:
        margin = -delta * xi2 - lam
        i = int(np.argmin(margin))
        if margin[i] < worst:
            worst, worst_at = float(margin[i]), i
        emp = min(emp, float(np.min(-lam / xi2)))
        failing |= margin < -tol
    loc = tuple(int(v) for v in np.unravel_index(idx[worst_at], mask.shape))
    return CurvatureReport(test, bool(worst >= -tol), float(delta), float(tol), worst, loc,
                           int(failing.sum()), int(idx.size), emp, len(lam_sets))


def griffiths_test(h: MetricField, theta: CurvatureField, delta: float = 0.0, xi_set=None,
                   tol: float = 1e-9, seed: int = 0) -> CurvatureReport:
    """Strict Griffiths test: ``(Theta~(xi) s, s)_h <= -delta |s|_h^2 |xi|^2`` at every node.

    Per node and direction the largest eigenvalue of the pencil
    ``(h Theta~(xi), h)`` is compared with ``-delta |xi|^2``.
    """
    if h.smoothness == "measurable":
        raise ValueError("pointwise curvature tests need a smooth or continuous metric")
    n = theta.dim
    xi_set = default_xi_set(n, seed) if xi_set is None else [_as_xi(x, n) for x in xi_set]
    hf = _flat(h.values)
    blocks = [[_flat(b.values) for b in row] for row in theta.blocks]
    lam_sets = []
    for xi in xi_set:
        weights = [[complex(CURVATURE_SIGN) * xi[j] * np.conj(xi[k]) for k in range(n)] for j in range(n)]

        def build(sel, weights=weights):
            acc = None
            for j in range(n):
                for k in range(n):
                    term = weights[j][k] * blocks[j][k][sel]
                    acc = term if acc is None else acc + term
            hs = hf[sel]
            return hs @ acc, hs

        lam_sets.append((_pencil_max(build, theta.mask), float(np.vdot(xi, xi).real)))
    return _pencil_report("griffiths", lam_sets, theta.mask, delta, tol)


def nakano_blocks(h_values: np.ndarray, blocks) -> tuple[np.ndarray, np.ndarray]:
    """Block matrix ``N`` (block ``(k, j) = c h Theta_jk``) and ``blockdiag(h, ..., h)``.

    ``h_values`` is a stack of metric matrices and ``blocks[j][k]`` the
    matching stacks of curvature blocks.
    """
    n, r = len(blocks), h_values.shape[-1]
    lead = h_values.shape[:-2]
    big = np.zeros(lead + (n * r, n * r), dtype=complex)
    diag = np.zeros_like(big)
    c = complex(CURVATURE_SIGN)
    for j in range(n):
        diag[..., j * r:(j + 1) * r, j * r:(j + 1) * r] = h_values
        for k in range(n):
            big[..., k * r:(k + 1) * r, j * r:(j + 1) * r] = h_values @ (c * blocks[j][k])
    return big, diag


def nakano_test(h: MetricField, theta: CurvatureField, delta: float = 0.0, tol: float = 1e-9) -> CurvatureReport:
    """Strict Nakano test: ``sum_jk (Theta~_jk s_j, s_k)_h <= -delta sum_j |s_j|_h^2``.

    On curves this is the same matrix as the Griffiths test with ``xi = 1``
    and goes through the same eigen-solver, so the two reports coincide.
    """
    if h.smoothness == "measurable":
        raise ValueError("pointwise curvature tests need a smooth or continuous metric")
    hf = _flat(h.values)
    blocks = [[_flat(b.values) for b in row] for row in theta.blocks]

    def build(sel):
        return nakano_blocks(hf[sel], [[b[sel] for b in row] for row in blocks])

    lam = _pencil_max(build, theta.mask)
    return _pencil_report("nakano", [(lam, 1.0)], theta.mask, delta, tol)


def trace_curvature(theta: CurvatureField, xi=None):
    """``tr Theta~(xi)`` if ``xi`` is given, else the matrix of traces ``tr Theta_jk``."""
    if xi is not None:
        t = contract(theta, xi)
        return ScalarField(t.spec, np.trace(t.values, axis1=-2, axis2=-1), t.mask)
    return [[ScalarField(b.spec, np.trace(b.values, axis1=-2, axis2=-1), b.mask) for b in row]
            for row in theta.blocks]


def pencil_trace(h: MetricField, theta_tilde: MatrixField) -> ScalarField:
    """Trace of ``Theta~`` in an ``h``-orthonormal eigenbasis, i.e. of the pencil ``(h Theta~, h)``."""
    lam = np.zeros(h.spec.shape)
    m = theta_tilde.mask
    a = h.values @ theta_tilde.values
    idx = np.flatnonzero(m)
    vals = herm.pencil_eigenvalues(a.reshape(-1, h.rank, h.rank)[idx], h.values.reshape(-1, h.rank, h.rank)[idx])
    lam.reshape(-1)[idx] = vals.sum(axis=-1)
    return ScalarField(h.spec, lam, m)


def _hessian_contract(f: ScalarField, xi) -> ScalarField:
    """``sum_jk dbar_k d_j f xi_j conj(xi_k)`` by nested central differences."""
    n = f.spec.dim
    acc, mask = 0, f.mask
    for j in range(n):
        dj = wirtinger_d(f, j)
        for k in range(n):
            w = xi[j] * np.conj(xi[k])
            if w == 0:
                continue
            djk = wirtinger_dbar(dj, k)
            acc = acc + w * djk.values
            mask = mask & djk.mask
    return ScalarField(f.spec, np.where(mask, acc, 0), mask)


def trace_identity_residual(h: MetricField, theta: CurvatureField, xi) -> ScalarField:
    """``tr Theta~(xi) + (dd^c log det h)(xi, xi)``, which vanishes up to O(spacing^2).

    With the sign convention of this module ``tr Theta~ = -(ddbar log det h)(xi, xi)``.
    """
    xi = _as_xi(xi, theta.dim)
    tr = trace_curvature(theta, xi)
    hess = _hessian_contract(log_det_field(h), xi)
    mask = tr.mask & hess.mask
    return ScalarField(h.spec, np.where(mask, tr.values - CURVATURE_SIGN * hess.values, 0), mask)


def bochner_residual(h: MetricField, u: SectionField, xi, theta: CurvatureField | None = None,
                     floor: float = 1e-12) -> ScalarField:
    """Residual of ``ddbar |u|_h^2 (xi, xi) = -(Theta~ u, u)_h + |D'_xi u|_h^2``.

    The left side is the nested-difference complex Hessian of ``|u|_h^2``;
    the right side uses the numeric curvature and ``D'_xi u = sum_j xi_j
    (du/dz_j + theta_j u)`` with exact polynomial derivatives of ``u``.
    """
    if h.smoothness == "measurable":
        raise ValueError("the Bochner identity needs a smooth metric")
    n = h.spec.dim
    xi = _as_xi(xi, n)
    if theta is None:
        theta = curvature(h, floor)
    conn = theta.connection if theta.connection is not None else connection(h, floor)
    uv = u.values(h.spec)
    lhs = _hessian_contract(eval_norm_sq(h, u), xi)
    tt = contract(theta, xi).values
    curv_term = -np.einsum("...a,...ab,...bc,...c->...", np.conj(uv), h.values, tt, uv)
    du = np.zeros_like(uv)
    for j in range(n):
        du = du + xi[j] * (u.derivative(j).values(h.spec) + np.einsum("...ab,...b->...a", conn.theta[j].values, uv))
    grad_term = np.einsum("...a,...ab,...b->...", np.conj(du), h.values, du)
    mask = lhs.mask & theta.mask & conn.mask
    if not mask.any():
        raise GridError("residual mask is empty")
    res = lhs.values - (curv_term + grad_term)
    return ScalarField(h.spec, np.where(mask, res, 0), mask)
