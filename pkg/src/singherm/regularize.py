"""Mollifier regularization ``h_nu = h * chi_nu`` and convergence diagnostics.

Convolution is done at the native resolution of the metric's generator: the
generator is re-sampled on a grid padded by the kernel support and the
convolution keeps only the fully supported ("valid") part, so ``h_nu`` lives
on the same nodes as ``h``.  Without a generator the valid part shrinks the
grid instead.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
from scipy.signal import fftconvolve

from . import chern
from . import hermitian as herm
from .grid import (GridError, GridSpec, MatrixField, ScalarField, bump_profile, integrate,
                   pair_with_test, volume_form_density, wirtinger_d)
from .metric import MetricField, det_field


@lru_cache(maxsize=32)
def _kernel(nu: float, spacing: tuple, profile_name: str):
    dim = len(spacing)
    support = 1.0 / nu
    half = tuple(int(np.floor(support / d)) for d in spacing)
    if any(m < 1 for m in half):
        raise GridError(f"kernel support 1/nu = {support:.3g} is below the grid spacing")
    axes = []
    for j in range(dim):
        k = np.arange(-half[j], half[j] + 1)
        axes += [k, k]
    grids = np.meshgrid(*axes, indexing="ij", sparse=True)
    if len(set(spacing)) == 1:
        # integer radius^2 keeps reflections and coordinate swaps bit-exact
        isq = sum(g.astype(np.int64) ** 2 for g in grids)
        t2 = isq * (spacing[0] * nu) ** 2
    else:
        t2 = sum((grids[2 * j] ** 2 + grids[2 * j + 1] ** 2) * (spacing[j] * nu) ** 2 for j in range(dim))
    t = np.sqrt(t2)
    w = _PROFILES[profile_name](t)
    total = w.sum()
    if not total > 0:
        raise GridError("kernel has no mass on this grid")
    w = w / total
    w.flags.writeable = False
    return w, half


_PROFILES = {"bump": bump_profile}


@dataclass(frozen=True)
class Mollifier:
    """Discrete radial approximate identity ``chi_nu`` with support radius ``1/nu``.

    Weights are the profile sampled at the lattice offsets, normalized to
    unit sum (so the discrete mass is 1 up to rounding).
    """

    nu: float
    spacing: tuple
    profile: str = "bump"

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError("nu must be positive")
        object.__setattr__(self, "spacing", tuple(float(d) for d in self.spacing))

    @classmethod
    def for_grid(cls, spec: GridSpec, nu: float, profile: str = "bump"):
        return cls(float(nu), spec.spacing, profile)

    @property
    def weights(self) -> np.ndarray:
        return _kernel(self.nu, self.spacing, self.profile)[0]

    @property
    def half_width(self) -> tuple:
        return _kernel(self.nu, self.spacing, self.profile)[1]

    @property
    def dim(self) -> int:
        return len(self.spacing)

    def second_moment(self) -> float:
        """``sum_q w(q) |q|^2``, the discrete analogue of ``int |q|^2 chi_nu``."""
        w = self.weights
        axes = []
        for j in range(self.dim):
            k = np.arange(-self.half_width[j], self.half_width[j] + 1) * self.spacing[j]
            axes += [k, k]
        grids = np.meshgrid(*axes, indexing="ij", sparse=True)
        return float((w * sum(g ** 2 for g in grids)).sum())


def _convolve_grid(values: np.ndarray, kernel: np.ndarray, ndim: int) -> np.ndarray:
    """Valid-mode convolution over the first ``ndim`` axes, entry by entry in the tail."""
    tail = values.shape[ndim:]
    out_shape = tuple(s - k + 1 for s, k in zip(values.shape[:ndim], kernel.shape))
    out = np.empty(out_shape + tail, dtype=complex)
    for idx in np.ndindex(*tail):
        sl = (Ellipsis,) + idx
        v = values[sl]
        if np.iscomplexobj(v) and not np.any(v.imag):
            v = v.real
        out[sl] = fftconvolve(v, kernel, mode="valid")
    return out


def mollify(h: MetricField, nu: float, profile: str = "bump") -> MetricField:
    """``h_nu = h * chi_nu`` entrywise.

    With a generator the output sits on ``h.spec``; otherwise on the grid
    shrunk by the kernel half-width (error if nothing is left).
    """
    spec = h.spec
    moll = Mollifier.for_grid(spec, nu, profile)
    half = moll.half_width
    if h.generator is not None:
        padded = spec.padded(half)
        vals = h.generator(padded.coordinates())
        out_spec = spec
    else:
        if not h.mask.all():
            raise GridError("mollifying a partial field needs a generator")
        pts = tuple(n - 2 * m for n, m in zip(spec.points_per_axis, half))
        radii = tuple(r - m * d for r, m, d in zip(spec.radii, half, spec.spacing))
        try:
            out_spec = GridSpec(spec.dim, spec.center, radii, pts, spec.halo)
        except GridError as exc:
            raise GridError(f"nu = {nu} is too small for this domain") from exc
        vals = h.values
    conv = _convolve_grid(vals, moll.weights, 2 * spec.dim)
    conv = herm.hermitian_part(conv)
    smooth = "smooth"
    out = MetricField(MatrixField(out_spec, conv, copy=False), None, smoothness=smooth)
    out.nu = float(nu)
    out.source = h
    return out


def mollify_scalar(f: ScalarField, generator, nu: float, profile: str = "bump") -> ScalarField:
    """Scalar counterpart of :func:`mollify`; ``generator(zs)`` gives ``f`` at arbitrary points."""
    spec = f.spec
    moll = Mollifier.for_grid(spec, nu, profile)
    padded = spec.padded(moll.half_width)
    vals = np.asarray(generator(padded.coordinates()))
    return ScalarField(spec, _convolve_grid(vals, moll.weights, 2 * spec.dim), copy=False)


def _check_schedule(nu_schedule):
    nus = [float(v) for v in nu_schedule]
    if len(nus) < 1 or any(b <= a for a, b in zip(nus, nus[1:])):
        raise ValueError("nu schedule must be strictly increasing")
    return nus


def geometric_schedule(nu0: float, steps: int) -> list[float]:
    return [float(nu0) * 2 ** i for i in range(int(steps))]


@dataclass
class MonotonicityReport:
    nus: list
    violations: list
    point_count: int
    passed: bool

    @property
    def fraction_ok(self) -> float:
        total = self.point_count * max(len(self.violations), 1)
        return 1.0 - sum(self.violations) / total

    def to_dict(self):
        return dict(asdict(self), fraction_ok=self.fraction_ok)


def monotonicity_check(h: MetricField, nu_schedule, tol=None, metrics=None) -> MonotonicityReport:
    """Loewner order ``h_{nu'} <= h_nu`` for consecutive ``nu < nu'`` at every common node.

    ``tol`` defaults to ``1e-9 (1 + tr(h_nu - h_nu'))`` pointwise.
    """
    nus = _check_schedule(nu_schedule)
    ms = metrics or [mollify(h, nu) for nu in nus]
    violations = []
    mask = ms[0].mask
    for a, b in zip(ms, ms[1:]):
        ok = herm.loewner_leq(b.values, a.values, tol)
        violations.append(int(np.sum(mask & ~ok)))
    return MonotonicityReport(nus, violations, int(mask.sum()), all(v == 0 for v in violations))


@dataclass
class UniformReport:
    nus: list
    sup_errors: list
    tol: float
    decreasing: bool
    passed: bool

    def to_dict(self):
        return asdict(self)


def uniform_convergence_check(h: MetricField, nu_schedule, tol: float, metrics=None) -> UniformReport:
    """``sup |h_nu - h|_HS`` over the common grid for every ``nu``."""
    if h.smoothness == "measurable":
        raise ValueError("uniform convergence needs a continuous metric")
    if h.generator is None:
        raise ValueError("uniform convergence check needs a generator for exact re-sampling")
    nus = _check_schedule(nu_schedule)
    ms = metrics or [mollify(h, nu) for nu in nus]
    errs = []
    for m in ms:
        d = np.linalg.norm(m.values - h.values, axis=(-2, -1))
        errs.append(float(d[m.mask & h.mask].max()))
    # errors at the rounding level of h (constant metrics) count as converged
    floor = 64 * np.finfo(float).eps * max(1.0, float(np.abs(h.values[h.mask]).max()))
    dec = all(b < a for a, b in zip(errs, errs[1:])) or all(e <= floor for e in errs)
    return UniformReport(nus, errs, float(tol), bool(dec), bool(dec and errs[-1] <= tol))


def curvature_pairings(h: MetricField, xi, phis, floor: float = 1e-12) -> np.ndarray:
    """``P[i, a, b] = <(Theta~(xi))_ab, phi_i>`` against ``dV`` for each test function."""
    theta = chern.curvature(h, floor)
    tt = chern.contract(theta, xi)
    r = h.rank
    dv = volume_form_density(h.spec)
    out = np.zeros((len(phis), r, r), dtype=complex)
    for i, phi in enumerate(phis):
        for a in range(r):
            for b in range(r):
                out[i, a, b] = dv * pair_with_test(tt.entry(a, b), phi)
    return out


def symbolic_pairings(h: MetricField, xi, phis) -> np.ndarray | None:
    """Pairings of the exact curvature of a rational catalog metric, or ``None``."""
    from .symbolic import sample, sym_curvature

    gen = h.generator
    if gen is None or not gen.symbolic_available:
        return None
    blocks = sym_curvature(gen.symbolic())
    n = h.spec.dim
    xi = np.atleast_1d(np.asarray(xi, dtype=complex))
    acc = 0
    mask = np.ones(h.spec.shape, dtype=bool)
    for j in range(n):
        for k in range(n):
            s = sample(blocks[j][k], h.spec)
            acc = acc + chern.CURVATURE_SIGN * xi[j] * np.conj(xi[k]) * s.values
            mask &= s.mask
    dv = volume_form_density(h.spec)
    r = h.rank
    out = np.zeros((len(phis), r, r), dtype=complex)
    for i, phi in enumerate(phis):
        for a in range(r):
            for b in range(r):
                out[i, a, b] = dv * pair_with_test(ScalarField(h.spec, acc[..., a, b], mask), phi)
    return out


@dataclass
class WeakConvergenceTable:
    nus: list
    pairings: np.ndarray          # (len(nus), len(phis), r, r)
    increments: list              # max |P(nu_{i+1}) - P(nu_i)|
    limit: np.ndarray | None
    limit_source: str
    in_hypothesis: bool
    floor: float

    @property
    def errors(self) -> list | None:
        if self.limit is None:
            return None
        return [float(np.abs(p - self.limit).max()) for p in self.pairings]

    @property
    def cauchy_ratios(self) -> list:
        inc = self.increments
        return [a / b if b > 0 else np.inf for a, b in zip(inc, inc[1:])]

    def rows(self):
        """Flat rows ``(nu, phi, a, b, re, im)``."""
        out = []
        for i, nu in enumerate(self.nus):
            for p in range(self.pairings.shape[1]):
                for a in range(self.pairings.shape[2]):
                    for b in range(self.pairings.shape[3]):
                        v = self.pairings[i, p, a, b]
                        out.append((nu, p, a, b, v.real, v.imag))
        return out


def weak_convergence_probe(h: MetricField, nu_schedule, xi, phis, floor: float,
                           enforce_hypothesis: bool = True, limit: str = "auto") -> WeakConvergenceTable:
    """Pairings of the contracted curvature of ``h_nu`` with test functions.

    The hypothesis ``det h > floor`` is checked on the support of every test
    function; with ``enforce_hypothesis=False`` violations are allowed and
    the table is flagged as out of hypothesis.  The limit is taken from the
    symbolic kernel when the generator is rational, else from the direct
    curvature of ``h`` when it is smooth and non-degenerate on the supports.
    """
    nus = _check_schedule(nu_schedule)
    phis = [np.asarray(p) for p in phis]
    d = det_field(h).values.real
    inside = True
    for p in phis:
        if np.any((p != 0) & ~(h.mask & (d > floor))):
            inside = False
    if enforce_hypothesis and not inside:
        raise herm.SingularMetricError("det h <= floor on the support of a test function")
    vals = []
    for nu in nus:
        hn = mollify(h, nu)
        # h_nu is smooth and non-degenerate wherever det h_nu > 0
        vals.append(curvature_pairings(hn, xi, phis, floor=np.finfo(float).tiny))
    vals = np.array(vals)
    inc = [float(np.abs(b - a).max()) for a, b in zip(vals, vals[1:])]
    lim, src = None, "none"
    if limit in ("auto", "symbolic"):
        lim = symbolic_pairings(h, xi, phis) if inside else None
        src = "symbolic" if lim is not None else src
    if lim is None and limit in ("auto", "direct") and inside and h.smoothness == "smooth":
        try:
            lim = curvature_pairings(h, xi, phis, floor)
            src = "direct"
        except (GridError, herm.SingularMetricError):
            lim = None
    return WeakConvergenceTable(nus, vals, inc, lim, src, inside, float(floor))


@dataclass
class LpRow:
    r_in: float
    r_out: float
    entry: tuple
    p: float
    value: float
    cumulative: float


def lp_profile(theta: chern.ConnectionField, p: float, annuli, center=0.0) -> list[LpRow]:
    """``int |theta_ab|^p`` (Lebesgue) over ``{r_i < |z - c| < r_{i+1}}`` for every entry.

    ``annuli`` is a list of radii; rows are ordered from the outermost
    annulus inward and ``cumulative`` accumulates in that order.
    """
    spec = theta.spec
    if spec.dim != 1:
        raise GridError("lp_profile is restricted to one complex variable")
    radii = sorted(float(r) for r in annuli)
    if len(radii) < 2:
        raise ValueError("need at least two radii")
    interior = spec.interior_mask()
    th = theta.theta[0]
    r = th.rank
    rows = []
    cum = {}
    for r_in, r_out in reversed(list(zip(radii, radii[1:]))):
        region = spec.ball_mask(r_in, r_out, center)
        if not region.any():
            raise GridError(f"annulus ({r_in}, {r_out}) contains no nodes")
        if np.any(region & ~(theta.mask & interior)):
            raise GridError(f"annulus ({r_in}, {r_out}) leaves the valid interior")
        for a in range(r):
            for b in range(r):
                f = ScalarField(spec, np.abs(th.values[..., a, b]) ** p, theta.mask)
                v = integrate(f, region).real
                cum[(a, b)] = cum.get((a, b), 0.0) + v
                rows.append(LpRow(r_in, r_out, (a, b), float(p), v, cum[(a, b)]))
    return rows


def dyadic_lp_profile(h_or_entry, p: float, kmax: int, points: int = 256, floor: float = 0.0,
                      margin: float = 1.25) -> list[LpRow]:
    """:func:`lp_profile` on dyadic annuli ``2^{-k-1} < |z| < 2^{-k}``, ``k = 1..kmax``.

    Every annulus gets its own ``points x points`` grid of radius
    ``margin * 2^{-k}`` (plus the halo), so the resolution relative to the
    annulus is the same at every scale.  Cumulative sums run inward.
    """
    from . import catalog

    entry = catalog.get(h_or_entry) if isinstance(h_or_entry, str) else h_or_entry
    rows = []
    cum = {}
    for k in range(1, kmax + 1):
        r_out, r_in = 2.0 ** -k, 2.0 ** (-k - 1)
        spec = GridSpec(1, 0.0, margin * r_out, points)
        h = MetricField.from_catalog(entry, spec)
        region = spec.ball_mask(r_in * 0.9, r_out * 1.1)
        conn = chern.connection(h, floor=floor if floor > 0 else np.finfo(float).tiny, region=region)
        for row in lp_profile(conn, p, [r_in, r_out]):
            cum[row.entry] = cum.get(row.entry, 0.0) + row.value
            rows.append(LpRow(row.r_in, row.r_out, row.entry, row.p, row.value, cum[row.entry]))
    return rows


@dataclass
class L2Report:
    nus: list
    l2: list
    bounded: bool
    band: float
    pairings: np.ndarray | None = None
    increments: list = field(default_factory=list)

    def to_dict(self):
        return {"nus": self.nus, "l2": self.l2, "bounded": self.bounded, "band": self.band,
                "increments": self.increments}


def l2_norm_dh(h: MetricField, region) -> float:
    """``int_region sum_j |dh/dz_j|_HS^2`` (Lebesgue)."""
    spec = h.spec
    region = np.asarray(region, dtype=bool)
    acc = np.zeros(spec.shape)
    mask = h.mask
    for j in range(spec.dim):
        dh = wirtinger_d(h.samples, j)
        acc += np.sum(np.abs(dh.values) ** 2, axis=(-2, -1))
        mask = mask & dh.mask
    if np.any(region & ~mask):
        raise GridError("region is not compactly inside the valid mask")
    return float(integrate(ScalarField(spec, acc, mask), region).real)


def l2_bound_check(h: MetricField, nu_schedule, region, phis=(), band: float = 0.05,
                   metrics=None) -> L2Report:
    """Uniform bound on ``int_region |dh_nu|_HS^2`` and weak-L^2 pairings of ``dh_nu``.

    Bounded means no value exceeds the first one by more than ``band``
    (relative).  Pairings are of every entry of ``dh_nu/dz_j`` with each
    test function; ``increments`` are the max changes between consecutive
    ``nu``.
    """
    nus = _check_schedule(nu_schedule)
    region = np.asarray(region, dtype=bool)
    if np.any(region & ~h.spec.interior_mask()):
        raise GridError("region must stay inside the grid interior")
    ms = metrics or [mollify(h, nu) for nu in nus]
    l2 = [l2_norm_dh(m, region) for m in ms]
    bounded = all(v <= l2[0] * (1 + band) + 1e-300 for v in l2)
    pairs = None
    inc = []
    if phis:
        r = h.rank
        pairs = np.zeros((len(nus), len(phis), h.spec.dim, r, r), dtype=complex)
        for i, m in enumerate(ms):
            for j in range(h.spec.dim):
                dh = wirtinger_d(m.samples, j)
                for q, phi in enumerate(phis):
                    for a in range(r):
                        for b in range(r):
                            pairs[i, q, j, a, b] = pair_with_test(dh.entry(a, b), phi)
        inc = [float(np.abs(b - a).max()) for a, b in zip(pairs, pairs[1:])]
    return L2Report(nus, l2, bool(bounded), band, pairs, inc)
