"""Singular hermitian metric fields and holomorphic polynomial sections."""

from __future__ import annotations

import itertools
from typing import Sequence

import numpy as np

from . import catalog as _catalog
from . import hermitian as herm
from .grid import GridError, GridSpec, MatrixField, ScalarField

SMOOTHNESS = ("smooth", "continuous", "measurable")


class MetricField:
    """Hermitian-matrix-valued field ``h`` on a polydisc grid.

    Samples are symmetrized on construction (the largest relative correction
    is kept in ``hermitian_defect``) and must be positive semidefinite at every
    valid node.  When a catalog ``generator`` is attached the field can be
    re-sampled exactly on any other grid.
    """

    def __init__(self, samples: MatrixField, generator: _catalog.CatalogEntry | None = None,
                 smoothness: str | None = None, psd_tol=None):
        vals = np.asarray(samples.values)
        sym = herm.hermitian_part(vals)
        scale = np.maximum(np.linalg.norm(vals, axis=(-2, -1)), 1.0)
        defect = np.linalg.norm(vals - sym, axis=(-2, -1)) / scale
        self.hermitian_defect = float(defect[samples.mask].max()) if samples.mask.any() else 0.0
        if self.hermitian_defect > 1e-10:
            raise ValueError(f"samples are not hermitian (defect {self.hermitian_defect:.3g})")
        mask = samples.mask
        lam = np.linalg.eigvalsh(np.where(mask[..., None, None], sym, np.eye(sym.shape[-1])))[..., 0]
        tol = herm.default_psd_tol(sym) if psd_tol is None else psd_tol
        bad = mask & (lam < -tol)
        if bad.any():
            idx = tuple(int(i) for i in np.argwhere(bad)[0])
            raise ValueError(f"metric is not positive semidefinite at node {idx} (eig {lam[idx]:.3g})")
        self.samples = MatrixField(samples.spec, sym, mask)
        self.generator = generator
        if smoothness is None:
            smoothness = generator.smoothness if generator is not None else "measurable"
        if smoothness not in SMOOTHNESS:
            raise ValueError(f"smoothness must be one of {SMOOTHNESS}")
        self.smoothness = smoothness

    @classmethod
    def from_catalog(cls, entry, spec: GridSpec, **params) -> "MetricField":
        if isinstance(entry, str):
            entry = _catalog.get(entry, **params)
        if entry.dim != spec.dim:
            raise GridError(f"metric {entry.name} lives in dimension {entry.dim}, grid has {spec.dim}")
        vals = entry(spec.coordinates())
        return cls(MatrixField(spec, vals), entry)

    def resample(self, spec: GridSpec) -> "MetricField":
        if self.generator is None:
            raise ValueError("metric has no generator to re-sample from")
        return MetricField.from_catalog(self.generator, spec)

    @property
    def spec(self) -> GridSpec:
        return self.samples.spec

    @property
    def values(self) -> np.ndarray:
        return self.samples.values

    @property
    def mask(self) -> np.ndarray:
        return self.samples.mask

    @property
    def rank(self) -> int:
        return self.samples.rank

    @property
    def name(self) -> str:
        return self.generator.name if self.generator is not None else "sampled"


# ------------------------------------------------------------------ sections


def _canonical(terms: dict, dim: int) -> tuple:
    out = []
    for exp, c in terms.items():
        exp = tuple(int(e) for e in exp)
        if len(exp) != dim or any(e < 0 for e in exp):
            raise ValueError(f"bad exponent {exp} for dimension {dim}")
        c = complex(c)
        if c != 0:
            out.append((exp, c))
    out.sort(key=lambda t: (sum(t[0]), t[0]))
    return tuple(out)


class SectionField:
    """Holomorphic section ``u = (u_1, ..., u_r)`` with polynomial components.

    Each component is given as ``{exponent tuple: coefficient}`` in the
    variables ``z_1..z_n``; components are stored sorted by total degree then
    exponent, with zero coefficients dropped.
    """

    def __init__(self, components: Sequence[dict], dim: int = 1):
        self.dim = int(dim)
        self.components = tuple(_canonical(dict(c), self.dim) for c in components)
        self._cache: dict = {}

    @property
    def rank(self) -> int:
        return len(self.components)

    @property
    def degree(self) -> int:
        return max((sum(e) for comp in self.components for e, _ in comp), default=0)

    def __eq__(self, other):
        return isinstance(other, SectionField) and (self.dim, self.components) == (other.dim, other.components)

    def __hash__(self):
        return hash((self.dim, self.components))

    def __repr__(self):
        return f"SectionField({[dict(c) for c in self.components]!r}, dim={self.dim})"

    @classmethod
    def constant(cls, vector, dim: int = 1):
        zero = (0,) * dim
        return cls([{zero: v} for v in vector], dim)

    @classmethod
    def monomial(cls, exponent, slot: int, rank: int, coeff=1.0):
        exponent = tuple(exponent)
        comps = [dict() for _ in range(rank)]
        comps[slot][exponent] = coeff
        return cls(comps, len(exponent))

    @classmethod
    def random(cls, rng: np.random.Generator, rank: int, dim: int = 1, degree: int = 2):
        exps = [e for e in itertools.product(range(degree + 1), repeat=dim) if sum(e) <= degree]
        comps = []
        for _ in range(rank):
            c = rng.standard_normal(len(exps)) + 1j * rng.standard_normal(len(exps))
            comps.append(dict(zip(exps, c)))
        return cls(comps, dim)

    def __add__(self, other: "SectionField"):
        comps = []
        for a, b in zip(self.components, other.components):
            d = dict(a)
            for e, c in b:
                d[e] = d.get(e, 0) + c
            comps.append(d)
        return SectionField(comps, self.dim)

    def scale(self, c) -> "SectionField":
        return SectionField([{e: c * v for e, v in comp} for comp in self.components], self.dim)

    def derivative(self, j: int) -> "SectionField":
        """Exact ``du/dz_j``."""
        comps = []
        for comp in self.components:
            d = {}
            for e, c in comp:
                if e[j]:
                    e2 = list(e)
                    e2[j] -= 1
                    d[tuple(e2)] = d.get(tuple(e2), 0) + c * e[j]
            comps.append(d)
        return SectionField(comps, self.dim)

    def values(self, spec: GridSpec) -> np.ndarray:
        """Samples of shape ``spec.shape + (rank,)``, cached per grid."""
        if spec.dim != self.dim:
            raise GridError("section and grid dimensions differ")
        if spec not in self._cache:
            zs = [spec.coordinate(j) for j in range(self.dim)]
            out = np.zeros(spec.shape + (self.rank,), dtype=complex)
            for a, comp in enumerate(self.components):
                for e, c in comp:
                    t = c
                    for j in range(self.dim):
                        if e[j]:
                            t = t * zs[j] ** e[j]
                    out[..., a] += t
            out.flags.writeable = False
            self._cache[spec] = out
        return self._cache[spec]


class SectionTuple:
    """``n`` sections, one per coordinate direction (input of the Nakano form)."""

    def __init__(self, sections: Sequence[SectionField]):
        sections = tuple(sections)
        if not sections:
            raise ValueError("empty section tuple")
        if len({(s.rank, s.dim) for s in sections}) != 1:
            raise ValueError("sections in a tuple must share rank and dimension")
        if len(sections) != sections[0].dim:
            raise ValueError("a section tuple has one section per coordinate")
        self.sections = sections

    def __iter__(self):
        return iter(self.sections)

    def __len__(self):
        return len(self.sections)

    def __getitem__(self, j):
        return self.sections[j]


# ------------------------------------------------------------------ observables


def _section_values(u, spec):
    if isinstance(u, SectionField):
        return u.values(spec)
    return np.asarray(u)


def _check(h: MetricField, vals):
    if vals.shape != h.spec.shape + (h.rank,):
        raise GridError(f"section shape {vals.shape} does not match metric rank {h.rank}")


def pairing(h: MetricField, u, v) -> ScalarField:
    """``(u, v)_h = v^* h u`` pointwise."""
    uv, vv = _section_values(u, h.spec), _section_values(v, h.spec)
    _check(h, uv)
    _check(h, vv)
    hu = np.einsum("...ab,...b->...a", h.values, uv)
    return ScalarField(h.spec, np.einsum("...a,...a->...", np.conj(vv), hu), h.mask)


def eval_norm_sq(h: MetricField, u) -> ScalarField:
    """``|u|^2_h = u^* h u`` pointwise (real)."""
    f = pairing(h, u, u)
    return ScalarField(h.spec, f.values.real, f.mask)


def det_field(h: MetricField) -> ScalarField:
    return ScalarField(h.spec, herm.det(h.values).real, h.mask)


def log_det_field(h: MetricField) -> ScalarField:
    """``log det h`` as a partial field, valid where ``det h > 0``."""
    d = det_field(h).values.real
    valid = h.mask & (d > 0)
    out = np.zeros_like(d)
    out[valid] = np.log(d[valid])
    return ScalarField(h.spec, out, valid)


def sublevel_mask(h: MetricField, eps: float) -> np.ndarray:
    """Nodes where ``det h > eps``."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    return h.mask & (det_field(h).values.real > eps)


def exhaustion_masks(h: MetricField, levels: Sequence[int] = (1, 2, 4, 8, 16)) -> list[np.ndarray]:
    """Increasing masks ``{det h > 1/j}`` for the given ``j``."""
    return [sublevel_mask(h, 1.0 / j) for j in sorted(levels)]


def dual_metric_field(h: MetricField, floor: float, region=None) -> MetricField:
    """Pointwise dual metric, valid where ``det h >= floor``.

    Raises :class:`~singherm.hermitian.SingularMetricError` if ``region`` is
    given and the floor is violated inside it.
    """
    d = det_field(h).values.real
    ok = h.mask & (d >= floor)
    if region is not None:
        region = np.asarray(region, dtype=bool)
        if np.any(region & ~ok):
            raise herm.SingularMetricError(f"det h drops below {floor:.3g} inside the requested region")
        ok &= region
    r = h.rank
    safe = np.where(ok[..., None, None], h.values, np.eye(r))
    dual = herm.hermitian_part(np.swapaxes(herm.inverse(safe), -1, -2))
    return MetricField(MatrixField(h.spec, dual, ok), None, smoothness=h.smoothness)
