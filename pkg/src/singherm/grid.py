"""Sampled fields on complex polydisc grids.

A polydisc in C^n is sampled on a tensor grid with ``points_per_axis[j]``
nodes along both the real and imaginary axis of ``z_j``.  Grid arrays carry
the ``2n`` grid axes first, ordered ``(x_1, y_1, x_2, y_2, ...)``, followed by
any per-node tail (``()`` for scalars, ``(r, r)`` for matrices).

Nodes sit at ``center - radius + k * spacing`` for ``k = 0 .. N-1`` with
``spacing = 2 * radius / N``, so the center of the polydisc is always a node
and a grid with ``2N`` points contains every node of the grid with ``N``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class GridError(ValueError):
    """Raised for malformed grids, fields or regions."""


def _as_tuple(value, dim, cast):
    if np.ndim(value) == 0:
        return tuple(cast(value) for _ in range(dim))
    value = tuple(cast(v) for v in value)
    if len(value) != dim:
        raise GridError(f"expected {dim} entries, got {len(value)}")
    return value


@dataclass(frozen=True)
class GridSpec:
    """Tensor grid on the polydisc ``prod_j {|Re(z_j - c_j)|, |Im(z_j - c_j)| <= r_j}``.

    Scalars passed for ``center``, ``radii`` or ``points_per_axis`` are
    broadcast to all ``dim`` coordinates.
    """

    dim: int
    center: tuple = 0.0
    radii: tuple = 1.0
    points_per_axis: tuple = 64
    halo: int = 2
    spacing: tuple = field(init=False)

    def __post_init__(self):
        if int(self.dim) < 1:
            raise GridError("dim must be >= 1")
        dim = int(self.dim)
        object.__setattr__(self, "dim", dim)
        object.__setattr__(self, "center", _as_tuple(self.center, dim, complex))
        object.__setattr__(self, "radii", _as_tuple(self.radii, dim, float))
        object.__setattr__(self, "points_per_axis", _as_tuple(self.points_per_axis, dim, int))
        if any(not r > 0 for r in self.radii):
            raise GridError("radii must be positive")
        for n in self.points_per_axis:
            if n < 8 or n % 2:
                raise GridError("points_per_axis must be even and >= 8")
        if int(self.halo) < 2:
            raise GridError("halo must be >= 2")
        if any(n <= 2 * self.halo for n in self.points_per_axis):
            raise GridError("interior region is empty")
        object.__setattr__(
            self, "spacing", tuple(2.0 * r / n for r, n in zip(self.radii, self.points_per_axis))
        )

    @property
    def shape(self) -> tuple:
        return tuple(n for n in self.points_per_axis for _ in range(2))

    @property
    def cell_volume(self) -> float:
        """Lebesgue measure of one grid cell in R^{2n}."""
        return float(np.prod([d * d for d in self.spacing]))

    @property
    def max_spacing(self) -> float:
        return max(self.spacing)

    def axis_nodes(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        """Real and imaginary node positions along coordinate ``z_j``."""
        c, r, n, d = self.center[j], self.radii[j], self.points_per_axis[j], self.spacing[j]
        k = np.arange(n)
        return c.real - r + k * d, c.imag - r + k * d

    def coordinate(self, j: int) -> np.ndarray:
        """``z_j`` at every node, broadcastable against :attr:`shape`."""
        x, y = self.axis_nodes(j)
        shape_x = [1] * (2 * self.dim)
        shape_y = [1] * (2 * self.dim)
        shape_x[2 * j] = x.size
        shape_y[2 * j + 1] = y.size
        return x.reshape(shape_x) + 1j * y.reshape(shape_y)

    def coordinates(self) -> list[np.ndarray]:
        """Full-shape arrays ``z_1, ..., z_n``."""
        return [np.broadcast_to(self.coordinate(j), self.shape) for j in range(self.dim)]

    def interior_mask(self) -> np.ndarray:
        """Nodes at least ``halo`` cells away from every face."""
        mask = np.zeros(self.shape, dtype=bool)
        inner = tuple(slice(self.halo, n - self.halo) for n in self.shape)
        mask[inner] = True
        return mask

    def polydisc_mask(self, radius, center=None) -> np.ndarray:
        """Nodes with ``|z_j - c_j| < radius_j`` for every j."""
        radius = _as_tuple(radius, self.dim, float)
        center = self.center if center is None else _as_tuple(center, self.dim, complex)
        mask = np.ones(self.shape, dtype=bool)
        for j in range(self.dim):
            mask &= np.abs(self.coordinate(j) - center[j]) < radius[j]
        return mask

    def ball_mask(self, r_min=0.0, r_max=np.inf, center=None) -> np.ndarray:
        """Nodes with ``r_min < |z - c| < r_max`` (Euclidean norm in C^n)."""
        center = self.center if center is None else _as_tuple(center, self.dim, complex)
        r2 = sum(np.abs(self.coordinate(j) - center[j]) ** 2 for j in range(self.dim))
        r2 = np.broadcast_to(r2, self.shape)
        return (r2 > r_min * r_min) & (r2 < r_max * r_max)

    def refine(self, factor: int = 2) -> "GridSpec":
        return GridSpec(self.dim, self.center, self.radii,
                        tuple(n * factor for n in self.points_per_axis), self.halo)

    def padded(self, cells) -> "GridSpec":
        """Same spacing, ``cells`` extra nodes on every side of every axis.

        ``cells`` may be one integer or one per coordinate.  The nodes of
        ``self`` are the nodes of the padded grid with index offset ``cells``
        along each axis.
        """
        cells = _as_tuple(cells, self.dim, int)
        radii = tuple(r + c * d for r, c, d in zip(self.radii, cells, self.spacing))
        points = tuple(n + 2 * c for n, c in zip(self.points_per_axis, cells))
        return GridSpec(self.dim, self.center, radii, points, self.halo)

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "center": [[c.real, c.imag] for c in self.center],
            "radii": list(self.radii),
            "points_per_axis": list(self.points_per_axis),
            "halo": self.halo,
        }


class Field:
    """Immutable sampled field; base for :class:`ScalarField` and :class:`MatrixField`.

    ``mask`` marks valid nodes.  Invalid nodes hold 0 and are never read by
    the operators below; a field with any invalid node is ``partial``.
    """

    tail_ndim = 0

    def __init__(self, spec: GridSpec, values, mask=None, copy: bool = True):
        values = np.asarray(values, dtype=complex)
        if copy or not values.flags.writeable or not values.flags.owndata:
            values = values.copy()
        if values.shape[: 2 * spec.dim] != spec.shape or values.ndim != 2 * spec.dim + self.tail_ndim:
            raise GridError(f"value array of shape {values.shape} does not match grid {spec.shape}")
        if mask is None:
            mask = np.ones(spec.shape, dtype=bool)
        else:
            mask = np.array(np.broadcast_to(mask, spec.shape), dtype=bool)
        tail_axes = tuple(range(2 * spec.dim, values.ndim))
        finite = np.isfinite(values).all(axis=tail_axes) if tail_axes else np.isfinite(values)
        if np.any(mask & ~finite):
            raise GridError("non-finite values at nodes flagged valid")
        values[~mask] = 0
        values.flags.writeable = False
        mask.flags.writeable = False
        self.spec = spec
        self.values = values
        self.mask = mask

    @property
    def partial(self) -> bool:
        return not bool(self.mask.all())

    def _new(self, values, mask, copy=True):
        return type(self)(self.spec, values, mask, copy=copy)

    def with_mask(self, mask):
        return self._new(self.values, self.mask & mask)

    def conj(self):
        return self._new(np.conj(self.values), self.mask)

    def __add__(self, other):
        if isinstance(other, Field):
            return self._new(self.values + other.values, self.mask & other.mask)
        return self._new(self.values + other, self.mask)

    def __sub__(self, other):
        if isinstance(other, Field):
            return self._new(self.values - other.values, self.mask & other.mask)
        return self._new(self.values - other, self.mask)

    def __mul__(self, other):
        if isinstance(other, Field):
            return self._new(self.values * other.values, self.mask & other.mask)
        return self._new(self.values * other, self.mask)

    __rmul__ = __mul__


class ScalarField(Field):
    tail_ndim = 0

    @property
    def real(self) -> np.ndarray:
        return self.values.real


class MatrixField(Field):
    tail_ndim = 2

    def __init__(self, spec, values, mask=None, copy=True):
        super().__init__(spec, values, mask, copy)
        if self.values.shape[-1] != self.values.shape[-2]:
            raise GridError("matrix field entries must be square")

    @property
    def rank(self) -> int:
        return self.values.shape[-1]

    def entry(self, a: int, b: int) -> ScalarField:
        return ScalarField(self.spec, self.values[..., a, b], self.mask)


def _erode(mask: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    """Keep nodes whose +-1 neighbours along every axis in ``axes`` are valid."""
    out = mask.copy()
    for ax in axes:
        n = mask.shape[ax]
        lo = [slice(None)] * mask.ndim
        hi = [slice(None)] * mask.ndim
        mid = [slice(None)] * mask.ndim
        lo[ax], mid[ax], hi[ax] = slice(0, n - 2), slice(1, n - 1), slice(2, n)
        inner = np.zeros_like(mask)
        inner[tuple(mid)] = mask[tuple(lo)] & mask[tuple(hi)]
        out &= inner
    return out


def _central(values: np.ndarray, axis: int, h: float) -> np.ndarray:
    n = values.shape[axis]
    out = np.zeros_like(values)
    lo = [slice(None)] * values.ndim
    hi = [slice(None)] * values.ndim
    mid = [slice(None)] * values.ndim
    lo[axis], mid[axis], hi[axis] = slice(0, n - 2), slice(1, n - 1), slice(2, n)
    out[tuple(mid)] = (values[tuple(hi)] - values[tuple(lo)]) / (2.0 * h)
    return out


def _wirtinger(f: Field, axis: int, sign: float) -> Field:
    spec = f.spec
    if not 0 <= axis < spec.dim:
        raise GridError(f"axis {axis} out of range for dim {spec.dim}")
    ax, ay = 2 * axis, 2 * axis + 1
    mask = _erode(f.mask, (ax, ay))
    if not mask.any():
        raise GridError("field too small for the difference stencil")
    h = spec.spacing[axis]
    out = _central(f.values, ax, h)
    dy = _central(f.values, ay, h)
    dy *= sign * 0.5j
    out *= 0.5
    out += dy
    del dy
    return f._new(out, mask, copy=False)


def wirtinger_d(f: Field, axis: int) -> Field:
    """``df/dz_j = (d/dx_j - i d/dy_j) / 2`` by second-order central differences."""
    return _wirtinger(f, axis, -1.0)


def wirtinger_dbar(f: Field, axis: int) -> Field:
    """``df/dzbar_k = (d/dx_k + i d/dy_k) / 2`` by second-order central differences."""
    return _wirtinger(f, axis, +1.0)


def integrate(f: ScalarField, region=None) -> complex:
    """Midpoint quadrature of ``f`` over the node set ``region`` (Lebesgue measure).

    Every node in the region contributes one full cell.  Summation is numpy's
    pairwise reduction over the flattened selection, so the result does not
    depend on anything but the inputs.
    """
    region = f.mask if region is None else np.asarray(region, dtype=bool)
    if not region.any():
        raise GridError("empty integration region")
    if np.any(region & ~f.mask):
        raise GridError("integration region contains invalid nodes")
    vals = f.values[region]
    return complex(vals.real.sum(), vals.imag.sum()) * f.spec.cell_volume


def pair_with_test(f: ScalarField, phi) -> complex:
    """``<f, phi> = integral of f * phi`` over the grid interior.

    ``phi`` is an array of test function samples (or a ScalarField) that must
    vanish on the halo; it may be supported anywhere else but ``f`` has to be
    valid wherever ``phi`` is nonzero.
    """
    spec = f.spec
    phi = phi.values if isinstance(phi, Field) else np.asarray(phi)
    phi = np.broadcast_to(phi, spec.shape)
    interior = spec.interior_mask()
    support = phi != 0
    if np.any(support & ~interior):
        raise GridError("test function support touches the halo")
    if np.any(support & ~f.mask):
        raise GridError("field is invalid on the test function support")
    region = interior & f.mask
    return integrate(ScalarField(spec, np.where(region, f.values * phi, 0), region), region)


def volume_form_density(spec: GridSpec) -> float:
    """Density of ``dV = i^n dz_1 ^ dzbar_1 ^ ... ^ dz_n ^ dzbar_n`` against Lebesgue measure."""
    return float(2 ** spec.dim)


def bump_profile(t):
    """``exp(-1/(1 - t^2))`` for ``|t| < 1`` and 0 otherwise."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1
    out[inside] = np.exp(-1.0 / (1.0 - t[inside] ** 2))
    return out


def radial_bump(spec: GridSpec, radius: float, center=None, peak: float = 1.0) -> np.ndarray:
    """Radial test function ``peak * e * bump(|z - c| / radius)`` so its value at ``c`` is ``peak``."""
    center = spec.center if center is None else _as_tuple(center, spec.dim, complex)
    r2 = sum(np.abs(spec.coordinate(j) - center[j]) ** 2 for j in range(spec.dim))
    r = np.sqrt(np.broadcast_to(r2, spec.shape))
    return peak * np.e * bump_profile(r / radius)


def annular_bump(spec: GridSpec, r_in: float, r_out: float, center=None) -> np.ndarray:
    """Smooth nonnegative test function supported in ``r_in < |z - c| < r_out``."""
    center = spec.center if center is None else _as_tuple(center, spec.dim, complex)
    r2 = sum(np.abs(spec.coordinate(j) - center[j]) ** 2 for j in range(spec.dim))
    r = np.sqrt(np.broadcast_to(r2, spec.shape))
    mid, half = 0.5 * (r_in + r_out), 0.5 * (r_out - r_in)
    return np.e * bump_profile((r - mid) / half)
