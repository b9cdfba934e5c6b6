import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from singherm.grid import (
    GridError, GridSpec, MatrixField, ScalarField, annular_bump, integrate, pair_with_test,
    radial_bump, volume_form_density, wirtinger_d, wirtinger_dbar,
)


def _field(spec, fn):
    return ScalarField(spec, fn(spec.coordinate(0)) * np.ones(spec.shape))


def _inner(f):
    return f.values[f.mask]


def test_vertex_grid_nodes_and_shape():
    spec = GridSpec(1, 0.0, 1.0, 8)
    x, y = spec.axis_nodes(0)
    assert spec.shape == (8, 8)
    assert np.allclose(x, np.linspace(-1, 0.75, 8))
    assert spec.coordinate(0)[4, 4] == 0
    assert spec.cell_volume == pytest.approx(0.25 ** 2)


def test_refined_grid_contains_coarse_nodes():
    spec = GridSpec(1, 0.1 + 0.2j, 0.5, 16)
    fine = spec.refine()
    assert np.array_equal(fine.coordinate(0)[::2, ::2], spec.coordinate(0))


def test_padded_grid_offsets_nodes():
    spec = GridSpec(2, 0.0, 0.5, 8)
    big = spec.padded(3)
    sl = (slice(3, -3),) * 4
    for j in range(2):
        assert np.allclose(np.broadcast_to(big.coordinate(j), big.shape)[sl],
                           np.broadcast_to(spec.coordinate(j), spec.shape))


@pytest.mark.parametrize("bad", [dict(points_per_axis=7), dict(radii=-1.0), dict(points_per_axis=4)])
def test_grid_validation(bad):
    kw = dict(dim=1, center=0.0, radii=1.0, points_per_axis=16)
    kw.update(bad)
    with pytest.raises(GridError):
        GridSpec(**kw)


def test_fields_are_immutable_and_zero_off_mask():
    spec = GridSpec(1, 0.0, 1.0, 8)
    mask = spec.ball_mask(0.5)
    f = ScalarField(spec, np.ones(spec.shape), mask)
    assert np.all(f.values[~mask] == 0)
    with pytest.raises(ValueError):
        f.values[0, 0] = 3
    assert f.partial


def test_nonfinite_on_mask_rejected():
    spec = GridSpec(1, 0.0, 1.0, 8)
    v = np.ones(spec.shape)
    v[4, 4] = np.nan
    with pytest.raises(GridError):
        ScalarField(spec, v)
    ScalarField(spec, v, np.isfinite(v))


@pytest.mark.parametrize("fn, d, dbar", [
    (lambda z: z, lambda z: 1 + 0 * z, lambda z: 0 * z),
    (lambda z: np.conj(z), lambda z: 0 * z, lambda z: 1 + 0 * z),
    (lambda z: np.abs(z) ** 2, lambda z: np.conj(z), lambda z: z),
    (lambda z: z ** 2, lambda z: 2 * z, lambda z: 0 * z),
])
def test_wirtinger_exact_on_quadratics(fn, d, dbar):
    spec = GridSpec(1, 0.3 - 0.1j, 0.7, 32)
    f = _field(spec, fn)
    z = np.broadcast_to(spec.coordinate(0), spec.shape)
    fd, fdb = wirtinger_d(f, 0), wirtinger_dbar(f, 0)
    assert np.allclose(_inner(fd), d(z)[fd.mask], atol=1e-13)
    assert np.allclose(_inner(fdb), dbar(z)[fdb.mask], atol=1e-13)


def test_wirtinger_second_order():
    errs = []
    for n in (32, 64, 128):
        spec = GridSpec(1, 0.0, 1.0, n)
        f = _field(spec, lambda z: np.exp(z) * np.conj(z))
        z = np.broadcast_to(spec.coordinate(0), spec.shape)
        fd = wirtinger_d(f, 0)
        errs.append(np.abs(_inner(fd) - (np.exp(z) * np.conj(z))[fd.mask]).max())
    orders = np.log2(np.array(errs[:-1]) / errs[1:])
    assert np.all((orders > 1.8) & (orders < 2.2))


def test_wirtinger_masks_erode():
    spec = GridSpec(2, 0.0, 1.0, 8)
    f = ScalarField(spec, np.ones(spec.shape))
    g = wirtinger_d(f, 1)
    assert g.mask.sum() == 8 * 8 * 6 * 6
    with pytest.raises(GridError):
        wirtinger_d(f, 2)


poly_coeffs = st.lists(st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False),
                       min_size=6, max_size=6)


def _poly(c, z):
    zb = np.conj(z)
    return c[0] + c[1] * z + c[2] * zb + c[3] * z * zb + c[4] * z ** 2 + c[5] * np.sin(zb)


@settings(max_examples=25, deadline=None)
@given(poly_coeffs)
def test_conj_symmetry_exact(c):
    spec = GridSpec(1, 0.0, 1.0, 16)
    f = _field(spec, lambda z: _poly(c, z))
    a = wirtinger_d(f, 0).conj()
    b = wirtinger_dbar(f.conj(), 0)
    assert np.array_equal(a.values, b.values)


@settings(max_examples=25, deadline=None)
@given(poly_coeffs, poly_coeffs, st.complex_numbers(max_magnitude=2, allow_nan=False, allow_infinity=False))
def test_linearity_and_leibniz(c1, c2, lam):
    spec = GridSpec(1, 0.0, 0.5, 64)
    f = _field(spec, lambda z: _poly(c1, z))
    g = _field(spec, lambda z: _poly(c2, z))
    lin = wirtinger_d(f * lam + g, 0)
    assert np.allclose(lin.values, (wirtinger_d(f, 0) * lam + wirtinger_d(g, 0)).values, atol=1e-9)
    prod = wirtinger_d(f * g, 0)
    rule = wirtinger_d(f, 0) * g + f * wirtinger_d(g, 0)
    scale = 1 + np.abs(_inner(f)).max() * np.abs(_inner(g)).max()
    assert np.abs(prod.values - rule.values)[prod.mask].max() <= 50 * spec.max_spacing ** 2 * scale


def test_integrate_constants_on_rectangles():
    spec = GridSpec(1, 0.0, 1.0, 16)
    region = np.zeros(spec.shape, bool)
    region[2:7, 3:12] = True
    one = ScalarField(spec, np.ones(spec.shape))
    assert integrate(one, region) == pytest.approx(5 * 9 * spec.cell_volume, rel=1e-15)
    assert integrate(one).real == pytest.approx(4.0, rel=1e-15)


def test_disc_area():
    spec = GridSpec(1, 0.0, 1.0, 256)
    one = ScalarField(spec, np.ones(spec.shape))
    assert integrate(one, spec.ball_mask(0, 0.8)).real == pytest.approx(np.pi * 0.64, rel=0.02)


def test_inverse_modulus_on_annulus():
    # polar integration: 2 pi (R - eps)
    spec = GridSpec(1, 0.0, 1.0, 256)
    z = spec.coordinate(0) * np.ones(spec.shape)
    mask = np.abs(z) > 0
    f = ScalarField(spec, np.where(mask, 1 / np.where(mask, np.abs(z), 1), 0), mask)
    val = integrate(f, spec.ball_mask(0.1, 0.9)).real
    assert val == pytest.approx(2 * np.pi * 0.8, rel=0.02)


def test_pairing_with_unit_mass_test_function():
    spec = GridSpec(1, 0.0, 1.0, 64)
    phi = radial_bump(spec, 0.5)
    phi = phi / (phi.sum() * spec.cell_volume)
    assert pair_with_test(ScalarField(spec, np.ones(spec.shape)), phi) == pytest.approx(1.0)
    assert pair_with_test(ScalarField(spec, np.zeros(spec.shape)), phi) == 0


def test_pairing_rejects_halo_support():
    spec = GridSpec(1, 0.0, 1.0, 16)
    with pytest.raises(GridError):
        pair_with_test(ScalarField(spec, np.ones(spec.shape)), np.ones(spec.shape))


def test_lelong_mass_of_log_modulus():
    # Green's identity: the discrete Laplacian of log|z|^2 carries mass 2 pi at 0
    spec = GridSpec(1, 0.0, 1.0, 512)
    z = spec.coordinate(0) * np.ones(spec.shape)
    phi = radial_bump(spec, 0.5)
    # log|z|^2 regularized at the single node z = 0 by its circle mean over the cell
    r2 = np.abs(z) ** 2
    vals = np.log(np.where(r2 > 0, r2, 1.0))
    vals[r2 == 0] = np.log(spec.max_spacing ** 2) - 1.0
    f = ScalarField(spec, vals)
    lap = wirtinger_dbar(wirtinger_d(f, 0), 0)
    pairing = volume_form_density(spec) * pair_with_test(lap, phi)
    assert pairing.real == pytest.approx(2 * np.pi, rel=0.05)


def test_bumps():
    spec = GridSpec(1, 0.0, 1.0, 64)
    b = radial_bump(spec, 0.5, peak=2.0)
    assert b[32, 32] == pytest.approx(2.0)
    a = annular_bump(spec, 0.3, 0.6)
    r = np.abs(spec.coordinate(0) * np.ones(spec.shape))
    assert np.all(a[(r <= 0.3) | (r >= 0.6)] == 0) and a.max() > 0


def test_matrix_field_entry():
    spec = GridSpec(1, 0.0, 1.0, 8)
    v = np.zeros(spec.shape + (2, 2))
    v[..., 0, 1] = 3
    m = MatrixField(spec, v)
    assert m.rank == 2 and np.all(m.entry(0, 1).values == 3)
