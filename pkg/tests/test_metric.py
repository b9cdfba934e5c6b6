import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from singherm import catalog
from singherm.grid import GridError, GridSpec, MatrixField
from singherm.hermitian import SingularMetricError
from singherm.metric import (
    MetricField, SectionField, SectionTuple, det_field, dual_metric_field, eval_norm_sq,
    exhaustion_masks, log_det_field, pairing, sublevel_mask,
)

SPEC = GridSpec(1, 0.0, 1.0, 32)
Z = np.broadcast_to(SPEC.coordinate(0), SPEC.shape)


def _counterexample(spec=SPEC):
    return MetricField.from_catalog("paper-counterexample", spec)


def test_catalog_names_and_aliases():
    names = catalog.names()
    for required in ("identity", "paper-counterexample", "lelong", "fubini+", "fubini-",
                     "gauss+", "gauss-", "diag-psh", "cont-nakano", "gauss-neg", "gauss-pos"):
        assert required in names
    assert catalog.get("gauss-neg").name == "gauss+"
    with pytest.raises(catalog.UnknownMetricError):
        catalog.get("nope")
    with pytest.raises(ValueError):
        catalog.get("paper-counterexample", r=3)
    with pytest.raises(ValueError):
        catalog.get("diag-psh", profiles="abs2,cube")


@pytest.mark.parametrize("name", ["identity", "paper-counterexample", "lelong", "fubini+", "fubini-"])
def test_catalog_numeric_matches_symbolic(name):
    from singherm.symbolic import sample
    e = catalog.get(name)
    h = MetricField.from_catalog(e, SPEC)
    s = sample(e.symbolic(), SPEC)
    assert np.abs(h.values - s.values)[s.mask].max() < 1e-14


def test_metric_rejects_non_psd_and_non_hermitian():
    v = np.broadcast_to(np.diag([1.0, -1.0]), SPEC.shape + (2, 2))
    with pytest.raises(ValueError):
        MetricField(MatrixField(SPEC, v))
    w = np.broadcast_to(np.array([[1.0, 1.0], [0.0, 1.0]]), SPEC.shape + (2, 2))
    with pytest.raises(ValueError):
        MetricField(MatrixField(SPEC, w))


def test_resample_uses_generator():
    h = MetricField.from_catalog("fubini+", SPEC)
    fine = h.resample(SPEC.refine())
    assert np.array_equal(fine.values[::2, ::2], h.values)
    with pytest.raises(GridError):
        MetricField.from_catalog(catalog.get("gauss+", n=2), SPEC)


def test_section_canonical_form_and_calculus():
    u = SectionField([{(2,): 3, (0,): 1, (1,): 0}], 1)
    assert u.components == ((((0,), 1 + 0j), ((2,), 3 + 0j)),)
    assert u.derivative(0) == SectionField([{(1,): 6}], 1)
    assert u.degree == 2
    assert (u + u) == u.scale(2)
    vals = u.values(SPEC)
    assert np.allclose(vals[..., 0], 1 + 3 * Z ** 2)
    assert not vals.flags.writeable
    with pytest.raises(ValueError):
        SectionTuple([SectionField.constant([1]), SectionField.constant([1])])


def test_norm_identity_on_counterexample():
    h = _counterexample()
    rng = np.random.default_rng(7)
    for _ in range(16):
        u = SectionField.random(rng, 2, 1, 2)
        uv = u.values(SPEC)
        u1, u2 = uv[..., 0], uv[..., 1]
        expected = np.abs(Z * u1) ** 2 + np.abs(u1 + Z * u2) ** 2
        got = eval_norm_sq(h, u).values.real
        assert np.abs(got - expected).max() <= 1e-12 * max(1.0, expected.max())


@pytest.mark.parametrize("name, u, expected", [
    ("identity", [1, 0], lambda z: np.ones_like(z)),
    ("gauss+", [1, 1], lambda z: 2 * np.exp(np.abs(z) ** 2)),
])
def test_norm_examples(name, u, expected):
    kw = {"r": 2}
    h = MetricField.from_catalog(catalog.get(name, **kw), SPEC)
    got = eval_norm_sq(h, SectionField.constant(u)).values.real
    assert np.allclose(got, expected(Z).real, rtol=1e-14)


def test_pairing_examples():
    h = MetricField.from_catalog(catalog.get("identity", r=2), SPEC)
    e1, e2 = SectionField.constant([1, 0]), SectionField.constant([0, 1])
    assert np.all(pairing(h, e1, e2).values == 0)
    hc = _counterexample()
    # (e1, e2)_h = e2^* h e1 = h_21 = zbar
    assert np.allclose(pairing(hc, e1, e2).values, np.conj(Z))
    u = SectionField.random(np.random.default_rng(0), 2)
    assert np.array_equal(pairing(hc, u, u).values.real, eval_norm_sq(hc, u).values)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.sampled_from(["paper-counterexample", "fubini+", "gauss+", "cont-nakano"]))
def test_polarization(seed, name):
    rng = np.random.default_rng(seed)
    e = catalog.get(name) if name == "paper-counterexample" else catalog.get(name, r=2)
    h = MetricField.from_catalog(e, SPEC)
    u, v = SectionField.random(rng, 2), SectionField.random(rng, 2)
    uv, vv = u.values(SPEC), v.values(SPEC)
    pol = sum((1j ** k) * eval_norm_sq(h, uv + (1j ** k) * vv).values for k in range(4)) / 4
    direct = pairing(h, u, v).values
    assert np.abs(pol - direct).max() <= 1e-10 * (1 + np.abs(direct).max())


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.sampled_from(catalog.names()))
def test_norm_nonnegative(seed, name):
    e = catalog.get(name)
    h = MetricField.from_catalog(e, SPEC)
    u = SectionField.random(np.random.default_rng(seed), e.rank, 1, 2)
    vals = eval_norm_sq(h, u).values
    assert vals.min() >= -1e-12 * (1 + np.abs(vals).max())


def test_determinants():
    assert np.allclose(det_field(_counterexample()).values, np.abs(Z) ** 4, atol=1e-15)
    ident = MetricField.from_catalog(catalog.get("identity", r=3), SPEC)
    assert np.all(det_field(ident).values == 1) and np.all(log_det_field(ident).values == 0)
    h = MetricField.from_catalog(catalog.get("diag-psh", profiles="abs2,relu"), SPEC)
    ld = log_det_field(h)
    assert np.allclose(ld.values, np.abs(Z) ** 2 + np.maximum(Z.real, 0))
    lc = log_det_field(_counterexample())
    assert not lc.mask[16, 16] and lc.mask.sum() == 32 * 32 - 1


def test_sublevel_masks():
    h = _counterexample()
    m = sublevel_mask(h, 1 / 16)
    assert np.array_equal(m, np.abs(Z) ** 4 > 1 / 16)
    assert np.array_equal(m, np.abs(Z) > 0.5)
    ident = MetricField.from_catalog("identity", SPEC)
    assert sublevel_mask(ident, 0.5).all() and not sublevel_mask(ident, 2).any()
    levels = exhaustion_masks(h)
    assert all(np.all(a <= b) for a, b in zip(levels, levels[1:]))


def test_dual_metric_field():
    h = MetricField.from_catalog(catalog.get("gauss+", r=2), SPEC)
    d = dual_metric_field(h, 1e-12)
    assert np.allclose(d.values[..., 0, 0], np.exp(-np.abs(Z) ** 2))
    with pytest.raises(SingularMetricError):
        dual_metric_field(_counterexample(), 1e-3, region=np.ones(SPEC.shape, bool))
    part = dual_metric_field(_counterexample(), 1e-3)
    assert not part.mask[16, 16]
