import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from singherm import catalog, chern, psh
from singherm import regularize as reg
from singherm.grid import GridError, GridSpec, annular_bump, bump_profile, radial_bump
from singherm.hermitian import SingularMetricError, is_psd
from singherm.metric import MetricField, SectionField, det_field, eval_norm_sq

SPEC = GridSpec(1, 0.0, 0.5, 128)
Z = np.broadcast_to(SPEC.coordinate(0), SPEC.shape)


def _m(name, spec=SPEC, **kw):
    return MetricField.from_catalog(catalog.get(name, **kw), spec)


@pytest.mark.parametrize("nu", [2.0, 4.0, 8.0, 16.0])
def test_kernel_mass_and_symmetry(nu):
    w = reg.Mollifier.for_grid(SPEC, nu).weights
    assert abs(w.sum() - 1) <= 1e-12
    assert np.array_equal(w, w[::-1, :]) and np.array_equal(w, w[:, ::-1]) and np.array_equal(w, w.T)


def test_kernel_too_narrow():
    with pytest.raises(GridError):
        reg.Mollifier.for_grid(SPEC, 1000.0).weights


def test_constant_metric_unchanged():
    h = _m("identity", r=2)
    hn = reg.mollify(h, 4.0)
    assert np.abs(hn.values - h.values).max() <= 1e-15
    assert hn.smoothness == "smooth" and hn.nu == 4.0 and hn.source is h


@pytest.mark.parametrize("nu", [4.0, 8.0])
def test_abs2_value_at_origin(nu):
    # continuous oracle: int |q|^2 chi_nu = c / nu^2 with c from one-dimensional polar quadrature
    num = quad(lambda r: r ** 3 * bump_profile(r), 0, 1)[0]
    den = quad(lambda r: r * bump_profile(r), 0, 1)[0]
    spec = GridSpec(1, 0.0, 0.5, 256)
    hn = reg.mollify(_m("lelong", spec), nu)
    assert hn.values[128, 128, 0, 0].real == pytest.approx(num / den / nu ** 2, rel=1e-3)


def test_counterexample_becomes_nondegenerate():
    h = _m("paper-counterexample")
    hn = reg.mollify(h, 4.0)
    assert np.array_equal(hn.values, np.conj(np.swapaxes(hn.values, -1, -2)))
    assert is_psd(hn.values).all()
    assert det_field(h).values[64, 64] == 0 and det_field(hn).values[64, 64].real > 0


@pytest.mark.parametrize("name", catalog.names())
def test_psd_preserved(name):
    hn = reg.mollify(_m(name), 8.0)
    assert is_psd(hn.values).all()


def test_schedule_validation():
    with pytest.raises(ValueError):
        reg.monotonicity_check(_m("identity"), [4.0, 2.0])
    assert reg.geometric_schedule(2, 4) == [2.0, 4.0, 8.0, 16.0]


def test_monotonicity_examples():
    nus = [2.0, 4.0, 8.0, 16.0]
    assert reg.monotonicity_check(_m("lelong"), nus).passed
    flat = reg.monotonicity_check(_m("identity", r=2), nus)
    assert flat.passed and flat.fraction_ok == 1.0
    # not Griffiths negative, so the check must be able to fail
    assert sum(reg.monotonicity_check(_m("gauss-"), nus).violations) > 0


def test_uniform_convergence_examples():
    nus = [2.0, 4.0, 8.0, 16.0]
    flat = reg.uniform_convergence_check(_m("identity"), nus, 1e-12)
    assert max(flat.sup_errors) <= 1e-14 and flat.passed
    lel = reg.uniform_convergence_check(_m("lelong"), nus, 1e-2)
    ratios = np.array(lel.sup_errors[:-1]) / lel.sup_errors[1:]
    assert lel.decreasing and np.allclose(ratios, 4.0, rtol=0.02)
    assert reg.uniform_convergence_check(_m("paper-counterexample"), nus, 1e-2).decreasing


def test_gauss_weak_convergence_rate():
    # exact curvature of e^{|z|^2} I contracts to -I, so the limit pairing is -dV * int phi
    spec = GridSpec(1, 0.0, 1.0, 128)
    h = _m("gauss+", spec)
    phi = radial_bump(spec, 0.5)
    oracle = -2 * phi.sum() * spec.cell_volume
    tab = reg.weak_convergence_probe(h, [2.0, 4.0, 8.0], 1.0, [phi], floor=1e-6)
    errs = [abs(p[0, 0, 0] - oracle) for p in tab.pairings]
    assert errs[0] / errs[1] > 3 and errs[1] / errs[2] > 3
    assert tab.limit_source == "direct" and tab.in_hypothesis


def test_lelong_harmonic_away_from_origin():
    spec = GridSpec(1, 0.0, 1.0, 128)
    h = _m("lelong", spec)
    phi = annular_bump(spec, 0.55, 0.9)
    tab = reg.weak_convergence_probe(h, [4.0, 8.0, 16.0], 1.0, [phi], floor=0.25)
    assert tab.limit_source == "symbolic"
    assert np.abs(tab.limit).max() < 1e-12
    assert tab.errors[-1] < tab.errors[0] and tab.errors[-1] < 1e-2


def test_probe_enforces_hypothesis():
    spec = GridSpec(1, 0.0, 1.0, 64)
    h = _m("lelong", spec)
    phi = radial_bump(spec, 0.5)
    with pytest.raises(SingularMetricError):
        reg.weak_convergence_probe(h, [4.0], 1.0, [phi], floor=1e-3)
    tab = reg.weak_convergence_probe(h, [4.0], 1.0, [phi], floor=1e-3, enforce_hypothesis=False)
    assert not tab.in_hypothesis and tab.limit is None


def test_lp_profile_of_flat_connection():
    spec = GridSpec(1, 0.0, 1.0, 64)
    conn = chern.connection(_m("identity", spec, r=2))
    rows = reg.lp_profile(conn, 1.0, [0.25, 0.5, 0.75])
    assert all(r.value == 0 and r.cumulative == 0 for r in rows)
    assert rows[0].r_out == 0.75


@pytest.mark.parametrize("eps_k", [3, 5])
def test_counterexample_lp_growth(eps_k):
    rows = reg.dyadic_lp_profile("paper-counterexample", 1.0, eps_k)
    eps = 2.0 ** (-eps_k - 1)
    last21 = [r for r in rows if r.entry == (1, 0)][-1].cumulative
    last11 = [r for r in rows if r.entry == (0, 0)][-1].cumulative
    assert last21 == pytest.approx(2 * np.pi * np.log(1 / (2 * eps)), rel=0.03)
    assert last11 == pytest.approx(2 * np.pi * (0.5 - eps), rel=0.03)


def test_lp_profile_only_for_curves():
    spec = GridSpec(2, 0.0, 0.5, 12)
    conn = chern.connection(_m("identity", spec, n=2))
    with pytest.raises(GridError):
        reg.lp_profile(conn, 1.0, [0.1, 0.2])


def test_l2_examples():
    spec = GridSpec(1, 0.0, 1.0, 256)
    region = spec.ball_mask(0, 0.5)
    assert reg.l2_norm_dh(_m("identity", spec), region) == 0
    # polar integrals: int_{|z|<R} |z|^2 = pi R^4 / 2 and int (2|z|^2 + 1) = pi R^2 + pi R^4
    assert reg.l2_norm_dh(_m("lelong", spec), region) == pytest.approx(np.pi / 32, rel=0.02)
    ce = _m("paper-counterexample", spec)
    exact = np.pi / 4 + np.pi / 16
    assert reg.l2_norm_dh(ce, region) == pytest.approx(exact, rel=0.02)
    rep = reg.l2_bound_check(ce, [4.0, 8.0, 16.0, 32.0], region, phis=[radial_bump(spec, 0.4)])
    assert rep.bounded
    assert rep.l2[-1] == pytest.approx(exact, rel=0.05)
    # dh_nu = dh exactly for a quadratic h, so the weak-L2 pairings do not move
    assert max(rep.increments) < 1e-12


@pytest.mark.parametrize("name, kw", [("paper-counterexample", {}), ("fubini+", {"r": 2}),
                                      ("cont-nakano", {"r": 2}), ("diag-psh", {})])
def test_scalar_commutation_bit_identical(name, kw):
    e = catalog.get(name, **kw)
    h = MetricField.from_catalog(e, SPEC)
    hn = reg.mollify(h, 8.0)
    for a in range(e.rank):
        u = SectionField.constant(np.eye(e.rank)[a])

        def gen(zs, a=a):
            return e(zs)[..., a, a].real

        direct = eval_norm_sq(hn, u).values
        scalar = reg.mollify_scalar(eval_norm_sq(h, u), gen, 8.0).values.real
        assert np.array_equal(direct, scalar)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_scalar_commutation_general_sections(seed):
    e = catalog.get("paper-counterexample")
    h = MetricField.from_catalog(e, SPEC)
    hn = reg.mollify(h, 8.0)
    u = SectionField.constant(np.random.default_rng(seed).standard_normal(2) * (1 + 1j))
    uv = u.values(SPEC)[0, 0]

    def gen(zs):
        return np.einsum("a,...ab,b->...", uv.conj(), e(zs), uv).real

    direct = eval_norm_sq(hn, u).values
    scalar = reg.mollify_scalar(eval_norm_sq(h, u), gen, 8.0).values.real
    assert np.abs(direct - scalar).max() <= 1e-12 * (1 + np.abs(direct).max())


@pytest.mark.parametrize("name", ["paper-counterexample", "lelong", "fubini+", "diag-psh", "cont-nakano"])
def test_det_decreases_along_schedule(name):
    dets = [det_field(reg.mollify(_m(name), nu)).values.real for nu in (2.0, 4.0, 8.0, 16.0)]
    for a, b in zip(dets, dets[1:]):
        assert np.all(b <= a * (1 + 1e-9) + 1e-15)


@pytest.mark.parametrize("name", ["paper-counterexample", "fubini+"])
def test_griffiths_negativity_preserved(name):
    h = _m(name)
    assert psh.griffiths_negative_test(h).verdict == psh.PASS
    for nu in (4.0, 8.0):
        assert psh.griffiths_negative_test(reg.mollify(h, nu)).verdict == psh.PASS


def test_strictness_preserved_cont_nakano():
    spec = GridSpec(1, 0.0, 0.5, 128)
    h = _m("cont-nakano", spec)
    d2 = spec.max_spacing ** 2
    for nu in (2.0, 4.0, 8.0, 16.0):
        hn = reg.mollify(h, nu)
        rep = chern.griffiths_test(hn, chern.curvature(hn), 0.0, xi_set=[1.0])
        assert rep.empirical_delta >= 1.0 - 10 * d2
