import numpy as np
import pytest
from hypothesis import given, strategies as st

from genconvex.families import (
    BasisFunction,
    affine_family,
    complex_points,
    cone_sample,
    custom_family,
    monomial_family,
)
from genconvex.grids import annulus_grid, circle_samples, rect_grid
from genconvex.hull import (
    classical_hull_oracle,
    compute_hull,
    membership_C,
    membership_cone_direct,
    membership_linear,
    membership_modulus,
    power_trick_refine,
)

TRIANGLE = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
SEGMENT = np.array([[t, 0.0] for t in np.linspace(0, 1, 11)])
CIRCLE_64 = circle_samples(0.75, 64)

point2 = st.tuples(st.floats(-1, 1, allow_nan=False), st.floats(-1, 1, allow_nan=False))


def _rez_cone():
    return cone_sample(custom_family([BasisFunction("re_monomial", alpha=(1,))], "algebra_real_parts", n_complex=1))


# ---------------------------------------------------------------- cone mode


def test_cone_sample_excludes_point_beyond_circle():
    S = circle_samples(0.75, 32)
    v = membership_cone_direct(_rez_cone(), S, complex_points([0.9]))
    assert not v.member
    assert v.certificate.description == "Re z"
    assert v.certificate.value == pytest.approx(0.9)
    assert v.certificate.bound == pytest.approx(0.75)


@pytest.mark.parametrize("w", [complex_points([0.0]), circle_samples(0.75, 32)[5:6]])
def test_cone_sample_members(w):
    assert membership_cone_direct(_rez_cone(), circle_samples(0.75, 32), w).member


def test_cone_mode_needs_cone_family():
    with pytest.raises(ValueError):
        membership_cone_direct(affine_family(2), TRIANGLE, [0.1, 0.1])
    with pytest.raises(ValueError):
        membership_cone_direct(_rez_cone(), CIRCLE_64, [0.0, 0.0], C=0.5)


# ---------------------------------------------------------------- linear mode


def test_triangle_interior_member_with_weights():
    v = membership_linear(affine_family(2), TRIANGLE, [0.25, 0.25])
    assert v.member
    lam = v.coefficients
    assert lam.min() >= -1e-9
    assert lam.sum() == pytest.approx(1.0, abs=1e-9)
    np.testing.assert_allclose(lam @ TRIANGLE, [0.25, 0.25], atol=1e-9)


def test_triangle_exterior_certificate():
    fam = affine_family(2)
    v = membership_linear(fam, TRIANGLE, [1.0, 1.0])
    assert not v.member
    c = v.certificate
    assert c.gap > 0
    assert c.recheck(fam, TRIANGLE, [1.0, 1.0]) >= c.gap / 2
    # the oracle separator x + y: value 2 at the query, 1 on the triangle
    assert 1.0 + 1.0 > TRIANGLE.sum(axis=1).max()


def test_single_point_hull():
    v = membership_linear(affine_family(2), [[0.3, 0.4]], [0.3, 0.4])
    assert v.member
    np.testing.assert_array_equal(v.coefficients, [1.0])


def test_linear_mode_rejects_cone_and_degenerate():
    with pytest.raises(ValueError):
        membership_linear(_rez_cone(), CIRCLE_64, [0.0, 0.0])
    with pytest.raises(ValueError):
        membership_linear(custom_family([], n_real=2), TRIANGLE, [0.1, 0.1])


# ---------------------------------------------------------------- C mode


@pytest.mark.parametrize("C", [1.0, 10.0, 1e4])
def test_segment_off_axis_never_member(C):
    fam = affine_family(2)
    v = membership_C(fam, SEGMENT, [0.5, 0.2], C)
    assert not v.member
    # |y| vanishes on the segment, so the separator leans on y
    coeffs = v.certificate.coeffs
    assert abs(coeffs[2]) == np.abs(coeffs).max()


def test_segment_C_threshold():
    # a(-1) <= C max(|a(0)|, |a(1)|) is tightest for a = 1 - 2(x+1)/3, which gives C = 3
    fam = affine_family(2)
    assert membership_C(fam, SEGMENT, [-1.0, 0.0], 3.0).member
    assert not membership_C(fam, SEGMENT, [-1.0, 0.0], 2.9).member


def test_C_one_matches_linear_on_symmetric_sets():
    rng = np.random.default_rng(4)
    fam = monomial_family(1, 3)
    half = circle_samples(0.6, 9)
    S = np.concatenate([half, -half])
    for w in rng.uniform(-0.8, 0.8, size=(25, 2)):
        assert membership_C(fam, S, w, 1.0).member == membership_linear(fam, S, w).member


# ---------------------------------------------------------------- modulus mode


@pytest.mark.parametrize("z, member", [(0.0, True), (0.9, False)])
def test_modulus_examples(z, member):
    v = membership_modulus(monomial_family(1, 4), CIRCLE_64, complex_points([z]))
    assert v.member is member
    if not member:
        # 0.9^4 - 0.75^4 is the largest excess among degrees 1..4
        assert v.certificate.alpha == (4,)
        assert v.certificate.value == pytest.approx(0.9 ** 4)
        assert v.certificate.bound == pytest.approx(0.75 ** 4)


def test_modulus_sample_point_is_member():
    assert membership_modulus(monomial_family(1, 4), CIRCLE_64, CIRCLE_64[7]).member


def test_modulus_needs_algebra():
    with pytest.raises(ValueError):
        membership_modulus(affine_family(2), TRIANGLE, [0.1, 0.1])


@given(st.lists(point2, min_size=1, max_size=6), point2, st.integers(1, 4))
def test_linear_member_implies_modulus_member(S, w, d):
    fam = monomial_family(1, d)
    if membership_linear(fam, np.array(S), w).member:
        assert membership_modulus(fam, np.array(S), w).member


def test_modulus_and_linear_agree_after_doubling_on_dense_circle():
    S = circle_samples(0.75, 128)
    for z in (0.0, 0.3 + 0.2j, 0.5j, 0.8, 0.7 - 0.5j):
        w = complex_points([z])
        mod = membership_modulus(monomial_family(1, 8), S, w).member
        lin = membership_linear(monomial_family(1, 4), S, w).member
        assert mod == lin


# ---------------------------------------------------------------- power trick


def test_refine_zero_and_sample_stay_members():
    fam_at = lambda d: monomial_family(1, d)
    for w in (complex_points([0.0]), CIRCLE_64[3]):
        rep = power_trick_refine(fam_at, CIRCLE_64, w, Cs=(1.0, 10.0), d_max=8)
        assert all(s.member for s in rep.steps)
        assert rep.flips == {1.0: None, 10.0: None}


def test_refine_argument_checks():
    with pytest.raises(ValueError):
        power_trick_refine(lambda d: monomial_family(1, d), CIRCLE_64, [0.0, 0.0], start=4, d_max=2)
    with pytest.raises(ValueError):
        power_trick_refine(lambda d: affine_family(2), CIRCLE_64, [0.0, 0.0], d_max=1)


# ---------------------------------------------------------------- grid hulls


def test_triangle_grid_matches_oracle():
    g = rect_grid([0, 0], [1, 1], 20)
    hull = compute_hull(affine_family(2), TRIANGLE, g)
    poly = classical_hull_oracle(TRIANGLE)
    expected = np.array([poly.contains(p) for p in g.points])
    np.testing.assert_array_equal(hull.members, expected)
    assert hull.escape  # the triangle touches the box boundary


def test_annulus_polynomial_hull_fills_the_hole():
    g = annulus_grid(0.5, 1.0, 0.25, resolution=40)
    hull = compute_hull(monomial_family(1, 8), CIRCLE_64, g)
    r = np.abs(g.complex_coords()[:, 0])
    cell = g.spacing
    assert hull.members[r <= 0.75 - cell].all()
    assert not hull.members[r > 0.75 + cell].any()
    assert hull.escape
    assert hull.members[~g.inside].any()


def test_annulus_laurent_hull_is_a_shell():
    g = annulus_grid(0.5, 1.0, 0.25, resolution=40)
    hull = compute_hull(monomial_family(1, 8, laurent=True), CIRCLE_64, g)
    r = np.abs(g.complex_coords()[:, 0])
    assert not hull.members[np.abs(r - 0.75) > g.spacing].any()
    assert not hull.escape


def test_pole_points_are_undefined():
    g = rect_grid([-1, -1], [1, 1], 10)
    fam = monomial_family(1, 2, laurent=True)
    hull = compute_hull(fam, circle_samples(0.5, 16), g.points)
    origin = g.nearest([0.0, 0.0])
    assert hull.verdicts[origin].mode == "undefined"
    assert not hull.members[origin]


def test_prefilter_certificates_are_sound():
    fam = monomial_family(1, 6)
    g = rect_grid([-1, -1], [1, 1], 16)
    hull = compute_hull(fam, CIRCLE_64, g, C=2.0, mode="C")
    for p, v in zip(hull.points, hull.verdicts):
        if not v.member:
            assert v.certificate.recheck(fam, CIRCLE_64, p) >= v.certificate.gap / 2 > 0


def test_modulus_and_cone_grid_modes():
    g = rect_grid([-1, -1], [1, 1], 16)
    r = np.hypot(*g.points.T)
    mod = compute_hull(monomial_family(1, 4), CIRCLE_64, g, mode="modulus")
    np.testing.assert_array_equal(mod.members, r <= 0.75 + 1e-9)
    cone = compute_hull(_rez_cone(), CIRCLE_64, g, mode="cone")
    x = g.points[:, 0]
    np.testing.assert_array_equal(cone.members, np.abs(x) <= 0.75 + 1e-9)


def test_unknown_mode():
    with pytest.raises(ValueError, match="mode"):
        compute_hull(affine_family(2), TRIANGLE, TRIANGLE, mode="spectral")


def test_thread_count_does_not_change_results(monkeypatch):
    fam = monomial_family(1, 5)
    g = rect_grid([-1, -1], [1, 1], 24)
    S = circle_samples(0.6, 20)
    runs = []
    for threads in ("1", "4"):
        monkeypatch.setenv("GENCONVEX_THREADS", threads)
        h = compute_hull(fam, S, g, C=3.0, mode="C")
        runs.append((h.members.tobytes(), [v.gap for v in h.verdicts]))
    assert runs[0] == runs[1]


def test_bad_thread_setting(monkeypatch):
    monkeypatch.setenv("GENCONVEX_THREADS", "0")
    with pytest.raises(ValueError, match="GENCONVEX_THREADS"):
        compute_hull(affine_family(2), TRIANGLE, rect_grid([0, 0], [1, 1], 20))


# ---------------------------------------------------------------- hull laws


@given(st.lists(point2, min_size=1, max_size=8), st.sampled_from(["linear", "C"]))
def test_extensive(S, mode):
    fam = affine_family(2)
    hull = compute_hull(fam, np.array(S), np.array(S), mode=mode)
    assert hull.members.all()


@given(st.lists(point2, min_size=1, max_size=6), st.lists(point2, min_size=0, max_size=4), point2)
def test_monotone(S, extra, w):
    fam = monomial_family(1, 2)
    S = np.array(S)
    T = np.concatenate([S, np.array(extra).reshape(-1, 2)])
    if membership_linear(fam, S, w).member:
        assert membership_linear(fam, T, w).member


@given(st.lists(point2, min_size=1, max_size=6), point2, st.floats(1, 5), st.floats(0, 5))
def test_C_nested(S, w, C1, dC):
    fam = affine_family(2)
    if membership_C(fam, np.array(S), w, C1).member:
        assert membership_C(fam, np.array(S), w, C1 + dC).member


@given(st.lists(point2, min_size=1, max_size=6))
def test_idempotent_on_grid(S):
    fam = affine_family(2)
    g = rect_grid([-1, -1], [1, 1], 12)
    first = compute_hull(fam, np.array(S), g)
    if first.members.any():
        again = compute_hull(fam, g.points[first.members], g)
        np.testing.assert_array_equal(again.members, first.members)


@given(st.lists(point2, min_size=2, max_size=8), point2, st.sampled_from([1.0, 2.0, 7.5]))
def test_certificates_recheck(S, w, C):
    fam = monomial_family(1, 3)
    v = membership_C(fam, np.array(S), w, C)
    if not v.member:
        assert v.certificate.recheck(fam, np.array(S), w) >= v.certificate.gap / 2


# ---------------------------------------------------------------- classical oracle


def test_oracle_shapes():
    assert classical_hull_oracle(TRIANGLE).kind == "polygon"
    assert classical_hull_oracle(TRIANGLE).contains([0.25, 0.25])
    seg = classical_hull_oracle([[0, 0], [0.5, 0.5], [1, 1]])
    assert seg.kind == "segment" and seg.contains([0.7, 0.7]) and not seg.contains([0.7, 0.6])
    pt = classical_hull_oracle([[0.2, 0.2], [0.2, 0.2]])
    assert pt.kind == "point" and pt.contains([0.2, 0.2])
