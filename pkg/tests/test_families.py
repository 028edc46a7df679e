import numpy as np
import pytest
from hypothesis import given, strategies as st

from genconvex.families import (
    BasisFunction,
    DegenerateFamilyError,
    DomainError,
    Point,
    affine_family,
    complex_points,
    cone_sample,
    custom_family,
    evaluate,
    maximum_principle_test,
    monomial_family,
    shifted_name,
    symmetrize,
)
from genconvex.grids import circle_samples

coords = st.floats(-3, 3, allow_nan=False)


def test_point_layout_and_validation():
    p = Point.complex(1 + 2j, 3 - 1j)
    assert p.coords == (1.0, 3.0, 2.0, -1.0)
    with pytest.raises(ValueError):
        Point((1.0, 2.0), n_real=1)
    with pytest.raises(ValueError):
        Point.real(float("nan"))


@pytest.mark.parametrize(
    "f, point, expected",
    [
        (BasisFunction("constant"), Point.real(3.0, -1.0), 1.0),
        (BasisFunction("re_monomial", alpha=(2,)), Point.complex(0.5), 0.25),
        (BasisFunction("re_monomial", alpha=(-1,)), Point.complex(0.5), 2.0),
        (BasisFunction("im_monomial", alpha=(2,)), Point.complex(0.5 + 0.5j), 0.5),
        (BasisFunction("affine", coeffs=(1.0, 1.0)), Point.real(1.0, 2.0), 3.0),
    ],
)
def test_evaluate_examples(f, point, expected):
    assert evaluate(f, point) == pytest.approx(expected, abs=1e-15)


def test_laurent_pole_raises_domain_error():
    f = BasisFunction("re_monomial", alpha=(-1,))
    with pytest.raises(DomainError) as info:
        f.evaluate(complex_points([1.0, 0.0, 0.5]))
    assert info.value.index == 1


def test_dimension_mismatch():
    with pytest.raises(ValueError, match="dimension"):
        monomial_family(1, 2).evaluate(np.zeros((3, 4)))


@pytest.mark.parametrize(
    "n, d, laurent, names",
    [
        (1, 2, False, ["1", "Re z", "Im z", "Re z^2", "Im z^2"]),
        (1, 1, True, ["1", "Re z", "Im z", "Re z^-1", "Im z^-1"]),
    ],
)
def test_monomial_enumeration(n, d, laurent, names):
    assert monomial_family(n, d, laurent).describe() == names


def test_two_variable_count():
    fam = monomial_family(2, 2)
    assert len(fam) == 11
    assert {f.alpha for f in fam.basis[1:]} == {(1, 0), (0, 1), (2, 0), (1, 1), (0, 2)}


@pytest.mark.parametrize("n, d", [(1, 1), (1, 5), (2, 3), (3, 2)])
def test_degree_monotonicity(n, d):
    assert set(monomial_family(n, d).basis) <= set(monomial_family(n, d + 1).basis)


def test_affine_family_and_bad_arguments():
    assert affine_family(2).describe() == ["1", "x1", "x2"]
    assert affine_family(1).describe() == ["1", "x1"]
    for bad in (0, -1):
        with pytest.raises(ValueError):
            affine_family(bad)
    with pytest.raises(ValueError):
        monomial_family(1, 0)


def test_symmetrize_examples():
    fam = cone_sample(affine_family(1))
    assert fam.describe() == ["1", "x1", "-1", "-x1"]
    assert len(symmetrize(fam)) == len(fam)
    rez = custom_family([BasisFunction("re_monomial", alpha=(1,))], "cone_sample", n_complex=1)
    assert symmetrize(rez).describe() == ["1", "Re z", "-1", "-Re z"]
    with pytest.raises(ValueError):
        symmetrize(affine_family(1))


@given(st.lists(st.tuples(coords, coords), min_size=1, max_size=8))
def test_symmetrize_keeps_original_values(pts):
    fam = cone_sample(monomial_family(1, 3))
    twice = symmetrize(fam)
    X = np.array(pts)
    np.testing.assert_array_equal(twice.evaluate(X)[: len(fam)], fam.evaluate(X))


@given(st.lists(st.tuples(coords, coords, coords, coords), min_size=1, max_size=8))
def test_constant_row_is_one(pts):
    for fam in (monomial_family(2, 3), affine_family(4), monomial_family(2, 2, laurent=True)):
        X = np.array(pts)
        ok = fam.defined(X)
        np.testing.assert_array_equal(fam.evaluate(X[ok])[0], 1.0)


def test_defined_mask_excludes_poles():
    fam = monomial_family(1, 2, laurent=True)
    X = complex_points([0.0, 1e-8, 0.5j])
    np.testing.assert_array_equal(fam.defined(X), [False, False, True])
    assert monomial_family(1, 2).defined(X).all()


def test_custom_family_prepends_constant():
    g = BasisFunction("affine", coeffs=(0.0, 1.0))
    fam = custom_family([g, BasisFunction("constant")], n_real=2)
    assert fam.describe() == ["1", "x2"]
    assert fam.contains_constants


def test_degenerate_family_is_constructible_but_rejected():
    fam = custom_family([], n_real=1)
    assert fam.degenerate
    with pytest.raises(DegenerateFamilyError):
        fam.require_nondegenerate()


def test_duplicate_basis_rejected():
    f = BasisFunction("affine", coeffs=(1.0,))
    with pytest.raises(ValueError, match="distinct"):
        custom_family([f, f], n_real=1)


@pytest.mark.parametrize(
    "c, expected", [(0, "z"), (2, "(z-2)"), (-2, "(z+2)"), (1 + 1j, "(z-(1+1j))")]
)
def test_shifted_name(c, expected):
    assert shifted_name("z", c) == expected


def test_centered_monomial_values():
    fam = monomial_family(1, 2, center=[2.0])
    assert fam.basis[1].describe() == "Re (z-2)"
    v = fam.evaluate(complex_points([3.0 + 1j]))[:, 0]
    np.testing.assert_allclose(v, [1.0, 1.0, 1.0, 0.0, 2.0])


def test_moduli_pairs():
    alphas, mods = monomial_family(1, 3).moduli(complex_points([0.5j, -2.0]))
    assert alphas == [(1,), (2,), (3,)]
    np.testing.assert_allclose(mods, [[0.5, 2.0], [0.25, 4.0], [0.125, 8.0]])
    with pytest.raises(ValueError):
        affine_family(2).pairs()


def test_maximum_principle_on_circles():
    rep = maximum_principle_test(monomial_family(1, 2), circle_samples(0.5, 32), circle_samples(0.9, 64))
    assert rep.passed
    assert [c.status for c in rep.checks] == ["skipped"] + ["pass"] * 4


def test_maximum_principle_fails_when_sets_coincide():
    K = np.stack(np.meshgrid(np.linspace(-1, 1, 5), np.linspace(-1, 1, 5)), -1).reshape(-1, 2)
    rep = maximum_principle_test(affine_family(2), K, K)
    assert not rep.passed
    assert len(rep.failures) == 2


def test_maximum_principle_argument_errors():
    with pytest.raises(ValueError):
        maximum_principle_test(affine_family(1), [[0.0]], [[1.0]], margin=0)
    with pytest.raises(ValueError):
        maximum_principle_test(affine_family(1), np.zeros((0, 1)), [[1.0]])


def test_combination_matches_linear_functional():
    rng = np.random.default_rng(7)
    fam = monomial_family(2, 3)
    X = rng.uniform(-1, 1, size=(100, 4))
    c = rng.normal(size=len(fam))
    np.testing.assert_allclose(fam.combination(c).evaluate(X), c @ fam.evaluate(X), rtol=0, atol=1e-12)
