from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lvsimplex.errors import (DimensionMismatch, DriftExceeded, EntryOutOfRange,
                              LambdaOutOfRange, NotSkewSymmetric, ParameterOutOfRange,
                              UntrustedOperator)
from lvsimplex.operators import (CubicHomeomorphism, PiecewiseM1, PiecewisePeriodic2,
                                 PowerAttract, SkewMatrix, compose, cubic, custom, evaluate_f,
                                 from_description, identity, mix, piecewise_m1,
                                 piecewise_periodic2, power_attract, power_repel,
                                 quadratic_from_matrix, require_valid, validate_lv)
from lvsimplex.simplex import Face, barycenter, iter_faces, sample_points, support, vertex


def builtins():
    rng = np.random.default_rng(5)
    return [
        quadratic_from_matrix(SkewMatrix.random(4, rng)),
        quadratic_from_matrix(SkewMatrix.from_upper(3, [1.0, -1.0, 1.0])),
        power_attract(4, 1.0, 1), power_attract(3, 0.5, 2), power_attract(5, 0.25, 3),
        power_repel(4, 1.0, 1), power_repel(3, 0.5, 3),
        cubic(2), cubic(3), cubic(5),
        piecewise_periodic2(), piecewise_m1(),
        identity(3),
    ]


BUILTINS = builtins()
IDS = [V.label for V in BUILTINS]


# --- worked examples ------------------------------------------------------------

def test_power_attract_hand_values():
    V = power_attract(2, 1.0, 1)
    np.testing.assert_allclose(V.f(np.array([0.6, 0.4])), [0.08, -0.12], atol=1e-15)
    np.testing.assert_allclose(V(np.array([0.6, 0.4])), [0.648, 0.352], atol=1e-15)


def test_quadratic_hand_values():
    V = quadratic_from_matrix(SkewMatrix.from_upper(2, [1.0]))
    np.testing.assert_allclose(V.f(np.array([0.5, 0.5])), [0.5, -0.5])
    np.testing.assert_allclose(V(np.array([0.5, 0.5])), [0.75, 0.25])


def test_zero_matrix_is_identity():
    V = quadratic_from_matrix(np.zeros((4, 4)))
    X = sample_points(Face.full(4), 200, np.random.default_rng(0))
    np.testing.assert_array_equal(V(X), X)


@pytest.mark.parametrize("m,eps,ell", [(2, 1, 1), (3, 0.5, 2), (6, 0.25, 3)])
def test_power_maps_vanish_at_barycenter(m, eps, ell):
    b = barycenter(m)
    np.testing.assert_allclose(power_attract(m, eps, ell).f(b), 0, atol=1e-16)
    np.testing.assert_allclose(power_repel(m, eps, ell).f(b), 0, atol=1e-16)


@pytest.mark.parametrize("V", BUILTINS, ids=IDS)
def test_vertices_fixed(V):
    for k in range(1, V.m + 1):
        np.testing.assert_allclose(V(vertex(V.m, k)), vertex(V.m, k), atol=1e-15)


def test_piecewise_periodic_swaps_quarter_point():
    V = piecewise_periodic2()
    np.testing.assert_allclose(V(np.array([0.25, 0.75])), [0.75, 0.25], atol=1e-15)
    np.testing.assert_allclose(V.power(np.array([0.25, 0.75]), 2), [0.25, 0.75], atol=1e-15)


def test_piecewise_flat_pieces():
    V = piecewise_periodic2()
    for x1 in np.linspace(9 / 30, 11 / 30, 7, endpoint=False):
        np.testing.assert_allclose(V(np.array([x1, 1 - x1])), [0.9, 0.1], atol=1e-15)
    for x1 in np.linspace(19 / 30, 21 / 30, 7, endpoint=False):
        np.testing.assert_allclose(V(np.array([x1, 1 - x1])), [0.1, 0.9], atol=1e-15)
    W = piecewise_m1()
    for x1 in np.linspace(1 / 3, 5 / 12, 5):
        np.testing.assert_allclose(W(np.array([x1, 1 - x1])), [1 / 3, 2 / 3], atol=1e-15)


def test_piecewise_region_half_open():
    f = PiecewisePeriodic2()
    r = f.region(np.array([[9 / 30, 21 / 30], [0.0, 1.0], [1.0, 0.0], [21 / 30, 9 / 30]]))
    np.testing.assert_array_equal(r, [1, 0, 4, 4])


@pytest.mark.parametrize("cls", [PiecewisePeriodic2, PiecewiseM1])
def test_piecewise_boundary_consistency(cls):
    f = cls()
    for i, b in enumerate(cls.breaks):
        x1, x2 = np.float64(b), np.float64(1 - b)
        with np.errstate(all="ignore"):
            f1s, f2s = f.branches(x1, x2)
        assert abs(float(f1s[i]) - float(f1s[i + 1])) <= 1e-14, (b, "f1")
        assert abs(float(f2s[i]) - float(f2s[i + 1])) <= 1e-14, (b, "f2")


def test_boundary_example_value():
    f = PiecewisePeriodic2()
    f1s, _ = f.branches(np.float64(0.3), np.float64(0.7))
    assert f1s[0] == 2.0 and abs(f1s[1] - 2.0) <= 1e-14


# --- oracles ----------------------------------------------------------------------

def cubic_f_naive(x):
    m = len(x)
    out = []
    for k in range(m):
        s1 = sum(x[i] for i in range(k))
        s2 = sum(x[i] * x[j] for i, j in combinations(range(k), 2))
        out.append(x[k] ** 2 + 3 * s1 - 3 * s2 - 1)
    return np.array(out)


@pytest.mark.parametrize("m", [2, 3, 4, 6])
def test_cubic_matches_naive_sums(m):
    X = sample_points(Face.full(m), 300, np.random.default_rng(m))
    got = CubicHomeomorphism(m)(X)
    want = np.array([cubic_f_naive(x) for x in X])
    np.testing.assert_allclose(got, want, atol=1e-13)


@pytest.mark.parametrize("m", [2, 3, 5, 8])
def test_cubic_normalization_symmetric_functions(m):
    # sum_k x_k (1 + f_k) = p3 + 3 e2 - 3 e3, which equals (sum x)^3 on the simplex
    X = sample_points(Face.full(m), 300, np.random.default_rng(10 + m))
    for x in X:
        p3 = sum(v ** 3 for v in x)
        e2 = sum(x[i] * x[j] for i, j in combinations(range(m), 2))
        e3 = sum(x[i] * x[j] * x[k] for i, j, k in combinations(range(m), 3))
        assert abs(p3 + 3 * e2 - 3 * e3 - 1.0) <= 1e-13
        assert abs(np.sum(x * (1 + cubic_f_naive(x))) - 1.0) <= 1e-13
    assert np.abs(cubic(m).raw(X).sum(axis=1) - 1).max() <= 1e-13


def test_cubic_vertex_values():
    f = CubicHomeomorphism(3)
    np.testing.assert_allclose(f(vertex(3, 1)), [0, 2, 2])
    np.testing.assert_allclose(f(vertex(3, 2)), [-1, 0, 2])
    np.testing.assert_allclose(f(vertex(3, 3)), [-1, -1, 0])


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 6), st.sampled_from([0.25, 0.5, 1.0]), st.integers(1, 4),
       st.integers(0, 2**32 - 1))
def test_power_difference_identity(m, eps, ell, seed):
    x = np.random.default_rng(seed).dirichlet(np.ones(m))
    V = power_attract(m, eps, ell)
    y = V(x)
    s = np.sum(x ** (ell + 1))
    for k in range(m):
        for j in range(m):
            geo = sum(x[k] ** (ell - r) * x[j] ** r for r in range(ell + 1))
            want = (x[k] - x[j]) * (1 + eps * geo - eps * s)
            assert abs((y[k] - y[j]) - want) <= 1e-12


@pytest.mark.parametrize("V", BUILTINS, ids=IDS)
def test_simplex_invariance_before_projection(V):
    X = np.random.default_rng(0).dirichlet(np.ones(V.m), size=10_000)
    raw = V.raw(X)
    assert np.abs(raw.sum(axis=1) - 1).max() <= 1e-12
    assert raw.min() >= -1e-12


@pytest.mark.parametrize("V", BUILTINS, ids=IDS)
def test_face_invariance(V):
    rng = np.random.default_rng(1)
    for face in iter_faces(V.m):
        X = sample_points(face, 50, rng, interior=True)
        for y in V(X):
            assert support(y) == face


def test_compose_matches_two_steps():
    V = power_attract(2, 1.0, 1)
    W = compose(V, V)
    y = W(np.array([0.6, 0.4]))
    a = 0.648
    first = a * (1 + a - (a ** 2 + 0.352 ** 2))
    assert abs(y[0] - first) <= 1e-15
    X = sample_points(Face.full(4), 1000, np.random.default_rng(2))
    P = power_attract(4, 0.5, 2)
    Q = power_repel(4, 1.0, 1)
    np.testing.assert_allclose(compose(P, Q)(X), P(Q(X)), atol=1e-15)
    np.testing.assert_allclose(compose(identity(4), P)(X), P(X), atol=1e-14)


def test_mix_pointwise_and_degenerate():
    X = sample_points(Face.full(3), 500, np.random.default_rng(3))
    g, h = power_attract(3, 1.0, 1), cubic(3)
    np.testing.assert_allclose(mix(0.0, g, h)(X), g(X), atol=1e-15)
    np.testing.assert_allclose(mix(1.0, g, h)(X), h(X), atol=1e-15)
    np.testing.assert_allclose(mix(0.5, g, g)(X), g(X), atol=1e-15)
    np.testing.assert_allclose(mix(0.3, g, h)(X), 0.7 * g(X) + 0.3 * h(X), atol=1e-15)


# --- validation -----------------------------------------------------------------

@pytest.mark.parametrize("V", BUILTINS, ids=IDS)
def test_builtins_validate(V):
    rep = validate_lv(V, n_samples=300, seed=4)
    assert rep.passed, rep.witnesses
    assert rep.faces_checked == 2 ** V.m - 1
    assert rep.worst_cond3_residual <= 1e-10


def test_closure_preserves_validity():
    a, b = power_attract(3, 0.5, 2), quadratic_from_matrix(SkewMatrix.from_upper(3, [0.5, -1, 1]))
    for W in (compose(a, b), compose(b, a), mix(0.4, a, b)):
        assert validate_lv(W, 300).passed


def test_custom_map_fails_cond2_with_witness():
    V = custom(2, lambda x: np.array([-2.0, 2.0 * x[0] / max(x[1], 1e-300)]), "bad")
    rep = validate_lv(V, n_samples=50)
    assert not rep.cond2_ok and not rep.passed
    w = [w for w in rep.witnesses if w.condition == "cond2"][0]
    assert w.value == -2.0 and w.index == 1
    with pytest.raises(UntrustedOperator):
        require_valid(V)


def test_custom_map_trusted_after_validation():
    from lvsimplex.dynamics import iterate
    V = custom(3, lambda x: 0.5 * (x - np.sum(x * x)), "soft attract")
    with pytest.raises(UntrustedOperator):
        iterate(V, barycenter(3))
    W = require_valid(V)
    assert W.trusted
    assert iterate(W, np.array([0.5, 0.3, 0.2])).converged


def test_failing_report_always_has_witness():
    V = custom(3, lambda x: np.array([0.1, 0.0, 0.0]), "cond3 breaker")
    rep = validate_lv(V, 20)
    assert not rep.cond3_ok and rep.witnesses


def test_invalid_map_raises_drift():
    V = custom(2, lambda x: np.array([-3.0, 3.0]), "wild", vectorized=False)
    with pytest.raises(DriftExceeded):
        V.apply(np.array([0.5, 0.5]))


# --- construction errors ----------------------------------------------------------

def test_skew_matrix_errors():
    with pytest.raises(NotSkewSymmetric):
        SkewMatrix(np.array([[0, 0.5], [0.4, 0]]))
    with pytest.raises(NotSkewSymmetric):
        SkewMatrix(np.array([[0.1, 0.5], [-0.5, 0]]))
    with pytest.raises(EntryOutOfRange):
        SkewMatrix.from_upper(2, [2.0])
    with pytest.raises(DimensionMismatch):
        SkewMatrix.from_upper(3, [0.1, 0.2])
    A = SkewMatrix.from_upper(3, [0.1, 0.2, 0.3])
    assert A.upper() == [0.1, 0.2, 0.3]
    np.testing.assert_array_equal(A.entries, -A.entries.T)


def test_parameter_errors():
    with pytest.raises(ParameterOutOfRange):
        PowerAttract(3, 0.0, 1)
    with pytest.raises(ParameterOutOfRange):
        PowerAttract(3, 1.5, 1)
    with pytest.raises(ParameterOutOfRange):
        power_repel(3, 1.0, 0)
    with pytest.raises(ParameterOutOfRange):
        power_repel(3, 1.0, 1.5)
    with pytest.raises(LambdaOutOfRange):
        mix(1.2, identity(2), identity(2))
    with pytest.raises(DimensionMismatch):
        compose(identity(2), identity(3))
    with pytest.raises(DimensionMismatch):
        mix(0.5, identity(2), identity(3))


def test_dimension_mismatch_on_evaluation():
    with pytest.raises(DimensionMismatch):
        evaluate_f(PowerAttract(3), np.array([0.5, 0.5]))
    with pytest.raises(DimensionMismatch):
        piecewise_m1().apply(barycenter(3))


@pytest.mark.parametrize("V", BUILTINS + [compose(power_attract(3), cubic(3)),
                                          mix(0.25, power_repel(3), identity(3))],
                         ids=IDS + ["compose", "mix"])
def test_description_round_trip(V):
    W = from_description(V.describe())
    assert W.describe() == V.describe()
    X = sample_points(Face.full(V.m), 50, np.random.default_rng(9))
    np.testing.assert_array_equal(W(X), V(X))


def test_description_errors():
    with pytest.raises(KeyError):
        from_description({"family": "nope", "m": 2})
    with pytest.raises(KeyError):
        from_description({"family": "cubic", "m": 3, "extra": 1})
    with pytest.raises(KeyError):
        from_description({"family": "quadratic", "m": 3})
    with pytest.raises(DimensionMismatch):
        from_description({"family": "piecewise_m1", "m": 3})
