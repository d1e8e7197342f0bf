import itertools

import numpy as np
import pytest

import ghm.expr as ex
from ghm.errors import DimensionError
from ghm.expr import ScalarField, parse
from ghm.exterior import (
    FormField,
    FormValue,
    MultiVectorValue,
    PointMap,
    VectorField,
    exterior_derivative,
    grad_field,
    hdw_vs_bracket_sign,
    interior_by_form,
    interior_by_multivector,
    interior_form,
    interior_vector,
    interior_vector_field,
    inverse_law_sign,
    lie_derivative,
    pairing,
    pullback,
    sort_with_sign,
    wedge,
)

from oracles import dense_interior_vector, dense_wedge, dense_exterior_derivative


def test_sort_with_sign():
    assert sort_with_sign((1, 2, 3)) == ((1, 2, 3), 1)
    assert sort_with_sign((3, 1, 2)) == ((1, 2, 3), 1)
    assert sort_with_sign((2, 1, 3)) == ((1, 2, 3), -1)
    assert sort_with_sign((1, 1, 2)) == ((1, 1, 2), 0)
    assert sort_with_sign(()) == ((), 1)


def test_wedge_basis_cases():
    dx1 = FormValue(3, 1, {(1,): 1.0})
    dx2 = FormValue(3, 1, {(2,): 1.0})
    dx3 = FormValue(3, 1, {(3,): 1.0})
    assert wedge(dx1, dx2).coeffs == {(1, 2): 1.0}
    assert wedge(dx1, dx1).coeffs == {}
    mixed = FormValue(3, 1, {(1,): 1.0, (2,): 2.0})
    assert wedge(mixed, dx3).coeffs == {(1, 3): 1.0, (2, 3): 2.0}


def test_wedge_multivector_sorts_with_sign():
    d3 = MultiVectorValue(3, 1, {(3,): 1.0})
    d1 = MultiVectorValue(3, 1, {(1,): 1.0})
    d2 = MultiVectorValue(3, 1, {(2,): 1.0})
    out = wedge(wedge(d3, d1), d2)
    assert out.coeffs == {(1, 2, 3): 1.0}


def _random_value(rng, n, k, cls=FormValue):
    keys = list(itertools.combinations(range(1, n + 1), k))
    coeffs = {key: float(rng.standard_normal()) for key in keys if rng.random() < 0.7}
    return cls(n, k, coeffs)


def test_wedge_against_dense_oracle():
    rng = np.random.default_rng(3)
    for n, k, l in [(4, 1, 2), (5, 2, 2), (6, 2, 3), (5, 1, 1)]:
        a = _random_value(rng, n, k)
        b = _random_value(rng, n, l)
        got = wedge(a, b).coeffs
        want = dense_wedge(a.coeffs, b.coeffs, k, l)
        keys = set(got) | set(want)
        for key in keys:
            assert got.get(key, 0.0) == pytest.approx(want.get(key, 0.0), abs=1e-12)


def test_wedge_graded_anticommutative():
    rng = np.random.default_rng(5)
    for n, k, l in [(5, 1, 1), (5, 1, 2), (6, 2, 2), (6, 2, 3), (6, 3, 3)]:
        a = _random_value(rng, n, k)
        b = _random_value(rng, n, l)
        ab = wedge(a, b)
        ba = wedge(b, a).scale((-1.0) ** (k * l))
        assert (ab - ba).max_abs() <= 1e-12


def test_wedge_odd_degree_squares_to_zero():
    rng = np.random.default_rng(7)
    for n, k in [(5, 1), (6, 3)]:
        a = _random_value(rng, n, k)
        assert wedge(a, a).max_abs() <= 1e-12


def test_pairing_examples():
    assert pairing(MultiVectorValue(3, 2, {(1, 2): 1.0}),
                   FormValue(3, 2, {(1, 2): 1.0})) == 1.0
    assert pairing(MultiVectorValue(3, 2, {(1, 2): 1.0}),
                   FormValue(3, 2, {(1, 3): 1.0})) == 0.0
    assert pairing(MultiVectorValue(3, 3, {(1, 2, 3): 1.0}),
                   FormValue(3, 3, {(1, 2, 3): 1.0})) == 1.0
    with pytest.raises(DimensionError):
        pairing(MultiVectorValue(3, 2, {(1, 2): 1.0}), FormValue(3, 1, {(1,): 1.0}))


def test_interior_vector_slot_signs():
    w = FormValue(3, 3, {(1, 2, 3): 1.0})
    assert interior_vector((1, 0, 0), w).coeffs == {(2, 3): 1.0}
    assert interior_vector((0, 0, 1), w).coeffs == {(1, 2): 1.0}
    assert interior_vector((0, 1, 0), w).coeffs == {(1, 3): -1.0}


def test_interior_vector_general_expansion():
    w = FormValue(3, 3, {(1, 2, 3): 1.0})
    X = (0.3, -0.7, 1.1)
    got = interior_vector(X, w)
    assert got.coeffs[(2, 3)] == pytest.approx(0.3)
    assert got.coeffs[(1, 3)] == pytest.approx(0.7)
    assert got.coeffs[(1, 2)] == pytest.approx(1.1)


def test_interior_vector_against_dense_oracle():
    rng = np.random.default_rng(11)
    for n, k in [(4, 2), (5, 3), (6, 4)]:
        w = _random_value(rng, n, k)
        X = rng.standard_normal(n)
        got = interior_vector(X, w).coeffs
        want = dense_interior_vector(X, w.coeffs, n, k)
        for key in set(got) | set(want):
            assert got.get(key, 0.0) == pytest.approx(want.get(key, 0.0), abs=1e-12)


def test_interior_form_mirror():
    J = MultiVectorValue(3, 3, {(1, 2, 3): 1.0})
    step1 = interior_form((0, 1, 0), J)
    assert step1.coeffs == {(1, 3): -1.0}
    step2 = interior_form((0, 0, 1), step1)
    assert step2.coeffs == {(1,): 1.0}
    J4 = MultiVectorValue(4, 3, {(1, 2, 3): 1.0})
    assert interior_form((0, 0, 0, 1), J4).coeffs == {}


def test_interior_multi_two_step():
    J = MultiVectorValue(3, 3, {(1, 2, 3): 1.0})
    w12 = FormValue(3, 2, {(1, 2): 1.0})
    assert interior_by_form(w12, J).coeffs == {(3,): 1.0}


def test_interior_multi_reduces_to_pairing():
    rng = np.random.default_rng(13)
    for n, k in [(4, 2), (5, 3)]:
        w = _random_value(rng, n, k)
        J = _random_value(rng, n, k, MultiVectorValue)
        via_multi = interior_by_form(w, J)
        assert via_multi.k == 0
        assert via_multi.coeffs.get((), 0.0) == pytest.approx(pairing(J, w), abs=1e-12)


def test_interior_multi_matches_iterated_single():
    rng = np.random.default_rng(17)
    n = 6
    for k, m in [(2, 1), (3, 2), (4, 3), (4, 4)]:
        J = _random_value(rng, n, k, MultiVectorValue)
        w = _random_value(rng, n, m)
        got = interior_by_form(w, J)
        expect = MultiVectorValue(n, k - m)
        for key, c in w.coeffs.items():
            term = J
            for axis in key:
                alpha = [0.0] * n
                alpha[axis - 1] = 1.0
                term = interior_form(alpha, term)
            expect = expect + term.scale(c)
        assert (got - expect).max_abs() <= 1e-12


def test_iterated_contraction_order_identity():
    # iota_{dC ^ dH} J = iota_{dH} iota_{dC} J on random inputs
    rng = np.random.default_rng(19)
    n = 5
    for _ in range(10):
        J = _random_value(rng, n, 3, MultiVectorValue)
        dC = rng.standard_normal(n)
        dH = rng.standard_normal(n)
        w = wedge(FormValue(n, 1, {(i,): dC[i - 1] for i in range(1, n + 1)}),
                  FormValue(n, 1, {(i,): dH[i - 1] for i in range(1, n + 1)}))
        lhs = interior_by_form(w, J)
        rhs = interior_form(dH, interior_form(dC, J))
        assert (lhs - rhs).max_abs() <= 1e-12


def test_delta_expansion_identity():
    # iota_{dx^{mn}} d_{ijk} = delta^{mn}_{ij} d_k + delta^{mn}_{jk} d_i - delta^{mn}_{ik} d_j
    n = 5
    for m, nn in itertools.combinations(range(1, n + 1), 2):
        w = FormValue(n, 2, {(m, nn): 1.0})
        for i, j, k in itertools.combinations(range(1, n + 1), 3):
            J = MultiVectorValue(n, 3, {(i, j, k): 1.0})
            got = interior_by_form(w, J)
            want = MultiVectorValue(n, 1)
            if (m, nn) == (i, j):
                want = want + MultiVectorValue(n, 1, {(k,): 1.0})
            if (m, nn) == (j, k):
                want = want + MultiVectorValue(n, 1, {(i,): 1.0})
            if (m, nn) == (i, k):
                want = want + MultiVectorValue(n, 1, {(j,): -1.0})
            assert (got - want).max_abs() == 0.0


def test_double_contraction_vanishes():
    rng = np.random.default_rng(23)
    for n, k in [(4, 2), (5, 3), (6, 4)]:
        w = _random_value(rng, n, k)
        X = rng.standard_normal(n)
        out = interior_vector(X, interior_vector(X, w))
        assert out.max_abs() <= 1e-12


def test_interior_by_multivector_mirror():
    w = FormValue(3, 3, {(1, 2, 3): 1.0})
    J = MultiVectorValue(3, 2, {(1, 2): 1.0})
    # iota_{d_{12}} dx^{123} = iota_{d_2} iota_{d_1} dx^{123} = iota_{d_2} dx^{23} = dx^3
    assert interior_by_multivector(J, w).coeffs == {(3,): 1.0}


# ---------------------------------------------------------------------------
# Fields
# ---------------------------------------------------------------------------

def test_exterior_derivative_basic():
    w = FormField(2, 1, {(1,): ex.Coord(2)})  # x2 dx1
    dw = exterior_derivative(w)
    assert dw.at((0.0, 0.0)).coeffs == {(1, 2): -1.0}


def test_exterior_derivative_top_form_is_zero():
    w = FormField(3, 3, {(1, 2, 3): ex.Coord(1)})
    dw = exterior_derivative(w)
    assert dw.k == 4 and dw.coeffs == {}


def test_exterior_derivative_fourdim_cases():
    x4 = ex.Coord(4)
    omega = FormField(4, 2, {(1, 2): x4, (3, 4): x4})
    w = FormField(4, 3, {(1, 2, 4): x4})  # omega ^ dx4
    domega = exterior_derivative(omega)
    assert domega.at((0.3, 0.1, -0.2, 1.7)).coeffs == {(1, 2, 4): 1.0}
    assert exterior_derivative(w).coeffs == {}


def test_exterior_derivative_against_fd_oracle():
    rng = np.random.default_rng(29)
    n, k = 4, 2
    keys = list(itertools.combinations(range(1, n + 1), k))
    coeffs = {}
    fns = {}
    for key in keys:
        f = ScalarField.from_text(
            f"x1^2*x{key[0]} - 0.5*x{key[1]}*x3 + x4", n)
        coeffs[key] = f.expression
        fns[key] = f
    w = FormField(n, k, coeffs)
    dw = exterior_derivative(w)
    for _ in range(5):
        p = rng.uniform(-1, 1, size=n)
        got = dw.at(p)
        want = dense_exterior_derivative(fns, p, n, k)
        for key, v in want.items():
            assert got.coeffs.get(key, 0.0) == pytest.approx(v, abs=1e-7)


def test_dd_is_zero_on_random_polynomials():
    rng = np.random.default_rng(31)
    n = 4
    terms = ["x1^2*x2", "x3*x4", "x2^3", "x1*x3*x4", "x4^2"]
    for k in (1, 2):
        keys = list(itertools.combinations(range(1, n + 1), k))
        coeffs = {key: parse(terms[i % len(terms)], n) for i, key in enumerate(keys)}
        w = FormField(n, k, coeffs)
        ddw = exterior_derivative(exterior_derivative(w))
        for _ in range(5):
            p = rng.uniform(-2, 2, size=n)
            assert ddw.at(p).max_abs() <= 1e-12


def test_lie_derivative_dilation():
    w = FormField(3, 3, {(1, 2, 3): ex.ONE})
    Z0 = VectorField(3, tuple(ex.div(ex.Coord(i), ex.const(3.0)) for i in (1, 2, 3)))
    lw = lie_derivative(Z0, w)
    assert lw.at((0.4, -0.2, 0.9)).coeffs == {(1, 2, 3): pytest.approx(1.0)}


def test_lie_derivative_constant_cases():
    w = FormField(2, 1, {(1,): ex.ONE})
    X = VectorField(2, (ex.ZERO, ex.ONE))
    assert lie_derivative(X, w).coeffs == {}


def test_lie_derivative_leibniz():
    rng = np.random.default_rng(37)
    n = 3
    f = ScalarField.from_text("x1*x2 + x3^2", n)
    w = FormField(n, 2, {(1, 2): parse("x3", n), (1, 3): parse("x1", n)})
    X = VectorField(n, (parse("x2", n), parse("-x1", n), parse("x1*x3", n)))
    fw = w.scale(f.expression)
    lhs = lie_derivative(X, fw)
    Xf = ex.ZERO
    for i, c in enumerate(X.components, start=1):
        Xf = ex.add(Xf, ex.mul(c, f.partial(i)))
    rhs = w.scale(Xf) + lie_derivative(X, w).scale(f.expression)
    for _ in range(10):
        p = rng.uniform(-1.5, 1.5, size=n)
        assert (lhs.at(p) - rhs.at(p)).max_abs() <= 1e-9


def test_pullback_linear_map():
    phi = PointMap(2, (parse("2*x1", 2), parse("x2", 2)))
    dx1 = FormValue(2, 1, {(1,): 1.0})
    out = pullback(phi, dx1, (0.7, 0.3))
    assert out.coeffs == {(1,): 2.0}


def test_pullback_identity():
    phi = PointMap.identity(3)
    rng = np.random.default_rng(41)
    w = _random_value(rng, 3, 2)
    out = pullback(phi, w, (0.1, 0.2, 0.3))
    assert (out - w).max_abs() == 0.0


def _random_affine(rng, n):
    A = rng.uniform(-1, 1, size=(n, n)) + np.eye(n)
    b = rng.uniform(-1, 1, size=n)
    comps = []
    for row in range(n):
        e = ex.const(b[row])
        for col in range(n):
            e = ex.add(e, ex.mul(ex.const(A[row, col]), ex.Coord(col + 1)))
        comps.append(e)
    return PointMap(n, tuple(comps))


def test_pullback_functoriality_affine():
    rng = np.random.default_rng(43)
    n = 3
    for _ in range(5):
        phi = _random_affine(rng, n)
        psi = _random_affine(rng, n)
        comp = phi.compose(psi)
        w = _random_value(rng, n, 2)
        p = rng.uniform(-1, 1, size=n)
        direct = pullback(comp, w, p)
        mid = pullback(phi, w, psi.at(p))
        staged = pullback(psi, mid, p)
        assert (direct - staged).max_abs() <= 1e-12


def test_pointmap_jacobian_matches_fd():
    phi = PointMap(2, (parse("x1^2 + x2", 2), parse("sin(x1)*x2", 2)))
    p = (0.4, -1.1)
    J = phi.jacobian(p)
    step = 1e-6
    for i in range(2):
        up = list(p)
        dn = list(p)
        up[i] += step
        dn[i] -= step
        col = (phi.at(up) - phi.at(dn)) / (2 * step)
        assert np.allclose(J[:, i], col, atol=1e-6)


def test_sign_tables():
    assert [inverse_law_sign(k) for k in (2, 3, 4, 5, 6)] == [-1, 1, -1, 1, -1]
    assert [hdw_vs_bracket_sign(k) for k in (2, 3, 4, 5, 6)] == [-1, -1, 1, 1, -1]


def test_inverse_law_sign_realized_on_canonical_pairs():
    for n in (2, 3, 4, 5):
        k = n
        w = FormValue(n, k, {tuple(range(1, k + 1)): 1.0})
        J = MultiVectorValue(n, k, {tuple(range(1, k + 1)): 1.0})
        for j in range(1, n + 1):
            X = [0.0] * n
            X[j - 1] = 1.0
            back = interior_by_form(interior_vector(X, w), J)
            assert back.coeffs == {(j,): float(inverse_law_sign(k))}


def test_grad_and_interior_vector_field():
    f = ScalarField.from_text("x1*x2", 2)
    df = grad_field(f)
    assert df.at((3.0, 5.0)).coeffs == {(1,): 5.0, (2,): 3.0}
    w = FormField(2, 2, {(1, 2): ex.ONE})
    X = VectorField(2, (parse("x2", 2), parse("-x1", 2)))
    iw = interior_vector_field(X, w)
    assert iw.at((1.0, 2.0)).coeffs == {(1,): 1.0, (2,): 2.0}
