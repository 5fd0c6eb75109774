import json
import math

import numpy as np
import pytest

from distmorse.numerics import fd_gradient, fd_hessian
from distmorse.poly import DimensionError, Poly, degree_bound, eval_poly, grad, hessian, random_poly

from oracles import circle, exact_eval


def test_zero_coefficients_are_dropped():
    p = Poly(2, {(1, 0): 0.0, (0, 1): 2.0, (2, 0): 1.0})
    assert set(p.terms) == {(0, 1), (2, 0)}
    assert p.degree == 2
    # repeated exponents are summed and may cancel
    q = Poly(2, [((1, 1), 1.5), ((1, 1), -1.5), ((0, 0), 3.0)])
    assert q.terms == {(0, 0): 3.0}
    assert q.degree == 0


def test_zero_polynomial():
    z = Poly.zero(3)
    assert z.degree == 0 and z.is_zero
    assert eval_poly(z, [1.0, -2.0, 7.0]) == 0.0
    assert np.all(grad(z, [0.3, 0.1, 0.2]) == 0.0)


def test_bad_exponent_length():
    with pytest.raises(DimensionError):
        Poly(2, {(1, 0, 0): 1.0})
    with pytest.raises(DimensionError):
        eval_poly(circle(), [1.0, 2.0, 3.0])


def test_circle_values():
    p = circle()
    assert eval_poly(p, [1.0, 0.0]) == 0.0
    np.testing.assert_array_equal(grad(p, [1.0, 0.0]), [2.0, 0.0])
    np.testing.assert_array_equal(hessian(p, [1.0, 0.0]), np.diag([2.0, 2.0]))


def test_linear_has_zero_hessian():
    p = Poly(3, {(1, 0, 0): 2.0, (0, 0, 1): -1.0, (0, 0, 0): 0.5})
    assert np.all(hessian(p, [0.3, -2.0, 5.0]) == 0.0)


def test_eval_matches_rational_oracle():
    rng = np.random.default_rng(7)
    for seed in range(20):
        p = random_poly(3, 4, seed)
        x = rng.uniform(-2, 2, 3)
        exact = float(exact_eval(p, x))
        assert abs(eval_poly(p, x) - exact) <= 1e-14 * (1 + abs(exact))


def test_compensated_sum_beats_naive_cancellation():
    # 1e16 x - 1e16 x + 1 at x = 1 is exactly 1
    p = Poly(2, {(1, 0): 1e16, (0, 1): -1e16, (0, 0): 1.0})
    assert eval_poly(p, [1.0, 1.0]) == 1.0


def test_derivatives_match_finite_differences():
    rng = np.random.default_rng(11)
    for seed in range(100):
        n = 2 + seed % 2
        p = random_poly(n, 5, 1000 + seed)
        x = rng.uniform(-1, 1, n)
        g = grad(p, x)
        H = hessian(p, x)
        gf = fd_gradient(lambda z: eval_poly(p, z), x, 1e-5)
        Hf = fd_hessian(lambda z: eval_poly(p, z), x, 1e-4)
        assert np.allclose(g, gf, rtol=1e-6, atol=1e-6 * (1 + np.abs(g).max()))
        assert np.allclose(H, Hf, rtol=1e-6, atol=1e-5 * (1 + np.abs(H).max()))
        assert np.array_equal(H, H.T)


def test_derivatives_are_pure():
    p = random_poly(3, 4, 5)
    x = np.array([0.3, -0.7, 1.1])
    a = (eval_poly(p, x), grad(p, x).tobytes(), hessian(p, x).tobytes())
    b = (eval_poly(p, x), grad(p, x).tobytes(), hessian(p, x).tobytes())
    assert a == b


def test_random_poly_determinism():
    assert random_poly(2, 2, 42) == random_poly(2, 2, 42)
    assert random_poly(2, 2, 42) != random_poly(2, 2, 43)


def test_random_poly_degree():
    for seed in range(100):
        p = random_poly(3, 4, seed)
        assert p.degree == 4
        assert any(sum(e) == 4 for e in p.terms)
    c = random_poly(1, 0, 3)
    assert c.degree == 0 and len(c.terms) == 1


def test_random_poly_scaling():
    flat = random_poly(2, 3, 9, flat=True)
    damped = random_poly(2, 3, 9)
    for e, c in damped.terms.items():
        assert math.isclose(c * (1 + sum(e)), flat.terms[e], rel_tol=1e-15)


def test_json_round_trip():
    p = random_poly(3, 4, 17)
    q = Poly.loads(p.dumps())
    assert p == q
    data = json.loads(p.dumps())
    assert data["nvars"] == 3 and len(data["terms"]) == len(p.terms)


def test_json_missing_field():
    with pytest.raises(ValueError, match="terms"):
        Poly.from_dict({"nvars": 2})
    with pytest.raises(ValueError, match="coef"):
        Poly.from_dict({"nvars": 2, "terms": [{"exp": [1, 0]}]})


def test_degree_bound_examples():
    assert degree_bound(2, 3, 1) == 3
    assert degree_bound(5, 6, 2) == 4
    for n in range(1, 13):
        assert degree_bound(n, n + 1, 1) <= 3
        assert degree_bound(n, n + 1, 2) <= 4


def test_degree_bound_is_minimal():
    for n in range(1, 6):
        for k in range(1, 8):
            for r in range(0, 4):
                d = degree_bound(n, k, r)
                need = k * sum(math.comb(n, l) for l in range(r + 1))
                assert math.comb(n + d, d) >= need
                if d > 0:
                    assert math.comb(n + d - 1, d - 1) < need


def test_degree_bound_monotone_in_k_and_r():
    for n in range(1, 10):
        for r in range(0, 4):
            row = [degree_bound(n, k, r) for k in range(1, 15)]
            assert row == sorted(row)
        for k in range(1, 10):
            col = [degree_bound(n, k, r) for r in range(0, 5)]
            assert col == sorted(col)


def test_degree_bound_domain():
    with pytest.raises(ValueError):
        degree_bound(0, 1, 1)
    with pytest.raises(ValueError):
        degree_bound(2, 0, 1)
