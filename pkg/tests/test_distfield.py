import json

import numpy as np
import pytest

from distmorse.distfield import (
    EmptyVarietyError,
    NotOnSurfaceError,
    OnTargetError,
    PointCloud,
    SearchOptions,
    SingularSurfaceError,
    dist,
    is_critical,
    load_cloud,
    nearest_points,
    parallel_map,
    subdifferential,
    subdifferential_restricted,
)
from distmorse.poly import Poly, grad, random_poly

from oracles import circle, random_rotation, rotate_poly, sphere

PARABOLA = Poly(2, {(0, 1): 1.0, (2, 0): -1.0})  # y - x^2


def grid_mesh(q: Poly, box: float = 10.0, res: int = 801):
    """Zero crossings of q along grid edges, linearly interpolated."""
    n = q.nvars
    t = np.linspace(-box, box, res)
    G = np.stack(np.meshgrid(*[t] * n, indexing="ij"), -1).reshape(-1, n)
    V = q.eval_many(G).reshape((res,) * n)
    pts = []
    for ax in range(n):
        lo = [slice(None)] * n
        hi = [slice(None)] * n
        lo[ax] = slice(0, -1)
        hi[ax] = slice(1, None)
        va, vb = V[tuple(lo)], V[tuple(hi)]
        idx = np.nonzero((va > 0) != (vb > 0))
        s = va[idx] / (va[idx] - vb[idx])
        base = np.stack([t[i] for i in idx], 1)
        base[:, ax] += s * (t[1] - t[0])
        pts.append(base)
    return np.vstack(pts), float(t[1] - t[0])


# -- nearest points -----------------------------------------------------------
def test_circle_outside_point():
    ns = nearest_points(circle(), [2.0, 0.0])
    assert abs(ns.radius - 1.0) < 1e-12
    np.testing.assert_allclose(ns.witnesses, [[1.0, 0.0]], atol=1e-12)
    assert not ns.capped


def test_circle_center_is_capped():
    ns = nearest_points(circle(), [0.0, 0.0])
    assert ns.capped
    assert abs(ns.radius - 1.0) < 1e-12


def test_parabola_two_feet():
    ns = nearest_points(PARABOLA, [0.0, 2.0])
    t = np.sqrt(1.5)
    assert ns.multiplicity == 2
    np.testing.assert_allclose(ns.witnesses, [[-t, 1.5], [t, 1.5]], atol=1e-10)
    assert abs(ns.radius - np.sqrt(1.75)) < 1e-12
    # same value from the 1-D minimisation of t^2 + (t^2 - 2)^2
    ts = np.linspace(-3, 3, 600001)
    assert abs(ns.radius - np.sqrt(np.min(ts**2 + (ts**2 - 2) ** 2))) < 1e-9


def test_dist_examples():
    assert abs(dist(circle(), [2.0, 0.0]) - 1.0) < 1e-12
    assert abs(dist(circle(), [0.0, 0.0]) - 1.0) < 1e-12
    assert abs(dist(PARABOLA, [0.0, 2.0]) - np.sqrt(1.75)) < 1e-12


def test_witness_invariants():
    rng = np.random.default_rng(2)
    for seed in range(10):
        q = random_poly(2, 4, seed)
        x = rng.uniform(-2, 2, 2)
        try:
            ns = nearest_points(q, x)
        except EmptyVarietyError:
            continue
        r = ns.radius
        for y in ns.witnesses:
            assert abs(np.linalg.norm(x - y) - r) <= ns.tol * (1 + r)
            assert abs(q(y)) <= ns.tol
            g = grad(q, y)
            nu = g / np.linalg.norm(g)
            d = x - y
            # collinearity: x - y has no tangential part
            assert np.linalg.norm(d - (d @ nu) * nu) <= ns.tol
        if ns.multiplicity > 1:
            gaps = [np.linalg.norm(a - b) for i, a in enumerate(ns.witnesses) for b in ns.witnesses[i + 1 :]]
            assert min(gaps) > 1e-6 * (1 + np.linalg.norm(x))
        assert ns.multiplicity <= 3 or ns.capped


def test_dist_matches_grid_mesh():
    """dist agrees with a brute-force minimum over a grid mesh of Z(q)."""
    rng = np.random.default_rng(0)
    checked = 0
    for n, res, polys in ((2, 801, 30), (3, 121, 10)):
        for seed in range(polys):
            q = random_poly(n, 3, 500 + seed)
            M, h = grid_mesh(q, res=res)
            if len(M) == 0:
                continue
            for _ in range(5):
                x = rng.uniform(-3, 3, n)
                r = dist(q, x)
                brute = float(np.min(np.linalg.norm(M - x, axis=1)))
                assert abs(r - brute) <= 2 * h, (n, seed, x, r, brute)
                checked += 1
    assert checked >= 180


def test_empty_variety():
    with pytest.raises(EmptyVarietyError):
        nearest_points(Poly(2, {(2, 0): 1.0, (0, 2): 1.0, (0, 0): 1.0}), [0.0, 0.0])


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        nearest_points(circle(), [1.0, 2.0, 3.0])


# -- point clouds -------------------------------------------------------------
def test_cloud_nearest_and_subdifferential():
    cloud = PointCloud([[1.0, 0.0], [-1.0, 0.0]])
    sub = subdifferential(cloud, [0.0, 0.0])
    assert sorted(map(tuple, np.round(sub.vertices, 12))) == [(-1.0, 0.0), (1.0, 0.0)]
    ok, sol = is_critical(None, cloud, [0.0, 0.0])
    assert ok
    np.testing.assert_allclose(sol.lambdas, [0.5, 0.5])


def test_cloud_json(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"dim": 2, "points": [[0, 0], [1, 0]]}))
    cloud = load_cloud(path)
    assert cloud.dim == 2 and len(cloud) == 2
    assert PointCloud.from_dict(cloud.to_dict()).points.tolist() == cloud.points.tolist()


# -- subdifferentials -----------------------------------------------------------
def test_subdifferential_vertices():
    sub = subdifferential(circle(), [2.0, 0.0])
    np.testing.assert_allclose(sub.vertices, [[1.0, 0.0]], atol=1e-12)
    assert not sub.projected
    sub = subdifferential(PARABOLA, [0.0, 2.0])
    assert len(sub.vertices) == 2
    np.testing.assert_allclose(np.linalg.norm(sub.vertices, axis=1), 1.0, atol=1e-9)
    np.testing.assert_allclose(sub.vertices[0], sub.vertices[1] * [-1, 1], atol=1e-9)


def test_subdifferential_on_target():
    with pytest.raises(OnTargetError):
        subdifferential(circle(), [1.0, 0.0])


def test_restricted_projection():
    X = circle(radius=3.0)
    Y = circle(center=(1.0, 0.0))
    sub = subdifferential_restricted(X, Y, [3.0, 0.0])
    assert sub.projected
    np.testing.assert_allclose(sub.vertices, [[0.0, 0.0]], atol=1e-12)
    assert np.all(np.linalg.norm(sub.vertices, axis=1) <= 1 + 1e-9)
    ok, sol = is_critical(X, Y, [3.0, 0.0])
    assert ok
    np.testing.assert_allclose(sol.lambdas, [1.0])
    # a point whose vertex is tangent keeps it unchanged
    x = np.array([0.0, 3.0])
    far = PointCloud([[5.0, 3.0]])
    sub = subdifferential_restricted(X, far, x)
    np.testing.assert_allclose(sub.vertices, [[-1.0, 0.0]], atol=1e-12)
    assert not is_critical(X, far, x)[0]


def test_restricted_errors():
    X = circle(radius=3.0)
    with pytest.raises(NotOnSurfaceError):
        subdifferential_restricted(X, circle(), [2.0, 0.0])
    cone = Poly(2, {(2, 0): 1.0, (0, 2): -1.0})
    with pytest.raises(SingularSurfaceError):
        subdifferential_restricted(cone, circle(center=(5.0, 0.0)), [0.0, 0.0])


def test_ambient_is_critical_false_for_single_witness():
    assert not is_critical(None, circle(), [2.0, 0.0])[0]


def test_is_critical_rotation_invariant():
    rng = np.random.default_rng(4)
    X = sphere(radius=2.0)
    Y = sphere(center=(0.5, 0.0, 0.0))
    x = np.array([2.0, 0.0, 0.0])
    base, _ = is_critical(X, Y, x)
    assert base
    for _ in range(5):
        R = random_rotation(3, rng)
        Xr, Yr = rotate_poly(X, R), rotate_poly(Y, R)
        assert is_critical(Xr, Yr, R @ x)[0] == base
        off = R @ np.array([0.0, 2.0, 0.0])
        assert not is_critical(Xr, Yr, off)[0]


# -- workers ------------------------------------------------------------------
def test_parallel_map_order(monkeypatch):
    monkeypatch.setenv("DISTMORSE_THREADS", "4")
    assert parallel_map(lambda v: v * v, list(range(20))) == [v * v for v in range(20)]


def test_parallel_results_match_serial(monkeypatch):
    q = random_poly(2, 4, 3)
    x = np.array([0.2, -0.1])
    monkeypatch.setenv("DISTMORSE_THREADS", "1")
    a = nearest_points(q, x, SearchOptions(seed=5))
    monkeypatch.setenv("DISTMORSE_THREADS", "3")
    b = nearest_points(q, x, SearchOptions(seed=5))
    assert a.witnesses.tobytes() == b.witnesses.tobytes()
