"""Distance oracle for a target set Y.

Y is either a hypersurface ``Z(q)`` given by a :class:`~distmorse.poly.Poly`
or a finite :class:`PointCloud`. For a query point ``x`` the oracle returns
the witness set (all nearest points of Y), from which the Clarke
subdifferential of ``dist_Y`` and its projection to a tangent space are
assembled.

Global minimality on a hypersurface is certified only statistically: the
variety is sampled on an adaptively refined grid inside a search box, the
samples closest to ``x`` seed local foot-point Newton solves, and the
surviving feet are those within a relative band of the smallest distance.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from functools import lru_cache
from itertools import product
from typing import Sequence, Union

import numpy as np
from scipy.spatial import cKDTree

from .numerics import (
    BarycentricSolution,
    NewtonError,
    SingularMatrixError,
    barycentric_zero,
    newton,
    orth_complement,
)
from .poly import DimensionError, Poly, eval_poly, grad, hessian


class DistanceOracleError(RuntimeError):
    """No local foot computation converged."""

    def __init__(self, message: str, diagnostics: dict):
        super().__init__(message)
        self.diagnostics = diagnostics


class EmptyVarietyError(DistanceOracleError):
    pass


class OnTargetError(ValueError):
    """The query point lies on Y, where the subdifferential formula breaks down."""


class SingularSurfaceError(ValueError):
    """The gradient of the surface polynomial vanishes at the query point."""


class NotOnSurfaceError(ValueError):
    pass


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.size == 0:
            raise ValueError("point cloud is empty")
        object.__setattr__(self, "points", pts)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]

    def __hash__(self) -> int:
        return hash(self.points.tobytes())

    def __eq__(self, other) -> bool:
        return isinstance(other, PointCloud) and np.array_equal(self.points, other.points)

    def to_dict(self) -> dict:
        return {"dim": self.dim, "points": self.points.tolist()}

    @classmethod
    def from_dict(cls, data) -> "PointCloud":
        try:
            dim = int(data["dim"])
            pts = data["points"]
        except (KeyError, TypeError) as exc:
            raise ValueError(f"point-cloud JSON is missing field {exc}") from exc
        arr = np.asarray(pts, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != dim:
            raise ValueError(f"point-cloud JSON field 'points' must be a list of length-{dim} lists")
        return cls(arr)


def load_cloud(path) -> PointCloud:
    with open(path) as fh:
        return PointCloud.from_dict(json.load(fh))


Target = Union[Poly, PointCloud]


@dataclass(frozen=True)
class SearchOptions:
    """Knobs of the statistical nearest-point search.

    ``starts`` bounds the number of local foot solves per query (default
    ``64 * n``); ``dedup`` is the witness merge radius factor, scaled by
    ``1 + ||x||``; ``band`` is the relative near-minimal acceptance band;
    ``box`` is the half-width of the search cube; ``resolution`` the
    coarse grid size per axis before refinement.
    """

    starts: int | None = None
    seed: int = 0
    tol: float = 1e-9
    cap: int | None = None
    box: float = 10.0
    resolution: int | None = None
    refine: int = 3
    dedup: float = 1e-6
    band: float = 1e-7
    rays: int = 256

    def starts_for(self, n: int) -> int:
        return self.starts if self.starts is not None else 64 * n

    def cap_for(self, n: int) -> int:
        return self.cap if self.cap is not None else n + 1

    def resolution_for(self, n: int) -> int:
        if self.resolution is not None:
            return self.resolution
        return {1: 512, 2: 128, 3: 32}.get(n, 12)


@dataclass(frozen=True)
class NearestSet:
    x: np.ndarray
    radius: float
    witnesses: np.ndarray
    tol: float
    capped: bool
    local_feet: int = 0

    @property
    def multiplicity(self) -> int:
        return int(self.witnesses.shape[0])


@dataclass(frozen=True)
class Subdifferential:
    vertices: np.ndarray
    projected: bool = False
    tangent_basis: np.ndarray | None = None


@dataclass(frozen=True)
class VarietySample:
    points: np.ndarray
    spacing: float
    box: float


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("DISTMORSE_THREADS", "1")))
    except ValueError:
        return 1


def parallel_map(fn, items: Sequence) -> list:
    """Order-preserving map over independent jobs, capped by DISTMORSE_THREADS."""
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# --------------------------------------------------------------------------- #
# sampling Z(q)
# --------------------------------------------------------------------------- #
def _project_many(q: Poly, pts: np.ndarray, iters: int) -> tuple[np.ndarray, np.ndarray]:
    y = pts.copy()
    for _ in range(iters):
        val = q.eval_many(y)
        g = q.grad_many(y)
        gg = np.einsum("ij,ij->i", g, g)
        step = np.where(gg > 1e-300, val / np.maximum(gg, 1e-300), 0.0)
        y = y - step[:, None] * g
    val = q.eval_many(y)
    g = q.grad_many(y)
    gnorm = np.linalg.norm(g, axis=1)
    ok = np.isfinite(val) & np.all(np.isfinite(y), axis=1) & (gnorm > 1e-12)
    ok &= np.abs(val) <= 1e-10 * np.maximum(1.0, gnorm)
    return y, ok


@lru_cache(maxsize=64)
def variety_sample(q: Poly, box: float, resolution: int, refine: int, seed: int, rays: int) -> VarietySample:
    """Points of ``Z(q)`` inside ``[-box, box]^n``.

    Sign changes on a coarse grid are followed through ``refine`` rounds of
    cell bisection; cell centres and random rays are then projected onto
    the variety with gradient-Newton steps.
    """
    n = q.nvars
    h0 = 2.0 * box / resolution
    axes = [np.arange(resolution + 1)] * n
    nodes = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    vals = q.eval_many(-box + h0 * nodes).reshape((resolution + 1,) * n)
    sign = vals > 0
    # a cell is kept when its 2^n corners disagree in sign
    corner_slices = []
    for corner in product((0, 1), repeat=n):
        corner_slices.append(sign[tuple(slice(c, c + resolution) for c in corner)])
    stack = np.stack(corner_slices)
    active = np.argwhere(stack.any(axis=0) & ~stack.all(axis=0))
    size = h0
    corners = np.array(list(product((0, 1), repeat=n)), dtype=float)
    origin = -box + h0 * active.astype(float)
    for _ in range(refine):
        size /= 2.0
        kids = (origin[:, None, :] + size * corners[None, :, :]).reshape(-1, n)
        kid_corners = (kids[:, None, :] + size * corners[None, :, :]).reshape(-1, n)
        s = q.eval_many(kid_corners).reshape(-1, len(corners)) > 0
        keep = s.any(axis=1) & ~s.all(axis=1)
        origin = kids[keep]
    seeds = origin + 0.5 * size
    rng = np.random.default_rng(seed)
    ray_pts = rng.uniform(-box, box, size=(rays, n))
    y1, ok1 = _project_many(q, seeds, 6) if len(seeds) else (seeds, np.zeros(0, bool))
    y2, ok2 = _project_many(q, ray_pts, 40)
    pts = np.concatenate([y1[ok1], y2[ok2]]) if len(seeds) else y2[ok2]
    if len(pts):
        pts = pts[np.all(np.abs(pts) <= box * (1 + 1e-12), axis=1)]
    if len(pts):
        keys = np.round(pts / (0.25 * size)).astype(np.int64)
        _, first = np.unique(keys, axis=0, return_index=True)
        pts = pts[np.sort(first)]
    return VarietySample(pts, float(size * np.sqrt(n)), box)


def sample_variety(q: Poly, opts: SearchOptions | None = None) -> VarietySample:
    opts = opts or SearchOptions()
    return variety_sample(q, float(opts.box), opts.resolution_for(q.nvars), opts.refine, opts.seed, opts.rays)


# --------------------------------------------------------------------------- #
# local feet
# --------------------------------------------------------------------------- #
def foot_newton(q: Poly, x: np.ndarray, y0: np.ndarray, tol: float = 1e-12) -> np.ndarray | None:
    """Solve ``q(y) = 0, x - y = s grad q(y)`` from ``y0``; None on failure."""
    n = q.nvars
    g0 = grad(q, y0)
    gg = float(g0 @ g0)
    if gg < 1e-300:
        return None
    s0 = float((x - y0) @ g0) / gg

    def F(z):
        y, s = z[:n], z[n]
        return np.concatenate([x - y - s * grad(q, y), [eval_poly(q, y)]])

    def J(z):
        y, s = z[:n], z[n]
        g = grad(q, y)
        M = np.zeros((n + 1, n + 1))
        M[:n, :n] = -np.eye(n) - s * hessian(q, y)
        M[:n, n] = -g
        M[n, :n] = g
        return M

    scale = 1.0 + float(np.linalg.norm(x))
    try:
        res = newton(F, J, np.concatenate([y0, [s0]]), max_iter=40, tol=tol * scale)
    except (NewtonError, SingularMatrixError):
        return None
    y = res.x[:n]
    if not np.all(np.isfinite(y)):
        return None
    return y


def _dedup(points: list[np.ndarray], radius: float) -> list[np.ndarray]:
    kept: list[np.ndarray] = []
    for p in points:
        if all(np.linalg.norm(p - k) > radius for k in kept):
            kept.append(p)
    return kept


def _cloud_nearest(cloud: PointCloud, x: np.ndarray, opts: SearchOptions) -> NearestSet:
    d = np.linalg.norm(cloud.points - x, axis=1)
    r = float(d.min())
    keep = d <= r * (1.0 + opts.band) + opts.tol
    wit = cloud.points[keep]
    n = cloud.dim
    return NearestSet(x, r, wit, opts.tol, bool(len(wit) > opts.cap_for(n)), int(keep.sum()))


def nearest_points(target: Target, x, opts: SearchOptions | None = None) -> NearestSet:
    """All nearest points of Y to ``x`` (the witness set)."""
    opts = opts or SearchOptions()
    x = np.asarray(x, dtype=float)
    if isinstance(target, PointCloud):
        if x.shape != (target.dim,):
            raise DimensionError(f"point has shape {x.shape}, expected ({target.dim},)")
        return _cloud_nearest(target, x, opts)
    q = target
    n = q.nvars
    if x.shape != (n,):
        raise DimensionError(f"point has shape {x.shape}, expected ({n},)")
    vs = sample_variety(q, opts)
    if len(vs.points) == 0:
        raise EmptyVarietyError("no point of Z(q) found in the search box", {"box": opts.box})
    d = np.linalg.norm(vs.points - x, axis=1)
    order = np.argsort(d, kind="stable")
    dmin = d[order[0]]
    cand = order[d[order] <= dmin + 2.0 * vs.spacing]
    # one start per local minimum of the sampled distance; every foot that
    # could be nearest owns such a minimum in its neighbourhood
    if len(cand) > 1:
        nbrs = cKDTree(vs.points[cand]).query_ball_point(vs.points[cand], 2.0 * vs.spacing)
        dc = d[cand]
        cand = cand[[all(dc[i] <= dc[j] for j in nb) for i, nb in enumerate(nbrs)]]
    budget = opts.starts_for(n)
    starts: list[np.ndarray] = []
    for idx in cand:
        y = vs.points[idx]
        if all(np.linalg.norm(y - s) > 1.5 * vs.spacing for s in starts):
            starts.append(y)
            if len(starts) >= budget:
                break
    feet = parallel_map(lambda y0: foot_newton(q, x, y0), starts)
    feet = [f for f in feet if f is not None and np.all(np.abs(f) <= vs.box * 1.05)]
    if not feet:
        raise DistanceOracleError(
            "distance oracle failure: no local foot converged",
            {"starts": len(starts), "candidates": int(len(cand)), "nearest_sample": float(dmin)},
        )
    radius_dedup = opts.dedup * (1.0 + float(np.linalg.norm(x)))
    feet = _dedup(feet, radius_dedup)
    dist = np.array([np.linalg.norm(x - f) for f in feet])
    r = float(dist.min())
    keep = dist <= r * (1.0 + opts.band) + opts.tol * 1e-3
    wit = np.array([f for f, k in zip(feet, keep) if k])
    order = np.lexsort(wit.T[::-1])
    wit = wit[order]
    return NearestSet(x, r, wit, opts.tol, bool(len(wit) > opts.cap_for(n)), len(feet))


def dist(target: Target, x, opts: SearchOptions | None = None) -> float:
    return nearest_points(target, x, opts).radius


def refine_witnesses(target: Target, x: np.ndarray, approx: np.ndarray) -> np.ndarray:
    """Polish approximate feet with local Newton (identity for clouds)."""
    if isinstance(target, PointCloud):
        return approx
    out = []
    for y in approx:
        f = foot_newton(target, x, y)
        out.append(y if f is None else f)
    return np.array(out)


# --------------------------------------------------------------------------- #
# subdifferentials
# --------------------------------------------------------------------------- #
def vertices_from(x: np.ndarray, witnesses: np.ndarray) -> tuple[np.ndarray, float]:
    diffs = x[None, :] - witnesses
    norms = np.linalg.norm(diffs, axis=1)
    r = float(norms.mean())
    return diffs / norms[:, None], r


def subdifferential(target: Target, x, opts: SearchOptions | None = None) -> Subdifferential:
    """``co{(x - y_i) / r}`` over the witness set."""
    opts = opts or SearchOptions()
    ns = nearest_points(target, x, opts)
    if ns.radius <= opts.tol:
        raise OnTargetError(f"x lies on Y (distance {ns.radius:.3e})")
    verts, _ = vertices_from(ns.x, ns.witnesses)
    return Subdifferential(verts, False, None)


def surface_normal(p: Poly, x: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    g = grad(p, x)
    gn = float(np.linalg.norm(g))
    if gn < tol:
        raise SingularSurfaceError(f"grad p vanishes at x (norm {gn:.3e})")
    return g / gn


def project_vertices(p: Poly, x: np.ndarray, vertices: np.ndarray, tol: float = 1e-9) -> Subdifferential:
    nu = surface_normal(p, x, tol)
    proj = vertices - np.outer(vertices @ nu, nu)
    basis = orth_complement([nu], p.nvars)
    return Subdifferential(proj, True, basis)


def subdifferential_restricted(p: Poly, target: Target, x, opts: SearchOptions | None = None) -> Subdifferential:
    """Projection of the ambient subdifferential onto ``T_x Z(p)``."""
    opts = opts or SearchOptions()
    x = np.asarray(x, dtype=float)
    g = grad(p, x)
    if float(np.linalg.norm(g)) < opts.tol:
        raise SingularSurfaceError("x is a singular point of X")
    if abs(eval_poly(p, x)) > 1e-7 * (1.0 + float(np.linalg.norm(g))):
        raise NotOnSurfaceError(f"x is not on X (p(x) = {eval_poly(p, x):.3e})")
    amb = subdifferential(target, x, opts)
    return project_vertices(p, x, amb.vertices, opts.tol)


def min_norm_in_hull(vectors: np.ndarray) -> tuple[np.ndarray, float]:
    """Weights of the min-norm point of a convex hull with many vertices."""
    from scipy.optimize import nnls

    V = np.asarray(vectors, dtype=float)
    big = 1e3 * max(1.0, float(np.abs(V).max()))
    A = np.vstack([V.T, big * np.ones(len(V))])
    b = np.concatenate([np.zeros(V.shape[1]), [big]])
    lam, _ = nnls(A, b)
    lam = lam / lam.sum()
    return lam, float(np.linalg.norm(lam @ V))


def is_critical(
    p: Poly | None, target: Target, x, tol: float = 1e-8, opts: SearchOptions | None = None
) -> tuple[bool, BarycentricSolution]:
    """Whether 0 lies in the (projected) subdifferential at ``x``."""
    opts = opts or SearchOptions()
    x = np.asarray(x, dtype=float)
    sub = subdifferential(target, x, opts) if p is None else subdifferential_restricted(p, target, x, opts)
    V = sub.vertices
    if V.shape[0] > V.shape[1] + 1:
        lam, res = min_norm_in_hull(V)
        return res <= tol, BarycentricSolution(lam, bool(res <= tol), res)
    sol = barycentric_zero(V, tol, scale=1.0)
    return sol.feasible, sol


def with_options(opts: SearchOptions | None, **kw) -> SearchOptions:
    return replace(opts or SearchOptions(), **kw)
