"""Critical points of ``dist_Y`` restricted to ``X = Z(p)`` (or to all of R^n).

Candidates solve a square polynomial system in the unknowns

    x, y_0..y_k, lambda_0..lambda_k, mu, sigma_0..sigma_k, r

whose equations say that a convex combination of the ``x - y_i`` is normal
to X, that every ``y_i`` lies on ``Y = Z(q)`` at distance ``r`` from ``x``,
and that ``x - y_i`` is normal to Y at ``y_i``. Every converged solution is
validated against the distance oracle: the algebraic set also contains
configurations whose feet are critical but not nearest, and those are kept
apart as "algebraic-only".

Finite targets (a point, a point cloud) use the same machinery with the
witnesses held fixed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from itertools import combinations

import numpy as np
from scipy.spatial import cKDTree

from .distfield import (
    PointCloud,
    SearchOptions,
    Target,
    is_critical,
    min_norm_in_hull,
    nearest_points,
    parallel_map,
    sample_variety,
)
from .numerics import (
    NewtonError,
    SingularMatrixError,
    inertia,
    newton,
    orth_complement,
    singular_values,
    sym_eig,
)
from .poly import Poly, eval_poly, grad, hessian

log = logging.getLogger(__name__)

LAMBDA_FLOOR = 1e-6
RESIDUAL_TOL = 1e-9
RANK_TOL = 1e-7
ZERO_BAND = 1e-7


class FocalDegeneracyError(ArithmeticError):
    """``x`` is (numerically) a focal point of Y along the normal through ``y``."""


class NotCriticalError(ValueError):
    pass


@dataclass
class CriticalPoint:
    x: np.ndarray
    value: float
    witnesses: np.ndarray
    lambdas: np.ndarray
    mu: float | None = None
    sigmas: np.ndarray | None = None
    k: int = 0
    iota: int | None = None
    nondegenerate: bool | None = None
    residual: float = float("nan")
    validated: bool = False
    flags: list[str] = field(default_factory=list)
    min_eig: float | None = None

    @property
    def clean(self) -> bool:
        return self.validated and bool(self.nondegenerate) and not self.flags

    def to_dict(self) -> dict:
        return {
            "x": self.x.tolist(),
            "value": self.value,
            "k": self.k,
            "iota": self.iota,
            "witnesses": self.witnesses.tolist(),
            "lambdas": self.lambdas.tolist(),
            "mu": self.mu,
            "sigmas": None if self.sigmas is None else self.sigmas.tolist(),
            "nondegenerate": self.nondegenerate,
            "residual": self.residual,
            "validated": self.validated,
            "flags": list(self.flags),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CriticalPoint":
        return cls(
            x=np.asarray(d["x"], dtype=float),
            value=float(d["value"]),
            witnesses=np.asarray(d.get("witnesses", []), dtype=float),
            lambdas=np.asarray(d.get("lambdas", [1.0]), dtype=float),
            mu=d.get("mu"),
            sigmas=None if d.get("sigmas") is None else np.asarray(d["sigmas"], dtype=float),
            k=int(d["k"]),
            iota=d.get("iota"),
            nondegenerate=d.get("nondegenerate"),
            residual=float(d.get("residual", float("nan"))),
            validated=bool(d.get("validated", False)),
            flags=list(d.get("flags", [])),
        )


# --------------------------------------------------------------------------- #
# the square systems
# --------------------------------------------------------------------------- #
@dataclass(frozen=True)
class CriticalSystem:
    """Residual and Jacobian of the k-critical system in packed unknowns."""

    p: Poly | None
    q: Poly
    k: int
    n: int

    @property
    def ambient(self) -> bool:
        return self.p is None

    @property
    def size(self) -> int:
        n, k1 = self.n, self.k + 1
        return n + n * k1 + k1 + (0 if self.ambient else 1) + k1 + 1

    @property
    def n_equations(self) -> int:
        n, k1 = self.n, self.k + 1
        return n + 1 + (0 if self.ambient else 1) + 2 * k1 + n * k1

    def pack(self, x, ys, lam, mu, sig, r) -> np.ndarray:
        parts = [np.asarray(x, float), np.asarray(ys, float).ravel(), np.asarray(lam, float)]
        if not self.ambient:
            parts.append([float(mu)])
        parts += [np.asarray(sig, float), [float(r)]]
        return np.concatenate(parts)

    def unpack(self, z: np.ndarray):
        n, k1 = self.n, self.k + 1
        i = 0
        x = z[i : i + n]
        i += n
        ys = z[i : i + n * k1].reshape(k1, n)
        i += n * k1
        lam = z[i : i + k1]
        i += k1
        mu = None
        if not self.ambient:
            mu = float(z[i])
            i += 1
        sig = z[i : i + k1]
        i += k1
        r = float(z[i])
        return x, ys, lam, mu, sig, r

    def residual(self, z: np.ndarray) -> np.ndarray:
        k1 = self.k + 1
        x, ys, lam, mu, sig, r = self.unpack(z)
        out = []
        if self.ambient:
            out.append(lam @ (x[None, :] - ys))
        else:
            out.append(x - mu * grad(self.p, x) - lam @ ys)
        out.append([lam.sum() - 1.0])
        if not self.ambient:
            out.append([eval_poly(self.p, x)])
        out.append([eval_poly(self.q, y) for y in ys])
        out.append([float((x - y) @ (x - y)) - r * r for y in ys])
        for i in range(k1):
            out.append(x - ys[i] - sig[i] * grad(self.q, ys[i]))
        return np.concatenate([np.asarray(o, float).ravel() for o in out])

    def jacobian(self, z: np.ndarray) -> np.ndarray:
        n, k1 = self.n, self.k + 1
        x, ys, lam, mu, sig, r = self.unpack(z)
        N = self.size
        Jm = np.zeros((self.n_equations, N))
        cx = 0
        cy = n
        cl = cy + n * k1
        cmu = cl + k1
        cs = cmu + (0 if self.ambient else 1)
        cr = cs + k1
        row = 0
        # convex-combination block
        if self.ambient:
            Jm[row : row + n, cx : cx + n] = lam.sum() * np.eye(n)
            for i in range(k1):
                Jm[row : row + n, cl + i] = x - ys[i]
        else:
            Jm[row : row + n, cx : cx + n] = np.eye(n) - mu * hessian(self.p, x)
            for i in range(k1):
                Jm[row : row + n, cl + i] = -ys[i]
            Jm[row : row + n, cmu] = -grad(self.p, x)
        for i in range(k1):
            Jm[row : row + n, cy + n * i : cy + n * (i + 1)] = -lam[i] * np.eye(n)
        row += n
        Jm[row, cl : cl + k1] = 1.0
        row += 1
        if not self.ambient:
            Jm[row, cx : cx + n] = grad(self.p, x)
            row += 1
        gqs = [grad(self.q, y) for y in ys]
        for i in range(k1):
            Jm[row, cy + n * i : cy + n * (i + 1)] = gqs[i]
            row += 1
        for i in range(k1):
            d = x - ys[i]
            Jm[row, cx : cx + n] = 2.0 * d
            Jm[row, cy + n * i : cy + n * (i + 1)] = -2.0 * d
            Jm[row, cr] = -2.0 * r
            row += 1
        for i in range(k1):
            Jm[row : row + n, cx : cx + n] = np.eye(n)
            Jm[row : row + n, cy + n * i : cy + n * (i + 1)] = -np.eye(n) - sig[i] * hessian(self.q, ys[i])
            Jm[row : row + n, cs + i] = -gqs[i]
            row += n
        return Jm


def assemble_critical_system(p: Poly | None, q: Poly, k: int) -> CriticalSystem:
    """Square k-critical system; ``p=None`` selects the ambient variant."""
    n = q.nvars
    if p is not None and p.nvars != n:
        raise ValueError(f"surface has {p.nvars} variables but target has {n}")
    if not 0 <= k <= n:
        raise ValueError(f"k={k} outside 0..{n}")
    sys_ = CriticalSystem(p, q, k, n)
    assert sys_.size == sys_.n_equations
    return sys_


@dataclass(frozen=True)
class FixedWitnessSystem:
    """Critical system for a finite target with witnesses held fixed."""

    p: Poly
    ys: np.ndarray

    @property
    def n(self) -> int:
        return self.ys.shape[1]

    @property
    def k(self) -> int:
        return self.ys.shape[0] - 1

    def unpack(self, z):
        n, k1 = self.n, self.k + 1
        return z[:n], z[n : n + k1], float(z[n + k1]), float(z[n + k1 + 1])

    def residual(self, z):
        x, lam, mu, r = self.unpack(z)
        ys = self.ys
        return np.concatenate(
            [
                x - mu * grad(self.p, x) - lam @ ys,
                [lam.sum() - 1.0, eval_poly(self.p, x)],
                [float((x - y) @ (x - y)) - r * r for y in ys],
            ]
        )

    def jacobian(self, z):
        x, lam, mu, r = self.unpack(z)
        n, k1 = self.n, self.k + 1
        N = n + k1 + 2
        Jm = np.zeros((N, N))
        Jm[:n, :n] = np.eye(n) - mu * hessian(self.p, x)
        Jm[:n, n : n + k1] = -self.ys.T
        Jm[:n, n + k1] = -grad(self.p, x)
        Jm[n, n : n + k1] = 1.0
        Jm[n + 1, :n] = grad(self.p, x)
        for i, y in enumerate(self.ys):
            Jm[n + 2 + i, :n] = 2.0 * (x - y)
            Jm[n + 2 + i, n + k1 + 1] = -2.0 * r
        return Jm


# --------------------------------------------------------------------------- #
# seeding
# --------------------------------------------------------------------------- #
@dataclass(frozen=True)
class SolveOptions:
    """Budget and tolerances of the multistart critical-point search.

    ``starts`` caps Newton runs per index k (default ``128 * n``).
    ``search`` configures the distance oracle used for seeding and
    validation.
    """

    starts: int | None = None
    seed: int = 0
    tol: float = RESIDUAL_TOL
    search: SearchOptions = field(default_factory=SearchOptions)

    def starts_for(self, n: int) -> int:
        return self.starts if self.starts is not None else 128 * n


@dataclass
class _Probe:
    x: np.ndarray
    normal: np.ndarray | None
    feet: list[np.ndarray]
    dists: list[float]
    dirs: list[np.ndarray]


def _probe_points(p: Poly | None, target: Target, opts: SolveOptions) -> tuple[np.ndarray, float]:
    n = target.nvars if isinstance(target, Poly) else target.dim
    so = opts.search
    if p is not None:
        vs = sample_variety(p, replace(so, seed=so.seed + 7919))
        return vs.points, vs.spacing
    if isinstance(target, Poly):
        ref = sample_variety(target, so).points
    else:
        ref = target.points
    lo = ref.min(axis=0)
    hi = ref.max(axis=0)
    pad = 0.05 * float(np.max(hi - lo)) + 1e-3
    lo, hi = lo - pad, hi + pad
    per_axis = {1: 2048, 2: 96, 3: 24}.get(n, 8)
    axes = [np.linspace(lo[i], hi[i], per_axis) for i in range(n)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    step = float(np.max((hi - lo) / (per_axis - 1)))
    return grid, step * np.sqrt(n)


def _target_samples(target: Target, so: SearchOptions) -> tuple[np.ndarray, float]:
    if isinstance(target, PointCloud):
        return target.points, 0.0
    vs = sample_variety(target, so)
    return vs.points, vs.spacing


def _cluster_feet(x, cand, ys, dists, nbrs, wide: bool = True):
    """Pick approximate feet among the band samples ``cand`` of the target.

    Returns indices into ``cand`` (nearest member of each sheet first) and
    the unit directions towards them.
    """
    # feet are local minima of the distance along the sampled target; the
    # graph neighbors outside ``cand`` are farther than the band and never win
    pos = {int(c): t for t, c in enumerate(cand)}
    reps: list[int] = []
    for j in np.argsort(dists, kind="stable"):
        near = [pos[t] for t in nbrs[int(cand[j])] if t in pos]
        if all(dists[j] <= dists[u] for u in near):
            reps.append(int(j))
    if not reps:
        reps = [int(np.argmin(dists))]
    # each sample joins the sheet of the closest representative
    R = ys[cand[reps]]
    label = np.argmin(np.linalg.norm(ys[cand][:, None, :] - R[None, :, :], axis=2), axis=1)
    pts = ys[cand]
    U = pts - x[None, :]
    U = U / np.maximum(np.linalg.norm(U, axis=1), 1e-300)[:, None]
    # a sheet seen over a wide angle (a center of curvature, a capped point)
    # contributes extra well-separated feet
    cos_wide = np.cos(np.radians(60.0))
    extra = []
    for c, j in enumerate(list(reps) if wide else []):
        members = np.nonzero(label == c)[0]
        if len(members) < 3:
            continue
        chosen = [j]
        for _ in range(x.size):
            sims = np.max(U[members] @ U[chosen].T, axis=1)
            t = int(np.argmin(sims))
            if sims[t] > cos_wide:
                break
            chosen.append(int(members[t]))
        extra += chosen[1:]
    reps = reps + extra
    return reps, [U[j] for j in reps]


def _build_probes(p, target, opts) -> tuple[list[_Probe], float, np.ndarray]:
    probes_x, h_probe = _probe_points(p, target, opts)
    ys, h_y = _target_samples(target, opts.search)
    if len(ys) == 0 or len(probes_x) == 0:
        return [], h_probe, probes_x
    tree = cKDTree(ys)
    d0, _ = tree.query(probes_x, k=1)
    band = 1.1 * h_probe + 0.5 * h_y
    nbrs: list[list[int]] = [[] for _ in range(len(ys))]
    if not isinstance(target, PointCloud):
        for a, b in tree.query_pairs(2.0 * h_y, output_type="ndarray"):
            nbrs[a].append(int(b))
            nbrs[b].append(int(a))
    balls = tree.query_ball_point(probes_x, d0 + band)
    probes = []
    for i, x in enumerate(probes_x):
        cand = np.asarray(balls[i], dtype=int)
        cd = np.linalg.norm(ys[cand] - x, axis=1)
        if isinstance(target, PointCloud):
            reps = list(range(len(cand)))
            dirs = [(ys[c] - x) / max(np.linalg.norm(ys[c] - x), 1e-300) for c in cand]
        else:
            reps, dirs = _cluster_feet(x, cand, ys, cd, nbrs, wide=d0[i] > 4.0 * band)
        normal = None
        if p is not None:
            g = grad(p, x)
            gn = np.linalg.norm(g)
            normal = g / gn if gn > 0 else None
        probes.append(
            _Probe(x, normal, [ys[cand[j]] for j in reps], [float(cd[j]) for j in reps], [dirs[t] for t in range(len(reps))])
        )
    return probes, h_probe, probes_x


def _tangent(v: np.ndarray, normal: np.ndarray | None) -> np.ndarray:
    if normal is None:
        return v
    return v - (v @ normal) * normal


def _spread_subsets(dirs: list[np.ndarray], size: int, limit: int = 6) -> list[tuple[int, ...]]:
    m = len(dirs)
    if m < size:
        return []
    if m <= limit:
        return list(combinations(range(m), size))
    chosen = [0]
    while len(chosen) < size:
        best = max(
            (j for j in range(m) if j not in chosen),
            key=lambda j: min(-float(dirs[j] @ dirs[c]) for c in chosen),
        )
        chosen.append(best)
    return [tuple(sorted(chosen))]


def _seed_list(p, target, k: int, probes: list[_Probe], h_probe: float, opts: SolveOptions, rng) -> list:
    """Ordered seeds ``(x, feet)`` for index k: structural seeds first, then random fill."""
    budget = opts.starts_for(len(probes[0].x)) if probes else 0
    seeds: list[tuple[float, np.ndarray, np.ndarray]] = []
    if k == 0:
        xs = np.array([pr.x for pr in probes])
        dvals = np.array([pr.dists[0] for pr in probes])
        gnorm = np.array([np.linalg.norm(_tangent(-pr.dirs[0], pr.normal)) for pr in probes])
        tree = cKDTree(xs)
        nbrs = tree.query_ball_point(xs, r=2.5 * h_probe)
        for i, nb in enumerate(nbrs):
            nb = [j for j in nb if j != i]
            if not nb:
                continue
            is_min = all(dvals[i] <= dvals[j] for j in nb)
            is_max = all(dvals[i] >= dvals[j] for j in nb)
            flat = gnorm[i] <= min(gnorm[j] for j in nb) and gnorm[i] < 0.2
            if is_min or is_max or flat:
                seeds.append((float(gnorm[i]), probes[i].x, np.array([probes[i].feet[0]])))
    else:
        for pr in probes:
            if len(pr.feet) < k + 1:
                continue
            for sub in _spread_subsets(pr.dirs, k + 1):
                V = np.array([_tangent(-pr.dirs[j], pr.normal) for j in sub])
                _, score = min_norm_in_hull(V)
                spread = max(pr.dists[j] for j in sub) - min(pr.dists[j] for j in sub)
                if score < 0.5:
                    seeds.append((score + spread, pr.x, np.array([pr.feet[j] for j in sub])))
    seeds.sort(key=lambda s: s[0])
    # thin: one seed per cell of size ~2 probe spacings
    cell = 2.0 * max(h_probe, 1e-9)
    taken: set = set()
    out = []
    for _, x, feet in seeds:
        key = tuple(np.floor(x / cell).astype(np.int64))
        if key in taken:
            continue
        taken.add(key)
        out.append((x, feet))
        if len(out) >= budget:
            return out
    # random fill: a few unstructured starts as a safety net
    cand = [pr for pr in probes if len(pr.feet) >= k + 1]
    limit = min(budget, len(out) + max(budget // 8, 1))
    if cand:
        order = rng.permutation(len(cand))
        for j in order:
            if len(out) >= limit:
                break
            pr = cand[j]
            sub = _spread_subsets(pr.dirs, k + 1)[0]
            out.append((pr.x, np.array([pr.feet[t] for t in sub])))
    return out


# --------------------------------------------------------------------------- #
# solving
# --------------------------------------------------------------------------- #
def _initial_state(p, q, x, feet):
    diffs = x[None, :] - feet
    r = float(np.mean(np.linalg.norm(diffs, axis=1)))
    V = diffs / np.maximum(np.linalg.norm(diffs, axis=1), 1e-300)[:, None]
    normal = None
    if p is not None:
        g = grad(p, x)
        normal = g / max(np.linalg.norm(g), 1e-300)
    T = np.array([_tangent(v, normal) for v in V])
    k1 = len(feet)
    if k1 == 1:
        lam = np.ones(1)
    else:
        lam, _ = min_norm_in_hull(T)
        lam = np.clip(lam, 0.05, None)
        lam = lam / lam.sum()
    mu = None
    if p is not None:
        g = grad(p, x)
        mu = float((x - lam @ feet) @ g) / max(float(g @ g), 1e-300)
    sig = None
    if q is not None:
        sig = []
        for y in feet:
            gq = grad(q, y)
            sig.append(float((x - y) @ gq) / max(float(gq @ gq), 1e-300))
        sig = np.array(sig)
    return lam, mu, sig, r


def _run_newton(system, z0, tol):
    try:
        res = newton(system.residual, system.jacobian, z0, max_iter=30, tol=tol * 1e-2)
        return res.x, res.residual, None
    except NewtonError as exc:
        if exc.residual <= tol:
            return exc.x, exc.residual, None
        return None, exc.residual, "no-convergence"
    except SingularMatrixError:
        pass
    # singular Jacobian: a continuum of solutions is typical (symmetric inputs).
    # Minimum-norm Gauss-Newton steps still land on it; the result is flagged.
    z = np.array(z0, float)
    f = system.residual(z)
    res = float(np.linalg.norm(f))
    for _ in range(60):
        if res <= tol * 1e-2:
            break
        dz = np.linalg.lstsq(system.jacobian(z), -f, rcond=1e-10)[0]
        t = 1.0
        for _ in range(20):
            ft = system.residual(z + t * dz)
            rt = float(np.linalg.norm(ft))
            if np.isfinite(rt) and rt < res:
                break
            t *= 0.5
        else:
            break
        z, f, res = z + t * dz, ft, rt
    if res <= tol:
        return z, res, "singular-jacobian"
    return None, res, "singular"


def _witness_match(a: np.ndarray, b: np.ndarray, radius: float) -> bool:
    if len(a) != len(b):
        return False
    return all(np.min(np.linalg.norm(b - y, axis=1)) <= radius for y in a)


def _subset_of(a: np.ndarray, b: np.ndarray, radius: float) -> bool:
    return all(np.min(np.linalg.norm(b - y, axis=1)) <= radius for y in a)


def _validate(cp: CriticalPoint, target: Target, so: SearchOptions) -> str:
    """'ok', 'capped' or the reason the solution is only algebraic."""
    ns = nearest_points(target, cp.x, so)
    radius = 10.0 * so.dedup * (1.0 + float(np.linalg.norm(cp.x)))
    if ns.radius < cp.value * (1.0 - 1e-7) - 1e-12:
        return "closer-point"
    if ns.capped:
        # a continuum of nearest points: every witness at the minimal distance counts
        return "capped" if abs(ns.radius - cp.value) <= 1e-7 * (1.0 + cp.value) else "witness-mismatch"
    if _witness_match(cp.witnesses, ns.witnesses, radius):
        return "ok"
    return "witness-mismatch"


def _finish_candidate(p, target, system, z, res, opts: SolveOptions):
    """Turn a converged packed state into a CriticalPoint, or None if not critical."""
    so = opts.search
    if isinstance(system, CriticalSystem):
        x, ys, lam, mu, sig, r = system.unpack(z)
    else:
        x, lam, mu, r = system.unpack(z)
        ys, sig = system.ys, None
    r = abs(r)
    if not np.all(np.isfinite(z)) or np.any(np.abs(x) > so.box):
        return None, "outside-box"
    if r <= max(so.tol, 1e-9):
        return None, "on-target"
    k1 = len(ys)
    dedup = so.dedup * (1.0 + float(np.linalg.norm(x)))
    for a, b in combinations(range(k1), 2):
        if np.linalg.norm(ys[a] - ys[b]) <= dedup:
            return None, "coincident-witnesses"
    if np.any(lam < -1e-9):
        return None, "negative-lambda"
    order = np.lexsort(ys.T[::-1])
    cp = CriticalPoint(
        x=x.copy(),
        value=r,
        witnesses=ys[order].copy(),
        lambdas=lam[order].copy(),
        mu=mu,
        sigmas=None if sig is None else np.asarray(sig)[order].copy(),
        k=k1 - 1,
        residual=res,
    )
    return cp, None


def _solve_one(p, target, k, x0, feet, opts: SolveOptions):
    if isinstance(target, Poly):
        system = assemble_critical_system(p, target, k)
        lam, mu, sig, r = _initial_state(p, target, x0, feet)
        z0 = system.pack(x0, feet, lam, mu if mu is not None else 0.0, sig, r)
    else:
        system = FixedWitnessSystem(p, np.asarray(feet, float))
        lam, mu, _, r = _initial_state(p, None, x0, feet)
        z0 = np.concatenate([x0, lam, [mu, r]])
    z, res, why = _run_newton(system, z0, opts.tol)
    if z is None:
        return None, why
    cp, reason = _finish_candidate(p, target, system, z, res, opts)
    if cp is not None and why:
        cp.flags.append(why)
    return cp, reason


def _cloud_feet_index(cloud: PointCloud, feet: np.ndarray) -> np.ndarray:
    idx = [int(np.argmin(np.linalg.norm(cloud.points - f, axis=1))) for f in feet]
    return cloud.points[sorted(set(idx))]


def solve_critical_points(
    p: Poly | None,
    target: Target,
    k_max: int | None = None,
    opts: SolveOptions | None = None,
    *,
    k_min: int | None = None,
    diagnostics: dict | None = None,
) -> list[CriticalPoint]:
    """Validated critical points of ``dist_Y`` on X for ``k_min <= k <= k_max``.

    ``p=None`` means X is all of R^n (ambient mode, k starts at 1). Points
    whose witnesses are not the true nearest set are recorded in
    ``diagnostics["algebraic_only"]``; flagged points (capped witness sets,
    boundary-degenerate multipliers) stay in the returned list with their
    flags set. The list is sorted by (k, value, x).
    """
    opts = opts or SolveOptions()
    so = opts.search
    n = target.nvars if isinstance(target, Poly) else target.dim
    if p is not None and p.nvars != n:
        raise ValueError(f"dimension mismatch: surface in R^{p.nvars}, target in R^{n}")
    dim_x = n if p is None else n - 1
    if k_max is None:
        k_max = dim_x
    k_max = min(k_max, n)
    if k_min is None:
        k_min = 1 if p is None else 0
    if isinstance(target, PointCloud):
        k_max = min(k_max, len(target) - 1)
    diag = diagnostics if diagnostics is not None else {}
    diag.setdefault("starts", {})
    diag.setdefault("converged", {})
    diag.setdefault("failures", {})
    diag.setdefault("rejected", {})
    diag.setdefault("algebraic_only", [])
    rng = np.random.default_rng(opts.seed)
    probes, h_probe, _ = _build_probes(p, target, opts)
    diag["probe_points"] = len(probes)
    found: list[CriticalPoint] = []

    def known(x):
        return any(np.linalg.norm(c.x - x) <= so.dedup * (1.0 + float(np.linalg.norm(x))) * 10 for c in found)

    for k in range(k_min, k_max + 1):
        if not probes:
            break
        seeds = _seed_list(p, target, k, probes, h_probe, opts, rng)
        if isinstance(target, PointCloud):
            seeds = [(x0, _cloud_feet_index(target, feet)) for x0, feet in seeds]
            seeds = [(x0, feet) for x0, feet in seeds if len(feet) == k + 1]
        diag["starts"][k] = len(seeds)
        outcomes = parallel_map(lambda s: _solve_one(p, target, k, s[0], s[1], opts), seeds)
        conv = 0
        for cp, why in outcomes:
            if cp is None:
                key = why or "unknown"
                bucket = diag["failures"] if key in ("no-convergence", "singular") else diag["rejected"]
                bucket[key] = bucket.get(key, 0) + 1
                continue
            conv += 1
            if known(cp.x):
                continue
            status = _validate(cp, target, so)
            if status == "ok":
                cp.validated = True
            elif status == "capped":
                cp.validated = True
                cp.flags.append("capped")
            else:
                if not any(np.linalg.norm(a["x"] - cp.x) < 1e-6 for a in diag["algebraic_only"]):
                    diag["algebraic_only"].append({"x": cp.x, "k": cp.k, "reason": status})
                continue
            if float(cp.lambdas.min()) < LAMBDA_FLOOR:
                cp = _demote(p, target, cp, opts)
            found.append(cp)
        diag["converged"][k] = conv
    found.sort(key=lambda c: (c.k, round(c.value, 9), tuple(np.round(c.x, 9))))
    return found


def _demote(p, target, cp: CriticalPoint, opts: SolveOptions) -> CriticalPoint:
    """Drop a vanishing multiplier's witness and re-solve one index lower."""
    keep = cp.lambdas >= LAMBDA_FLOOR
    if keep.sum() >= 1 and keep.sum() < len(keep):
        got, _ = _solve_one(p, target, int(keep.sum()) - 1, cp.x, cp.witnesses[keep], opts)
        if got is not None and _validate(got, target, opts.search) == "ok" and got.lambdas.min() >= LAMBDA_FLOOR:
            got.validated = True
            return got
    if "boundary-degenerate" not in cp.flags:
        cp.flags.append("boundary-degenerate")
    return cp


# --------------------------------------------------------------------------- #
# second-order classification
# --------------------------------------------------------------------------- #
def shape_operator(q: Poly, y, toward) -> np.ndarray:
    """Second fundamental form of Z(q) at ``y`` w.r.t. the unit normal ``toward``.

    Returned as an n x n matrix that vanishes on the normal line. Positive
    eigenvalues mean the hypersurface bends towards ``toward``.
    """
    y = np.asarray(y, float)
    nu = np.asarray(toward, float)
    nu = nu / np.linalg.norm(nu)
    g = grad(q, y)
    gg = float(g @ g)
    if gg < 1e-24:
        raise ValueError("singular point of Y")
    P = np.eye(len(y)) - np.outer(nu, nu)
    Q = P @ (-(float(g @ nu)) * hessian(q, y) / gg) @ P
    return 0.5 * (Q + Q.T)


def principal_curvatures(q: Poly, y, toward) -> np.ndarray:
    """Principal curvatures of Z(q) at ``y``, signed w.r.t. the normal ``toward``."""
    Q = shape_operator(q, y, toward)
    nu = np.asarray(toward, float) / np.linalg.norm(toward)
    L = orth_complement([nu], len(nu))
    vals, _ = sym_eig(L.T @ Q @ L)
    return vals


def hessian_dist_sheet(q: Poly, y, x, r: float | None = None, *, focal_tol: float = 1e-9) -> np.ndarray:
    """Hessian at ``x`` of the distance to the sheet of Z(q) through the foot ``y``.

    The shape operator eigenvalues ``kappa`` (signed towards ``x``) map to
    ``-kappa / (1 - r kappa)``; the normal direction stays in the kernel.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if r is None:
        r = float(np.linalg.norm(x - y))
    nu = (x - y) / np.linalg.norm(x - y)
    Q = shape_operator(q, y, nu)
    vals, vecs = sym_eig(Q)
    denom = 1.0 - r * vals
    if np.any(np.abs(denom) < focal_tol):
        raise FocalDegeneracyError(f"x is focal for Y at y (1 - r*kappa = {denom[np.argmin(np.abs(denom))]:.3e})")
    beta = -vals / denom
    # the normal line stays exactly in the kernel
    normal_j = int(np.argmax(np.abs(vecs.T @ nu)))
    beta[normal_j] = 0.0
    H = vecs @ np.diag(beta) @ vecs.T
    return 0.5 * (H + H.T)


def hessian_dist_point(y, x) -> np.ndarray:
    d = np.asarray(x, float) - np.asarray(y, float)
    r = float(np.linalg.norm(d))
    w = d / r
    return (np.eye(len(d)) - np.outer(w, w)) / r


def classify(p: Poly | None, target: Target, cp: CriticalPoint) -> CriticalPoint:
    """Fill ``k``, ``iota`` and ``nondegenerate`` for a validated critical point.

    Condition 1 asks every leave-one-out family of (tangential) vertex
    differentials to be independent. Condition 2 asks the lambda-weighted
    Hessian of the Lagrangian to be nondegenerate on ``V(x)``, the common
    kernel of the differentials inside ``T_x X``; its negative inertia is
    the quadratic index.
    """
    x = cp.x
    n = len(x)
    W = cp.witnesses
    r = cp.value
    V = (x[None, :] - W) / r
    k = len(W) - 1
    normal = None
    if p is not None:
        g = grad(p, x)
        normal = g / np.linalg.norm(g)
    D = np.array([_tangent(v, normal) for v in V])
    cond1 = True
    for i in range(k + 1):
        rest = np.delete(D, i, axis=0)
        if len(rest) and singular_values(rest).min() <= RANK_TOL:
            cond1 = False
            break
    span = list(V) + ([normal] if normal is not None else [])
    L = orth_complement(span, n)
    dim_x = n if p is None else n - 1
    flags = list(cp.flags)
    # combined multiplier-weighted Hessian of the Lagrangian
    lam = cp.lambdas
    try:
        if isinstance(target, Poly):
            Hs = [hessian_dist_sheet(target, y, x, r) for y in W]
        else:
            Hs = [hessian_dist_point(y, x) for y in W]
    except FocalDegeneracyError:
        if "focal" not in flags:
            flags.append("focal")
        return replace(cp, k=k, iota=None, nondegenerate=False, flags=flags)
    M = sum(l * H for l, H in zip(lam, Hs))
    # the zero band scales with the size of the summands, so exact
    # cancellation between sheets reads as degenerate
    scale = sum(l * float(np.linalg.norm(H)) for l, H in zip(lam, Hs))
    if p is not None:
        g = grad(p, x)
        mult = -float((lam @ V) @ g) / float(g @ g)
        Hp = mult * hessian(p, x)
        M = M + Hp
        scale += float(np.linalg.norm(Hp))
    band = ZERO_BAND * max(scale, float(np.linalg.norm(M)), 1e-300)
    if L.shape[1]:
        R = L.T @ M @ L
        tri = inertia(R, band)
        iota = tri.neg
        zero = tri.zero
        eigs, _ = sym_eig(R)
        min_eig = float(np.min(np.abs(eigs)))
    else:
        iota, zero, min_eig = 0, 0, None
    nondeg = cond1 and zero == 0 and float(lam.min()) > LAMBDA_FLOOR and L.shape[1] == dim_x - k
    return replace(cp, k=k, iota=iota, nondegenerate=bool(nondeg), flags=flags, min_eig=min_eig)


def planar_index(kappa0: float, kappa1: float, d: float, band: float = 1e-9) -> int | None:
    """Quadratic index of a two-witness critical point of a planar curve distance.

    Returns 0 or 1, or None inside the equality band (degenerate).
    Curvatures are signed towards the critical point and must stay below
    ``1/d``.
    """
    if d <= 0:
        raise ValueError("distance must be positive")
    if kappa0 >= 1.0 / d or kappa1 >= 1.0 / d:
        raise ValueError("curvatures must be below 1/d (x would be at or beyond a focal point)")
    c = 1.0 / (2.0 * d)
    lhs = (kappa0 - c) * (kappa1 - c)
    rhs = c * c
    if abs(lhs - rhs) <= band * max(rhs, abs(lhs)):
        return None
    return 0 if lhs > rhs else 1


def point_target_index(p: Poly, x, y, tol: float = 1e-7) -> int:
    """Quadratic index of a critical point of ``||. - y||`` on ``Z(p)``.

    Counts tangential eigenvalues of the second fundamental form (taken in
    the direction of ``y - x``) that exceed ``1 / ||x - y||``.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    g = grad(p, x)
    gn = float(np.linalg.norm(g))
    if gn < 1e-12:
        raise ValueError("grad p vanishes at x")
    ok, _ = is_critical(p, PointCloud(y[None, :]), x, tol=tol)
    if not ok:
        raise NotCriticalError("x is not a critical point of the distance to y on X")
    H = hessian(p, x)
    if float(g @ (y - x)) < 0:
        g, H = -g, -H
    nu = g / gn
    L = orth_complement([nu], len(x))
    Q = L.T @ (-H / gn) @ L
    vals, _ = sym_eig(Q)
    return int(np.sum(vals > 1.0 / float(np.linalg.norm(x - y))))


def bottlenecks(q: Poly, k: int = 1, opts: SolveOptions | None = None, diagnostics: dict | None = None) -> list[CriticalPoint]:
    """Ambient critical points of ``dist_{Z(q)}`` with exactly ``k + 1`` witnesses."""
    if k < 1:
        raise ValueError("bottlenecks need k >= 1")
    pts = solve_critical_points(None, q, k, opts, k_min=k, diagnostics=diagnostics)
    return [classify(None, q, c) for c in pts]


def analyze(
    p: Poly | None,
    target: Target,
    k_max: int | None = None,
    opts: SolveOptions | None = None,
    diagnostics: dict | None = None,
) -> list[CriticalPoint]:
    """Solve, validate and classify in one call."""
    pts = solve_critical_points(p, target, k_max, opts, diagnostics=diagnostics)
    return [classify(p, target, c) for c in pts]
