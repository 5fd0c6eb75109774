"""Critical points of the distance function to a finite point set.

For a cloud in general position every critical point is the circumcenter of
some subset Y' of at most n + 1 points that (i) lies in the convex hull of
Y' and (ii) has no other cloud point strictly closer than the
circumradius. The enumeration below walks all such subsets.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .distfield import PointCloud
from .numerics import SingularMatrixError, barycentric_zero, solve_linear

log = logging.getLogger(__name__)

DEFAULT_MAX_POINTS = 25
TIE_BAND = 1e-9


class GeneralPositionError(ValueError):
    def __init__(self, subset: tuple[int, ...]):
        super().__init__(f"cloud is not in general position: points {list(subset)} are affinely dependent")
        self.subset = subset


class AffineDependenceError(ValueError):
    pass


@dataclass(frozen=True)
class CloudCritical:
    center: np.ndarray
    radius: float
    support: tuple[int, ...]
    k: int
    iota: int = 0

    def support_points(self, cloud: PointCloud) -> np.ndarray:
        return cloud.points[list(self.support)]

    def to_dict(self, cloud: PointCloud | None = None) -> dict:
        out = {
            "x": self.center.tolist(),
            "value": self.radius,
            "k": self.k,
            "iota": self.iota,
            "support": list(self.support),
            "nondegenerate": True,
            "validated": True,
        }
        if cloud is not None:
            out["witnesses"] = self.support_points(cloud).tolist()
        return out


def _gram_independent(points: np.ndarray, tol: float = 1e-12) -> bool:
    if len(points) <= 1:
        return True
    D = points[1:] - points[0]
    G = D @ D.T
    scale = max(float(np.max(np.sum(D * D, axis=1))), 1e-300)
    return float(np.linalg.det(G)) > tol * scale ** len(D)


def circumcenter(points) -> tuple[np.ndarray, float]:
    """Center and radius of the smallest sphere through affinely independent points.

    The center lies in the affine hull of the points.
    """
    P = np.atleast_2d(np.asarray(points, dtype=float))
    if len(P) == 1:
        return P[0].copy(), 0.0
    if not _gram_independent(P):
        raise AffineDependenceError("points are affinely dependent")
    D = P[1:] - P[0]
    G = D @ D.T
    try:
        a = solve_linear(2.0 * G, np.sum(D * D, axis=1))
    except SingularMatrixError as exc:
        raise AffineDependenceError("points are affinely dependent") from exc
    center = P[0] + a @ D
    radius = float(np.mean(np.linalg.norm(P - center, axis=1)))
    return center, radius


def general_position_check(cloud: PointCloud) -> tuple[bool, tuple[int, ...] | None]:
    """Every subset of at most n + 1 points must be affinely independent."""
    P = cloud.points
    m, n = P.shape
    for size in range(2, min(m, n + 1) + 1):
        for subset in combinations(range(m), size):
            if not _gram_independent(P[list(subset)]):
                return False, subset
    return True, None


def candidate_bound(m: int, n: int) -> int:
    return sum(math.comb(m, k + 1) for k in range(n + 1))


def enumerate_critical(cloud: PointCloud, *, max_points: int = DEFAULT_MAX_POINTS) -> list[CloudCritical]:
    """All critical points of ``dist_Y`` for a general-position cloud.

    Returns records sorted by index ``k`` and then by center coordinates.
    Near-cospherical subsets are logged as warnings.
    """
    P = cloud.points
    m, n = P.shape
    if m > max_points:
        raise ValueError(f"cloud has {m} points; the enumeration is capped at {max_points}")
    ok, bad = general_position_check(cloud)
    if not ok:
        raise GeneralPositionError(bad)
    found: list[CloudCritical] = []
    for size in range(1, min(m, n + 1) + 1):
        k = size - 1
        for subset in combinations(range(m), size):
            pts = P[list(subset)]
            center, radius = circumcenter(pts)
            if k > 0:
                sol = barycentric_zero(pts - center)
                if not sol.feasible:
                    continue
                if float(sol.lambdas.min()) < 1e-6:
                    log.warning("center of %s lies on the boundary of its hull", list(subset))
            others = np.delete(np.arange(m), list(subset))
            if len(others):
                d = np.linalg.norm(P[others] - center, axis=1)
                if np.any(d < radius * (1.0 - TIE_BAND)):
                    continue
                ties = np.abs(d - radius) <= TIE_BAND * (1.0 + radius)
                if np.any(ties):
                    log.warning(
                        "cospherical near-tie: points %s and %s", list(subset), others[ties].tolist()
                    )
            found.append(CloudCritical(center, radius, subset, k))
    found.sort(key=lambda c: (c.k, tuple(np.round(c.center, 12))))
    return found
