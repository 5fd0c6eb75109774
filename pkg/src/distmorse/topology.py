"""Integer bookkeeping on classified critical sets.

Euler sums, the duality identity between dist_Y|X and dist_X|Y, strong and
weak Morse inequalities, and the sphere dimensions attached at each
critical level. Euler characteristics and Betti numbers are inputs; a few
standard spaces are built in.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping

BUILTIN_BETTI: dict[str, tuple[int, ...]] = {
    "point": (1,),
    "circle": (1, 1),
    "sphere": (1, 0, 1),
    "torus": (1, 2, 1),
    "empty": (),
}


class MissingTopologyError(ValueError):
    pass


def euler_characteristic(betti: Iterable[int]) -> int:
    return sum((-1) ** i * int(b) for i, b in enumerate(betti))


def builtin_betti(name: str) -> tuple[int, ...]:
    try:
        return BUILTIN_BETTI[name]
    except KeyError:
        raise MissingTopologyError(f"no built-in Betti numbers for {name!r}; known: {sorted(BUILTIN_BETTI)}") from None


def ovals_betti(components: int) -> tuple[int, ...]:
    """Betti numbers of a disjoint union of ``components`` circles."""
    return (components, components) if components else ()


@dataclass
class IndexCensus:
    """Counts of critical points per (k, iota) plus optional topology of X, Y, X∩Y."""

    counts: dict[tuple[int, int], int] = field(default_factory=dict)
    chi_x: int | None = None
    chi_y: int | None = None
    chi_xy: int | None = None
    betti_x: tuple[int, ...] | None = None
    betti_xy: tuple[int, ...] | None = None

    def __post_init__(self):
        clean = {}
        for (k, iota), c in self.counts.items():
            if k < 0 or iota < 0 or c < 0:
                raise ValueError(f"invalid census entry ({k}, {iota}): {c}")
            if c:
                clean[(int(k), int(iota))] = int(c)
        self.counts = dict(sorted(clean.items()))

    @classmethod
    def from_points(cls, points, **topology) -> "IndexCensus":
        """Tally (k, iota) over points that carry a defined quadratic index."""
        tally = Counter((int(p.k), int(p.iota)) for p in points if getattr(p, "iota", None) is not None)
        return cls(dict(tally), **topology)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def to_dict(self) -> dict:
        out: dict = {"counts": [{"k": k, "iota": i, "n": c} for (k, i), c in self.counts.items()]}
        for name in ("chi_x", "chi_y", "chi_xy"):
            val = getattr(self, name)
            if val is not None:
                out[name] = val
        if self.betti_x is not None:
            out["betti_x"] = list(self.betti_x)
        if self.betti_xy is not None:
            out["betti_xy"] = list(self.betti_xy)
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> "IndexCensus":
        if "counts" not in data:
            raise ValueError("census JSON is missing field 'counts'")
        counts: dict[tuple[int, int], int] = {}
        for idx, row in enumerate(data["counts"]):
            for key in ("k", "iota", "n"):
                if key not in row:
                    raise ValueError(f"census JSON count {idx} is missing field {key!r}")
            pair = (int(row["k"]), int(row["iota"]))
            counts[pair] = counts.get(pair, 0) + int(row["n"])
        bx = data.get("betti_x")
        bxy = data.get("betti_xy")
        return cls(
            counts,
            chi_x=data.get("chi_x"),
            chi_y=data.get("chi_y"),
            chi_xy=data.get("chi_xy"),
            betti_x=None if bx is None else tuple(int(b) for b in bx),
            betti_xy=None if bxy is None else tuple(int(b) for b in bxy),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def euler_sum(census: IndexCensus) -> int:
    """Sum of (-1)^(k + iota) over all counted critical points."""
    return sum((-1) ** (k + i) * c for (k, i), c in census.counts.items())


@dataclass(frozen=True)
class DualityVerdict:
    holds: bool
    lhs: int
    rhs: int

    def message(self) -> str:
        if self.holds:
            return f"duality holds: {self.lhs} = {self.rhs}"
        return f"duality FAILS: {self.lhs} != {self.rhs}"


def check_duality(census_xy: IndexCensus, census_yx: IndexCensus) -> DualityVerdict:
    """Compare chi(Y) + E(X, Y) with chi(X) + E(Y, X).

    ``census_xy`` counts critical points of dist_Y on X, ``census_yx`` those
    of dist_X on Y. Both must carry chi_x and chi_y (in their own
    orientation: for ``census_yx`` the roles are swapped).
    """
    chi_x, chi_y = census_xy.chi_x, census_xy.chi_y
    if chi_x is None or chi_y is None:
        raise MissingTopologyError("census of dist_Y on X needs chi_x and chi_y")
    if census_yx.chi_x is not None and census_yx.chi_x != chi_y:
        raise ValueError(f"inconsistent Euler characteristics: chi(Y) = {chi_y} vs {census_yx.chi_x}")
    if census_yx.chi_y is not None and census_yx.chi_y != chi_x:
        raise ValueError(f"inconsistent Euler characteristics: chi(X) = {chi_x} vs {census_yx.chi_y}")
    lhs = chi_y + euler_sum(census_xy)
    rhs = chi_x + euler_sum(census_yx)
    return DualityVerdict(lhs == rhs, lhs, rhs)


def check_euler_identity(census: IndexCensus) -> DualityVerdict:
    """chi(X ∩ Y) + E(X, Y) = chi(X)."""
    if census.chi_x is None:
        raise MissingTopologyError("census needs chi_x")
    chi_xy = census.chi_xy or 0
    return DualityVerdict(chi_xy + euler_sum(census) == census.chi_x, chi_xy + euler_sum(census), census.chi_x)


@dataclass(frozen=True)
class MorseVerdict:
    degree: int
    strong_lhs: int
    strong_rhs: int
    weak_lhs: int
    weak_rhs: int

    @property
    def strong(self) -> bool:
        return self.strong_lhs <= self.strong_rhs

    @property
    def weak(self) -> bool:
        return self.weak_lhs <= self.weak_rhs

    @property
    def weak_equality(self) -> bool:
        return self.weak_lhs == self.weak_rhs

    def to_dict(self) -> dict:
        return {
            "degree": self.degree,
            "strong": [self.strong_lhs, self.strong_rhs, self.strong],
            "weak": [self.weak_lhs, self.weak_rhs, self.weak],
        }


def _at(vec, i: int) -> int:
    return int(vec[i]) if 0 <= i < len(vec) else 0


def morse_inequalities(census: IndexCensus, n: int | None = None) -> list[MorseVerdict]:
    """Strong and weak inequalities for every degree 0..n.

    With ``c_i`` the number of critical points with ``k + iota = i`` and
    ``b`` the Betti numbers, degree ``l`` checks
    ``sum_{i<=l} (-1)^(i+l) b_i(X) <= sum_{i<=l} (-1)^(i+l) (b_i(X∩Y) + c_i)``
    and ``b_l(X) <= b_l(X∩Y) + c_l``.
    """
    if census.betti_x is None:
        raise MissingTopologyError("census needs betti_x")
    bx = census.betti_x
    bxy = census.betti_xy or ()
    c = Counter()
    for (k, i), cnt in census.counts.items():
        c[k + i] += cnt
    top = max([len(bx) - 1, len(bxy) - 1, *c.keys(), 0])
    if n is not None:
        top = max(top, n)
    out = []
    for lam in range(top + 1):
        lhs = sum((-1) ** (i + lam) * _at(bx, i) for i in range(lam + 1))
        rhs = sum((-1) ** (i + lam) * (_at(bxy, i) + c[i]) for i in range(lam + 1))
        out.append(MorseVerdict(lam, lhs, rhs, _at(bx, lam), _at(bxy, lam) + c[lam]))
    return out


def attachment_spheres(census: IndexCensus) -> list[int]:
    """Dimensions k + iota of the spheres attached at the critical points, sorted."""
    dims: list[int] = []
    for (k, i), cnt in census.counts.items():
        dims += [k + i] * cnt
    return sorted(dims)


def load_census(path) -> IndexCensus:
    with open(path) as fh:
        return IndexCensus.from_dict(json.load(fh))
