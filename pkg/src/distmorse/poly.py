"""Sparse multivariate real polynomials.

A :class:`Poly` stores a map from exponent tuples to nonzero float
coefficients. Values, gradients and Hessians come from exact term-wise
differentiation of that map; only the final evaluation is floating point.
"""

from __future__ import annotations

import json
import math
from itertools import combinations_with_replacement
from typing import Iterable, Mapping, Sequence

import numpy as np

_CHUNK = 1 << 15


class DimensionError(ValueError):
    """Raised when a point does not live in the polynomial's ambient space."""


class Poly:
    """Immutable sparse polynomial in ``nvars`` real variables.

    Parameters
    ----------
    nvars : int
        Number of variables.
    terms : mapping
        Exponent tuple -> coefficient. Zero coefficients are dropped and
        repeated exponents are summed.
    """

    __slots__ = ("nvars", "terms", "degree", "_exps", "_coefs", "_grad", "_hess", "_hash", "_tables")

    def __init__(self, nvars: int, terms: Mapping[Sequence[int], float] | Iterable = ()):
        if nvars < 1:
            raise ValueError("nvars must be positive")
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict[tuple[int, ...], float] = {}
        for exp, coef in items:
            exp = tuple(int(e) for e in exp)
            if len(exp) != nvars:
                raise DimensionError(f"exponent {exp} has length {len(exp)}, expected {nvars}")
            if any(e < 0 for e in exp):
                raise ValueError(f"negative exponent in {exp}")
            acc[exp] = acc.get(exp, 0.0) + float(coef)
        clean = {e: c for e, c in sorted(acc.items()) if c != 0.0}
        self.nvars = int(nvars)
        self.terms = clean
        self.degree = max((sum(e) for e in clean), default=0)
        if clean:
            self._exps = np.array(list(clean.keys()), dtype=np.int64)
            self._coefs = np.array(list(clean.values()), dtype=float)
        else:
            self._exps = np.zeros((0, nvars), dtype=np.int64)
            self._coefs = np.zeros(0)
        self._grad = None
        self._hess = None
        self._hash = None
        self._tables = {}

    # -- construction helpers -------------------------------------------------
    @classmethod
    def zero(cls, nvars: int) -> "Poly":
        return cls(nvars, {})

    @classmethod
    def constant(cls, nvars: int, c: float) -> "Poly":
        return cls(nvars, {(0,) * nvars: c})

    @classmethod
    def from_sympy(cls, expr, symbols) -> "Poly":
        """Build from a sympy expression in the given ordered symbols."""
        import sympy

        sp = sympy.Poly(sympy.expand(expr), *symbols)
        return cls(len(symbols), {m: float(c) for m, c in sp.terms()})

    def to_sympy(self, symbols):
        import sympy

        return sum(
            (sympy.Float(c) * sympy.Mul(*[s**e for s, e in zip(symbols, exp)]) for exp, c in self.terms.items()),
            sympy.Integer(0),
        )

    # -- equality / hashing ---------------------------------------------------
    def __eq__(self, other) -> bool:
        return isinstance(other, Poly) and self.nvars == other.nvars and self.terms == other.terms

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.nvars, tuple(self.terms.items())))
        return self._hash

    def __repr__(self) -> str:
        return f"Poly(nvars={self.nvars}, degree={self.degree}, nterms={len(self.terms)})"

    def __neg__(self) -> "Poly":
        return Poly(self.nvars, {e: -c for e, c in self.terms.items()})

    def scaled(self, s: float) -> "Poly":
        return Poly(self.nvars, {e: s * c for e, c in self.terms.items()})

    @property
    def is_zero(self) -> bool:
        return not self.terms

    # -- calculus -------------------------------------------------------------
    def derivative(self, i: int) -> "Poly":
        """Partial derivative with respect to variable ``i``."""
        out: dict[tuple[int, ...], float] = {}
        for exp, c in self.terms.items():
            e = exp[i]
            if e == 0:
                continue
            new = exp[:i] + (e - 1,) + exp[i + 1 :]
            out[new] = out.get(new, 0.0) + c * e
        return Poly(self.nvars, out)

    def _gradient_polys(self) -> list["Poly"]:
        if self._grad is None:
            self._grad = [self.derivative(i) for i in range(self.nvars)]
        return self._grad

    def _hessian_polys(self) -> dict[tuple[int, int], "Poly"]:
        if self._hess is None:
            g = self._gradient_polys()
            self._hess = {
                (i, j): g[i].derivative(j) for i, j in combinations_with_replacement(range(self.nvars), 2)
            }
        return self._hess

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.nvars,):
            raise DimensionError(f"point has shape {x.shape}, expected ({self.nvars},)")
        return x

    def _monomials(self, x: np.ndarray) -> np.ndarray:
        return np.prod(x[None, :] ** self._exps, axis=1)

    def _stacked(self, which: str):
        """Exponents, coefficients and segment offsets of a family of derivatives."""
        tab = self._tables.get(which)
        if tab is None:
            polys = self._gradient_polys() if which == "grad" else list(self._hessian_polys().values())
            exps = [q._exps for q in polys]
            coefs = [q._coefs for q in polys]
            bounds = np.cumsum([0] + [len(c) for c in coefs])
            tab = (np.concatenate(exps), np.concatenate(coefs), bounds)
            self._tables[which] = tab
        return tab

    def _eval_family(self, which: str, x: np.ndarray) -> list[float]:
        exps, coefs, bounds = self._stacked(which)
        vals = coefs * np.prod(x[None, :] ** exps, axis=1)
        return [math.fsum(vals[a:b]) for a, b in zip(bounds[:-1], bounds[1:])]

    def __call__(self, x) -> float:
        return eval_poly(self, x)

    # -- batch evaluation (sampling paths; plain summation) -----------------
    def eval_many(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != self.nvars:
            raise DimensionError(f"points have shape {pts.shape}, expected (N, {self.nvars})")
        out = np.empty(pts.shape[0])
        if not self.terms:
            out[:] = 0.0
            return out
        maxdeg = int(self._exps.max()) if self._exps.size else 0
        for start in range(0, pts.shape[0], _CHUNK):
            block = pts[start : start + _CHUNK]
            # powers[d, N, n] = block ** d
            powers = np.ones((maxdeg + 1,) + block.shape)
            for d in range(1, maxdeg + 1):
                powers[d] = powers[d - 1] * block
            acc = np.zeros(block.shape[0])
            for exp, c in zip(self._exps, self._coefs):
                mono = np.full(block.shape[0], c)
                for v, e in enumerate(exp):
                    if e:
                        mono *= powers[e, :, v]
                acc += mono
            out[start : start + _CHUNK] = acc
        return out

    def grad_many(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        return np.stack([g.eval_many(pts) for g in self._gradient_polys()], axis=1)

    # -- serialization ----------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "nvars": self.nvars,
            "terms": [{"exp": list(e), "coef": c} for e, c in self.terms.items()],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "Poly":
        try:
            nvars = int(data["nvars"])
            raw = data["terms"]
        except (KeyError, TypeError) as exc:
            raise ValueError(f"polynomial JSON is missing field {exc}") from exc
        terms = []
        for idx, t in enumerate(raw):
            if "exp" not in t or "coef" not in t:
                raise ValueError(f"polynomial JSON term {idx} needs 'exp' and 'coef'")
            terms.append((t["exp"], float(t["coef"])))
        return cls(nvars, terms)

    def dumps(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def loads(cls, text: str) -> "Poly":
        return cls.from_dict(json.loads(text))


def eval_poly(p: Poly, x) -> float:
    """Value of ``p`` at ``x`` using compensated summation of the monomials."""
    x = p._check(x)
    if not p.terms:
        return 0.0
    return math.fsum(p._coefs * p._monomials(x))


def grad(p: Poly, x) -> np.ndarray:
    x = p._check(x)
    return np.array(p._eval_family("grad", x))


def hessian(p: Poly, x) -> np.ndarray:
    """Hessian matrix; entries (i, j) and (j, i) come from the same polynomial."""
    x = p._check(x)
    n = p.nvars
    H = np.empty((n, n))
    vals = p._eval_family("hess", x)
    for (i, j), v in zip(p._hessian_polys().keys(), vals):
        H[i, j] = H[j, i] = v
    return H


def exponents(nvars: int, degree: int) -> list[tuple[int, ...]]:
    """All exponent vectors of total degree <= ``degree`` in graded order."""
    out: list[tuple[int, ...]] = []
    for d in range(degree + 1):
        for combo in combinations_with_replacement(range(nvars), d):
            exp = [0] * nvars
            for v in combo:
                exp[v] += 1
            out.append(tuple(exp))
    return out


def random_poly(nvars: int, degree: int, seed: int, *, flat: bool = False) -> Poly:
    """Dense polynomial with independent Gaussian coefficients.

    Each coefficient of exponent ``a`` is drawn from N(0, 1) and divided by
    ``1 + |a|`` unless ``flat`` is set; the damping keeps zero sets near the
    origin for moderate degrees.
    """
    if degree < 0:
        raise ValueError("degree must be nonnegative")
    rng = np.random.default_rng(seed)
    exps = exponents(nvars, degree)
    draws = rng.standard_normal(len(exps))
    terms = {}
    for exp, z in zip(exps, draws):
        terms[exp] = z if flat else z / (1.0 + sum(exp))
    return Poly(nvars, terms)


def degree_bound(n: int, k: int, r: int) -> int:
    """Smallest d with C(n+d, d) >= k * sum_{l<=r} C(n, l).

    This is the degree at which the k-fold order-r jet map of degree-d
    polynomials becomes a submersion.
    """
    if n < 1 or k < 1 or r < 0:
        raise ValueError("need n >= 1, k >= 1, r >= 0")
    target = k * sum(math.comb(n, ell) for ell in range(r + 1))
    d = 0
    while math.comb(n + d, d) < target:
        d += 1
    return d


def load_poly(path) -> Poly:
    with open(path) as fh:
        return Poly.from_dict(json.load(fh))
