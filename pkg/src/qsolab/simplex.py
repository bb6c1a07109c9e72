"""Points of the probability simplex and the majorization preorder.

Majorization is decided from prefix sums of decreasing rearrangements. On the
simplex both vectors have total mass one, so only the ``m - 1`` proper prefix
sums need comparing.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import DimensionMismatch, InvalidDimension, NotOnSimplex

EPS_MASS = 1e-10
EPS_CMP = 1e-12

SeedLike = Union[None, int, np.random.Generator]


def as_rng(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True, eq=False)
class SimplexPoint:
    """A probability vector with ``m >= 2`` coordinates.

    Coordinates within ``EPS_MASS`` of the simplex are clamped to be
    nonnegative and rescaled to unit mass; anything farther out raises
    :class:`NotOnSimplex`. The stored array is read-only.
    """

    coords: np.ndarray

    def __post_init__(self):
        x = np.array(self.coords, dtype=float).reshape(-1)
        if x.size < 2:
            raise InvalidDimension(f"simplex points need m >= 2, got {x.size}")
        if not np.all(np.isfinite(x)):
            raise NotOnSimplex("non-finite coordinate", coords=x.tolist())
        if x.min() < -EPS_MASS:
            raise NotOnSimplex(f"negative coordinate {x.min()!r}", coords=x.tolist())
        total = x.sum()
        if abs(total - 1.0) > EPS_MASS:
            raise NotOnSimplex(f"mass {total!r} differs from 1", coords=x.tolist())
        np.clip(x, 0.0, None, out=x)
        x /= x.sum()
        x.setflags(write=False)
        object.__setattr__(self, "coords", x)

    @classmethod
    def vertex(cls, m: int, k: int) -> "SimplexPoint":
        """Vertex ``e_k``; ``k`` is 1-based."""
        if not 1 <= k <= m:
            raise InvalidDimension(f"vertex index {k} outside 1..{m}")
        x = np.zeros(m)
        x[k - 1] = 1.0
        return cls(x)

    @classmethod
    def barycenter(cls, m: int) -> "SimplexPoint":
        return cls(np.full(m, 1.0 / m))

    @property
    def m(self) -> int:
        return self.coords.size

    def __len__(self) -> int:
        return self.coords.size

    def __iter__(self):
        return iter(self.coords.tolist())

    def __getitem__(self, i):
        return self.coords[i]

    def __array__(self, dtype=None, copy=None):
        return self.coords if dtype is None else self.coords.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, SimplexPoint):
            return NotImplemented
        return np.array_equal(self.coords, other.coords)

    def __hash__(self):
        return hash(self.coords.tobytes())

    def __repr__(self):
        return f"SimplexPoint({self.coords.tolist()!r})"


def _coords(x) -> np.ndarray:
    return x.coords if isinstance(x, SimplexPoint) else np.asarray(x, dtype=float)


def decreasing_rearrangement(x) -> np.ndarray:
    """Coordinates sorted in nonincreasing order (stable: ties keep index order)."""
    c = _coords(x)
    return c[np.argsort(-c, kind="stable")]


class Relation(str, enum.Enum):
    MAJORIZES = "MAJORIZES"
    MAJORIZED_BY = "MAJORIZED_BY"
    EQUIVALENT = "EQUIVALENT"
    INCOMPARABLE = "INCOMPARABLE"


@dataclass(frozen=True)
class MajorizationVerdict:
    """Outcome of comparing ``x`` with ``y``.

    ``min_slack_forward`` is ``min_k sum_{i<=k} (x[i] - y[i])`` over sorted
    coordinates, i.e. the worst margin of "x majorizes y"; ``min_slack_backward``
    is the same quantity with the roles swapped.
    """

    relation: Relation
    min_slack_forward: float
    min_slack_backward: float


def prefix_slacks(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized forward/backward slacks for stacked points of shape ``(..., m)``."""
    xs = -np.sort(-x, axis=-1)
    ys = -np.sort(-y, axis=-1)
    diff = np.cumsum(xs - ys, axis=-1)[..., :-1]
    return diff.min(axis=-1), (-diff).min(axis=-1)


def relation_from_slacks(forward: float, backward: float, tol: float = EPS_CMP) -> Relation:
    fwd_ok = forward >= -tol
    bwd_ok = backward >= -tol
    if fwd_ok and bwd_ok:
        return Relation.EQUIVALENT
    if fwd_ok:
        return Relation.MAJORIZES
    if bwd_ok:
        return Relation.MAJORIZED_BY
    return Relation.INCOMPARABLE


def compare_majorization(x, y, tol: float = EPS_CMP) -> MajorizationVerdict:
    """Compare ``x`` and ``y`` under majorization with slack band ``tol``.

    >>> compare_majorization(SimplexPoint.barycenter(3), SimplexPoint.vertex(3, 1)).relation
    <Relation.MAJORIZED_BY: 'MAJORIZED_BY'>
    """
    cx, cy = _coords(x), _coords(y)
    if cx.shape != cy.shape:
        raise DimensionMismatch(f"dimensions differ: {cx.size} vs {cy.size}")
    fwd, bwd = prefix_slacks(cx, cy)
    fwd, bwd = float(fwd), float(bwd)
    return MajorizationVerdict(relation_from_slacks(fwd, bwd, tol), fwd, bwd)


def sample_uniform_array(m: int, n: int, seed: SeedLike = None) -> np.ndarray:
    """``n`` flat-Dirichlet draws as an ``(n, m)`` array."""
    if m < 2:
        raise InvalidDimension(f"m must be >= 2, got {m}")
    rng = as_rng(seed)
    e = rng.standard_exponential((n, m))
    return e / e.sum(axis=1, keepdims=True)


def sample_uniform(m: int, seed: SeedLike = None) -> SimplexPoint:
    """Uniform point on the simplex from normalized unit exponentials."""
    return SimplexPoint(sample_uniform_array(m, 1, seed)[0])


def project_to_simplex(y: Sequence[float]) -> np.ndarray:
    """Euclidean projection onto the simplex (sort-and-threshold)."""
    y = np.asarray(y, dtype=float)
    s = np.sort(y)[::-1]
    css = np.cumsum(s) - 1.0
    ks = np.arange(1, y.size + 1)
    rho = np.nonzero(s - css / ks > 0)[0][-1]
    return np.maximum(y - css[rho] / (rho + 1), 0.0)
