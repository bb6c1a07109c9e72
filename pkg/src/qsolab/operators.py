"""Quadratic and cubic stochastic operators.

A degree-``d`` operator is stored as a dense array ``p`` of shape
``(m,) * d + (m,)``: the first ``d`` axes index the parents (and are fully
symmetric), the last one indexes the offspring ``k``. Indices are 0-based in
arrays and 1-based everywhere a human sees them (errors, JSON, reports).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

import numpy as np

from .errors import DimensionMismatch, OperatorValidationError, QsoError
from .simplex import SeedLike, SimplexPoint, as_rng

EPS_STOCH = 1e-9


@dataclass(frozen=True, eq=False)
class QsoTensor:
    """Heredity coefficients ``p[i, j, k]`` of a quadratic operator."""

    p: np.ndarray
    degree: int = field(default=2, init=False)

    @property
    def m(self) -> int:
        return self.p.shape[0]


@dataclass(frozen=True, eq=False)
class CsoTensor:
    """Heredity coefficients ``p[i, j, l, k]`` of a cubic operator."""

    p: np.ndarray
    degree: int = field(default=3, init=False)

    @property
    def m(self) -> int:
        return self.p.shape[0]


Tensor = Union[QsoTensor, CsoTensor]


@dataclass(frozen=True, eq=False)
class OperatorSpec:
    name: str
    degree: int
    tensor: Tensor

    def __post_init__(self):
        if self.degree != self.tensor.degree:
            raise QsoError(f"degree {self.degree} does not match {type(self.tensor).__name__}")

    @property
    def m(self) -> int:
        return self.tensor.m

    @property
    def p(self) -> np.ndarray:
        return self.tensor.p


def _parent_perms(degree: int):
    return list(itertools.permutations(range(degree)))


def symmetrize(p: np.ndarray) -> np.ndarray:
    """Average ``p`` over all permutations of its parent axes."""
    degree = p.ndim - 1
    perms = _parent_perms(degree)
    out = np.zeros_like(p, dtype=float)
    for perm in perms:
        out += np.transpose(p, perm + (degree,))
    return out / len(perms)


def validate(raw, symmetrize_: bool = False, tol: float = EPS_STOCH) -> Tensor:
    """Check stochasticity constraints and return the matching tensor type.

    ``raw`` has shape ``(m, m, m)`` (quadratic) or ``(m, m, m, m)`` (cubic).
    With ``symmetrize_`` the parent axes are averaged before checking.
    Problems are collected and raised together as
    :class:`OperatorValidationError`; the reported index of each kind is the
    worst offender, 1-based.
    """
    p = np.array(raw, dtype=float)
    if p.ndim not in (3, 4) or len(set(p.shape)) != 1:
        raise QsoError(f"coefficient table must be m^3 or m^4, got shape {p.shape}")
    if p.shape[0] < 2:
        raise QsoError("operators need m >= 2")
    if not np.all(np.isfinite(p)):
        raise QsoError("non-finite coefficient")
    if symmetrize_:
        p = symmetrize(p)

    violations = []
    worst = np.unravel_index(np.argmin(p), p.shape)
    if p[worst] < -tol:
        violations.append(_violation("NEGATIVE_COEFFICIENT", worst, p[worst]))
    asym = np.abs(p - symmetrize(p))
    worst = np.unravel_index(np.argmax(asym), p.shape)
    if asym[worst] > tol:
        violations.append(_violation("ASYMMETRY", worst, p[worst]))
    dev = p.sum(axis=-1) - 1.0
    worst = np.unravel_index(np.argmax(np.abs(dev)), dev.shape)
    if abs(dev[worst]) > tol:
        violations.append(_violation("ROW_SUM_VIOLATION", worst, dev[worst]))
    if violations:
        raise OperatorValidationError(violations)

    np.clip(p, 0.0, None, out=p)
    p.setflags(write=False)
    return QsoTensor(p) if p.ndim == 3 else CsoTensor(p)


def _violation(code: str, index, value) -> dict:
    return {"code": code, "index": [int(i) + 1 for i in index], "value": float(value)}


def make_operator(name: str, raw, symmetrize_: bool = False) -> OperatorSpec:
    tensor = validate(raw, symmetrize_)
    return OperatorSpec(name, tensor.degree, tensor)


def _check_dim(op: OperatorSpec, x: np.ndarray):
    if x.shape[-1] != op.m:
        raise DimensionMismatch(f"operator has m={op.m}, point has {x.shape[-1]} coordinates")


def _monomials(x: np.ndarray, degree: int) -> np.ndarray:
    """Flattened products ``x_i x_j (x_l)`` for stacked points ``(n, m)``."""
    out = x
    for _ in range(degree - 1):
        out = (out[:, :, None] * x[:, None, :]).reshape(x.shape[0], -1)
    return out


def apply_raw(op: OperatorSpec, x) -> np.ndarray:
    """Evaluate the operator without renormalizing.

    Accepts a single point or an ``(n, m)`` stack and returns the same shape.
    """
    arr = np.asarray(x, dtype=float)
    _check_dim(op, arr)
    single = arr.ndim == 1
    xs = arr[None, :] if single else arr
    y = _monomials(xs, op.degree) @ op.p.reshape(-1, op.m)
    return y[0] if single else y


def mass_defect(y: np.ndarray) -> np.ndarray:
    return np.abs(y.sum(axis=-1) - 1.0)


def apply(op: OperatorSpec, x) -> SimplexPoint:
    """``Vx`` as a validated simplex point (mass renormalized)."""
    return SimplexPoint(apply_raw(op, x))


def jacobian(op: OperatorSpec, x) -> np.ndarray:
    """``J[k, i] = d(Vx)_k / dx_i`` in the ambient coordinates."""
    c = np.asarray(x, dtype=float)
    _check_dim(op, c)
    if op.degree == 2:
        return 2.0 * np.einsum("ijk,j->ki", op.p, c)
    return 3.0 * np.einsum("ijlk,j,l->ki", op.p, c, c)


def jacobian_colsum_defect(op: OperatorSpec, x) -> float:
    """Largest deviation of a Jacobian column sum from the degree (exact on the simplex)."""
    return float(np.abs(jacobian(op, x).sum(axis=0) - op.degree).max())


def relabel(op: OperatorSpec, perm: Iterable[int], name: Optional[str] = None) -> OperatorSpec:
    """Rename species: old index ``i`` becomes ``perm[i]`` (0-based permutation)."""
    perm = np.asarray(list(perm))
    inv = np.argsort(perm)
    p = op.p[np.ix_(*([inv] * (op.degree + 1)))]
    return make_operator(name or op.name, p)


def mix(op1: OperatorSpec, op0: OperatorSpec, lam: float, name: Optional[str] = None) -> OperatorSpec:
    """Coefficientwise mixture ``lam * op1 + (1 - lam) * op0``."""
    if op1.p.shape != op0.p.shape:
        raise DimensionMismatch("mixture of operators with different shapes")
    return make_operator(name or f"mix({op1.name},{op0.name},{lam})", lam * op1.p + (1 - lam) * op0.p)


@dataclass(frozen=True, eq=False)
class VolterraForm:
    """Canonical form ``(Vx)_k = x_k (1 + sum_i a[k, i] x_i)`` when it exists.

    ``a`` is ``None`` unless ``is_volterra``; the diagonal is set to zero.
    """

    is_volterra: bool
    a: Optional[np.ndarray]
    skew_symmetric: bool


def volterra_form(q: Union[QsoTensor, OperatorSpec], tol: float = EPS_STOCH) -> VolterraForm:
    p = q.p if isinstance(q, (QsoTensor, OperatorSpec)) else np.asarray(q)
    m = p.shape[0]
    i, j, k = np.indices(p.shape)
    outside = (k != i) & (k != j)
    if np.any(p[outside] > tol):
        return VolterraForm(False, None, False)
    a = np.zeros((m, m))
    for kk in range(m):
        for ii in range(m):
            if ii != kk:
                a[kk, ii] = 2.0 * p[ii, kk, kk] - 1.0
    return VolterraForm(True, a, bool(np.abs(a + a.T).max() <= tol))


def from_volterra_matrix(a, name: str = "volterra") -> OperatorSpec:
    """Build the Volterra operator with canonical matrix ``a`` (skew-symmetric, |a| <= 1)."""
    a = np.asarray(a, dtype=float)
    m = a.shape[0]
    p = np.zeros((m, m, m))
    for k in range(m):
        p[k, k, k] = 1.0
        for i in range(m):
            if i != k:
                p[i, k, k] = p[k, i, k] = (1.0 + a[k, i]) / 2.0
    return make_operator(name, p)


def volterra_multipliers(op: OperatorSpec) -> np.ndarray:
    """``C`` with ``(Vx)_k = x_k * sum_i C[k, i] x_i`` for a Volterra quadratic operator."""
    p = op.p
    m = op.m
    c = 2.0 * np.array([[p[i, k, k] for i in range(m)] for k in range(m)])
    for k in range(m):
        c[k, k] = p[k, k, k]
    return c


def uniform_operator(m: int, degree: int = 2) -> OperatorSpec:
    """Every parent combination yields each offspring with probability ``1/m``."""
    return make_operator(f"uniform-{m}", np.full((m,) * (degree + 1), 1.0 / m))


def identity_operator(m: int) -> OperatorSpec:
    return from_volterra_matrix(np.zeros((m, m)), name="identity")


def random_operator(m: int, degree: int = 2, seed: SeedLike = None, sparsity: float = 0.0) -> OperatorSpec:
    """Random operator: every sorted parent multiset gets a flat-Dirichlet row.

    With ``sparsity > 0`` entries are zeroed with that probability before
    normalizing (a row keeps at least one entry), which produces boundary
    cases the pure Dirichlet draw never hits.
    """
    rng = as_rng(seed)
    p = np.zeros((m,) * (degree + 1))
    for parents in itertools.combinations_with_replacement(range(m), degree):
        row = rng.standard_exponential(m)
        if sparsity > 0:
            keep = rng.random(m) >= sparsity
            keep[rng.integers(m)] = True
            row = row * keep
        row /= row.sum()
        for perm in set(itertools.permutations(parents)):
            p[perm] = row
    return make_operator(f"random-d{degree}-m{m}", p)


# -- JSON schema ------------------------------------------------------------

def to_json_dict(op: OperatorSpec) -> dict:
    """Operator as a schema dict listing only sorted parent tuples with nonzero ``p``."""
    entries = []
    keys = ("i", "j", "l")[: op.degree]
    for parents in itertools.combinations_with_replacement(range(op.m), op.degree):
        for k in range(op.m):
            val = float(op.p[parents + (k,)])
            if val != 0.0:
                entry = {key: idx + 1 for key, idx in zip(keys, parents)}
                entry["k"] = k + 1
                entry["p"] = val
                entries.append(entry)
    return {"name": op.name, "m": op.m, "degree": op.degree, "entries": entries, "symmetrize": False}


def from_json_dict(doc: dict) -> OperatorSpec:
    """Parse the operator schema.

    Without ``symmetrize`` an entry for parents ``(i, j)`` also fills every
    permutation of the parents that is not listed explicitly; listing two
    orderings with different values is an asymmetry. With ``symmetrize`` each
    entry lands only at the index given and the table is then averaged.
    """
    try:
        name = str(doc["name"])
        m = int(doc["m"])
        degree = int(doc["degree"])
        entries = list(doc["entries"])
        sym = bool(doc.get("symmetrize", False))
    except (KeyError, TypeError, ValueError) as exc:
        raise QsoError(f"ill-formed operator document: {exc}") from exc
    if degree not in (2, 3) or m < 2:
        raise QsoError(f"unsupported degree {degree} or m {m}")
    keys = ("i", "j", "l")[:degree]
    raw = np.zeros((m,) * (degree + 1))
    explicit: dict[tuple, float] = {}
    for e in entries:
        try:
            idx = tuple(int(e[key]) - 1 for key in keys) + (int(e["k"]) - 1,)
            val = float(e["p"])
        except (KeyError, TypeError, ValueError) as exc:
            raise QsoError(f"ill-formed entry {e!r}") from exc
        if any(not 0 <= t < m for t in idx) or not math.isfinite(val):
            raise QsoError(f"entry {e!r} out of range for m={m}")
        if idx in explicit:
            raise QsoError(f"duplicate entry for index {[t + 1 for t in idx]}")
        explicit[idx] = val
    for idx, val in explicit.items():
        raw[idx] = val
    if not sym:
        for idx, val in explicit.items():
            parents, k = idx[:-1], idx[-1]
            for perm in set(itertools.permutations(parents)):
                if perm + (k,) not in explicit:
                    raw[perm + (k,)] = val
    return make_operator(name, raw, symmetrize_=sym)
