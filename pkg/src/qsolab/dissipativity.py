"""Necessary conditions and randomized falsification of ``Vx ≻ x``.

Nothing here proves dissipativity. The exact checks can refute it; the sampled
search can refute it with a witness; otherwise the verdict is only
``CONSISTENT``.
"""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import NotAPartition
from .operators import EPS_STOCH, OperatorSpec, QsoTensor, apply_raw
from .simplex import EPS_CMP, SeedLike, SimplexPoint, as_rng, prefix_slacks, sample_uniform_array

REFERENCE_PROBE = (0.5, 0.49, 0.01)
_CHUNK = 8192


@dataclass(frozen=True)
class VertexRowResult:
    index: int  # 1-based species
    passed: bool
    row: tuple


def _vertex_row(op: OperatorSpec, i: int) -> np.ndarray:
    return op.p[(i,) * op.degree]


def check_vertex_rows(op: OperatorSpec, tol: float = EPS_STOCH) -> list[VertexRowResult]:
    """A pure parent ``i`` (``x = e_i``) must produce a single species."""
    out = []
    for i in range(op.m):
        row = _vertex_row(op, i)
        out.append(VertexRowResult(i + 1, bool(row.max() >= 1.0 - tol), tuple(float(v) for v in row)))
    return out


@dataclass(frozen=True)
class AlphaPartition:
    """``parts[k]`` is the set of species whose pure parents produce ``k`` (all 1-based)."""

    parts: dict

    def owner(self, j: int) -> int:
        for k, members in self.parts.items():
            if j in members:
                return k
        raise KeyError(j)

    def nonempty(self) -> dict:
        return {k: v for k, v in self.parts.items() if v}


def extract_alpha_partition(op: Union[OperatorSpec, QsoTensor], tol: float = EPS_STOCH) -> AlphaPartition:
    m = op.m
    degree = op.degree
    parts = {k + 1: set() for k in range(m)}
    for i in range(m):
        row = op.p[(i,) * degree]
        for k in np.nonzero(row >= 1.0 - tol)[0]:
            parts[int(k) + 1].add(i + 1)
    covered = [j for members in parts.values() for j in members]
    missing = sorted(set(range(1, m + 1)) - set(covered))
    if missing or len(covered) != m:
        raise NotAPartition(f"species {missing} produce no single offspring", missing=missing)
    return AlphaPartition({k: frozenset(v) for k, v in parts.items()})


@dataclass
class NecessaryConditionsReport:
    lemma_vertex_rows: list
    lemma_half_bound: list = field(default_factory=list)  # (i, j, k0, p)
    lemma_third_zero: list = field(default_factory=list)  # (i, j, third largest)
    partition: Optional[AlphaPartition] = None

    @property
    def overall(self) -> bool:
        return (all(r.passed for r in self.lemma_vertex_rows)
                and not self.lemma_half_bound and not self.lemma_third_zero)


def half_bound(degree: int) -> float:
    """Smallest share a pure-parent species may keep in a mixed pairing."""
    return 1.0 / 2.0 if degree == 2 else 2.0 / 3.0


def check_half_bound(op: OperatorSpec, partition: AlphaPartition, tol: float = EPS_STOCH) -> NecessaryConditionsReport:
    """Pairwise conditions given the partition.

    For ``j`` in part ``k0`` and every ``i``: the row of parents ``(i, j)``
    (cubic: ``(i, j, j)``) must put at least 1/2 (cubic: 2/3) on ``k0`` and have
    at most two nonzero entries. The second condition is vacuous for ``m = 2``.
    """
    m, degree = op.m, op.degree
    bound = half_bound(degree)
    report = NecessaryConditionsReport(check_vertex_rows(op, tol), partition=partition)
    for j in range(m):
        k0 = partition.owner(j + 1) - 1
        for i in range(m):
            parents = (i, j) if degree == 2 else (i, j, j)
            row = op.p[parents]
            if row[k0] < bound - tol:
                report.lemma_half_bound.append((i + 1, j + 1, k0 + 1, float(row[k0])))
            if m >= 3:
                third = float(np.sort(row)[-3])
                if third > tol:
                    report.lemma_third_zero.append((i + 1, j + 1, third))
    return report


def necessary_conditions(op: OperatorSpec, tol: float = EPS_STOCH) -> NecessaryConditionsReport:
    rows = check_vertex_rows(op, tol)
    if not all(r.passed for r in rows):
        return NecessaryConditionsReport(rows)
    return check_half_bound(op, extract_alpha_partition(op, tol), tol)


class Verdict(str, enum.Enum):
    REFUTED_EXACT = "REFUTED_EXACT"
    REFUTED_SAMPLED = "REFUTED_SAMPLED"
    CONSISTENT = "CONSISTENT"


@dataclass
class SampledSummary:
    n_samples: int
    min_slack: float
    witness: Optional[SimplexPoint]
    witness_slack: Optional[float]
    witness_phase: Optional[str]
    near_vertex_phase: bool


@dataclass
class DissipativityReport:
    necessary: Optional[NecessaryConditionsReport]
    sampled: SampledSummary
    verdict: Verdict
    direction: str = "dissipative"


def probe_points(m: int) -> np.ndarray:
    """Deterministic probes: the reference point (m = 3), vertices, edge midpoints, barycenter."""
    pts = []
    if m == 3:
        pts.append(REFERENCE_PROBE)
    eye = np.eye(m)
    pts.extend(eye)
    for i, j in itertools.combinations(range(m), 2):
        pts.append((eye[i] + eye[j]) / 2)
    pts.append(np.full(m, 1.0 / m))
    return np.array(pts, dtype=float)


def near_vertex_points(m: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """``(1 - lam) e_j + lam u`` with ``lam ~ U(0, 0.1)`` and ``u`` uniform."""
    j = rng.integers(m, size=n)
    lam = rng.uniform(0.0, 0.1, size=n)
    u = sample_uniform_array(m, n, rng)
    x = lam[:, None] * u
    x[np.arange(n), j] += 1.0 - lam
    return x


def _phases(m: int, n: int, rng: np.random.Generator):
    yield "probe", probe_points(m)
    for start in range(0, n, _CHUNK):
        yield "uniform", sample_uniform_array(m, min(_CHUNK, n - start), rng)
    for start in range(0, n, _CHUNK):
        yield "near_vertex", near_vertex_points(m, min(_CHUNK, n - start), rng)


def _sample(op: OperatorSpec, n: int, tol: float, seed: SeedLike, reverse: bool) -> SampledSummary:
    rng = as_rng(seed)
    count = 0
    min_slack = np.inf
    witness = witness_slack = phase_found = None
    for phase, xs in _phases(op.m, n, rng):
        vx = apply_raw(op, xs)
        vx /= vx.sum(axis=1, keepdims=True)
        fwd, bwd = prefix_slacks(vx, xs)
        slack = bwd if reverse else fwd
        count += len(xs)
        min_slack = min(min_slack, float(slack.min()))
        if witness is None:
            bad = np.nonzero(slack < -tol)[0]
            if bad.size:
                witness = SimplexPoint(xs[bad[0]])
                witness_slack = float(slack[bad[0]])
                phase_found = phase
    return SampledSummary(count, min_slack, witness, witness_slack, phase_found, n > 0)


def certify_sampled(op: OperatorSpec, n: int = 10_000, tol: float = EPS_CMP, seed: SeedLike = 0,
                    coef_tol: float = EPS_STOCH) -> DissipativityReport:
    """Exact necessary conditions, then a search for ``x`` with ``Vx ⊁ x``.

    The search always runs (so the report carries a slack profile even when the
    exact checks already fail); the verdict prefers ``REFUTED_EXACT``. Points
    are tried in a fixed order: probes, then ``n`` uniform draws, then ``n``
    near-vertex draws; the witness is the first failure in that order.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    necessary = necessary_conditions(op, coef_tol)
    sampled = _sample(op, n, tol, seed, reverse=False)
    if not necessary.overall:
        verdict = Verdict.REFUTED_EXACT
    elif sampled.witness is not None:
        verdict = Verdict.REFUTED_SAMPLED
    else:
        verdict = Verdict.CONSISTENT
    return DissipativityReport(necessary, sampled, verdict)


def check_bistochastic_sampled(op: OperatorSpec, n: int = 10_000, tol: float = EPS_CMP,
                               seed: SeedLike = 0) -> DissipativityReport:
    """Search for ``x`` with ``Vx ⊀ x``; there are no exact checks in this direction."""
    if n < 1:
        raise ValueError("n must be >= 1")
    sampled = _sample(op, n, tol, seed, reverse=True)
    verdict = Verdict.REFUTED_SAMPLED if sampled.witness is not None else Verdict.CONSISTENT
    return DissipativityReport(None, sampled, verdict, direction="bistochastic")


class Form(str, enum.Enum):
    FORM_6 = "FORM_6"
    FORM_7 = "FORM_7"
    FORM_8 = "FORM_8"
    OTHER = "OTHER"


@dataclass(frozen=True)
class FormClassification:
    form: Form
    k: Optional[int] = None  # part holding everything (FORM_6) or all but l (FORM_7/8)
    l: Optional[int] = None  # the isolated species (FORM_7/8)
    k_l: Optional[int] = None  # part holding l

    @property
    def lyapunov_excluded(self) -> Optional[frozenset]:
        """Species left out of the decreasing Lyapunov sum, when one is known."""
        if self.form is Form.FORM_6:
            return frozenset({self.k})
        if self.form is Form.FORM_8:
            return frozenset({self.k, self.k_l})
        return None


def classify_form(q, partition: AlphaPartition) -> FormClassification:
    m = q.m
    everyone = frozenset(range(1, m + 1))
    parts = partition.nonempty()
    for k, members in parts.items():
        if members == everyone:
            return FormClassification(Form.FORM_6, k=k)
    if len(parts) == 2:
        (k1, big), (k2, small) = sorted(parts.items(), key=lambda kv: -len(kv[1]))
        if len(small) == 1:
            (l,) = small
            if big == everyone - small:
                form = Form.FORM_8 if l == k2 else Form.FORM_7
                return FormClassification(form, k=k1, l=l, k_l=k2)
    return FormClassification(Form.OTHER)
