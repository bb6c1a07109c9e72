"""Trajectories, fixed points, omega-limit estimates and Cesàro averages."""
from __future__ import annotations

import enum
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, NoConvergence, NotAFixedPoint, TrajectoryTooShort
from .operators import OperatorSpec, apply_raw, jacobian, volterra_form, volterra_multipliers
from .simplex import (EPS_CMP, SeedLike, SimplexPoint, as_rng, decreasing_rearrangement,
                      prefix_slacks, project_to_simplex, sample_uniform_array)

FP_TOL = 1e-10
CLASSIFY_TOL = 1e-9
CLUSTER_RADIUS = 1e-4
TAIL_FRACTION = 0.2


# -- stepping ---------------------------------------------------------------

class _Stepper:
    """Advances stacked states ``(N, m)`` by one application of the operator.

    Two engines. ``direct`` evaluates the polynomial and (optionally)
    renormalizes. ``log`` is used for quadratic Volterra operators: there
    ``(Vx)_k = x_k * sum_i C[k, i] x_i`` with ``C >= 0``, so the update is exact
    in log-coordinates and coordinates that decay super-exponentially (as on
    heteroclinic cycles) are tracked instead of underflowing to zero.
    """

    def __init__(self, op: OperatorSpec, engine: str = "auto", renormalize: bool = True):
        if engine == "auto":
            engine = "log" if (renormalize and op.degree == 2 and volterra_form(op).is_volterra) else "direct"
        if engine == "log" and not renormalize:
            raise ValueError("the log engine always renormalizes")
        if engine not in ("log", "direct"):
            raise ValueError(f"unknown engine {engine!r}")
        self.op = op
        self.engine = engine
        self.renormalize = renormalize
        self._p = op.p.reshape(-1, op.m)
        if engine == "log":
            c = volterra_multipliers(op)
            with np.errstate(divide="ignore"):
                self._log_c = np.log(c)

    def init(self, xs: np.ndarray) -> np.ndarray:
        if self.engine == "log":
            with np.errstate(divide="ignore"):
                return np.log(xs)
        return np.array(xs, dtype=float)

    def linear(self, state: np.ndarray) -> np.ndarray:
        return np.exp(state) if self.engine == "log" else state

    def step(self, state: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if self.engine == "log":
            return self._step_log(state)
        x = state
        mono = x
        for _ in range(self.op.degree - 1):
            mono = (mono[:, :, None] * x[:, None, :]).reshape(x.shape[0], -1)
        y = mono @ self._p
        total = y.sum(axis=1)
        defect = np.abs(total - 1.0)
        if self.renormalize:
            np.clip(y, 0.0, None, out=y)
            y /= y.sum(axis=1, keepdims=True)
        return y, defect

    def _step_log(self, lx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        a = self._log_c[None, :, :] + lx[:, None, :]
        lm = _logsumexp(a)
        new = lx + lm
        top = new.max(axis=1, keepdims=True)
        mass = np.exp(new - top).sum(axis=1, keepdims=True)
        defect = np.abs(np.exp(top[:, 0]) * mass[:, 0] - 1.0)
        return new - top - np.log(mass), defect


def _logsumexp(a: np.ndarray) -> np.ndarray:
    top = a.max(axis=-1)
    safe = np.where(np.isfinite(top), top, 0.0)
    with np.errstate(divide="ignore"):
        return safe + np.log(np.exp(a - safe[..., None]).sum(axis=-1))


def _as_stack(op: OperatorSpec, x0) -> np.ndarray:
    xs = np.atleast_2d(np.asarray(x0, dtype=float))
    if xs.shape[1] != op.m:
        raise DimensionMismatch(f"operator has m={op.m}, start has {xs.shape[1]} coordinates")
    return xs


# -- trajectories -----------------------------------------------------------

@dataclass(eq=False)
class Trajectory:
    """``states[t]`` is ``V^t x0``; ``defects[t]`` is the mass defect of step ``t``
    before renormalization (``defects[0] = 0``)."""

    states: np.ndarray
    defects: np.ndarray
    op_name: str
    renormalized: bool
    engine: str

    @property
    def mass_defect_max(self) -> float:
        return float(self.defects.max())

    @property
    def points(self) -> list[SimplexPoint]:
        return [SimplexPoint(s) for s in self.states]

    def __len__(self) -> int:
        return len(self.states)


def iterate_many(op: OperatorSpec, x0s, n: int, engine: str = "auto",
                 renormalize: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Iterate several starts together.

    Returns ``states`` of shape ``(n + 1, N, m)`` and ``defects`` of shape
    ``(n + 1, N)``.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    xs = _as_stack(op, x0s)
    stepper = _Stepper(op, engine, renormalize)
    states = np.empty((n + 1,) + xs.shape)
    defects = np.zeros((n + 1, xs.shape[0]))
    states[0] = xs
    s = stepper.init(xs)
    for t in range(1, n + 1):
        s, defects[t] = stepper.step(s)
        states[t] = stepper.linear(s)
    return states, defects


def iterate(op: OperatorSpec, x0, n: int, renormalize: bool = True, engine: str = "auto") -> Trajectory:
    """The orbit ``x0, Vx0, ..., V^n x0``.

    ``renormalize=False`` is a diagnostics mode that leaves the raw polynomial
    values untouched so drift can be measured.
    """
    stepper_engine = _Stepper(op, engine, renormalize).engine
    states, defects = iterate_many(op, np.asarray(x0, dtype=float)[None, :], n, stepper_engine, renormalize)
    return Trajectory(states[:, 0, :], defects[:, 0], op.name, renormalize, stepper_engine)


@dataclass(frozen=True)
class ChainCheck:
    holds: bool
    min_slack: float
    first_violation_index: Optional[int]


def majorization_chain_check(traj, tol: float = EPS_CMP) -> ChainCheck:
    """Is ``x ≺ Vx ≺ V²x ≺ ...`` along the trajectory?

    ``first_violation_index`` is ``t`` such that ``states[t+1]`` fails to
    majorize ``states[t]``.
    """
    states = traj.states if isinstance(traj, Trajectory) else np.asarray(traj)
    if len(states) < 2:
        return ChainCheck(True, math.inf, None)
    fwd, _ = prefix_slacks(states[1:], states[:-1])
    bad = np.nonzero(fwd < -tol)[0]
    return ChainCheck(bad.size == 0, float(fwd.min()), int(bad[0]) if bad.size else None)


def lyapunov_phi(x, excluded: Iterable[int]) -> float:
    """Total mass outside the 1-based index set ``excluded``."""
    c = np.asarray(x, dtype=float)
    excluded = set(excluded)
    if not excluded or len(excluded) >= c.size or not excluded <= set(range(1, c.size + 1)):
        raise ValueError(f"excluded must be a nonempty proper subset of 1..{c.size}")
    keep = [i for i in range(c.size) if i + 1 not in excluded]
    return float(c[..., keep].sum(axis=-1))


def phi_series(states: np.ndarray, excluded: Iterable[int]) -> np.ndarray:
    excluded = set(excluded)
    keep = [i for i in range(states.shape[-1]) if i + 1 not in excluded]
    return states[..., keep].sum(axis=-1)


def phi_nonincreasing(traj, excluded: Iterable[int], tol: float = EPS_CMP) -> tuple[bool, float]:
    """Whether the Lyapunov sum never grows by more than ``tol``; also the largest increase."""
    states = traj.states if isinstance(traj, Trajectory) else np.asarray(traj)
    phi = phi_series(states, excluded)
    rise = float(np.max(np.diff(phi, axis=0), initial=-math.inf))
    return rise <= tol, rise


# -- Cesàro averages --------------------------------------------------------

def pow2_schedule(n_max: int) -> list[int]:
    out = [1 << k for k in range(int(math.log2(n_max)) + 1) if (1 << k) <= n_max]
    return out if out[-1] == n_max else out + [n_max]


def tail_schedule(n_max: int, count: int = 10) -> list[int]:
    return list(range(max(1, n_max - count + 1), n_max + 1))


def log_schedule(lo: int, hi: int, count: int = 10) -> list[int]:
    return sorted({int(round(v)) for v in np.geomspace(lo, hi, count)})


@dataclass(eq=False)
class CesaroResult:
    partial_means: list  # (n, mean vector) pairs
    converged: bool
    limit_estimate: Optional[SimplexPoint]
    fluctuation: float
    window: int = 10


def _fluctuation(means: Sequence[np.ndarray]) -> float:
    worst = 0.0
    for a, b in itertools.combinations(means, 2):
        worst = max(worst, float(np.abs(a - b).max()))
    return worst


def cesaro_many(op: OperatorSpec, x0s, n_max: int, tol: float = 1e-6,
                sample_schedule: Optional[Sequence[int]] = None, engine: str = "auto",
                window: int = 10, chunk: int = 8192) -> list[CesaroResult]:
    """:func:`cesaro` for several starts iterated together (one result per start)."""
    if n_max < 10:
        raise ValueError("n_max must be >= 10")
    schedule = sorted(set(int(n) for n in (sample_schedule or pow2_schedule(n_max)) if 1 <= n <= n_max))
    if not schedule:
        raise ValueError("sample schedule has no entry in 1..n_max")
    xs = _as_stack(op, x0s)
    stepper = _Stepper(op, engine)
    state = stepper.init(xs)
    current = xs.copy()
    total = np.zeros_like(xs)
    done = 0  # iterates summed so far
    sampled = []
    pending = iter(schedule)
    target = next(pending)
    while target is not None:
        block = min(chunk, n_max - done)
        buf = np.empty((block,) + xs.shape)
        for t in range(block):
            buf[t] = current
            state, _ = stepper.step(state)
            current = stepper.linear(state)
        csum = np.cumsum(buf, axis=0) + total
        while target is not None and target <= done + block:
            mean = csum[target - done - 1] / target
            sampled.append((target, mean / mean.sum(axis=1, keepdims=True)))
            target = next(pending, None)
        total = csum[-1]
        done += block
    results = []
    for s in range(xs.shape[0]):
        means = [(n, mean[s]) for n, mean in sampled]
        fluct = _fluctuation([mean for _, mean in means[-window:]])
        converged = fluct < tol
        limit = SimplexPoint(means[-1][1]) if converged else None
        results.append(CesaroResult(means, converged, limit, fluct, window))
    return results


def cesaro(op: OperatorSpec, x0, n_max: int, tol: float = 1e-6,
           sample_schedule: Optional[Sequence[int]] = None, engine: str = "auto",
           window: int = 10) -> CesaroResult:
    """Running means ``(x + Vx + ... + V^{n-1} x) / n`` sampled at ``sample_schedule``.

    Default schedule: powers of two up to ``n_max`` (plus ``n_max``).
    ``fluctuation`` is the largest pairwise sup-distance among the last
    ``window`` sampled means; ``converged`` means it is below ``tol``. A large
    fluctuation is a diagnosis over the computed range, not a proof.
    """
    x = np.asarray(x0, dtype=float)[None, :]
    return cesaro_many(op, x, n_max, tol, sample_schedule, engine, window)[0]


def cesaro_subsequence(op: OperatorSpec, x0, indices: Sequence[int], engine: str = "auto") -> np.ndarray:
    """Average of ``V^{n_k} x0`` over the given (nonnegative) iterate indices."""
    idx = sorted(int(i) for i in indices)
    if not idx or idx[0] < 0:
        raise ValueError("indices must be a nonempty list of nonnegative integers")
    states, _ = iterate_many(op, np.asarray(x0, dtype=float)[None, :], idx[-1], engine)
    return states[idx, 0, :].mean(axis=0)


# -- omega-limit estimates --------------------------------------------------

@dataclass(eq=False)
class OmegaEstimate:
    clusters: list  # (SimplexPoint, visit count)
    cycle_order: Optional[int]
    sorted_limit: np.ndarray


def omega_estimate(traj, tail_fraction: float = TAIL_FRACTION,
                   cluster_radius: float = CLUSTER_RADIUS) -> OmegaEstimate:
    """Greedy sup-norm clustering of the trajectory tail.

    A cluster is represented by its most recent member, the tail point closest
    in time to the limit set. ``cycle_order`` is the smallest ``p <= m!`` with
    every tail point within ``cluster_radius`` of the point ``p`` steps later.
    """
    states = traj.states if isinstance(traj, Trajectory) else np.asarray(traj)
    if len(states) < 100:
        raise TrajectoryTooShort(f"need at least 100 points, got {len(states)}")
    m = states.shape[1]
    tail = states[len(states) - max(2, int(round(tail_fraction * len(states)))):]
    reps: list[np.ndarray] = []
    counts: list[int] = []
    for x in tail:
        for c, r in enumerate(reps):
            if np.abs(x - r).max() <= cluster_radius:
                reps[c] = x
                counts[c] += 1
                break
        else:
            reps.append(x)
            counts.append(1)
    cycle = None
    for period in range(1, min(math.factorial(m), len(tail) // 2) + 1):
        if np.abs(tail[period:] - tail[:-period]).max() <= cluster_radius:
            cycle = period
            break
    clusters = [(SimplexPoint(r), n) for r, n in zip(reps, counts)]
    return OmegaEstimate(clusters, cycle, decreasing_rearrangement(states[-1]))


# -- fixed points -----------------------------------------------------------

class FixedPointClass(str, enum.Enum):
    ELLIPTIC = "ELLIPTIC"
    HYPERBOLIC = "HYPERBOLIC"
    PARABOLIC = "PARABOLIC"
    MIXED = "MIXED"


@dataclass(eq=False)
class FixedPointResult:
    point: SimplexPoint
    residual: float
    classification: FixedPointClass
    restricted_eigenvalues: list  # moduli, descending
    continuum: bool = False
    endpoints: Optional[tuple] = None


def residual(op: OperatorSpec, x) -> float:
    c = np.asarray(x, dtype=float)
    return float(np.abs(apply_raw(op, c) - c).max())


def restricted_jacobian(op: OperatorSpec, x) -> np.ndarray:
    """Jacobian acting on the plane ``sum v = 0`` in the basis ``e_i - e_{i+1}``."""
    m = op.m
    basis = np.zeros((m, m - 1))
    for i in range(m - 1):
        basis[i, i], basis[i + 1, i] = 1.0, -1.0
    return np.linalg.lstsq(basis, jacobian(op, x) @ basis, rcond=None)[0]


def classify_moduli(moduli: Sequence[float], tol: float = CLASSIFY_TOL) -> FixedPointClass:
    moduli = np.asarray(moduli)
    if np.all(moduli < 1 - tol):
        return FixedPointClass.ELLIPTIC
    if np.all(moduli > 1 + tol):
        return FixedPointClass.HYPERBOLIC
    if np.any(np.abs(moduli - 1) <= tol) and not np.any(moduli > 1 + tol):
        return FixedPointClass.PARABOLIC
    return FixedPointClass.MIXED


def classify_fixed_point(op: OperatorSpec, x0, tol: float = CLASSIFY_TOL, fp_tol: float = FP_TOL) -> FixedPointResult:
    point = x0 if isinstance(x0, SimplexPoint) else SimplexPoint(x0)
    res = residual(op, point.coords)
    if res > fp_tol:
        raise NotAFixedPoint(f"residual {res!r} exceeds {fp_tol!r}", residual=res)
    moduli = sorted((float(abs(v)) for v in np.linalg.eigvals(restricted_jacobian(op, point.coords))), reverse=True)
    return FixedPointResult(point, res, classify_moduli(moduli, tol), moduli)


def _hyperplane_basis(m: int) -> np.ndarray:
    d = np.zeros((m, m - 1))
    d[: m - 1] = np.eye(m - 1)
    d[m - 1] = -1.0
    return d


def _newton(op: OperatorSpec, x: np.ndarray, max_iter: int = 100, max_halvings: int = 60) -> np.ndarray:
    basis = _hyperplane_basis(op.m)
    eye = np.eye(op.m)
    r = residual(op, x)
    for _ in range(max_iter):
        f = apply_raw(op, x) - x
        dy = np.linalg.lstsq((jacobian(op, x) - eye) @ basis, -f, rcond=None)[0]
        dx = basis @ dy
        t = 1.0
        for _ in range(max_halvings):
            cand = project_to_simplex(x + t * dx)
            rc = residual(op, cand)
            if rc < r:
                break
            t /= 2
        else:
            break
        x, r = cand, rc
        if r == 0.0:
            break
    return x


def _projected_descent(op: OperatorSpec, x: np.ndarray, max_iter: int = 2000) -> np.ndarray:
    eye = np.eye(op.m)
    f = apply_raw(op, x) - x
    g = 0.5 * f @ f
    step = 1.0
    for _ in range(max_iter):
        grad = (jacobian(op, x) - eye).T @ f
        while step > 1e-12:
            cand = project_to_simplex(x - step * grad)
            fc = apply_raw(op, cand) - cand
            gc = 0.5 * fc @ fc
            if gc < g:
                x, f, g = cand, fc, gc
                step *= 2
                break
            step /= 2
        else:
            break
    return x


def _snap(op: OperatorSpec, x: np.ndarray, fp_tol: float, threshold: float = 1e-7) -> np.ndarray:
    """Zero coordinates below ``threshold`` when the face point is still fixed.

    Newton converges only linearly towards parabolic boundary fixed points and
    stalls roughly ``sqrt(eps)`` away from them; snapping merges those copies.
    """
    small = x < threshold
    if not small.any() or small.all():
        return x
    y = np.where(small, 0.0, x)
    y /= y.sum()
    return y if residual(op, y) <= fp_tol else x


def _solve_from(op: OperatorSpec, x: np.ndarray, fp_tol: float) -> Optional[np.ndarray]:
    x = _newton(op, x)
    if residual(op, x) > fp_tol:
        x = _newton(op, _projected_descent(op, x))
    if residual(op, x) > fp_tol:
        return None
    return _snap(op, x, fp_tol)


def _segment_is_fixed(op: OperatorSpec, a: np.ndarray, b: np.ndarray, fp_tol: float) -> bool:
    coarse = [k / 6 for k in range(1, 6)]
    fine = [k / 12 for k in range(1, 12, 2)]
    return all(residual(op, (1 - t) * a + t * b) <= fp_tol for t in coarse + fine)


def _extend(op: OperatorSpec, a: np.ndarray, b: np.ndarray, fp_tol: float, steps: int = 60) -> np.ndarray:
    """Walk from ``b`` away from ``a`` to the end of the fixed segment (or the simplex boundary)."""
    d = b - a
    neg = d < 0
    t_max = float(np.min(b[neg] / -d[neg])) if neg.any() else 0.0
    edge = np.clip(b + t_max * d, 0.0, None)
    if residual(op, edge) <= fp_tol:
        return edge / edge.sum()
    lo, hi = 0.0, t_max
    for _ in range(steps):
        mid = (lo + hi) / 2
        if residual(op, b + mid * d) <= fp_tol:
            lo = mid
        else:
            hi = mid
    end = np.clip(b + lo * d, 0.0, None)
    return end / end.sum()


def _on_segment(x: np.ndarray, a: np.ndarray, b: np.ndarray, tol: float) -> bool:
    d = b - a
    t = float(np.clip((x - a) @ d / (d @ d), 0.0, 1.0))
    return float(np.abs(a + t * d - x).max()) <= tol


def _workers_map(fn, items, workers: int):
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def find_fixed_points(op: OperatorSpec, n_starts: int = 32, fp_tol: float = FP_TOL, seed: SeedLike = 0,
                      classify_tol: float = CLASSIFY_TOL, workers: int = 1) -> list[FixedPointResult]:
    """Multistart search for fixed points.

    Vertices are checked exactly (``e_i`` is fixed iff the pure-parent row is
    ``e_i``). Every random start runs damped Newton in hyperplane coordinates,
    with projected descent on ``|Vx - x|^2`` as a fallback. Points within
    ``10 * fp_tol`` of each other are merged. When two found points span a
    segment of fixed points the segment is extended to its ends and every found
    point on it is flagged as part of a continuum.
    """
    if n_starts < 1:
        raise ValueError("n_starts must be >= 1")
    m = op.m
    found: list[np.ndarray] = []
    for i in range(m):
        if residual(op, np.eye(m)[i]) <= fp_tol:
            found.append(np.eye(m)[i])
    starts = sample_uniform_array(m, n_starts, as_rng(seed))
    for x in _workers_map(lambda s: _solve_from(op, s, fp_tol), list(starts), workers):
        if x is not None:
            found.append(x)
    if not found:
        raise NoConvergence(f"no fixed point found from {n_starts} starts")

    unique: list[np.ndarray] = []
    for x in found:
        if all(np.abs(x - u).max() > 10 * fp_tol for u in unique):
            unique.append(x)

    segments: list[tuple[np.ndarray, np.ndarray]] = []
    member: dict[int, tuple] = {}
    pairs = sorted(itertools.combinations(range(len(unique)), 2),
                   key=lambda ij: -float(np.abs(unique[ij[0]] - unique[ij[1]]).max()))
    for i, j in pairs:
        if i in member and j in member:
            continue
        a, b = unique[i], unique[j]
        if not _segment_is_fixed(op, a, b, fp_tol):
            continue
        ends = (_extend(op, b, a, fp_tol), _extend(op, a, b, fp_tol))
        segments.append(ends)
        for idx, x in enumerate(unique):
            if idx not in member and _on_segment(x, ends[0], ends[1], 10 * fp_tol + 1e-12):
                member[idx] = ends

    results = []
    for idx, x in enumerate(unique):
        fp = classify_fixed_point(op, x, classify_tol, fp_tol)
        if idx in member:
            fp.continuum = True
            fp.endpoints = tuple(SimplexPoint(e) for e in member[idx])
        results.append(fp)
    return results
