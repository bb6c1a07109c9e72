"""Serialization: JSON reports, CSV series, operator files.

Floats are written with 17 significant digits so every value round-trips
exactly; non-finite floats become ``null``. Files are written atomically.
"""
from __future__ import annotations

import enum
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .dissipativity import DissipativityReport, NecessaryConditionsReport
from .dynamics import CesaroResult, FixedPointResult, OmegaEstimate, Trajectory
from .errors import QsoError
from .operators import OperatorSpec, from_json_dict
from .simplex import SimplexPoint


def fmt_float(x: float) -> str:
    return "%.17g" % x


def _dump(obj: Any, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or obj is True or obj is False:
        return json.dumps(obj)
    if isinstance(obj, enum.Enum):
        return _dump(obj.value, indent, level)
    if isinstance(obj, (int, np.integer)) and not isinstance(obj, bool):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(float(obj)) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, SimplexPoint):
        obj = obj.coords
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_dump(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, set, frozenset)):
        seq = sorted(obj) if isinstance(obj, (set, frozenset)) else list(obj)
        if not seq:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray, SimplexPoint)) for v in seq):
            return "[" + ", ".join(_dump(v, indent, level + 1) for v in seq) + "]"
        return "[\n" + ",\n".join(pad + _dump(v, indent, level + 1) for v in seq) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj: Any, indent: int = 2) -> str:
    return _dump(obj, indent, 0) + "\n"


def write_atomic(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(str(v) if isinstance(v, (int, np.integer)) else fmt_float(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def load_operator(path) -> OperatorSpec:
    """Read an operator file; unreadable or ill-formed input raises :class:`QsoError`."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise QsoError(f"cannot read operator file {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise QsoError("operator file must contain a JSON object")
    return from_json_dict(doc)


# -- report shapes ----------------------------------------------------------

def necessary_to_dict(rep: NecessaryConditionsReport) -> dict:
    part = None
    if rep.partition is not None:
        part = {str(k): sorted(v) for k, v in rep.partition.parts.items()}
    return {
        "overall": rep.overall,
        "vertex_rows": [{"i": r.index, "passed": r.passed, "row": list(r.row)} for r in rep.lemma_vertex_rows],
        "half_bound_violations": [{"i": i, "j": j, "k0": k, "p": p} for i, j, k, p in rep.lemma_half_bound],
        "third_zero_violations": [{"i": i, "j": j, "third": t} for i, j, t in rep.lemma_third_zero],
        "alpha_partition": part,
    }


def dissipativity_to_dict(rep: DissipativityReport) -> dict:
    s = rep.sampled
    return {
        "direction": rep.direction,
        "verdict": rep.verdict,
        "necessary": necessary_to_dict(rep.necessary) if rep.necessary is not None else None,
        "sampled": {
            "n_samples": s.n_samples,
            "min_slack": s.min_slack,
            "witness": s.witness,
            "witness_slack": s.witness_slack,
            "witness_phase": s.witness_phase,
            "near_vertex_phase": s.near_vertex_phase,
        },
    }


def fixed_point_to_dict(fp: FixedPointResult) -> dict:
    return {
        "point": fp.point,
        "residual": fp.residual,
        "classification": fp.classification,
        "restricted_moduli": fp.restricted_eigenvalues,
        "continuum": fp.continuum,
        "endpoints": list(fp.endpoints) if fp.endpoints else None,
    }


def omega_to_dict(om: OmegaEstimate) -> dict:
    return {
        "clusters": [{"representative": p, "visits": n} for p, n in om.clusters],
        "cycle_order": om.cycle_order,
        "sorted_limit": om.sorted_limit,
    }


def cesaro_summary(res: CesaroResult) -> dict:
    return {
        "converged": res.converged,
        "fluctuation": res.fluctuation,
        "window": res.window,
        "n_final": res.partial_means[-1][0],
        "final_mean": res.partial_means[-1][1],
        "limit_estimate": res.limit_estimate,
    }


def cesaro_csv(res: CesaroResult) -> str:
    m = len(res.partial_means[0][1])
    header = ["n"] + [f"mean{i}" for i in range(1, m + 1)] + ["fluctuation"]
    rows = []
    means = [mean for _, mean in res.partial_means]
    for idx, (n, mean) in enumerate(res.partial_means):
        window = means[max(0, idx - res.window + 1): idx + 1]
        fl = max((float(np.abs(a - b).max()) for a in window for b in window), default=0.0)
        rows.append([int(n), *mean, fl])
    return csv_text(header, rows)


def trajectory_csv(traj: Trajectory, phi: np.ndarray) -> str:
    m = traj.states.shape[1]
    header = ["n"] + [f"x{i}" for i in range(1, m + 1)] + ["phi", "defect"]
    rows = ([t, *traj.states[t], phi[t], traj.defects[t]] for t in range(len(traj)))
    return csv_text(header, rows)
