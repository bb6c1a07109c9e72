"""Named operators.

Each entry is written the way the operator is usually displayed: for every
offspring ``k`` a polynomial in ``x`` given as ``{monomial: coefficient}``
where a monomial is a tuple of 1-based species indices. The coefficient of a
mixed monomial is spread evenly over the orderings of its parents, so the
coefficient ``c`` of ``x_1 x_2`` becomes ``p[1,2,k] = p[2,1,k] = c / 2``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction as Fr
from typing import Callable, Optional

import numpy as np

from .errors import ParamOutOfRange, UnknownName
from .operators import OperatorSpec, from_volterra_matrix, make_operator
from .simplex import as_rng

Poly = dict[tuple, object]


def from_polynomials(name: str, m: int, polys: dict[int, Poly], degree: int = 2) -> OperatorSpec:
    p = np.zeros((m,) * (degree + 1))
    for k, poly in polys.items():
        for mono, coeff in poly.items():
            perms = set(itertools.permutations(i - 1 for i in mono))
            share = Fr(coeff) / len(perms) if isinstance(coeff, (int, Fr)) else float(coeff) / len(perms)
            for perm in perms:
                p[perm + (k - 1,)] = float(share)
    return make_operator(name, p)


def _squares(indices) -> Poly:
    return {(i, i): 1 for i in indices}


@dataclass(frozen=True)
class GalleryEntry:
    name: str
    build: Callable[[dict], OperatorSpec]
    citation: str
    params: dict  # name -> (default, lo, hi)
    dissipative: Optional[bool]  # True/False when known, None when it depends


def _example_3d(_params):
    return from_polynomials("example-3d", 3, {
        1: {**_squares([1, 2, 3]), (1, 2): 1, (1, 3): 1, (2, 3): 1},
        2: {(1, 2): 1, (1, 3): 1},
        3: {(2, 3): 1},
    })


def _v0(_params):
    return from_polynomials("v0", 3, {
        1: {(1, 2): 1, (1, 3): 1},
        2: {**_squares([1, 2, 3]), (1, 2): 1, (2, 3): 1, (1, 3): 1},
        3: {(2, 3): 1},
    })


def _v1(_params):
    op = _example_3d(_params)
    return make_operator("v1", op.p)


def _two_dim_family(params):
    a = Fr(params["a"]).limit_denominator(10**12)
    return from_polynomials("two-dim-family", 2, {
        1: {**_squares([1, 2]), (1, 2): a},
        2: {(1, 2): 2 - a},
    })


def _counterexample(_params):
    # x1 + x2 - x1 x2 and x3 + 0.2 x1 x2, homogenized with x1 + x2 + x3 = 1
    return from_polynomials("counterexample-necessary", 3, {
        1: {**_squares([1, 2]), (1, 2): 1, (1, 3): 1, (2, 3): 1},
        2: {(1, 2): Fr(4, 5)},
        3: {(3, 3): 1, (1, 3): 1, (2, 3): 1, (1, 2): Fr(1, 5)},
    })


def _form6_random(params):
    """All squares feed species 1; each mixed pair sends at least half its mass there."""
    m = int(params["m"])
    rng = as_rng(int(params["seed"]))
    p = np.zeros((m, m, m))
    for i in range(m):
        p[i, i, 0] = 1.0
    for i, j in itertools.combinations(range(m), 2):
        row = np.zeros(m)
        row[0] = rng.uniform(0.5, 1.0)
        rest = rng.uniform(size=m - 1)
        row[1:] = (1.0 - row[0]) * rest / rest.sum()
        p[i, j] = p[j, i] = row
    return make_operator("form6-random", p)


def _form6_nondissipative(params):
    trip = {}
    for key in "abc":
        first, second = Fr(params[key + "1"]), Fr(params[key + "2"])
        third = 2 - first - second
        if third < 0:
            raise ParamOutOfRange(f"{key}1 + {key}2 must not exceed 2")
        trip[key] = (first, second, third)
    a, b, c = trip["a"], trip["b"], trip["c"]
    return from_polynomials("form6-nondissipative", 3, {
        1: {**_squares([1, 2, 3]), (1, 2): a[0], (2, 3): b[0], (1, 3): c[0]},
        2: {(1, 2): a[1], (2, 3): b[1], (1, 3): c[1]},
        3: {(1, 2): a[2], (2, 3): b[2], (1, 3): c[2]},
    })


def _form8_instance(_params):
    # alpha_1 = {1, 3, 4}, alpha_2 = {2}: the segment co{e1, e2} is fixed pointwise
    return from_polynomials("form8-instance", 4, {
        1: {**_squares([1, 3, 4]), (1, 2): 1, (1, 3): 2, (1, 4): 2,
            (2, 3): 1, (2, 4): 1, (3, 4): 1},
        2: {(2, 2): 1, (1, 2): 1, (2, 3): 1, (2, 4): 1},
        3: {(3, 4): 1},
    })


def _f_qso(params):
    """F = {1} family on species 0..m-1 (stored as coordinates 1..m).

    Same-class pairs (everything involving the empty body 0, and male-male
    pairs) produce 0. A female-male pair ``(1, i)`` produces 0 with
    probability ``p`` and otherwise splits evenly between species 1 and ``i``.
    """
    m = int(params["m"])
    q = float(params["p"])
    p = np.zeros((m, m, m))
    p[:, :, 0] = 1.0
    for i in range(2, m):
        row = np.zeros(m)
        row[0] = q
        row[1] += (1 - q) / 2
        row[i] += (1 - q) / 2
        p[1, i] = p[i, 1] = row
    return make_operator("f-qso", p)


def _zakharevich(_params):
    return from_polynomials("zakharevich", 3, {
        1: {(1, 1): 1, (1, 2): 2},
        2: {(2, 2): 1, (2, 3): 2},
        3: {(3, 3): 1, (1, 3): 2},
    })


def _identity(params):
    return from_volterra_matrix(np.zeros((int(params["m"]),) * 2), name="identity")


def _cubic_example(params):
    """Cubic operator: pure cubes feed species 1, every other triple sends 2/3 to
    species 1 and 1/3 to species 2. Built for this toolkit; the 2/3 share is the
    smallest the cubic half-bound allows."""
    m = int(params["m"])
    p = np.zeros((m,) * 4)
    for triple in itertools.product(range(m), repeat=3):
        if len(set(triple)) == 1:
            p[triple + (0,)] = 1.0
        else:
            p[triple + (0,)] = 2.0 / 3.0
            p[triple + (1,)] = 1.0 / 3.0
    return make_operator("cubic-example", p)


_ENTRIES = [
    GalleryEntry("example-3d", _example_3d, "three-species dissipative example; all squares feed species 1", {}, True),
    GalleryEntry("v0", _v0, "dissipative operator V0; the midpoint of V0 and V1 is not dissipative", {}, True),
    GalleryEntry("v1", _v1, "dissipative operator V1 (same coefficients as example-3d)", {}, True),
    GalleryEntry("two-dim-family", _two_dim_family, "two species, x1^2 + x2^2 + a x1 x2; dissipative exactly for 1 <= a <= 2",
                 {"a": (1.5, 0.0, 2.0)}, None),
    GalleryEntry("counterexample-necessary", _counterexample,
                 "(x1 + x2 - x1 x2, 0.8 x1 x2, x3 + 0.2 x1 x2); not dissipative at (0.5, 0.49, 0.01)", {}, False),
    GalleryEntry("form6-random", _form6_random, "random operator with every pure parent producing species 1 and mixed pairs keeping >= 1/2 there",
                 {"seed": (0, 0, 2**63 - 1), "m": (3, 2, 20)}, None),
    GalleryEntry("form6-nondissipative", _form6_nondissipative,
                 "squares feed species 1, mixed pairs have three positive coefficients; not dissipative",
                 {"a1": (1.2, 1.0, 2.0), "a2": (0.5, 0.0, 1.0), "b1": (1.4, 1.0, 2.0), "b2": (0.4, 0.0, 1.0),
                  "c1": (1.6, 1.0, 2.0), "c2": (0.1, 0.0, 1.0)}, False),
    GalleryEntry("form8-instance", _form8_instance, "m = 4, species 2 breeds true and the rest feed species 1; the edge co{e1, e2} is fixed", {}, True),
    GalleryEntry("f-qso", _f_qso, "F-operator with female set F = {1}", {"p": (0.5, 0.0, 1.0), "m": (3, 3, 20)}, None),
    GalleryEntry("zakharevich", _zakharevich, "Zakharevich's Volterra operator; Cesàro means do not converge", {}, False),
    GalleryEntry("identity", _identity, "Volterra identity operator", {"m": (3, 2, 20)}, True),
    GalleryEntry("cubic-example", _cubic_example,
                 "cubic operator: pure cubes feed species 1, other triples split 2/3 : 1/3 between species 1 and 2",
                 {"m": (3, 2, 8)}, True),
]

GALLERY = {e.name: e for e in _ENTRIES}


def _resolve_params(entry: GalleryEntry, params: Optional[dict]) -> dict:
    params = dict(params or {})
    unknown = set(params) - set(entry.params)
    if unknown:
        raise ParamOutOfRange(f"{entry.name} has no parameter(s) {sorted(unknown)}")
    out = {}
    for key, (default, lo, hi) in entry.params.items():
        val = params.get(key, default)
        try:
            num = float(val)
        except (TypeError, ValueError) as exc:
            raise ParamOutOfRange(f"{key}={val!r} is not a number") from exc
        if not lo <= num <= hi:
            raise ParamOutOfRange(f"{key}={val} outside [{lo}, {hi}]")
        out[key] = val
    return out


def gallery(name: str, params: Optional[dict] = None) -> OperatorSpec:
    """Build a named operator.

    >>> gallery("two-dim-family", {"a": 2}).p[0, 1, 0]
    1.0
    """
    try:
        entry = GALLERY[name]
    except KeyError:
        raise UnknownName(f"unknown operator {name!r}; known: {', '.join(GALLERY)}") from None
    return entry.build(_resolve_params(entry, params))


def roster() -> list[dict]:
    return [{"name": e.name, "citation": e.citation,
             "params": {k: v[0] for k, v in e.params.items()}, "dissipative": e.dissipative}
            for e in _ENTRIES]
