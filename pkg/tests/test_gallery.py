import numpy as np
import pytest

from qsolab.errors import ParamOutOfRange, UnknownName
from qsolab.gallery import GALLERY, gallery, roster
from qsolab.operators import apply_raw
from qsolab.simplex import sample_uniform_array

POINTS = sample_uniform_array(3, 40, 2024)

DISPLAYED = {
    "example-3d": lambda x1, x2, x3: (x1**2 + x2**2 + x3**2 + x1 * x2 + x1 * x3 + x2 * x3,
                                      x1 * x2 + x1 * x3, x2 * x3),
    "v0": lambda x1, x2, x3: (x1 * x2 + x1 * x3, x1**2 + x2**2 + x3**2 + x1 * x2 + x2 * x3 + x1 * x3, x2 * x3),
    "counterexample-necessary": lambda x1, x2, x3: (x1 + x2 - x1 * x2, 0.8 * x1 * x2, x3 + 0.2 * x1 * x2),
    "zakharevich": lambda x1, x2, x3: (x1**2 + 2 * x1 * x2, x2**2 + 2 * x2 * x3, x3**2 + 2 * x1 * x3),
}


def test_roster_size_and_names():
    names = [e["name"] for e in roster()]
    assert len(names) >= 11
    assert len(set(names)) == len(names)
    for name in ("example-3d", "v0", "v1", "two-dim-family", "counterexample-necessary", "form6-random",
                 "form6-nondissipative", "form8-instance", "f-qso", "zakharevich", "identity", "cubic-example"):
        assert name in names


@pytest.mark.parametrize("name", sorted(DISPLAYED))
def test_displayed_polynomials(name):
    op = gallery(name)
    for x in POINTS:
        assert np.allclose(apply_raw(op, x), DISPLAYED[name](*x), atol=1e-15)


def test_v1_equals_example():
    assert np.array_equal(gallery("v1").p, gallery("example-3d").p)


@pytest.mark.parametrize("a", [0, 0.5, 1, 1.5, 2])
def test_two_dim_family(a):
    op = gallery("two-dim-family", {"a": a})
    for x1 in np.linspace(0, 1, 11):
        x = np.array([x1, 1 - x1])
        assert np.allclose(apply_raw(op, x), [x1**2 + x[1] ** 2 + a * x1 * x[1], (2 - a) * x1 * x[1]], atol=1e-15)


def test_form6_random_structure():
    for seed in range(10):
        m = 3 + seed % 3
        p = gallery("form6-random", {"seed": seed, "m": m}).p
        for i in range(m):
            assert p[i, i, 0] == 1.0
            for j in range(m):
                if i != j:
                    assert 0.5 <= p[i, j, 0] <= 1.0


def test_form6_random_depends_on_seed():
    assert not np.array_equal(gallery("form6-random", {"seed": 1}).p, gallery("form6-random", {"seed": 2}).p)
    assert np.array_equal(gallery("form6-random", {"seed": 1}).p, gallery("form6-random", {"seed": 1}).p)


def test_form6_nondissipative_triples_positive():
    p = gallery("form6-nondissipative").p
    for i, j in ((0, 1), (1, 2), (0, 2)):
        assert np.all(p[i, j] > 0)
        assert p[i, j, 0] >= 0.5


def test_form8_instance_closed_form():
    op = gallery("form8-instance")
    for x in sample_uniform_array(4, 40, 7):
        x1, x2, x3, x4 = x
        assert np.allclose(apply_raw(op, x), [1 - x2 - x3 * x4, x2, x3 * x4, 0.0], atol=1e-15)


def test_f_qso_closed_form():
    p_val, m = 0.3, 4
    op = gallery("f-qso", {"p": p_val, "m": m})
    for x in sample_uniform_array(m, 20, 8):
        y = apply_raw(op, x)
        cross = 2 * x[1] * x[2:]  # female (species 1) meets male i
        expected = np.zeros(m)
        expected[0] = 1 - cross.sum() + p_val * cross.sum()
        expected[1] = (1 - p_val) / 2 * cross.sum()
        expected[2:] = (1 - p_val) / 2 * cross
        assert np.allclose(y, expected, atol=1e-15)


def test_cubic_example_closed_form():
    op = gallery("cubic-example")
    for x in sample_uniform_array(3, 20, 9):
        cubes = float(np.sum(x**3))
        assert np.allclose(apply_raw(op, x), [cubes + 2 / 3 * (1 - cubes), (1 - cubes) / 3, 0], atol=1e-15)


def test_identity_param():
    assert gallery("identity", {"m": 5}).m == 5


def test_unknown_name():
    with pytest.raises(UnknownName) as info:
        gallery("no-such-operator")
    assert info.value.code == "UNKNOWN_NAME"


@pytest.mark.parametrize("name, params", [
    ("two-dim-family", {"a": 2.5}),
    ("two-dim-family", {"a": -0.1}),
    ("two-dim-family", {"b": 1}),
    ("two-dim-family", {"a": "x"}),
    ("form6-nondissipative", {"a1": 1.8, "a2": 0.5}),
    ("f-qso", {"m": 2}),
])
def test_param_out_of_range(name, params):
    with pytest.raises(ParamOutOfRange):
        gallery(name, params)


def test_every_entry_builds_with_defaults():
    for name, entry in GALLERY.items():
        op = gallery(name)
        assert op.name == name
        assert op.degree in (2, 3)
