import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import exact_prefix_slack, naive_relation, naive_slacks
from qsolab.errors import DimensionMismatch, InvalidDimension, NotOnSimplex
from qsolab.simplex import (EPS_CMP, Relation, SimplexPoint, compare_majorization, decreasing_rearrangement,
                            project_to_simplex, sample_uniform, sample_uniform_array)


def simplex_points(m_min=2, m_max=6):
    def build(weights):
        w = np.asarray(weights, dtype=float)
        return SimplexPoint(w / w.sum())
    return st.integers(m_min, m_max).flatmap(
        lambda m: st.lists(st.floats(1e-6, 1.0), min_size=m, max_size=m).map(build))


def same_m_pairs():
    return st.integers(2, 6).flatmap(lambda m: st.tuples(
        st.lists(st.floats(1e-6, 1.0), min_size=m, max_size=m),
        st.lists(st.floats(1e-6, 1.0), min_size=m, max_size=m),
        st.lists(st.floats(1e-6, 1.0), min_size=m, max_size=m),
    )).map(lambda t: tuple(SimplexPoint(np.asarray(w) / sum(w)) for w in t))


class TestSimplexPoint:
    def test_rejects_off_simplex(self):
        with pytest.raises(NotOnSimplex):
            SimplexPoint([0.5, 0.6])
        with pytest.raises(NotOnSimplex):
            SimplexPoint([1.1, -0.1])
        with pytest.raises(NotOnSimplex):
            SimplexPoint([np.nan, 1.0])

    def test_error_code(self):
        with pytest.raises(NotOnSimplex) as info:
            SimplexPoint([0.2, 0.2])
        assert info.value.code == "NOT_ON_SIMPLEX"

    def test_rejects_small_dimension(self):
        with pytest.raises(InvalidDimension):
            SimplexPoint([1.0])

    def test_clamps_within_tolerance(self):
        x = SimplexPoint([1.0 + 5e-11, -5e-11, 0.0])
        assert x.coords.min() >= 0.0
        assert x.coords.sum() == pytest.approx(1.0, abs=1e-15)

    def test_read_only(self):
        x = SimplexPoint.barycenter(3)
        with pytest.raises(ValueError):
            x.coords[0] = 1.0

    def test_vertex_is_one_based(self):
        assert list(SimplexPoint.vertex(3, 2)) == [0.0, 1.0, 0.0]
        with pytest.raises(InvalidDimension):
            SimplexPoint.vertex(3, 0)


class TestRearrangement:
    @pytest.mark.parametrize("x, expected", [
        ((0.2, 0.5, 0.3), (0.5, 0.3, 0.2)),
        ((1 / 3, 1 / 3, 1 / 3), (1 / 3, 1 / 3, 1 / 3)),
        ((0.01, 0.5, 0.49), (0.5, 0.49, 0.01)),
    ])
    def test_examples(self, x, expected):
        assert np.allclose(decreasing_rearrangement(SimplexPoint(x)), expected, atol=1e-15)

    @given(simplex_points())
    def test_matches_sorted(self, x):
        assert list(decreasing_rearrangement(x)) == sorted(x.coords.tolist(), reverse=True)


class TestCompare:
    def test_barycenter_below_vertex(self):
        v = compare_majorization(SimplexPoint.barycenter(3), SimplexPoint.vertex(3, 1))
        assert v.relation is Relation.MAJORIZED_BY

    def test_reflexive(self):
        x = SimplexPoint([0.7, 0.2, 0.1])
        v = compare_majorization(x, x)
        assert v.relation is Relation.EQUIVALENT
        assert v.min_slack_forward == 0.0 and v.min_slack_backward == 0.0

    def test_counterexample_point_and_image(self):
        x = SimplexPoint([0.5, 0.49, 0.01])
        y = SimplexPoint([0.745, 0.196, 0.059])
        v = compare_majorization(x, y)
        assert v.relation is Relation.INCOMPARABLE
        # exact oracle values: x vs y fails at k = 1, y vs x at k = 2
        assert float(exact_prefix_slack(x.coords, y.coords, 1)) == pytest.approx(-0.245, abs=1e-15)
        assert float(exact_prefix_slack(y.coords, x.coords, 2)) == pytest.approx(-0.049, abs=1e-15)
        assert v.min_slack_forward == pytest.approx(-0.245, abs=1e-12)
        assert v.min_slack_backward == pytest.approx(-0.049, abs=1e-12)

    def test_permutation_equivalent(self):
        x = SimplexPoint([0.1, 0.6, 0.3])
        y = SimplexPoint([0.3, 0.1, 0.6])
        assert compare_majorization(x, y).relation is Relation.EQUIVALENT

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            compare_majorization(SimplexPoint.barycenter(2), SimplexPoint.barycenter(3))

    def test_tolerance_band(self):
        x = SimplexPoint([0.5, 0.5])
        y = SimplexPoint([0.5 + 1e-13, 0.5 - 1e-13])
        assert compare_majorization(x, y).relation is Relation.EQUIVALENT
        assert compare_majorization(x, y, tol=1e-14).relation is Relation.MAJORIZED_BY

    @given(same_m_pairs())
    def test_matches_naive_oracle(self, triple):
        x, y, _ = triple
        v = compare_majorization(x, y)
        assert v.relation.value == naive_relation(x.coords, y.coords, EPS_CMP)
        fwd, bwd = naive_slacks(x.coords, y.coords)
        assert v.min_slack_forward == pytest.approx(fwd, abs=1e-14)
        assert v.min_slack_backward == pytest.approx(bwd, abs=1e-14)

    @given(same_m_pairs())
    def test_antisymmetric_swap(self, triple):
        x, y, _ = triple
        a, b = compare_majorization(x, y), compare_majorization(y, x)
        assert a.min_slack_forward == b.min_slack_backward
        swap = {Relation.MAJORIZES: Relation.MAJORIZED_BY, Relation.MAJORIZED_BY: Relation.MAJORIZES}
        assert b.relation is swap.get(a.relation, a.relation)

    @settings(max_examples=200)
    @given(same_m_pairs())
    def test_transitive(self, triple):
        x, y, z = triple
        if (compare_majorization(x, y, tol=0).relation in (Relation.MAJORIZES, Relation.EQUIVALENT)
                and compare_majorization(y, z, tol=0).relation in (Relation.MAJORIZES, Relation.EQUIVALENT)):
            assert compare_majorization(x, z).min_slack_forward >= -1e-12

    @given(simplex_points())
    def test_bounds_barycenter_and_vertex(self, x):
        m = x.m
        assert compare_majorization(x, SimplexPoint.barycenter(m)).min_slack_forward >= -EPS_CMP
        assert compare_majorization(SimplexPoint.vertex(m, 1), x).min_slack_forward >= -EPS_CMP


class TestSampling:
    def test_two_dimensional(self):
        x = sample_uniform(2, 5)
        assert np.all((x.coords >= 0) & (x.coords <= 1))
        assert x.coords.sum() == pytest.approx(1.0, abs=1e-15)

    def test_deterministic(self):
        assert sample_uniform(3, 42) == sample_uniform(3, 42)
        assert sample_uniform(3, 42) != sample_uniform(3, 43)

    def test_mean_is_barycenter(self):
        xs = sample_uniform_array(3, 100_000, 1)
        assert np.abs(xs.mean(axis=0) - 1 / 3).max() < 0.01

    def test_flat_dirichlet_marginal(self):
        # first coordinate of a flat Dirichlet on 3 species is Beta(1, 2): P(x1 <= t) = 1 - (1-t)^2
        xs = sample_uniform_array(3, 100_000, 2)
        for t in (0.1, 0.3, 0.5, 0.8):
            assert np.mean(xs[:, 0] <= t) == pytest.approx(1 - (1 - t) ** 2, abs=0.01)

    def test_rejects_m_below_two(self):
        with pytest.raises(InvalidDimension):
            sample_uniform(1, 0)


@given(st.lists(st.floats(-3, 3), min_size=2, max_size=7))
def test_projection_lands_on_simplex_and_is_idempotent(values):
    y = project_to_simplex(values)
    assert y.min() >= 0 and y.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(project_to_simplex(y), y, atol=1e-12)
