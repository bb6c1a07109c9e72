from fractions import Fraction

import numpy as np
import pytest

from oracles import exact_prefix_slack, naive_slacks
from qsolab.dissipativity import (REFERENCE_PROBE, Form, Verdict, certify_sampled, check_bistochastic_sampled,
                                  check_half_bound, check_vertex_rows, classify_form, extract_alpha_partition,
                                  half_bound, necessary_conditions, probe_points)
from qsolab.errors import NotAPartition
from qsolab.gallery import gallery
from qsolab.operators import apply_raw, identity_operator, make_operator, mix, random_operator, uniform_operator


def oracle_refutes(op, witness):
    x = np.asarray(witness)
    fwd, _ = naive_slacks(apply_raw(op, x), x)
    return fwd < -1e-12


class TestVertexRows:
    def test_example_3d_passes(self):
        assert all(r.passed for r in check_vertex_rows(gallery("example-3d")))

    def test_counterexample_rows(self):
        rows = check_vertex_rows(gallery("counterexample-necessary"))
        assert all(r.passed for r in rows)
        assert [r.row for r in rows] == [(1.0, 0.0, 0.0), (1.0, 0.0, 0.0), (0.0, 0.0, 1.0)]

    def test_uniform_fails_everywhere(self):
        assert not any(r.passed for r in check_vertex_rows(uniform_operator(4)))

    def test_indices_are_one_based(self):
        assert [r.index for r in check_vertex_rows(uniform_operator(3))] == [1, 2, 3]


class TestPartition:
    def test_example_3d(self):
        part = extract_alpha_partition(gallery("example-3d"))
        assert part.parts[1] == {1, 2, 3} and not part.parts[2] and not part.parts[3]

    def test_v0(self):
        part = extract_alpha_partition(gallery("v0"))
        assert part.nonempty() == {2: frozenset({1, 2, 3})}

    def test_identity(self):
        part = extract_alpha_partition(identity_operator(4))
        assert part.parts == {k: frozenset({k}) for k in range(1, 5)}

    def test_not_a_partition(self):
        with pytest.raises(NotAPartition) as info:
            extract_alpha_partition(uniform_operator(3))
        assert info.value.code == "NOT_A_PARTITION"


class TestHalfBound:
    def test_example_3d_passes(self):
        op = gallery("example-3d")
        rep = check_half_bound(op, extract_alpha_partition(op))
        assert not rep.lemma_half_bound and not rep.lemma_third_zero and rep.overall

    def test_two_dim_violation(self):
        op = gallery("two-dim-family", {"a": 0.5})
        rep = check_half_bound(op, extract_alpha_partition(op))
        assert (2, 1, 1, 0.25) in rep.lemma_half_bound

    def test_counterexample_bounds(self):
        # the 1/2 bound holds, but the mixed pair (1, 2) has three nonzero entries (0.5, 0.4, 0.1)
        op = gallery("counterexample-necessary")
        rep = check_half_bound(op, extract_alpha_partition(op))
        assert rep.lemma_half_bound == []
        assert {(i, j) for i, j, _ in rep.lemma_third_zero} == {(1, 2), (2, 1)}
        assert all(t == pytest.approx(0.1, abs=1e-15) for _, _, t in rep.lemma_third_zero)

    def test_cubic_bound_is_two_thirds(self):
        assert half_bound(2) == 0.5 and half_bound(3) == pytest.approx(2 / 3)
        op = gallery("cubic-example")
        rep = necessary_conditions(op)
        assert rep.overall

    def test_cubic_below_two_thirds_flagged(self):
        p = gallery("cubic-example").p.copy()
        # parents (1, 2, 2) and orderings: species 1 now gets only 0.6 < 2/3
        for idx in ((0, 1, 1), (1, 0, 1), (1, 1, 0)):
            p[idx] = [0.6, 0.4, 0.0]
        rep = necessary_conditions(make_operator("c", p))
        assert [(i, j, k) for i, j, k, _ in rep.lemma_half_bound] == [(1, 2, 1)]
        assert rep.lemma_half_bound[0][3] == pytest.approx(0.6)

    @pytest.mark.parametrize("a", [0.0, 0.5, 0.99])
    def test_two_dim_below_one_refuted(self, a):
        assert not necessary_conditions(gallery("two-dim-family", {"a": a})).overall

    @pytest.mark.parametrize("a", [1.0, 1.5, 2.0])
    def test_two_dim_in_range_passes(self, a):
        assert necessary_conditions(gallery("two-dim-family", {"a": a})).overall


class TestCertify:
    def test_probe_points_start_with_reference(self):
        pts = probe_points(3)
        assert tuple(pts[0]) == REFERENCE_PROBE
        assert len(probe_points(4)) == 4 + 6 + 1

    def test_counterexample_probe(self):
        op = gallery("counterexample-necessary")
        rep = certify_sampled(op, n=1000)
        assert rep.verdict is Verdict.REFUTED_EXACT
        s = rep.sampled
        assert tuple(s.witness) == REFERENCE_PROBE and s.witness_phase == "probe"
        # exact oracle: V(0.5, 0.49, 0.01) = (0.745, 0.196, 0.059), second prefix falls short by 0.049
        x = [Fraction(1, 2), Fraction(49, 100), Fraction(1, 100)]
        vx = [x[0] + x[1] - x[0] * x[1], Fraction(4, 5) * x[0] * x[1], x[2] + Fraction(1, 5) * x[0] * x[1]]
        assert exact_prefix_slack(vx, x, 2) == Fraction(-49, 1000)
        assert s.witness_slack == pytest.approx(-0.049, abs=1e-12)

    def test_identity_consistent_with_zero_slack(self):
        rep = certify_sampled(identity_operator(3), n=2000)
        assert rep.verdict is Verdict.CONSISTENT
        assert rep.sampled.min_slack == pytest.approx(0.0, abs=1e-15)

    def test_example_3d_large_sample(self):
        rep = certify_sampled(gallery("example-3d"), n=100_000, seed=5)
        assert rep.verdict is Verdict.CONSISTENT
        assert rep.sampled.min_slack >= -1e-12
        assert rep.sampled.n_samples == 200_000 + len(probe_points(3))

    def test_deterministic(self):
        a = certify_sampled(gallery("form6-nondissipative"), n=3000, seed=9)
        b = certify_sampled(gallery("form6-nondissipative"), n=3000, seed=9)
        assert a.sampled == b.sampled

    def test_witnesses_are_sound(self):
        for name in ("form6-nondissipative", "zakharevich", "f-qso", "counterexample-necessary"):
            op = gallery(name)
            s = certify_sampled(op, n=5000, seed=3).sampled
            assert s.witness is not None
            assert oracle_refutes(op, s.witness)

    def test_failing_vertex_rows_always_refuted(self):
        for seed in range(20):
            m = 2 + seed % 4
            op = random_operator(m, 2, seed)
            assert not all(r.passed for r in check_vertex_rows(op))
            rep = certify_sampled(op, n=10_000, seed=seed)
            assert rep.verdict is Verdict.REFUTED_EXACT
            assert rep.sampled.witness is not None and oracle_refutes(op, rep.sampled.witness)

    def test_exact_checks_pass_but_sampling_refutes(self):
        # m = 4, every square feeds species 3, mixed pairs keep >= 1/2 there with one other entry
        rows = {(0, 1): [0.25, 0, 0.75, 0], (0, 2): [0.5, 0, 0.5, 0], (0, 3): [0, 0.25, 0.75, 0],
                (1, 2): [0, 0, 1, 0], (1, 3): [0, 0, 0.75, 0.25], (2, 3): [0, 0.25, 0.75, 0]}
        p = np.zeros((4, 4, 4))
        p[range(4), range(4), 2] = 1.0
        for (i, j), row in rows.items():
            p[i, j] = p[j, i] = row
        op = make_operator("four", p)
        rep = certify_sampled(op, n=10_000)
        assert rep.necessary.overall
        assert rep.verdict is Verdict.REFUTED_SAMPLED and rep.sampled.witness_phase == "uniform"
        assert oracle_refutes(op, rep.sampled.witness)

    def test_rejects_zero_samples(self):
        with pytest.raises(ValueError):
            certify_sampled(identity_operator(2), n=0)


class TestNonConvexity:
    @pytest.mark.parametrize("lam", [round(0.1 * k, 1) for k in range(1, 10)])
    def test_mixture_fails_vertex_rows(self, lam):
        op = mix(gallery("v1"), gallery("v0"), lam)
        assert not any(r.passed for r in check_vertex_rows(op))

    def test_endpoints_pass(self):
        for name in ("v0", "v1"):
            assert necessary_conditions(gallery(name)).overall


class TestBistochastic:
    def test_identity(self):
        assert check_bistochastic_sampled(identity_operator(3), n=1000).verdict is Verdict.CONSISTENT

    def test_example_3d_refuted(self):
        rep = check_bistochastic_sampled(gallery("example-3d"), n=1000)
        assert rep.verdict is Verdict.REFUTED_SAMPLED and rep.direction == "bistochastic"
        x = np.asarray(rep.sampled.witness)
        _, bwd = naive_slacks(apply_raw(gallery("example-3d"), x), x)
        assert bwd < -1e-12

    def test_uniform_consistent(self):
        assert check_bistochastic_sampled(uniform_operator(4), n=2000).verdict is Verdict.CONSISTENT


class TestForms:
    def test_example_3d(self):
        op = gallery("example-3d")
        fc = classify_form(op, extract_alpha_partition(op))
        assert fc.form is Form.FORM_6 and fc.k == 1 and fc.lyapunov_excluded == {1}

    def test_form8(self):
        op = gallery("form8-instance")
        fc = classify_form(op, extract_alpha_partition(op))
        assert fc.form is Form.FORM_8 and fc.l == 2 and fc.k == 1
        assert fc.lyapunov_excluded == {1, 2}

    def test_form7(self):
        # alpha_1 = {1, 3}, alpha_3 = {2}: the isolated species 2 feeds a different species
        p = np.zeros((3, 3, 3))
        p[0, 0, 0] = p[2, 2, 0] = p[1, 1, 2] = 1.0
        for i, j, row in ((0, 1, [0.5, 0, 0.5]), (0, 2, [1, 0, 0]), (1, 2, [0.5, 0, 0.5])):
            p[i, j] = p[j, i] = row
        op = make_operator("f7", p)
        fc = classify_form(op, extract_alpha_partition(op))
        assert fc.form is Form.FORM_7 and fc.l == 2 and fc.k_l == 3

    def test_identity_other(self):
        op = identity_operator(3)
        assert classify_form(op, extract_alpha_partition(op)).form is Form.OTHER
