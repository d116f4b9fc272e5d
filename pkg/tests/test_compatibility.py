"""Joint measurability, coexistence, binarization compatibility, and the
relabeling / post-processing order."""

import numpy as np
import pytest

from povmcompat import fixtures as fx
from povmcompat.compatibility import (
    NO,
    UNDECIDED,
    YES,
    MotherAssignment,
    ViolatedCondition,
    binarization_jm_all,
    coexistence_check,
    cone_membership,
    effect_pair_joint,
    extreme_joint_with_mother,
    extreme_pair_joint,
    jm_check,
    jm_threshold,
    joint_from_mother_binary,
    mother_from_joint,
    post_processing_finder,
    rank1_packing_condition,
    relabeling_finder,
    search_mother,
)
from povmcompat.errors import NotApplicableError, PositivityError
from povmcompat.feasibility import NUMERICALLY_INFEASIBLE, dykstra_solve
from povmcompat.linalg import frob
from povmcompat.observables import (
    DiscreteObservable,
    binarize,
    mix_with_trivial,
    post_process,
    relabel,
    subset_effect,
    trivial_observable,
    validate,
)
from povmcompat.sampling import random_observable, random_pvm


def smeared(obs, eta):
    n = obs.n_outcomes
    return mix_with_trivial(obs, eta, [1.0 / n] * n)


class TestJmCheck:
    def test_sharp_triple_pair_is_incompatible(self):
        verdict = jm_check(fx.sharp_basis3(), fx.sharp_rotated3())
        assert verdict.status == NO
        assert verdict.certificate.name == "sharp_noncommuting"

    def test_coarse_graining_restores_compatibility(self):
        verdict = jm_check(fx.coarse_basis3(), fx.sharp_rotated3())
        assert verdict.status == YES
        assert verdict.certificate.provenance == "product"
        assert verdict.certificate.marginal_residual_a <= 1e-10
        assert verdict.certificate.marginal_residual_b <= 1e-10

    def test_smeared_pair_below_threshold(self):
        verdict = jm_check(smeared(fx.sharp_z(), 0.6), smeared(fx.sharp_x(), 0.6))
        assert verdict.status == YES
        cert = verdict.certificate
        res_a, res_b = cert.verify_against(
            smeared(fx.sharp_z(), 0.6), smeared(fx.sharp_x(), 0.6)
        )
        assert max(res_a, res_b) <= 1e-7
        assert validate(cert.joint).passes

    def test_self_compatibility_diagonal_joint(self):
        trine = fx.trine()
        verdict = jm_check(trine, fx.trine())
        assert verdict.status == YES
        assert verdict.certificate.provenance == "diagonal"

    def test_counterexample_pair_not_jm(self):
        verdict = jm_check(fx.unsharp_triple(), fx.unsharp_pair())
        assert verdict.status == NO
        assert verdict.certificate.name == "solver_separation"
        assert verdict.certificate.value > 0.01


class TestEffectPairJoint:
    def test_equal_effects(self):
        e = fx.unsharp_triple().effects[0]
        verdict = effect_pair_joint(e, e)
        assert verdict.status == YES
        lookup = dict(zip(verdict.certificate.pairs, verdict.certificate.joint.effects))
        assert frob(lookup[("+1", "+1")] - e) <= 1e-12

    def test_needle_pair_disjoint_mother(self):
        e1 = fx.unsharp_triple().effects[0]
        f1 = fx.unsharp_pair().effects[0]
        verdict = effect_pair_joint(e1, f1)
        assert verdict.status == YES
        # E1 + F1 <= I allows the joint with empty intersection outcome
        assert ("+1", "+1") not in verdict.certificate.pairs

    def test_sharp_noncommuting_pair_refused(self):
        up_z = fx.sharp_z().effects[0]
        up_x = fx.sharp_x().effects[0]
        verdict = effect_pair_joint(up_z, up_x)
        assert verdict.status == NO
        assert verdict.certificate.name == "sharp_noncommuting"
        # cross-check by the raw solver: the same pair stalls at a gap
        from povmcompat.compatibility import jm_problem

        raw = dykstra_solve(jm_problem(fx.sharp_z(), fx.sharp_x()))
        assert raw.status == NUMERICALLY_INFEASIBLE and raw.separation_gap > 0.01

    def test_solver_path_on_generic_unsharp_pair(self):
        e = smeared(fx.sharp_z(), 0.6).effects[0]
        f = smeared(fx.sharp_x(), 0.6).effects[0]
        verdict = effect_pair_joint(e, f)
        assert verdict.status == YES
        assert verdict.certificate.provenance == "solver"
        two_e = DiscreteObservable(2, [("+1", e), ("-1", np.eye(2) - e)])
        two_f = DiscreteObservable(2, [("+1", f), ("-1", np.eye(2) - f)])
        res = verdict.certificate.verify_against(two_e, two_f)
        assert max(res) <= 1e-7

    def test_rejects_non_effects(self):
        with pytest.raises(PositivityError):
            effect_pair_joint(2.0 * np.eye(2), np.eye(2))


class TestBinarizationJmAll:
    def test_counterexample_pair_all_yes(self):
        verdict = binarization_jm_all(fx.unsharp_triple(), fx.unsharp_pair())
        assert verdict.status == YES
        assert len(verdict.certificate) == 6 * 2
        for witness in verdict.certificate:
            cert = witness.verdict.certificate
            assert max(cert.marginal_residual_a, cert.marginal_residual_b) <= 1e-7

    def test_sharp_pair_fails_at_singletons(self):
        verdict = binarization_jm_all(fx.sharp_z(), fx.sharp_x())
        assert verdict.status == NO
        assert verdict.certificate.mask_a == frozenset({0})
        assert verdict.certificate.mask_b == frozenset({0})

    def test_trivial_partner_always_yes(self):
        verdict = binarization_jm_all(fx.trine(), trivial_observable(2, [0.4, 0.6]))
        assert verdict.status == YES


class TestRank1Packing:
    def test_needle_triple_violated(self):
        e = fx.unsharp_triple()
        f = fx.unsharp_pair()
        verdict = rank1_packing_condition([e.effects[0], e.effects[1], f.effects[0]])
        assert verdict.applicable and verdict.violated
        assert abs(verdict.max_eigenvalue - 8.0 / 7.0) <= 1e-12

    def test_needle_pair_satisfied(self):
        e = fx.unsharp_triple()
        verdict = rank1_packing_condition([e.effects[0], e.effects[1]])
        assert verdict.applicable and not verdict.violated
        assert abs(verdict.max_eigenvalue - 4.0 / 7.0) <= 1e-12

    def test_parallel_ranges_not_applicable(self):
        p = np.diag([1.0, 0.0])
        verdict = rank1_packing_condition([0.5 * p, 0.7 * p])
        assert not verdict.applicable

    def test_full_rank_not_applicable(self):
        verdict = rank1_packing_condition([np.eye(2) / 2, np.diag([0.9, 0.0])])
        assert not verdict.applicable


class TestCoexistence:
    def test_counterexample_pair_not_coexistent(self):
        verdict = coexistence_check(fx.unsharp_triple(), fx.unsharp_pair())
        assert verdict.status == NO
        assert isinstance(verdict.certificate, ViolatedCondition)
        assert verdict.certificate.name == "rank1_packing"
        assert abs(verdict.certificate.value - 8.0 / 7.0) <= 1e-12

    def test_commuting_pair_coexists_via_joint(self):
        verdict = coexistence_check(fx.coarse_basis3(), fx.sharp_rotated3())
        assert verdict.status == YES
        assert isinstance(verdict.certificate, MotherAssignment)
        assert verdict.certificate.max_residual(
            fx.coarse_basis3(), fx.sharp_rotated3()
        ) <= 1e-7

    def test_binarization_with_partner_coexists(self):
        first = binarize(fx.unsharp_triple(), {0})
        verdict = coexistence_check(first, fx.unsharp_pair())
        assert verdict.status == YES
        assert verdict.certificate.max_residual(first, fx.unsharp_pair()) <= 1e-7

    def test_sharp_pair_not_coexistent(self):
        verdict = coexistence_check(fx.sharp_z(), fx.sharp_x())
        assert verdict.status == NO


class TestSearchMother:
    def test_finds_three_atom_mother(self):
        first = binarize(fx.unsharp_triple(), {0})
        second = fx.unsharp_pair()
        assignment, notes = search_mother(first, second)
        assert assignment is not None
        assert assignment.mother.n_outcomes == 3
        assert assignment.max_residual(first, second) <= 1e-7

    def test_no_mother_for_sharp_pair(self):
        assignment, _ = search_mother(fx.sharp_z(), fx.sharp_x(), max_outcomes=4)
        assert assignment is None

    def test_masks_cover_all_subsets(self):
        first = binarize(fx.unsharp_triple(), {0})
        second = fx.unsharp_pair()
        assignment, _ = search_mother(first, second)
        assert len(assignment.a_masks) == 2  # both nontrivial subsets of a binary observable
        assert len(assignment.b_masks) == 2


class TestJointFromMotherBinary:
    def mother(self):
        e1 = fx.unsharp_triple().effects[0]
        f1 = fx.unsharp_pair().effects[0]
        return DiscreteObservable(
            2, [("x", e1), ("y", f1), ("rest", np.eye(2) - e1 - f1)]
        )

    def test_single_mask_is_binarization(self):
        mother = self.mother()
        cert = joint_from_mother_binary(mother, [{0}])
        expected = binarize(mother, {0})
        assert cert.joint.labels == expected.labels
        assert max(
            frob(x - y) for x, y in zip(cert.joint.effects, expected.effects)
        ) == 0.0

    def test_disjoint_masks_intersection_table(self):
        mother = self.mother()
        cert = joint_from_mother_binary(mother, [{0}, {1}])
        lookup = {signs: e for signs, e in zip(cert.sign_vectors, cert.joint.effects)}
        assert (1, 1) not in lookup  # intersection empty, outcome dropped
        assert frob(lookup[(1, -1)] - mother.effects[0]) == 0.0
        assert frob(lookup[(-1, 1)] - mother.effects[1]) == 0.0
        assert frob(lookup[(-1, -1)] - mother.effects[2]) == 0.0
        assert max(cert.marginal_residuals) <= 1e-10

    def test_marginals_reproduce_binarizations(self):
        mother = self.mother()
        cert = joint_from_mother_binary(mother, [{0, 2}, {1}])
        for i, mask in enumerate(cert.masks):
            plus = sum(
                (
                    e
                    for signs, e in zip(cert.sign_vectors, cert.joint.effects)
                    if signs[i] == 1
                ),
                np.zeros((2, 2), dtype=complex),
            )
            assert frob(plus - subset_effect(mother, mask)) <= 1e-10

    def test_three_masks(self):
        mother = self.mother()
        cert = joint_from_mother_binary(mother, [{0}, {1}, {0, 1}])
        assert max(cert.marginal_residuals) <= 1e-10


class TestExtremeJointWithMother:
    def test_pvm_with_itself_diagonal(self):
        sharp = fx.sharp_basis3()
        result = extreme_joint_with_mother(sharp, sharp, [{0}, {1}, {2}])
        assert result.certificate.pairs == (("1", "1"), ("2", "2"), ("3", "3"))
        for pair, effect in zip(result.certificate.pairs, result.certificate.joint.effects):
            assert frob(effect - sharp.effect(pair[0])) == 0.0
        assert result.factor_residual <= 1e-10

    def test_coarse_graining_inside_product_joint(self):
        a, b = fx.coarse_basis3(), fx.sharp_rotated3()
        jm = jm_check(a, b)
        mother = jm.certificate.joint
        masks = [
            frozenset(
                k for k, pair in enumerate(jm.certificate.pairs) if pair[0] == la
            )
            for la in a.labels
        ]
        result = extreme_joint_with_mother(a, mother, masks)
        res_a, _ = result.certificate.verify_against(a, mother)
        assert res_a <= 1e-8
        assert result.factor_residual <= 1e-8

    def test_marginals_exact_matrix_sums(self):
        sharp = fx.sharp_z()
        result = extreme_joint_with_mother(sharp, sharp, [{0}, {1}])
        marg = result.certificate.marginal_a()
        for label, effect in sharp.outcomes:
            assert frob(marg[label] - effect) == 0.0

    def test_overlapping_masks_rejected(self):
        # the flat pair is not extreme: both halves are realized by the same
        # mother atom, and the construction must refuse the overlap
        flat = DiscreteObservable(2, [("a", np.eye(2) / 2), ("b", np.eye(2) / 2)])
        mother = DiscreteObservable(2, [("0", np.eye(2) / 2), ("1", np.eye(2) / 2)])
        with pytest.raises(NotApplicableError) as err:
            extreme_joint_with_mother(flat, mother, [{0}, {0}])
        assert err.value.residual == pytest.approx(frob(np.eye(2) / 2))

    def test_bad_subset_effects_rejected(self):
        sharp = fx.sharp_z()
        with pytest.raises(NotApplicableError):
            extreme_joint_with_mother(sharp, sharp, [{1}, {0}])


class TestExtremePairJoint:
    def test_reproduces_product_joint(self):
        a, b = fx.coarse_basis3(), fx.sharp_rotated3()
        jm = jm_check(a, b)
        mother = jm.certificate.joint
        masks_a = [
            frozenset(k for k, p in enumerate(jm.certificate.pairs) if p[0] == la)
            for la in a.labels
        ]
        masks_b = [
            frozenset(k for k, p in enumerate(jm.certificate.pairs) if p[1] == lb)
            for lb in b.labels
        ]
        cert = extreme_pair_joint(a, b, mother, masks_a, masks_b)
        lookup = dict(zip(cert.pairs, cert.joint.effects))
        product = dict(zip(jm.certificate.pairs, jm.certificate.joint.effects))
        for pair, effect in product.items():
            assert frob(lookup[pair] - effect) <= 1e-10

    def test_reduces_to_single_mother_case(self):
        sharp = fx.sharp_z()
        cert = extreme_pair_joint(
            sharp, sharp, sharp, [{0}, {1}], [{0}, {1}]
        )
        assert cert.pairs == (("+", "+"), ("-", "-"))

    def test_pvm_with_its_binarization(self):
        sharp = fx.sharp_basis3()
        coarse = binarize(sharp, {0})
        masks_b = [{0}, {1, 2}]
        cert = extreme_pair_joint(sharp, coarse, sharp, [{0}, {1}, {2}], masks_b)
        lookup = dict(zip(cert.pairs, cert.joint.effects))
        assert frob(lookup[("1", "+1")] - sharp.effects[0]) == 0.0
        assert ("1", "-1") not in lookup
        assert frob(lookup[("2", "-1")] - sharp.effects[1]) == 0.0

    def test_bad_masks_rejected(self):
        sharp = fx.sharp_z()
        with pytest.raises(NotApplicableError):
            extreme_pair_joint(sharp, sharp, sharp, [{0}, {0}], [{0}, {1}])


class TestRelabelingFinder:
    def test_identity(self):
        obs = fx.trine()
        assert relabeling_finder(obs, obs) == (0, 1, 2)

    def test_basis_merge(self):
        found = relabeling_finder(fx.coarse_basis3(), fx.sharp_basis3())
        assert found == (0, 0, 1)

    def test_flat_pair_not_a_trine_relabeling(self):
        flat = DiscreteObservable(2, [("a", np.eye(2) / 2), ("b", np.eye(2) / 2)])
        assert relabeling_finder(flat, fx.trine()) is None

    def test_extreme_mothers_always_admit_found_relabelings(self):
        rng = np.random.default_rng(89)
        for _ in range(8):
            d = int(rng.integers(2, 4))
            mother = random_pvm(rng, d)
            merge = tuple(int(x) for x in rng.integers(0, 2, size=d))
            target = relabel(mother, merge)
            found = relabeling_finder(target, mother)
            assert found is not None
            rebuilt = relabel(mother, found)
            assert max(
                frob(x - y) for x, y in zip(rebuilt.effects, target.effects)
            ) <= 1e-9


class TestPostProcessingFinder:
    def test_identity_kernel(self):
        obs = fx.trine()
        kernel, verdict = post_processing_finder(obs, obs)
        assert kernel is not None
        assert frob(kernel.matrix - np.eye(3)) <= 1e-5

    def test_trivial_target(self):
        target = trivial_observable(2, [0.25, 0.75])
        kernel, _ = post_processing_finder(target, fx.trine())
        assert kernel is not None
        rebuilt = post_process(fx.trine(), kernel, labels=target.labels)
        assert max(
            frob(x - y) for x, y in zip(rebuilt.effects, target.effects)
        ) <= 1e-7

    def test_noise_mixture_kernel(self):
        eta, p = 0.7, np.array([0.2, 0.5, 0.3])
        mother = fx.trine()
        target = mix_with_trivial(mother, eta, p)
        expected = eta * np.eye(3) + (1 - eta) * np.tile(p, (3, 1))
        rebuilt = post_process(mother, expected, labels=target.labels)
        assert max(
            frob(x - y) for x, y in zip(rebuilt.effects, target.effects)
        ) <= 1e-10  # algebraic identity for the expected kernel
        kernel, _ = post_processing_finder(target, mother)
        assert kernel is not None
        solved = post_process(mother, kernel, labels=target.labels)
        assert max(
            frob(x - y) for x, y in zip(solved.effects, target.effects)
        ) <= 1e-7

    def test_succeeds_whenever_relabeling_exists(self):
        rng = np.random.default_rng(97)
        for _ in range(5):
            mother = random_pvm(rng, 3)
            target = relabel(mother, (0, 1, 0))
            assert relabeling_finder(target, mother) is not None
            kernel, _ = post_processing_finder(target, mother)
            assert kernel is not None


class TestConeMembership:
    def test_member_effect(self):
        obs = fx.trine()
        ok, coeffs = cone_membership(obs.effects[0], obs)
        assert ok and abs(coeffs[0] - 1.0) <= 1e-6
        assert np.all(coeffs >= -1e-9)

    def test_identity_normalization(self):
        ok, coeffs = cone_membership(np.eye(2), fx.trine())
        assert ok
        assert np.max(np.abs(coeffs - 1.0)) <= 1e-6

    def test_sharp_needle_in_trine_cone(self):
        ok, coeffs = cone_membership(np.diag([1.0, 0.0]), fx.trine())
        assert ok
        assert np.max(np.abs(coeffs - np.array([1.5, 0.0, 0.0]))) <= 1e-6

    def test_non_member(self):
        ok, coeffs = cone_membership(np.diag([1.0, -0.5]), fx.trine())
        assert not ok and coeffs is None


class TestJmThreshold:
    def test_self_threshold_is_one(self):
        assert jm_threshold(fx.trine(), fx.trine()) == 1.0

    def test_trivial_partner_threshold_is_one(self):
        assert jm_threshold(fx.sharp_z(), trivial_observable(2, [0.5, 0.5])) == 1.0

    def test_mutually_unbiased_qubit_pair(self):
        # closed form for unbiased binary qubit pairs: eta* = 1/sqrt(2)
        log = []
        threshold = jm_threshold(fx.sharp_z(), fx.sharp_x(), probe_log=log)
        assert abs(threshold - 1.0 / np.sqrt(2.0)) <= 0.01
        assert all(seconds <= 2.0 for _, _, seconds in log)


class TestHierarchySoundness:
    ITER = 8000  # bounded budget: UNDECIDED outcomes never break the chain

    def corpus_pairs(self):
        rng = np.random.default_rng(101)
        pairs = [
            (fx.unsharp_triple(), fx.unsharp_pair()),
            (fx.sharp_basis3(), fx.sharp_rotated3()),
            (fx.coarse_basis3(), fx.sharp_rotated3()),
            (fx.sharp_z(), fx.sharp_x()),
            (fx.trine(), smeared(fx.sharp_z(), 0.5)),
            (smeared(fx.sharp_z(), 0.6), smeared(fx.sharp_x(), 0.6)),
            (random_observable(rng, 2, 2), random_observable(rng, 2, 3)),
            (random_observable(rng, 3, 2), random_observable(rng, 3, 2)),
        ]
        return pairs

    def test_chain_and_certificates_on_corpus(self):
        statuses = []
        for a, b in self.corpus_pairs():
            jm = jm_check(a, b, max_iter=self.ITER)
            coexist = coexistence_check(
                a, b, max_mother_outcomes=3, max_iter=self.ITER
            )
            binar = binarization_jm_all(a, b, max_iter=self.ITER)
            statuses.append((jm.status, coexist.status, binar.status))
            if jm.status == YES:
                assert coexist.status != NO
                assert max(jm.certificate.verify_against(a, b)) <= 1e-7
            if coexist.status == YES:
                assert binar.status != NO
                if isinstance(coexist.certificate, MotherAssignment):
                    assert coexist.certificate.max_residual(a, b) <= 1e-7
            if binar.status == NO:
                assert coexist.status == NO
        # the corpus must exercise every branch of the chain
        assert any(s[0] == YES for s in statuses)
        assert any(s[0] == NO for s in statuses)
        assert any(s[1] == NO for s in statuses)
