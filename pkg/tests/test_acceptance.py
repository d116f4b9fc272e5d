"""Acceptance suite: every criterion at its pinned tolerance.

Each test prints one PASS line when its criterion holds (run with ``-s`` to
see them); the final test bounds the whole suite's wall time.
"""

import time

import numpy as np
import pytest
import sympy as sp

import povmcompat as pc
from povmcompat import fixtures as fx
from povmcompat.compatibility import (
    NO,
    YES,
    MotherAssignment,
    ViolatedCondition,
)
from povmcompat.sampling import (
    random_complex,
    random_observable,
    random_pvm,
    random_two_qubit_state,
    random_unitary,
)

MODULE_START = time.perf_counter()


def announce(name: str):
    print(f"PASS {name}")


def needle_pair():
    return fx.unsharp_triple(), fx.unsharp_pair()


def smeared(obs, eta):
    n = obs.n_outcomes
    return pc.mix_with_trivial(obs, eta, [1.0 / n] * n)


def test_criterion_1_counterexample_arithmetic():
    e, f = needle_pair()
    f1 = f.effects[0]
    assert abs(pc.max_eigenvalue(e.effects[0] + e.effects[1] + f1) - 8 / 7) <= 1e-12
    for effect in e.effects:
        assert pc.loewner_leq(effect + f1, np.eye(2))
    assert abs(pc.max_eigenvalue(e.effects[2] + f1) - 1.0) <= 1e-12
    announce("criterion-1 counterexample arithmetic")


def test_criterion_2_hierarchy_separation():
    e, f = needle_pair()
    start = time.perf_counter()
    binarizations = pc.binarization_jm_all(e, f)
    assert binarizations.status == YES
    assert len(binarizations.certificate) == 12
    for witness in binarizations.certificate:
        cert = witness.verdict.certificate
        assert max(cert.marginal_residual_a, cert.marginal_residual_b) <= 1e-7
    coexistence = pc.coexistence_check(e, f)
    assert coexistence.status == NO
    assert isinstance(coexistence.certificate, ViolatedCondition)
    assert coexistence.certificate.name == "rank1_packing"
    elapsed = time.perf_counter() - start
    assert elapsed < 5.0, f"hierarchy separation took {elapsed:.2f}s"
    announce("criterion-2 hierarchy separation")


def test_criterion_3_sharp_triple_example():
    a, b, coarse = fx.sharp_basis3(), fx.sharp_rotated3(), fx.coarse_basis3()
    sharp = pc.jm_check(a, b)
    assert sharp.status == NO
    assert sharp.certificate.name == "sharp_noncommuting"
    assert pc.commutes(coarse, b)
    joint = pc.jm_check(coarse, b)
    assert joint.status == YES
    assert joint.certificate.provenance == "product"
    assert max(joint.certificate.verify_against(coarse, b)) <= 1e-10
    announce("criterion-3 sharp triple and its coarse-graining")


def test_criterion_4_mother_constructions():
    e, f = needle_pair()
    e1, f1 = e.effects[0], f.effects[0]
    mother = pc.DiscreteObservable(
        2, [("x", e1), ("y", f1), ("rest", np.eye(2) - e1 - f1)]
    )
    cert = pc.joint_from_mother_binary(mother, [{0}, {1}])
    assert max(cert.marginal_residuals) <= 1e-10
    first = pc.binarize(e, {0})
    for i, targets in enumerate((first, f)):
        for sign, effect in zip((1, -1), targets.effects):
            rebuilt = sum(
                (
                    block
                    for signs, block in zip(cert.sign_vectors, cert.joint.effects)
                    if signs[i] == sign
                ),
                np.zeros((2, 2), dtype=complex),
            )
            assert float(np.linalg.norm(rebuilt - effect)) <= 1e-10
    sharp = fx.sharp_basis3()
    diag = pc.extreme_joint_with_mother(sharp, sharp, [{0}, {1}, {2}])
    assert diag.certificate.pairs == (("1", "1"), ("2", "2"), ("3", "3"))
    for pair, effect in zip(diag.certificate.pairs, diag.certificate.joint.effects):
        assert np.array_equal(effect, sharp.effect(pair[0]))
    announce("criterion-4 mother constructions")


def test_criterion_5_noise_threshold():
    log = []
    threshold = pc.jm_threshold(fx.sharp_z(), fx.sharp_x(), probe_log=log)
    assert 1 / np.sqrt(2) - 0.01 <= threshold <= 1 / np.sqrt(2) + 0.01
    slowest = max(seconds for _, _, seconds in log)
    assert slowest <= 2.0, f"slowest bisection probe took {slowest:.2f}s"
    announce("criterion-5 noise threshold")


def exact_trine_kernel_dim() -> int:
    # independent oracle: null space of the map sending per-effect scalars to
    # sum_k t_k |v_k><v_k|, computed in exact arithmetic over Q(sqrt(3))
    half = sp.Rational(1, 2)
    directions = [
        (sp.Integer(1), sp.Integer(0)),
        (half, sp.sqrt(3) / 2),
        (-half, sp.sqrt(3) / 2),
    ]
    columns = []
    for a, b in directions:
        columns.append([a * a, a * b, a * b, b * b])
    matrix = sp.Matrix(columns).T
    return matrix.cols - matrix.rank()


def test_criterion_6_extremality_classifier():
    for name in ("sharp_basis3", "sharp_rotated3", "coarse_basis3", "sharp_z", "sharp_x"):
        assert pc.is_extreme(fx.OBSERVABLES[name]()).is_extreme, name
    trine_report = pc.is_extreme(fx.trine())
    assert trine_report.kernel_dim == exact_trine_kernel_dim() == 0
    assert trine_report.is_extreme

    flat = pc.DiscreteObservable(2, [("a", np.eye(2) / 2), ("b", np.eye(2) / 2)])
    mixture = pc.convex_mixture(fx.sharp_z(), fx.sharp_x(), 0.5)
    rng = np.random.default_rng(113)
    first = random_pvm(rng, 3)
    second = pc.DiscreteObservable(3, list(zip(first.labels, random_pvm(rng, 3).effects)))
    random_mixture = pc.convex_mixture(first, second, 0.3)
    for obs in (flat, mixture, random_mixture):
        report = pc.is_extreme(obs)
        assert not report.is_extreme and report.kernel_dim >= 1
        plus, minus = pc.perturbed_pair(obs, report, 0, eps=1e-3)
        assert pc.validate(plus).passes and pc.validate(minus).passes
    announce("criterion-6 extremality classifier")


def test_criterion_7_dilation_invariants():
    for name, build in fx.OBSERVABLES.items():
        obs = build()
        dil = pc.dilate_minimal(obs)
        diag = pc.verify_dilation(obs, dil)
        assert diag.max_residual <= 1e-10, name
        assert diag.minimal and dil.dilation_dim == diag.rank_sum, name
    rng = np.random.default_rng(127)
    for _ in range(100):
        d = int(rng.integers(2, 7))
        k = int(rng.integers(d, 2 * d + 1))
        a = random_complex(rng, k, d)
        g = random_complex(rng, k, k)
        c0 = g @ g.conj().T
        c0 = c0 / (np.linalg.eigvalsh(c0)[-1] * (1 + rng.random()))
        b = a.conj().T @ c0 @ a
        c = pc.douglas_factor(a, b)
        assert float(np.linalg.norm(a.conj().T @ c @ a - b)) <= 1e-10
    announce("criterion-7 dilation invariants")


def test_criterion_8_steering():
    phi = fx.bell_phi_plus()
    steered = pc.steerable(phi, [fx.sharp_z(), fx.sharp_x()])
    assert steered.status == "STEERABLE"
    assert steered.feasibility.separation_gap > 1e-3

    pair = [smeared(fx.sharp_z(), 0.6), smeared(fx.sharp_x(), 0.6)]
    local = pc.steerable(phi, pair)
    assert local.status == "UNSTEERABLE"
    assemblage = pc.assemblage_from(phi, pair)
    assert local.model.reconstruction_residual(assemblage) <= 1e-7
    assert local.model.min_state_eigenvalue() >= -1e-9

    separable = fx.separable_zx()
    for measurements in (
        [fx.sharp_z(), fx.sharp_x()],
        [fx.trine()],
        [fx.unsharp_triple(), fx.unsharp_pair()],
    ):
        assert pc.steerable(separable, measurements).status == "UNSTEERABLE"
    announce("criterion-8 steering")


SHAPE_CLASSES = ((2, 2), (2, 3), (3, 2), (3, 3))
PER_CLASS = 200


def test_criterion_9_property_suites():
    rng = np.random.default_rng(131)
    eye = {d: np.eye(d) for d in (2, 3)}
    for dim, n_outcomes in SHAPE_CLASSES:
        for index in range(PER_CLASS):
            obs = random_observable(rng, dim, n_outcomes)
            assert pc.validate(obs).passes
            mask = {int(i) for i in rng.choice(n_outcomes, size=1 + index % n_outcomes, replace=False)}
            # subset effects and binarizations stay normalized
            complement = set(range(n_outcomes)) - mask
            total = pc.subset_effect(obs, mask) + pc.subset_effect(obs, complement)
            assert float(np.linalg.norm(total - eye[dim])) <= 1e-9
            two = pc.binarize(obs, mask)
            assert float(np.linalg.norm(sum(two.effects) - eye[dim])) <= 1e-9
            if index < 50:
                # dilation invariants on a quarter of each class
                diag = pc.verify_dilation(obs, pc.dilate_minimal(obs))
                assert diag.max_residual <= 1e-10 and diag.minimal
            if index < 10:
                # processing identities
                f = tuple(int(x) for x in rng.integers(0, n_outcomes, size=n_outcomes))
                kernel = pc.StochasticMatrix.deterministic(f, n_outcomes)
                lhs = pc.post_process(obs, kernel)
                rhs = pc.relabel(obs, f)
                assert lhs.labels == rhs.labels
                assert all(
                    np.array_equal(x, y) for x, y in zip(lhs.effects, rhs.effects)
                )
                beta = pc.StochasticMatrix(rng.dirichlet(np.ones(3), size=n_outcomes))
                gamma = pc.StochasticMatrix(rng.dirichlet(np.ones(2), size=3))
                twice = pc.post_process(pc.post_process(obs, beta), gamma)
                once = pc.post_process(obs, beta.compose(gamma))
                assert max(
                    float(np.linalg.norm(x - y))
                    for x, y in zip(twice.effects, once.effects)
                ) <= 1e-9
                assert pc.validate(
                    pc.mix_with_trivial(obs, rng.random(), rng.dirichlet(np.ones(n_outcomes)))
                ).passes
            if index < 5:
                # extremality is basis- and order-independent
                report = pc.is_extreme(obs)
                u = random_unitary(rng, dim)
                rotated = pc.DiscreteObservable(
                    dim, [(l, u @ e @ u.conj().T) for l, e in obs.outcomes]
                )
                assert pc.is_extreme(rotated).kernel_dim == report.kernel_dim
                perm = rng.permutation(n_outcomes)
                shuffled = pc.DiscreteObservable(
                    dim, [(obs.labels[i], obs.effects[i]) for i in perm]
                )
                assert pc.is_extreme(shuffled).kernel_dim == report.kernel_dim

    # solver-facing invariants on a random compatible family
    for _ in range(3):
        base = random_observable(rng, 2, 2)
        noisy = smeared(base, 0.3)
        partner = smeared(random_observable(rng, 2, 2), 0.3)
        verdict = pc.jm_check(noisy, partner, max_iter=8000)
        if verdict.status == YES:
            assert max(verdict.certificate.verify_against(noisy, partner)) <= 1e-7

    # hierarchy chain over the fixture corpus
    corpus = [
        (fx.unsharp_triple(), fx.unsharp_pair()),
        (fx.sharp_basis3(), fx.sharp_rotated3()),
        (fx.coarse_basis3(), fx.sharp_rotated3()),
        (fx.sharp_z(), fx.sharp_x()),
        (smeared(fx.sharp_z(), 0.6), smeared(fx.sharp_x(), 0.6)),
        (fx.trine(), smeared(fx.sharp_z(), 0.7)),
    ]
    for a, b in corpus:
        jm = pc.jm_check(a, b, max_iter=8000)
        coexist = pc.coexistence_check(a, b, max_mother_outcomes=3, max_iter=8000)
        binar = pc.binarization_jm_all(a, b, max_iter=8000)
        if jm.status == YES:
            assert coexist.status != NO
        if coexist.status == YES:
            assert binar.status != NO
        if binar.status == NO:
            assert coexist.status == NO

    # steering invariants: joint observables induce local models
    pair = [smeared(fx.sharp_z(), 0.6), smeared(fx.sharp_x(), 0.6)]
    jm = pc.jm_check(*pair)
    joint_effects = {
        (pair[0].labels.index(la), pair[1].labels.index(lb)): effect
        for (la, lb), effect in zip(jm.certificate.pairs, jm.certificate.joint.effects)
    }
    for _ in range(20):
        state = random_two_qubit_state(rng)
        assemblage = pc.assemblage_from(state, pair)
        assert assemblage.no_signaling_residual() <= 1e-9
        model = pc.lhs_from_joint(state, joint_effects)
        assert model.reconstruction_residual(assemblage) <= 1e-7
    announce("criterion-9 property suites")


def test_suite_runtime_budget():
    elapsed = time.perf_counter() - MODULE_START
    assert elapsed < 60.0, f"acceptance suite took {elapsed:.1f}s"
    announce(f"acceptance suite runtime {elapsed:.1f}s < 60s")
