"""Built-in reference suite: re-derives the library's benchmark results.

Each criterion checks one pinned scenario (counterexample arithmetic, the
hierarchy separation, the sharp-triple example, mother constructions, the
extremality classifier, dilation invariants) and reports the measured
values; the CLI surfaces failures through its exit code.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import fixtures
from .compatibility import (
    NO,
    YES,
    ViolatedCondition,
    binarization_jm_all,
    coexistence_check,
    extreme_joint_with_mother,
    jm_check,
    joint_from_mother_binary,
)
from .dilation import dilate_minimal, is_extreme, perturbed_pair, verify_dilation
from .linalg import dagger, douglas_factor, frob, loewner_leq, max_eigenvalue
from .observables import (
    DiscreteObservable,
    binarize,
    commutes,
    convex_mixture,
    is_pvm,
    subset_effect,
    validate,
)
from .sampling import random_complex


@dataclass(frozen=True)
class CriterionResult:
    name: str
    passed: bool
    values: dict
    detail: str = ""


def _counterexample_arithmetic() -> CriterionResult:
    e = fixtures.unsharp_triple()
    f = fixtures.unsharp_pair()
    f1 = f.effects[0]
    eye = np.eye(2)
    top = max_eigenvalue(e.effects[0] + e.effects[1] + f1)
    ordered = [loewner_leq(effect + f1, eye) for effect in e.effects]
    third = max_eigenvalue(e.effects[2] + f1)
    passed = (
        abs(top - 8.0 / 7.0) <= 1e-12
        and all(ordered)
        and abs(third - 1.0) <= 1e-12
    )
    return CriterionResult(
        "counterexample-arithmetic",
        passed,
        {
            "needle_sum_max_eigenvalue": top,
            "pairwise_below_identity": ordered,
            "third_pair_max_eigenvalue": third,
        },
    )


def _hierarchy_separation() -> CriterionResult:
    e = fixtures.unsharp_triple()
    f = fixtures.unsharp_pair()
    start = time.perf_counter()
    binarizations = binarization_jm_all(e, f)
    worst = max(
        max(
            w.verdict.certificate.marginal_residual_a,
            w.verdict.certificate.marginal_residual_b,
        )
        for w in binarizations.certificate
    ) if binarizations.status == YES else np.inf
    coexistence = coexistence_check(e, f)
    elapsed = time.perf_counter() - start
    packing = (
        coexistence.certificate
        if isinstance(coexistence.certificate, ViolatedCondition)
        else None
    )
    passed = (
        binarizations.status == YES
        and worst <= 1e-7
        and coexistence.status == NO
        and packing is not None
        and packing.name == "rank1_packing"
        and elapsed < 5.0
    )
    return CriterionResult(
        "binarizations-compatible-but-no-mother",
        passed,
        {
            "binarizations_status": binarizations.status,
            "worst_marginal_residual": float(worst),
            "coexistence_status": coexistence.status,
            "violated_condition": None if packing is None else packing.name,
            "packing_eigenvalue": None if packing is None else packing.value,
            "runtime_s": elapsed,
        },
    )


def _sharp_triple() -> CriterionResult:
    a = fixtures.sharp_basis3()
    b = fixtures.sharp_rotated3()
    coarse = fixtures.coarse_basis3()
    sharp_pair = jm_check(a, b)
    commuting = commutes(coarse, b)
    coarse_pair = jm_check(coarse, b)
    residual = (
        max(
            coarse_pair.certificate.marginal_residual_a,
            coarse_pair.certificate.marginal_residual_b,
        )
        if coarse_pair.status == YES
        else np.inf
    )
    passed = (
        sharp_pair.status == NO
        and isinstance(sharp_pair.certificate, ViolatedCondition)
        and sharp_pair.certificate.name == "sharp_noncommuting"
        and commuting
        and coarse_pair.status == YES
        and coarse_pair.certificate.provenance == "product"
        and residual <= 1e-10
    )
    return CriterionResult(
        "sharp-triple-coarse-graining",
        passed,
        {
            "sharp_pair_status": sharp_pair.status,
            "coarse_commutes": commuting,
            "coarse_pair_status": coarse_pair.status,
            "marginal_residual": float(residual),
        },
    )


def _mother_constructions() -> CriterionResult:
    e = fixtures.unsharp_triple()
    f = fixtures.unsharp_pair()
    e1, f1 = e.effects[0], f.effects[0]
    mother = DiscreteObservable(
        2, [("x", e1), ("y", f1), ("rest", np.eye(2) - e1 - f1)]
    )
    cert = joint_from_mother_binary(mother, [{0}, {1}])
    first = binarize(e, {0})
    rebuild_first = max(
        frob(
            sum(
                (
                    eff
                    for signs, eff in zip(cert.sign_vectors, cert.joint.effects)
                    if signs[0] == s
                ),
                np.zeros((2, 2), dtype=complex),
            )
            - target
        )
        for s, target in ((1, first.effects[0]), (-1, first.effects[1]))
    )
    rebuild_second = max(
        frob(
            sum(
                (
                    eff
                    for signs, eff in zip(cert.sign_vectors, cert.joint.effects)
                    if signs[1] == s
                ),
                np.zeros((2, 2), dtype=complex),
            )
            - target
        )
        for s, target in ((1, f.effects[0]), (-1, f.effects[1]))
    )
    sharp = fixtures.sharp_z()
    self_joint = extreme_joint_with_mother(sharp, sharp, [{0}, {1}])
    diagonal = (
        self_joint.certificate.pairs == (("+", "+"), ("-", "-"))
        and max(
            frob(eff - sharp.effect(pair[0]))
            for pair, eff in zip(
                self_joint.certificate.pairs, self_joint.certificate.joint.effects
            )
        )
        <= 1e-15
    )
    passed = (
        max(cert.marginal_residuals) <= 1e-10
        and rebuild_first <= 1e-10
        and rebuild_second <= 1e-10
        and diagonal
        and self_joint.factor_residual <= 1e-10
    )
    return CriterionResult(
        "mother-constructions",
        passed,
        {
            "binary_joint_residuals": list(cert.marginal_residuals),
            "first_binarization_residual": float(rebuild_first),
            "second_observable_residual": float(rebuild_second),
            "sharp_self_joint_diagonal": diagonal,
            "factor_residual": self_joint.factor_residual,
        },
    )


def _extremality_classifier() -> CriterionResult:
    values = {}
    ok = True
    for name in ("sharp_basis3", "sharp_rotated3", "coarse_basis3", "sharp_z", "sharp_x"):
        report = is_extreme(fixtures.OBSERVABLES[name]())
        values[f"{name}_extreme"] = report.is_extreme
        ok = ok and report.is_extreme
    trine_report = is_extreme(fixtures.trine())
    values["trine_extreme"] = trine_report.is_extreme
    ok = ok and trine_report.is_extreme

    flat = DiscreteObservable(2, [("a", np.eye(2) / 2), ("b", np.eye(2) / 2)])
    mixed = convex_mixture(fixtures.sharp_z(), fixtures.sharp_x(), 0.5)
    for name, obs in (("flat_pair", flat), ("pvm_mixture", mixed)):
        report = is_extreme(obs)
        values[f"{name}_kernel_dim"] = report.kernel_dim
        witness_ok = False
        if report.kernel_dim >= 1:
            plus, minus = perturbed_pair(obs, report, 0, eps=1e-3)
            witness_ok = validate(plus).passes and validate(minus).passes
        values[f"{name}_witness_valid"] = witness_ok
        ok = ok and (not report.is_extreme) and witness_ok
    return CriterionResult("extremality-classifier", ok, values)


def _dilation_invariants(seed: int = 20240801) -> CriterionResult:
    worst_dilation = 0.0
    minimal = True
    for build in fixtures.OBSERVABLES.values():
        obs = build()
        dil = dilate_minimal(obs)
        diag = verify_dilation(obs, dil)
        worst_dilation = max(worst_dilation, diag.max_residual)
        minimal = minimal and diag.minimal and dil.dilation_dim == diag.rank_sum
    rng = np.random.default_rng(seed)
    worst_factor = 0.0
    for _ in range(100):
        d = int(rng.integers(2, 7))
        k = int(rng.integers(d, 2 * d + 1))
        a = random_complex(rng, k, d)
        g = random_complex(rng, k, k)
        c0 = g @ dagger(g)
        c0 = c0 / (np.linalg.eigvalsh(c0)[-1] * (1 + rng.random()))
        b = dagger(a) @ c0 @ a
        c = douglas_factor(a, b)
        worst_factor = max(worst_factor, frob(dagger(a) @ c @ a - b))
    passed = worst_dilation <= 1e-10 and minimal and worst_factor <= 1e-10
    return CriterionResult(
        "dilation-invariants",
        passed,
        {
            "worst_dilation_residual": worst_dilation,
            "all_minimal": minimal,
            "worst_factorization_residual": worst_factor,
        },
    )


CRITERIA = (
    _counterexample_arithmetic,
    _hierarchy_separation,
    _sharp_triple,
    _mother_constructions,
    _extremality_classifier,
    _dilation_invariants,
)


def run_reference_suite() -> tuple[list[CriterionResult], bool]:
    """Run every criterion; returns the results and whether all passed."""
    results = [criterion() for criterion in CRITERIA]
    return results, all(r.passed for r in results)
