"""The compatibility hierarchy for pairs of discrete observables.

Joint measurability implies coexistence (a joint observable is a mother),
and coexistence implies that every pair of binarizations is jointly
measurable.  The checkers here decide each notion as far as bounded numerics
allow: exact shortcuts first, the feasibility engine next, and an honest
``UNDECIDED`` when neither yields a verdict.  Every ``YES`` carries a
certificate that re-verifies from scratch; every ``NO`` names the violated
necessary condition.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dilation import NaimarkDilation, dilate_minimal
from .errors import NotApplicableError, PositivityError, ShapeError
from .feasibility import (
    DEFAULT_FEAS_TOL,
    DEFAULT_MAX_ITER,
    FEASIBLE,
    NUMERICALLY_INFEASIBLE,
    AffineConstraint,
    BlockSpec,
    FeasibilityProblem,
    FeasibilityVerdict,
    dykstra_solve,
)
from .linalg import (
    DEFAULT_TOL,
    Tolerance,
    check_effect,
    dagger,
    douglas_factor,
    eigh_sorted,
    frob,
    hermitize,
    loewner_leq,
    max_eigenvalue,
    min_eigenvalue,
)
from .observables import (
    DiscreteObservable,
    JointCertificate,
    StochasticMatrix,
    commutes,
    effects_close,
    is_pvm,
    joint_certificate_from_blocks,
    mix_with_trivial,
    normalize_mask,
    product_joint,
    relabel,
    subset_effect,
)

YES = "YES"
NO = "NO"
UNDECIDED = "UNDECIDED"

REL_JM = "JM"
REL_COEXISTENT = "COEXISTENT"
REL_BINARIZATIONS_JM = "BINARIZATIONS_JM"

PARALLEL_OVERLAP_TOL = 1e-6  # rank-1 ranges closer than this count as parallel


@dataclass(frozen=True)
class ViolatedCondition:
    """A named necessary condition that failed, with the offending value."""

    name: str
    value: float
    description: str


@dataclass(frozen=True)
class PairWitness:
    """Verdict for one pair of binarizations, identified by their masks."""

    mask_a: frozenset[int]
    mask_b: frozenset[int]
    verdict: "CompatibilityVerdict"


@dataclass(frozen=True)
class MotherAssignment:
    """A mother observable plus masks realizing every required subset effect."""

    mother: DiscreteObservable
    a_masks: tuple[tuple[frozenset[int], frozenset[int]], ...]
    b_masks: tuple[tuple[frozenset[int], frozenset[int]], ...]
    provenance: str

    def max_residual(self, a: DiscreteObservable, b: DiscreteObservable) -> float:
        """Largest deviation between a required effect and its mother subset sum."""
        worst = 0.0
        for obs, entries in ((a, self.a_masks), (b, self.b_masks)):
            for subset, mask in entries:
                diff = subset_effect(self.mother, mask) - subset_effect(obs, subset)
                worst = max(worst, frob(diff))
        return worst


@dataclass(frozen=True)
class CompatibilityVerdict:
    relation: str
    status: str
    certificate: object | None
    notes: tuple[str, ...] = ()


@dataclass(frozen=True)
class Rank1PackingVerdict:
    """Outcome of the rank-1 packing necessary condition."""

    applicable: bool
    violated: bool
    max_eigenvalue: float | None
    reason: str


@dataclass(frozen=True)
class BinaryJointCertificate:
    """Joint observable of n binary observables built from one mother.

    Outcomes are sign vectors; component ``i`` marginalizes to the
    binarization of the mother over its ``i``-th mask.
    """

    joint: DiscreteObservable
    sign_vectors: tuple[tuple[int, ...], ...]
    masks: tuple[frozenset[int], ...]
    marginal_residuals: tuple[float, ...]
    provenance: str


@dataclass(frozen=True)
class ExtremeMotherJoint:
    """Joint certificate plus its dilation-level factors ``C_i`` with ``J* C_i J = N(i, .)``."""

    certificate: JointCertificate
    dilation: NaimarkDilation
    factors: tuple[np.ndarray, ...]
    factor_residual: float


def _solver_tolerance(feas_tol: float) -> Tolerance:
    slack = min(1e-3, max(DEFAULT_TOL.eq_tol, 10.0 * feas_tol))
    return Tolerance(eig_tol=slack, eq_tol=slack)


def _require_same_dim(a: DiscreteObservable, b: DiscreteObservable):
    if a.dim != b.dim:
        raise ShapeError(f"dimension mismatch: {a.dim} vs {b.dim}")


def jm_problem(a: DiscreteObservable, b: DiscreteObservable) -> FeasibilityProblem:
    """Feasibility encoding of joint measurability: PSD blocks with both marginals fixed."""
    _require_same_dim(a, b)
    n, m, d = a.n_outcomes, b.n_outcomes, a.dim
    blocks = [BlockSpec(d) for _ in range(n * m)]
    constraints = [
        AffineConstraint([(i * m + j, 1.0) for j in range(m)], a.effects[i])
        for i in range(n)
    ] + [
        AffineConstraint([(i * m + j, 1.0) for i in range(n)], b.effects[j])
        for j in range(m)
    ]
    return FeasibilityProblem(blocks, constraints)


def jm_check(
    a: DiscreteObservable,
    b: DiscreteObservable,
    feas_tol: float = DEFAULT_FEAS_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> CompatibilityVerdict:
    """Decide joint measurability of two observables on the same space.

    Exact shortcuts (commuting product, identical pair, sharp non-commuting
    pair) are tried before the feasibility engine.
    """
    _require_same_dim(a, b)
    if commutes(a, b):
        return CompatibilityVerdict(
            REL_JM, YES, product_joint(a, b), ("commuting pair: product joint",)
        )
    if effects_close(a, b, 10.0 * a.tol.eq_tol):
        blocks = {(i, i): effect for i, effect in enumerate(a.effects)}
        cert = joint_certificate_from_blocks(a, b, blocks, "diagonal", a.tol)
        return CompatibilityVerdict(
            REL_JM, YES, cert, ("identical observables: diagonal joint",)
        )
    if is_pvm(a) and is_pvm(b):
        worst = max(
            frob(x @ y - y @ x) for x in a.effects for y in b.effects
        )
        return CompatibilityVerdict(
            REL_JM,
            NO,
            ViolatedCondition(
                "sharp_noncommuting",
                worst,
                "sharp observables are jointly measurable only if they commute",
            ),
            ("both observables are projection valued and do not commute",),
        )
    verdict = dykstra_solve(jm_problem(a, b), max_iter=max_iter, feas_tol=feas_tol)
    return _verdict_from_solver(a, b, verdict, feas_tol)


def _verdict_from_solver(
    a: DiscreteObservable,
    b: DiscreteObservable,
    verdict: FeasibilityVerdict,
    feas_tol: float,
) -> CompatibilityVerdict:
    if verdict.status == FEASIBLE:
        m = b.n_outcomes
        blocks = {
            (i, j): verdict.point[i * m + j]
            for i in range(a.n_outcomes)
            for j in range(m)
        }
        cert = joint_certificate_from_blocks(
            a, b, blocks, "solver", _solver_tolerance(feas_tol)
        )
        return CompatibilityVerdict(
            REL_JM, YES, cert, (f"solver converged in {verdict.iterations} iterations",)
        )
    if verdict.status == NUMERICALLY_INFEASIBLE:
        return CompatibilityVerdict(
            REL_JM,
            NO,
            ViolatedCondition(
                "solver_separation",
                float(verdict.separation_gap),
                "alternating projections stalled at a positive inter-set gap",
            ),
            (f"separation gap {verdict.separation_gap:.3e}",),
        )
    return CompatibilityVerdict(
        REL_JM, UNDECIDED, None, (f"solver undecided after {verdict.iterations} iterations",)
    )


def _binary_pair(effect: np.ndarray, dim: int, tol: Tolerance) -> DiscreteObservable:
    return DiscreteObservable(
        dim, [("+1", effect), ("-1", np.eye(dim) - effect)], tol
    )


def _pair_certificate(
    e: np.ndarray,
    f: np.ndarray,
    g: dict[tuple[str, str], np.ndarray],
    provenance: str,
    tol: Tolerance,
) -> JointCertificate:
    dim = e.shape[0]
    obs_e = _binary_pair(e, dim, tol)
    obs_f = _binary_pair(f, dim, tol)
    blocks = {}
    for (sa, sb), mat in g.items():
        if sa in obs_e.labels and sb in obs_f.labels:
            blocks[(obs_e.labels.index(sa), obs_f.labels.index(sb))] = mat
    return joint_certificate_from_blocks(obs_e, obs_f, blocks, provenance, tol)


def effect_pair_joint(
    e: np.ndarray,
    f: np.ndarray,
    tol: Tolerance = DEFAULT_TOL,
    feas_tol: float = DEFAULT_FEAS_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> CompatibilityVerdict:
    """Joint measurability of the binary observables of two effects.

    Feasibility of a single operator ``G`` with ``0 <= G <= E, F`` and
    ``E + F - G <= I``; a witness yields the four-outcome joint
    ``(G, E - G, F - G, I - E - F + G)``.  Order-comparable, commuting, and
    sharp pairs are settled exactly without the solver.
    """
    e = hermitize(e, tol)
    f = hermitize(f, tol)
    if e.shape != f.shape:
        raise ShapeError(f"effect shapes differ: {e.shape} vs {f.shape}")
    if not check_effect(e, tol) or not check_effect(f, tol):
        raise PositivityError("effect_pair_joint requires two effects")
    eye = np.eye(e.shape[0])

    def yes(g: np.ndarray, provenance: str, note: str) -> CompatibilityVerdict:
        cert = _pair_certificate(
            e,
            f,
            {
                ("+1", "+1"): g,
                ("+1", "-1"): e - g,
                ("-1", "+1"): f - g,
                ("-1", "-1"): eye - e - f + g,
            },
            provenance,
            tol,
        )
        return CompatibilityVerdict(REL_JM, YES, cert, (note,))

    if frob(e - f) <= tol.eq_tol:
        return yes(e, "equal-effects", "identical effects: G = E")
    if max_eigenvalue(e + f, tol) <= 1.0 + tol.eig_tol:
        return yes(np.zeros_like(e), "disjoint-sum", "E + F <= I: G = 0")
    if loewner_leq(e, f, tol):
        return yes(e, "ordered", "E <= F: G = E")
    if loewner_leq(f, e, tol):
        return yes(f, "ordered", "F <= E: G = F")
    if min_eigenvalue(e + f, tol) >= 1.0 - tol.eig_tol:
        return yes(e + f - eye, "co-disjoint", "I <= E + F: G = E + F - I")
    commutator = frob(e @ f - f @ e)
    if commutator <= tol.eq_tol:
        return yes(hermitize(e @ f, Tolerance(1e-3, 1e-3)), "commuting", "commuting effects: G = EF")
    sharp_e = frob(e @ e - e) <= tol.eq_tol
    sharp_f = frob(f @ f - f) <= tol.eq_tol
    if sharp_e and sharp_f:
        return CompatibilityVerdict(
            REL_JM,
            NO,
            ViolatedCondition(
                "sharp_noncommuting",
                commutator,
                "two projections are compatible only if they commute",
            ),
            ("both effects sharp and non-commuting",),
        )
    problem = FeasibilityProblem(
        [BlockSpec(e.shape[0]) for _ in range(4)],
        [
            AffineConstraint([(0, 1.0), (1, 1.0)], e),
            AffineConstraint([(2, 1.0), (3, 1.0)], eye - e),
            AffineConstraint([(0, 1.0), (2, 1.0)], f),
            AffineConstraint([(1, 1.0), (3, 1.0)], eye - f),
        ],
    )
    verdict = dykstra_solve(problem, max_iter=max_iter, feas_tol=feas_tol)
    if verdict.status == FEASIBLE:
        g = {
            ("+1", "+1"): verdict.point[0],
            ("+1", "-1"): verdict.point[1],
            ("-1", "+1"): verdict.point[2],
            ("-1", "-1"): verdict.point[3],
        }
        cert = _pair_certificate(e, f, g, "solver", _solver_tolerance(feas_tol))
        return CompatibilityVerdict(
            REL_JM, YES, cert, (f"solver converged in {verdict.iterations} iterations",)
        )
    if verdict.status == NUMERICALLY_INFEASIBLE:
        return CompatibilityVerdict(
            REL_JM,
            NO,
            ViolatedCondition(
                "solver_separation",
                float(verdict.separation_gap),
                "no operator below both effects fits the marginal constraints",
            ),
            (f"separation gap {verdict.separation_gap:.3e}",),
        )
    return CompatibilityVerdict(
        REL_JM, UNDECIDED, None, (f"solver undecided after {verdict.iterations} iterations",)
    )


def nontrivial_masks(
    n_outcomes: int, subset_cap: int
) -> tuple[list[frozenset[int]], bool]:
    """All nonempty proper outcome subsets, or singletons plus complements when capped.

    Returns the mask list and whether the restriction was applied.
    """
    full = frozenset(range(n_outcomes))
    if 2**n_outcomes <= subset_cap:
        masks = [
            frozenset(c)
            for size in range(1, n_outcomes)
            for c in itertools.combinations(range(n_outcomes), size)
        ]
        return masks, False
    masks = [frozenset([i]) for i in range(n_outcomes)] + [
        full - frozenset([i]) for i in range(n_outcomes)
    ]
    return masks, True


def binarization_jm_all(
    a: DiscreteObservable,
    b: DiscreteObservable,
    subset_cap: int = 4096,
    feas_tol: float = DEFAULT_FEAS_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> CompatibilityVerdict:
    """Check joint measurability of every pair of binarizations.

    ``YES`` iff every subset pair admits a joint; the witness table of
    per-pair verdicts is the certificate.
    """
    _require_same_dim(a, b)
    masks_a, capped_a = nontrivial_masks(a.n_outcomes, subset_cap)
    masks_b, capped_b = nontrivial_masks(b.n_outcomes, subset_cap)
    notes = []
    if capped_a or capped_b:
        notes.append("subset cap reached: restricted to singletons and complements")
    witnesses = []
    has_undecided = False
    for mask_a in masks_a:
        ea = subset_effect(a, mask_a)
        for mask_b in masks_b:
            v = effect_pair_joint(
                ea,
                subset_effect(b, mask_b),
                a.tol,
                feas_tol=feas_tol,
                max_iter=max_iter,
            )
            witness = PairWitness(mask_a, mask_b, v)
            witnesses.append(witness)
            if v.status == NO:
                notes.append(
                    f"binarizations over {sorted(mask_a)} / {sorted(mask_b)} are incompatible"
                )
                return CompatibilityVerdict(
                    REL_BINARIZATIONS_JM, NO, witness, tuple(notes)
                )
            if v.status == UNDECIDED:
                has_undecided = True
    if has_undecided:
        return CompatibilityVerdict(
            REL_BINARIZATIONS_JM,
            UNDECIDED,
            tuple(witnesses),
            tuple(notes) + ("some subset pairs left undecided by the solver",),
        )
    return CompatibilityVerdict(
        REL_BINARIZATIONS_JM, YES, tuple(witnesses), tuple(notes)
    )


def rank1_packing_condition(
    effects: Sequence[np.ndarray], tol: Tolerance = DEFAULT_TOL
) -> Rank1PackingVerdict:
    """Necessary condition for a common mother of rank-1 effects.

    Rank-1 effects with pairwise distinct ranges force the mother to vanish
    on mask intersections, so their plain sum must stay below the identity;
    a sum eigenvalue above 1 rules the mother out.
    """
    directions = []
    for effect in effects:
        eigs, vecs = eigh_sorted(effect, tol)
        if eigs[-1] <= tol.eig_tol:
            return Rank1PackingVerdict(False, False, None, "zero effect supplied")
        if len(eigs) > 1 and abs(eigs[-2]) > tol.eig_tol:
            return Rank1PackingVerdict(
                False, False, None, "an effect is not rank-1 within tolerance"
            )
        directions.append(vecs[:, -1])
    for u, v in itertools.combinations(directions, 2):
        if abs(np.vdot(u, v)) >= 1.0 - PARALLEL_OVERLAP_TOL:
            return Rank1PackingVerdict(
                False, False, None, "two effects have parallel ranges"
            )
    top = max_eigenvalue(sum(effects), tol)
    return Rank1PackingVerdict(
        applicable=True,
        violated=top > 1.0 + tol.eig_tol,
        max_eigenvalue=float(top),
        reason="sum of rank-1 effects must stay below the identity",
    )


def _rank1_representatives(
    a: DiscreteObservable, b: DiscreteObservable, subset_cap: int, tol: Tolerance
) -> list[np.ndarray]:
    """Rank-1 subset effects from both ranges, one (largest) per ray."""
    reps: list[tuple[np.ndarray, float, np.ndarray]] = []  # direction, weight, effect
    for obs in (a, b):
        masks, _ = nontrivial_masks(obs.n_outcomes, subset_cap)
        for mask in masks:
            effect = subset_effect(obs, mask)
            eigs, vecs = eigh_sorted(effect, tol)
            if eigs[-1] <= tol.eig_tol:
                continue
            if len(eigs) > 1 and abs(eigs[-2]) > tol.eig_tol:
                continue
            direction, weight = vecs[:, -1], float(eigs[-1])
            for k, (d, w, _) in enumerate(reps):
                if abs(np.vdot(direction, d)) >= 1.0 - PARALLEL_OVERLAP_TOL:
                    if weight > w:
                        reps[k] = (direction, weight, effect)
                    break
            else:
                reps.append((direction, weight, effect))
    return [effect for _, _, effect in reps]


def mother_from_joint(
    a: DiscreteObservable,
    b: DiscreteObservable,
    cert: JointCertificate,
    subset_cap: int = 4096,
) -> MotherAssignment:
    """Read a joint observable as a mother: product-outcome masks realize both ranges."""
    masks_a, _ = nontrivial_masks(a.n_outcomes, subset_cap)
    masks_b, _ = nontrivial_masks(b.n_outcomes, subset_cap)
    a_entries = []
    for subset in masks_a:
        chosen = frozenset(
            k
            for k, pair in enumerate(cert.pairs)
            if a.labels.index(pair[0]) in subset
        )
        a_entries.append((subset, chosen))
    b_entries = []
    for subset in masks_b:
        chosen = frozenset(
            k
            for k, pair in enumerate(cert.pairs)
            if b.labels.index(pair[1]) in subset
        )
        b_entries.append((subset, chosen))
    return MotherAssignment(
        mother=cert.joint,
        a_masks=tuple(a_entries),
        b_masks=tuple(b_entries),
        provenance=f"joint-as-mother ({cert.provenance})",
    )


def _canonical_subset_reps(obs: DiscreteObservable, subset_cap: int):
    """One representative per complement pair of nontrivial subsets."""
    masks, capped = nontrivial_masks(obs.n_outcomes, subset_cap)
    full = frozenset(range(obs.n_outcomes))
    reps = []
    seen = set()
    for mask in masks:
        comp = full - mask
        key = min(
            (len(mask), tuple(sorted(mask))), (len(comp), tuple(sorted(comp)))
        )
        if key in seen:
            continue
        seen.add(key)
        reps.append(frozenset(key[1]))
    return reps, capped


def search_mother(
    a: DiscreteObservable,
    b: DiscreteObservable,
    max_outcomes: int = 5,
    subset_cap: int = 4096,
    feas_tol: float = DEFAULT_FEAS_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    lp_budget: int = 5000,
    enumeration_budget: int = 500_000,
) -> tuple[MotherAssignment | None, tuple[str, ...]]:
    """Bounded exhaustive search for a common mother with at most ``max_outcomes`` atoms.

    Atoms are identified by their membership signature across the required
    subset effects (one representative per complement pair); atoms sharing a
    signature merge without loss, so candidates are signature *sets*, which
    kills the outcome-permutation symmetry.  Candidate sets failing cheap
    Loewner prechecks are pruned before the feasibility engine runs.

    Returns the assignment (or ``None``) plus search notes.
    """
    _require_same_dim(a, b)
    tol = a.tol
    reqs: list[tuple[int, frozenset[int], np.ndarray]] = []  # (side, subset, effect)
    rep_masks: dict[int, list[frozenset[int]]] = {0: [], 1: []}
    notes = []
    for side, obs in enumerate((a, b)):
        reps, capped = _canonical_subset_reps(obs, subset_cap)
        if capped:
            notes.append(
                "subset cap reached: mother search restricted to singleton requirements"
            )
        rep_masks[side] = reps
        for subset in reps:
            reqs.append((side, subset, subset_effect(obs, subset)))
    n_req = len(reqs)
    if n_req > 16:
        return None, tuple(notes) + ("requirement set too large for the bounded search",)

    # pairwise precomputations for pruning
    effects = [e for _, _, e in reqs]
    leq = [[loewner_leq(x, y, tol) for y in effects] for x in effects]
    packable = [
        [max_eigenvalue(x + y, tol) <= 1.0 + tol.eig_tol for y in effects]
        for x in effects
    ]
    same = [[frob(x - y) <= 10 * tol.eq_tol for y in effects] for x in effects]

    n_signatures = 2**n_req
    eye = np.eye(a.dim)
    lp_runs = 0
    enumerated = 0
    for m in range(2, max_outcomes + 1):
        for combo in itertools.combinations(range(n_signatures), m):
            enumerated += 1
            if enumerated > enumeration_budget:
                return None, tuple(notes) + (
                    f"enumeration budget exhausted after {enumerated - 1} candidates",
                )
            ok = True
            for r in range(n_req):
                bit = 1 << r
                members = [s for s in combo if s & bit]
                if not members or len(members) == m:
                    ok = False
                    break
            if not ok:
                continue
            for r in range(n_req):
                for s in range(r + 1, n_req):
                    br, bs = 1 << r, 1 << s
                    mask_r = {sig for sig in combo if sig & br}
                    mask_s = {sig for sig in combo if sig & bs}
                    if mask_r == mask_s and not same[r][s]:
                        ok = False
                    elif mask_r < mask_s and not leq[r][s]:
                        ok = False
                    elif mask_s < mask_r and not leq[s][r]:
                        ok = False
                    elif not (mask_r & mask_s) and not packable[r][s]:
                        ok = False
                    if not ok:
                        break
                if not ok:
                    break
            if not ok:
                continue
            lp_runs += 1
            if lp_runs > lp_budget:
                return None, tuple(notes) + (
                    f"feasibility budget exhausted after {lp_runs - 1} candidates",
                )
            blocks = [BlockSpec(a.dim) for _ in combo]
            constraints = [
                AffineConstraint([(z, 1.0) for z in range(m)], eye)
            ]
            for r in range(n_req):
                bit = 1 << r
                terms = [(z, 1.0) for z, sig in enumerate(combo) if sig & bit]
                constraints.append(AffineConstraint(terms, effects[r]))
            verdict = dykstra_solve(
                FeasibilityProblem(blocks, constraints),
                max_iter=max_iter,
                feas_tol=feas_tol,
            )
            if verdict.status != FEASIBLE:
                continue
            mother = DiscreteObservable(
                a.dim,
                [(f"m{z}", mat) for z, mat in enumerate(verdict.point)],
                _solver_tolerance(feas_tol),
            )
            kept = {
                z: k for k, label in enumerate(mother.labels)
                for z in [int(label[1:])]
            }
            assignment = _expand_assignment(
                a, b, mother, combo, kept, reqs, rep_masks, subset_cap
            )
            notes.append(
                f"mother with {m} atoms found after {lp_runs} feasibility runs"
            )
            return assignment, tuple(notes)
    notes.append(
        f"no mother with up to {max_outcomes} outcomes ({lp_runs} feasibility runs)"
    )
    return None, tuple(notes)


def _expand_assignment(
    a: DiscreteObservable,
    b: DiscreteObservable,
    mother: DiscreteObservable,
    combo: tuple[int, ...],
    kept: dict[int, int],
    reqs,
    rep_masks,
    subset_cap: int,
) -> MotherAssignment:
    """Masks for every nontrivial subset, derived from the representative signatures."""
    rep_mother_masks: dict[tuple[int, frozenset[int]], frozenset[int]] = {}
    for r, (side, subset, _) in enumerate(reqs):
        bit = 1 << r
        atoms = frozenset(
            kept[z] for z, sig in enumerate(combo) if sig & bit and z in kept
        )
        rep_mother_masks[(side, subset)] = atoms
    all_atoms = frozenset(range(mother.n_outcomes))
    sides = []
    for side, obs in enumerate((a, b)):
        entries = []
        full = frozenset(range(obs.n_outcomes))
        masks, _ = nontrivial_masks(obs.n_outcomes, subset_cap)
        for subset in masks:
            if (side, subset) in rep_mother_masks:
                entries.append((subset, rep_mother_masks[(side, subset)]))
            else:
                comp = full - subset
                entries.append((subset, all_atoms - rep_mother_masks[(side, comp)]))
        sides.append(tuple(entries))
    return MotherAssignment(
        mother=mother, a_masks=sides[0], b_masks=sides[1], provenance="atom search"
    )


def coexistence_check(
    a: DiscreteObservable,
    b: DiscreteObservable,
    max_mother_outcomes: int = 5,
    subset_cap: int = 4096,
    feas_tol: float = DEFAULT_FEAS_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> CompatibilityVerdict:
    """Decide coexistence: is there one observable whose range contains both ranges?

    Verdict precedence: a joint observable is itself a mother (YES); failed
    binarization compatibility or rank-1 packing refutes any mother (NO); a
    bounded atom search may still find one; otherwise UNDECIDED.
    """
    _require_same_dim(a, b)
    notes: list[str] = []
    jm = jm_check(a, b, feas_tol=feas_tol, max_iter=max_iter)
    if jm.status == YES:
        assignment = mother_from_joint(a, b, jm.certificate, subset_cap)
        return CompatibilityVerdict(
            REL_COEXISTENT,
            YES,
            assignment,
            ("jointly measurable: the joint observable is a mother",) + jm.notes,
        )
    notes.append(f"joint measurability: {jm.status}")
    binarizations = binarization_jm_all(
        a, b, subset_cap=subset_cap, feas_tol=feas_tol, max_iter=max_iter
    )
    if binarizations.status == NO:
        return CompatibilityVerdict(
            REL_COEXISTENT,
            NO,
            binarizations.certificate,
            tuple(notes)
            + ("coexistence requires jointly measurable binarizations",)
            + binarizations.notes,
        )
    notes.append(f"binarization compatibility: {binarizations.status}")
    rank1 = _rank1_representatives(a, b, subset_cap, a.tol)
    if len(rank1) >= 2:
        packing = rank1_packing_condition(rank1, a.tol)
        if packing.applicable and packing.violated:
            return CompatibilityVerdict(
                REL_COEXISTENT,
                NO,
                ViolatedCondition(
                    "rank1_packing",
                    packing.max_eigenvalue,
                    "rank-1 range members must sum below the identity",
                ),
                tuple(notes)
                + (
                    f"sum of rank-1 range members has eigenvalue {packing.max_eigenvalue:.6f} > 1",
                ),
            )
        notes.append("rank-1 packing condition satisfied or not applicable")
    assignment, search_notes = search_mother(
        a,
        b,
        max_outcomes=max_mother_outcomes,
        subset_cap=subset_cap,
        feas_tol=feas_tol,
        max_iter=max_iter,
    )
    notes.extend(search_notes)
    if assignment is not None:
        return CompatibilityVerdict(REL_COEXISTENT, YES, assignment, tuple(notes))
    return CompatibilityVerdict(REL_COEXISTENT, UNDECIDED, None, tuple(notes))


def joint_from_mother_binary(
    m: DiscreteObservable, masks: Sequence[frozenset[int] | Sequence[int]]
) -> BinaryJointCertificate:
    """Joint of the binarizations over the given masks, by mask intersection.

    The outcome for a sign vector ``(s_1, ..., s_n)`` is the mother's effect
    on the intersection of the masks (taking complements where ``s_i = -1``).
    """
    index_masks = [normalize_mask(m, mask) for mask in masks]
    full = frozenset(range(m.n_outcomes))
    n = len(index_masks)
    if n == 0:
        raise ShapeError("at least one mask is required")
    outcomes = []
    sign_vectors = []
    for signs in itertools.product((1, -1), repeat=n):
        cell = full
        for sign, mask in zip(signs, index_masks):
            cell &= mask if sign == 1 else (full - mask)
        if n == 1:
            label = "+1" if signs[0] == 1 else "-1"
        else:
            label = "(" + ",".join("+1" if s == 1 else "-1" for s in signs) + ")"
        outcomes.append((label, subset_effect(m, cell)))
        sign_vectors.append(signs)
    joint = DiscreteObservable(m.dim, outcomes, m.tol)
    kept_signs = []
    for (label, effect), signs in zip(outcomes, sign_vectors):
        if label in joint.labels:
            kept_signs.append(signs)
    residuals = []
    for i, mask in enumerate(index_masks):
        plus = sum(
            (effect for signs, effect in zip(kept_signs, joint.effects) if signs[i] == 1),
            np.zeros((m.dim, m.dim), dtype=complex),
        )
        residuals.append(float(frob(plus - subset_effect(m, mask))))
    return BinaryJointCertificate(
        joint=joint,
        sign_vectors=tuple(kept_signs),
        masks=tuple(index_masks),
        marginal_residuals=tuple(residuals),
        provenance="mother-intersection",
    )


def _check_disjoint_masks(
    m: DiscreteObservable, index_masks: list[frozenset[int]], slack: float
):
    for (i, mi), (j, mj) in itertools.combinations(enumerate(index_masks), 2):
        overlap = frob(subset_effect(m, mi & mj))
        if overlap > slack:
            raise NotApplicableError(
                f"mother does not vanish on mask overlap {sorted(mi & mj)} "
                f"(||M(overlap)|| = {overlap:.3e})",
                residual=overlap,
            )
    covered = frozenset().union(*index_masks)
    rest = frozenset(range(m.n_outcomes)) - covered
    leftover = frob(subset_effect(m, rest))
    if leftover > slack:
        raise NotApplicableError(
            f"mother does not vanish outside the masks (||M(rest)|| = {leftover:.3e})",
            residual=leftover,
        )


def extreme_joint_with_mother(
    a: DiscreteObservable,
    m: DiscreteObservable,
    masks: Sequence[frozenset[int] | Sequence[int]],
    tol: Tolerance | None = None,
) -> ExtremeMotherJoint:
    """Joint observable of ``a`` with a mother realizing it on disjoint masks.

    Requires ``M(Z_i) = A_i`` per outcome; the construction needs the masks
    to be disjoint and co-null under the mother, which holds automatically
    when ``a`` is extreme.  The joint is ``N(i, z) = M({z} & Z_i)``, and each
    retained outcome also receives a dilation-space factor ``C`` with
    ``0 <= C <= P_i`` and ``J* C J = N(i, z)``.
    """
    _require_same_dim(a, m)
    tol = tol or a.tol
    slack = 10.0 * tol.eq_tol
    index_masks = [normalize_mask(m, mask) for mask in masks]
    if len(index_masks) != a.n_outcomes:
        raise ShapeError("one mask per outcome of a is required")
    for i, mask in enumerate(index_masks):
        residual = frob(subset_effect(m, mask) - a.effects[i])
        if residual > slack:
            raise NotApplicableError(
                f"M(mask) differs from effect {a.labels[i]!r} by {residual:.3e}",
                residual=residual,
            )
    _check_disjoint_masks(m, index_masks, slack)
    blocks = {
        (i, z): m.effects[z]
        for i, mask in enumerate(index_masks)
        for z in sorted(mask)
    }
    cert = joint_certificate_from_blocks(a, m, blocks, "extreme-mother", tol)
    dil = dilate_minimal(a)
    factor_tol = Tolerance(
        min(1e-3, max(tol.eig_tol, 100.0 * tol.eq_tol)),
        min(1e-3, max(tol.eq_tol, 100.0 * tol.eq_tol)),
    )
    factors = []
    worst = 0.0
    j = dil.isometry
    for (la, lz), effect in zip(cert.pairs, cert.joint.effects):
        i = a.labels.index(la)
        rows = dil.blocks[i] @ j
        factor = douglas_factor(rows, effect, factor_tol)
        factors.append(factor)
        worst = max(worst, frob(dagger(j) @ factor @ j - effect))
        if min_eigenvalue(dil.blocks[i] - factor, factor_tol) < -factor_tol.eig_tol:
            raise NotApplicableError("dilation factor escapes its block")
    return ExtremeMotherJoint(
        certificate=cert,
        dilation=dil,
        factors=tuple(factors),
        factor_residual=float(worst),
    )


def extreme_pair_joint(
    a: DiscreteObservable,
    b: DiscreteObservable,
    m: DiscreteObservable,
    masks_a: Sequence[frozenset[int] | Sequence[int]],
    masks_b: Sequence[frozenset[int] | Sequence[int]],
    tol: Tolerance | None = None,
) -> JointCertificate:
    """Joint of two observables realized inside one mother: ``N(i, j) = M(Z_i & W_j)``.

    Needs per-outcome masks for both; the first observable's masks must be
    disjoint and co-null (automatic when it is extreme).  Both marginal
    families are verified and a failure is reported as not applicable.
    """
    _require_same_dim(a, m)
    _require_same_dim(b, m)
    tol = tol or a.tol
    slack = 10.0 * tol.eq_tol
    idx_a = [normalize_mask(m, mask) for mask in masks_a]
    idx_b = [normalize_mask(m, mask) for mask in masks_b]
    if len(idx_a) != a.n_outcomes or len(idx_b) != b.n_outcomes:
        raise ShapeError("one mask per outcome of each observable is required")
    for obs, idx in ((a, idx_a), (b, idx_b)):
        for i, mask in enumerate(idx):
            residual = frob(subset_effect(m, mask) - obs.effects[i])
            if residual > slack:
                raise NotApplicableError(
                    f"M(mask) differs from effect {obs.labels[i]!r} by {residual:.3e}",
                    residual=residual,
                )
    _check_disjoint_masks(m, idx_a, slack)
    blocks = {
        (i, j): subset_effect(m, mask_i & mask_j)
        for i, mask_i in enumerate(idx_a)
        for j, mask_j in enumerate(idx_b)
    }
    cert = joint_certificate_from_blocks(a, b, blocks, "extreme-mother-pair", tol)
    worst = max(cert.marginal_residual_a, cert.marginal_residual_b)
    if worst > slack:
        raise NotApplicableError(
            f"marginals of the intersection joint deviate by {worst:.3e}",
            residual=worst,
        )
    return cert


def relabeling_finder(
    a: DiscreteObservable, m: DiscreteObservable
) -> tuple[int, ...] | None:
    """Find a relabeling ``f`` with ``relabel(m, f) = a``, or ``None``.

    Depth-first assignment of mother outcomes to target outcomes, pruning
    branches whose partial sums already exceed the target effect.
    """
    _require_same_dim(a, m)
    tol = a.tol
    slack = 10.0 * tol.eq_tol
    n_a, n_m = a.n_outcomes, m.n_outcomes
    partial = [np.zeros((a.dim, a.dim), dtype=complex) for _ in range(n_a)]
    assignment = [0] * n_m

    def fits(i: int) -> bool:
        return min_eigenvalue(a.effects[i] - partial[i], tol) >= -slack

    def walk(z: int) -> bool:
        if z == n_m:
            return all(frob(partial[i] - a.effects[i]) <= slack for i in range(n_a))
        for i in range(n_a):
            partial[i] = partial[i] + m.effects[z]
            assignment[z] = i
            if fits(i) and walk(z + 1):
                return True
            partial[i] = partial[i] - m.effects[z]
        return False

    if walk(0):
        rebuilt = relabel(m, assignment, labels=a.labels)
        if effects_close(rebuilt, a, slack):
            return tuple(assignment)
    return None


def post_processing_finder(
    a: DiscreteObservable,
    m: DiscreteObservable,
    feas_tol: float = DEFAULT_FEAS_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> tuple[StochasticMatrix | None, FeasibilityVerdict]:
    """Find a stochastic kernel with ``post_process(m, kernel) = a``.

    Linear feasibility over nonnegative kernel entries: the columns must
    rebuild each target effect and the rows must sum to one.  Returns the
    kernel (or ``None``) together with the raw solver verdict.
    """
    _require_same_dim(a, m)
    n_a, n_m = a.n_outcomes, m.n_outcomes
    blocks = [BlockSpec(1) for _ in range(n_m * n_a)]
    constraints = [
        AffineConstraint(
            [(z * n_a + x, m.effects[z]) for z in range(n_m)], a.effects[x]
        )
        for x in range(n_a)
    ] + [
        AffineConstraint([(z * n_a + x, 1.0) for x in range(n_a)], 1.0)
        for z in range(n_m)
    ]
    verdict = dykstra_solve(
        FeasibilityProblem(blocks, constraints), max_iter=max_iter, feas_tol=feas_tol
    )
    if verdict.status != FEASIBLE:
        return None, verdict
    kernel = np.array(
        [
            [verdict.point[z * n_a + x][0, 0].real for x in range(n_a)]
            for z in range(n_m)
        ]
    )
    return StochasticMatrix(kernel, _solver_tolerance(feas_tol)), verdict


def cone_membership(
    effect: np.ndarray,
    m: DiscreteObservable,
    tol: Tolerance = DEFAULT_TOL,
    feas_tol: float = DEFAULT_FEAS_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> tuple[bool, np.ndarray | None]:
    """Is the Hermitian matrix a nonnegative combination of the mother's effects?"""
    effect = hermitize(effect, tol)
    blocks = [BlockSpec(1) for _ in range(m.n_outcomes)]
    constraint = AffineConstraint(
        [(z, m.effects[z]) for z in range(m.n_outcomes)], effect
    )
    verdict = dykstra_solve(
        FeasibilityProblem(blocks, [constraint]), max_iter=max_iter, feas_tol=feas_tol
    )
    if verdict.status != FEASIBLE:
        return False, None
    coefficients = np.array([mat[0, 0].real for mat in verdict.point])
    return True, coefficients


def jm_threshold(
    a: DiscreteObservable,
    b: DiscreteObservable,
    p_a: Sequence[float] | None = None,
    p_b: Sequence[float] | None = None,
    width: float = 1e-3,
    feas_tol: float = DEFAULT_FEAS_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    probe_log: list | None = None,
) -> float:
    """Critical visibility for joint measurability under trivial-noise mixing.

    Bisects the visibility; undecided solver outcomes are treated as
    incompatible, so the estimate errs toward the smaller threshold.
    """
    import time

    _require_same_dim(a, b)
    if p_a is None:
        p_a = np.full(a.n_outcomes, 1.0 / a.n_outcomes)
    if p_b is None:
        p_b = np.full(b.n_outcomes, 1.0 / b.n_outcomes)

    def probe(eta: float) -> str:
        start = time.perf_counter()
        verdict = jm_check(
            mix_with_trivial(a, eta, p_a),
            mix_with_trivial(b, eta, p_b),
            feas_tol=feas_tol,
            max_iter=max_iter,
        )
        if probe_log is not None:
            probe_log.append((eta, verdict.status, time.perf_counter() - start))
        return verdict.status

    if probe(1.0) == YES:
        return 1.0
    lo, hi = 0.0, 1.0
    while hi - lo > width:
        mid = (lo + hi) / 2.0
        if probe(mid) == YES:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2.0
