"""Assemblages and local-hidden-state feasibility.

Alice's measurements on a shared bipartite state leave Bob with conditional
unnormalized states; the assemblage is unsteerable iff some ensemble indexed
by deterministic response strategies reproduces every conditional state.
Restricting to deterministic strategies is the standard convexity reduction
and turns the question into a finite feasibility problem.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import CapExceededError, PositivityError, ShapeError
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
    frob,
    hermiticity_defect,
    hermitize,
    min_eigenvalue,
    partial_trace_first,
    require_square,
    tensor,
)
from .observables import DiscreteObservable

STEERABLE = "STEERABLE"
UNSTEERABLE = "UNSTEERABLE"
UNDECIDED = "UNDECIDED"

STRATEGY_CAP = 4096


@dataclass(frozen=True)
class BipartiteState:
    """A density matrix on a two-party tensor product."""

    dim_a: int
    dim_b: int
    rho: np.ndarray

    def __init__(self, dim_a: int, dim_b: int, rho, tol: Tolerance = DEFAULT_TOL):
        rho = require_square(rho)
        if rho.shape[0] != dim_a * dim_b:
            raise ShapeError(
                f"state of dimension {rho.shape[0]} does not match {dim_a}x{dim_b}"
            )
        if hermiticity_defect(rho) > tol.eq_tol:
            raise PositivityError("state must be Hermitian")
        rho = hermitize(rho, tol)
        if min_eigenvalue(rho, tol) < -tol.eig_tol:
            raise PositivityError("state must be positive semidefinite")
        if abs(np.trace(rho).real - 1.0) > tol.eq_tol:
            raise PositivityError(f"state trace is {np.trace(rho).real}, expected 1")
        rho = rho.copy()
        rho.setflags(write=False)
        object.__setattr__(self, "dim_a", int(dim_a))
        object.__setattr__(self, "dim_b", int(dim_b))
        object.__setattr__(self, "rho", rho)


@dataclass(frozen=True)
class Assemblage:
    """Conditional unnormalized states, indexed by setting and outcome label."""

    dim_b: int
    settings: tuple[tuple[tuple[str, np.ndarray], ...], ...]

    @property
    def outcome_counts(self) -> tuple[int, ...]:
        return tuple(len(setting) for setting in self.settings)

    def reduced_state(self) -> np.ndarray:
        return sum(sigma for _, sigma in self.settings[0])

    def no_signaling_residual(self) -> float:
        reduced = self.reduced_state()
        return max(
            frob(sum(sigma for _, sigma in setting) - reduced)
            for setting in self.settings
        )


@dataclass(frozen=True)
class LhsModel:
    """An ensemble indexed by deterministic strategies (one outcome per setting)."""

    strategies: tuple[tuple[int, ...], ...]
    states: tuple[np.ndarray, ...]

    def reconstruction_residual(self, assemblage: Assemblage) -> float:
        """Worst deviation between the model's predictions and the assemblage."""
        dim = assemblage.dim_b
        worst = 0.0
        for k, setting in enumerate(assemblage.settings):
            for x, (_, sigma) in enumerate(setting):
                rebuilt = sum(
                    (
                        state
                        for strategy, state in zip(self.strategies, self.states)
                        if strategy[k] == x
                    ),
                    np.zeros((dim, dim), dtype=complex),
                )
                worst = max(worst, frob(rebuilt - sigma))
        return worst

    def min_state_eigenvalue(self) -> float:
        return min(min_eigenvalue(state, Tolerance(1e-3, 1e-3)) for state in self.states)


@dataclass(frozen=True)
class SteeringVerdict:
    status: str
    feasibility: FeasibilityVerdict
    model: LhsModel | None
    notes: tuple[str, ...] = ()


def assemblage_from(
    state: BipartiteState, measurements: Sequence[DiscreteObservable]
) -> Assemblage:
    """Bob's conditional states ``tr_A[(A_k(x) (x) I) rho]`` for Alice's measurements."""
    if not measurements:
        raise ShapeError("at least one measurement is required")
    eye_b = np.eye(state.dim_b)
    settings = []
    for obs in measurements:
        if obs.dim != state.dim_a:
            raise ShapeError(
                f"measurement dimension {obs.dim} does not match dim_a={state.dim_a}"
            )
        setting = []
        for label, effect in obs.outcomes:
            sigma = partial_trace_first(
                tensor(effect, eye_b) @ state.rho, state.dim_a, state.dim_b
            )
            setting.append((label, hermitize(sigma, Tolerance(1e-3, 1e-3))))
        settings.append(tuple(setting))
    return Assemblage(dim_b=state.dim_b, settings=tuple(settings))


def deterministic_strategies(outcome_counts: Sequence[int]) -> list[tuple[int, ...]]:
    """All maps from settings to outcome indices, in lexicographic order."""
    total = int(np.prod([int(n) for n in outcome_counts]))
    if total > STRATEGY_CAP:
        raise CapExceededError(
            f"{total} deterministic strategies exceed the cap of {STRATEGY_CAP}"
        )
    return list(itertools.product(*[range(int(n)) for n in outcome_counts]))


def lhs_problem(assemblage: Assemblage) -> tuple[FeasibilityProblem, list[tuple[int, ...]]]:
    """Feasibility encoding: one PSD block per strategy, assemblage equalities."""
    strategies = deterministic_strategies(assemblage.outcome_counts)
    dim = assemblage.dim_b
    blocks = [BlockSpec(dim) for _ in strategies]
    constraints = []
    for k, setting in enumerate(assemblage.settings):
        for x, (_, sigma) in enumerate(setting):
            terms = [
                (index, 1.0)
                for index, strategy in enumerate(strategies)
                if strategy[k] == x
            ]
            constraints.append(AffineConstraint(terms, sigma))
    return FeasibilityProblem(blocks, constraints), strategies


def lhs_check(
    assemblage: Assemblage,
    feas_tol: float = DEFAULT_FEAS_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> tuple[FeasibilityVerdict, LhsModel | None]:
    """Search for a local-hidden-state model of the assemblage."""
    problem, strategies = lhs_problem(assemblage)
    verdict = dykstra_solve(problem, max_iter=max_iter, feas_tol=feas_tol)
    if verdict.status != FEASIBLE:
        return verdict, None
    model = LhsModel(strategies=tuple(strategies), states=verdict.point)
    return verdict, model


def steerable(
    state: BipartiteState,
    measurements: Sequence[DiscreteObservable],
    feas_tol: float = DEFAULT_FEAS_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> SteeringVerdict:
    """Can Alice steer Bob with these measurements on this state?

    Mirrors the feasibility verdict: a local model means UNSTEERABLE, a
    stalled positive gap means STEERABLE, anything else stays UNDECIDED.
    """
    assemblage = assemblage_from(state, measurements)
    verdict, model = lhs_check(assemblage, feas_tol=feas_tol, max_iter=max_iter)
    if verdict.status == FEASIBLE:
        status = UNSTEERABLE
        notes = (f"local model over {len(model.strategies)} strategies",)
    elif verdict.status == NUMERICALLY_INFEASIBLE:
        status = STEERABLE
        notes = (f"no local model: separation gap {verdict.separation_gap:.3e}",)
    else:
        status = UNDECIDED
        notes = (f"solver undecided after {verdict.iterations} iterations",)
    return SteeringVerdict(status=status, feasibility=verdict, model=model, notes=notes)


def lhs_from_joint(
    state: BipartiteState,
    joint_effects: dict[tuple[int, ...], np.ndarray],
) -> LhsModel:
    """Local model induced by a joint observable for Alice's measurements.

    Each joint outcome (a tuple of per-setting outcomes) contributes the
    conditional state of its joint effect; responding with the recorded
    outcome per setting reproduces the assemblage whenever the joint's
    marginals match the measurements.
    """
    eye_b = np.eye(state.dim_b)
    strategies = []
    states = []
    for strategy in sorted(joint_effects):
        effect = joint_effects[strategy]
        sigma = partial_trace_first(
            tensor(effect, eye_b) @ state.rho, state.dim_a, state.dim_b
        )
        strategies.append(tuple(int(x) for x in strategy))
        states.append(hermitize(sigma, Tolerance(1e-3, 1e-3)))
    return LhsModel(strategies=tuple(strategies), states=tuple(states))
