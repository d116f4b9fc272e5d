"""Seeded random generators for observables, states, and operator pairs."""

from __future__ import annotations

import numpy as np

from .linalg import DEFAULT_TOL, Tolerance, dagger, pinv, sqrt_psd
from .observables import DiscreteObservable
from .steering import BipartiteState


def random_complex(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    return rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))


def random_unitary(rng: np.random.Generator, dim: int) -> np.ndarray:
    q, r = np.linalg.qr(random_complex(rng, dim, dim))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_density(rng: np.random.Generator, dim: int) -> np.ndarray:
    g = random_complex(rng, dim, dim)
    rho = g @ dagger(g)
    return rho / np.trace(rho).real


def random_observable(
    rng: np.random.Generator,
    dim: int,
    n_outcomes: int,
    tol: Tolerance = DEFAULT_TOL,
) -> DiscreteObservable:
    """Random full-support POVM: Wishart pieces whitened by their total."""
    pieces = []
    for _ in range(n_outcomes):
        g = random_complex(rng, dim, dim)
        pieces.append(g @ dagger(g))
    total = sum(pieces)
    whiten = pinv(sqrt_psd(total, tol))
    effects = [whiten @ p @ whiten for p in pieces]
    return DiscreteObservable(
        dim, [(str(k), e) for k, e in enumerate(effects)], tol
    )


def random_pvm(rng: np.random.Generator, dim: int) -> DiscreteObservable:
    """Random rank-1 sharp observable from a Haar-ish unitary."""
    u = random_unitary(rng, dim)
    return DiscreteObservable(
        dim,
        [(str(k), np.outer(u[:, k], u[:, k].conj())) for k in range(dim)],
    )


def random_two_qubit_state(rng: np.random.Generator) -> BipartiteState:
    return BipartiteState(2, 2, random_density(rng, 4))
