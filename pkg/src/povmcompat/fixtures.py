"""Built-in reference observables and states used by tests, the CLI, and the
reproduction suite.

``unsharp_triple`` and ``unsharp_pair`` form the qubit pair whose
binarizations are pairwise jointly measurable although no single mother
observable carries both ranges; the ``sharp_*3`` trio shows two sharp
non-commuting observables one of which becomes compatible after
coarse-graining.
"""

from __future__ import annotations

import numpy as np

from .observables import DiscreteObservable
from .steering import BipartiteState


def _projector(vec) -> np.ndarray:
    v = np.asarray(vec, dtype=complex)
    return np.outer(v, v.conj())


def unsharp_triple() -> DiscreteObservable:
    """Three-outcome qubit observable: two unsharp basis needles plus the rest."""
    e1 = (4.0 / 7.0) * _projector([1.0, 0.0])
    e2 = (4.0 / 7.0) * _projector([0.0, 1.0])
    e3 = np.eye(2) - e1 - e2
    return DiscreteObservable(2, [("1", e1), ("2", e2), ("3", e3)])


def unsharp_pair() -> DiscreteObservable:
    """Two-outcome qubit observable: one unsharp antidiagonal needle and its rest."""
    psi = np.array([1.0, -1.0]) / np.sqrt(2.0)
    f1 = (4.0 / 7.0) * _projector(psi)
    return DiscreteObservable(2, [("1", f1), ("2", np.eye(2) - f1)])


def sharp_basis3() -> DiscreteObservable:
    """The standard basis measurement on a three-dimensional space."""
    return DiscreteObservable(
        3, [(str(k + 1), _projector(np.eye(3)[k])) for k in range(3)]
    )


def sharp_rotated3() -> DiscreteObservable:
    """Sharp observable in the basis mixing the first two directions."""
    plus = np.array([1.0, 1.0, 0.0]) / np.sqrt(2.0)
    minus = np.array([1.0, -1.0, 0.0]) / np.sqrt(2.0)
    third = np.eye(3)[2]
    return DiscreteObservable(
        3, [("+", _projector(plus)), ("-", _projector(minus)), ("3", _projector(third))]
    )


def coarse_basis3() -> DiscreteObservable:
    """Two-outcome coarse-graining of the basis measurement (first two merged)."""
    merged = _projector(np.eye(3)[0]) + _projector(np.eye(3)[1])
    return DiscreteObservable(3, [("12", merged), ("3", _projector(np.eye(3)[2]))])


def trine() -> DiscreteObservable:
    """Qubit trine: three rank-1 effects at 120-degree Bloch angles, weight 2/3."""
    outcomes = []
    for k in range(3):
        theta = 2.0 * np.pi * k / 3.0
        vec = np.array([np.cos(theta / 2.0), np.sin(theta / 2.0)])
        outcomes.append((str(k), (2.0 / 3.0) * _projector(vec)))
    return DiscreteObservable(2, outcomes)


def sharp_z() -> DiscreteObservable:
    """Qubit computational-basis measurement."""
    return DiscreteObservable(
        2, [("+", np.diag([1.0, 0.0])), ("-", np.diag([0.0, 1.0]))]
    )


def sharp_x() -> DiscreteObservable:
    """Qubit measurement along the Hadamard basis."""
    plus = np.array([1.0, 1.0]) / np.sqrt(2.0)
    minus = np.array([1.0, -1.0]) / np.sqrt(2.0)
    return DiscreteObservable(2, [("+", _projector(plus)), ("-", _projector(minus))])


def bell_phi_plus() -> BipartiteState:
    """The two-qubit maximally entangled state ``(|00> + |11>)/sqrt(2)``."""
    vec = np.zeros(4)
    vec[0] = vec[3] = 1.0 / np.sqrt(2.0)
    return BipartiteState(2, 2, _projector(vec))


def separable_zx() -> BipartiteState:
    """An even classical mixture of ``|00>`` and ``|++>`` (separable)."""
    zz = _projector([1.0, 0.0, 0.0, 0.0])
    plus = np.array([1.0, 1.0]) / np.sqrt(2.0)
    pp = _projector(np.kron(plus, plus))
    return BipartiteState(2, 2, 0.5 * zz + 0.5 * pp)


OBSERVABLES = {
    "unsharp_triple": unsharp_triple,
    "unsharp_pair": unsharp_pair,
    "sharp_basis3": sharp_basis3,
    "sharp_rotated3": sharp_rotated3,
    "coarse_basis3": coarse_basis3,
    "trine": trine,
    "sharp_z": sharp_z,
    "sharp_x": sharp_x,
}

STATES = {
    "bell_phi_plus": bell_phi_plus,
    "separable_zx": separable_zx,
}


def all_observables() -> dict[str, DiscreteObservable]:
    return {name: build() for name, build in OBSERVABLES.items()}


def all_states() -> dict[str, BipartiteState]:
    return {name: build() for name, build in STATES.items()}
