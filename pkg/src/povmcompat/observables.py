"""Finite-outcome observables (POVMs) and classical processing of them.

A :class:`DiscreteObservable` is an ordered list of labeled effects summing
to the identity.  Outcomes whose effect is numerically zero are dropped at
construction and recorded, which keeps rank-based constructions downstream
well posed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidObservableError, NotApplicableError, ShapeError
from .linalg import (
    DEFAULT_TOL,
    Tolerance,
    as_matrix,
    dagger,
    frob,
    hermiticity_defect,
    require_square,
)


@dataclass(frozen=True)
class ObservableDiagnostics:
    """Per-effect margins and global residuals for a candidate observable."""

    dim: int
    labels: tuple[str, ...]
    hermiticity_defects: tuple[float, ...]
    psd_margins: tuple[float, ...]
    upper_margins: tuple[float, ...]
    effect_norms: tuple[float, ...]
    normalization_residual: float
    zero_effects: tuple[str, ...]
    duplicate_labels: tuple[str, ...]
    passes: bool


def diagnose_effects(
    dim: int,
    labeled_effects: Sequence[tuple[str, np.ndarray]],
    tol: Tolerance = DEFAULT_TOL,
) -> ObservableDiagnostics:
    """Diagnose raw (label, matrix) pairs against the observable invariants.

    Never raises; the CLI ``validate`` command and the constructor both feed
    from this.  ``passes`` is strict: zero effects count as a failure even
    though the constructor silently drops them.
    """
    labels = []
    defects = []
    psd_margins = []
    upper_margins = []
    norms = []
    total = np.zeros((dim, dim), dtype=complex)
    for label, effect in labeled_effects:
        labels.append(str(label))
        effect = require_square(effect)
        if effect.shape[0] != dim:
            raise ShapeError(
                f"effect {label!r} has dimension {effect.shape[0]}, expected {dim}"
            )
        defects.append(hermiticity_defect(effect))
        herm = (effect + dagger(effect)) / 2.0
        eigs = np.linalg.eigvalsh(herm)
        psd_margins.append(float(eigs[0]))
        upper_margins.append(float(1.0 - eigs[-1]))
        norms.append(frob(effect))
        total = total + effect
    residual = frob(total - np.eye(dim))
    seen: set[str] = set()
    duplicates = tuple(l for l in labels if l in seen or seen.add(l))
    zero = tuple(l for l, n in zip(labels, norms) if n <= tol.eq_tol)
    passes = (
        len(labels) > 0
        and not duplicates
        and not zero
        and all(d <= tol.eq_tol for d in defects)
        and all(m >= -tol.eig_tol for m in psd_margins)
        and all(m >= -tol.eig_tol for m in upper_margins)
        and residual <= tol.eq_tol
    )
    return ObservableDiagnostics(
        dim=dim,
        labels=tuple(labels),
        hermiticity_defects=tuple(defects),
        psd_margins=tuple(psd_margins),
        upper_margins=tuple(upper_margins),
        effect_norms=tuple(norms),
        normalization_residual=float(residual),
        zero_effects=zero,
        duplicate_labels=duplicates,
        passes=passes,
    )


class DiscreteObservable:
    """An ordered, labeled POVM on a finite-dimensional space.

    Parameters
    ----------
    dim:
        Hilbert space dimension.
    outcomes:
        Iterable of ``(label, effect)`` pairs.  Effects must be Hermitian
        within ``tol.eq_tol`` with spectrum in ``[-eig_tol, 1 + eig_tol]``
        and sum to the identity within ``tol.eq_tol``.
    tol:
        The tolerance the instance was validated with; downstream checks
        default to it.
    """

    def __init__(
        self,
        dim: int,
        outcomes: Iterable[tuple[str, np.ndarray]],
        tol: Tolerance = DEFAULT_TOL,
    ):
        pairs = [(str(label), as_matrix(effect).copy()) for label, effect in outcomes]
        diag = diagnose_effects(dim, pairs, tol)
        problems = []
        if diag.duplicate_labels:
            problems.append(f"duplicate labels {diag.duplicate_labels}")
        if any(d > tol.eq_tol for d in diag.hermiticity_defects):
            problems.append("non-Hermitian effect")
        if any(m < -tol.eig_tol for m in diag.psd_margins):
            problems.append(f"effect below zero (margin {min(diag.psd_margins):.3e})")
        if any(m < -tol.eig_tol for m in diag.upper_margins):
            problems.append(f"effect above identity (margin {min(diag.upper_margins):.3e})")
        slack = tol.eq_tol * (1 + len(diag.zero_effects))
        if diag.normalization_residual > slack:
            problems.append(
                f"effects do not sum to identity (residual {diag.normalization_residual:.3e})"
            )
        kept = [
            (label, effect)
            for (label, effect), norm in zip(pairs, diag.effect_norms)
            if norm > tol.eq_tol
        ]
        if not kept:
            problems.append("no nonzero outcomes")
        if problems:
            raise InvalidObservableError("; ".join(problems), diagnostics=diag)
        for _, effect in kept:
            effect.setflags(write=False)
        self.dim = int(dim)
        self.tol = tol
        self.labels: tuple[str, ...] = tuple(label for label, _ in kept)
        self.effects: tuple[np.ndarray, ...] = tuple(effect for _, effect in kept)
        self.dropped_outcomes: tuple[str, ...] = diag.zero_effects
        self._index = {label: k for k, label in enumerate(self.labels)}

    @property
    def n_outcomes(self) -> int:
        return len(self.labels)

    @property
    def outcomes(self) -> tuple[tuple[str, np.ndarray], ...]:
        return tuple(zip(self.labels, self.effects))

    def effect(self, label: str) -> np.ndarray:
        return self.effects[self._index[label]]

    def __repr__(self) -> str:
        return (
            f"DiscreteObservable(dim={self.dim}, "
            f"outcomes={list(self.labels)!r})"
        )


def validate(obs: DiscreteObservable) -> ObservableDiagnostics:
    """Diagnostics of a constructed observable (re-derived from scratch)."""
    return diagnose_effects(obs.dim, obs.outcomes, obs.tol)


def effects_close(a: DiscreteObservable, b: DiscreteObservable, atol: float) -> bool:
    """True iff the two observables have the same effect list entrywise."""
    if a.dim != b.dim or a.n_outcomes != b.n_outcomes:
        return False
    return all(frob(x - y) <= atol for x, y in zip(a.effects, b.effects))


def is_pvm(obs: DiscreteObservable, tol: Tolerance | None = None) -> bool:
    """True iff every effect is idempotent within ``eq_tol``."""
    tol = tol or obs.tol
    return all(frob(e @ e - e) <= tol.eq_tol for e in obs.effects)


def normalize_mask(obs: DiscreteObservable, mask: Iterable[int]) -> frozenset[int]:
    indices = frozenset(int(i) for i in mask)
    if any(i < 0 or i >= obs.n_outcomes for i in indices):
        raise ShapeError(f"mask {sorted(indices)} out of range for {obs.n_outcomes} outcomes")
    return indices


def subset_effect(obs: DiscreteObservable, mask: Iterable[int]) -> np.ndarray:
    """Sum of the effects indexed by ``mask`` (empty mask gives the zero matrix)."""
    indices = normalize_mask(obs, mask)
    total = np.zeros((obs.dim, obs.dim), dtype=complex)
    for i in sorted(indices):
        total = total + obs.effects[i]
    return total


def binarize(obs: DiscreteObservable, mask: Iterable[int]) -> DiscreteObservable:
    """Two-outcome observable ``("+1" -> A(mask), "-1" -> I - A(mask))``.

    An empty or full mask collapses to the single-outcome observable after
    zero-effect dropping.
    """
    effect = subset_effect(obs, mask)
    rest = np.eye(obs.dim) - effect
    return DiscreteObservable(obs.dim, [("+1", effect), ("-1", rest)], obs.tol)


def commutes(
    a: DiscreteObservable, b: DiscreteObservable, tol: Tolerance | None = None
) -> bool:
    """True iff every effect of ``a`` commutes with every effect of ``b``."""
    if a.dim != b.dim:
        raise ShapeError(f"dimension mismatch: {a.dim} vs {b.dim}")
    tol = tol or a.tol
    return all(
        frob(x @ y - y @ x) <= tol.eq_tol for x in a.effects for y in b.effects
    )


def product_label(la: str, lb: str) -> str:
    return f"({la},{lb})"


@dataclass(frozen=True)
class JointCertificate:
    """A joint observable over product outcomes plus its marginal residuals.

    ``pairs`` aligns with the joint's retained outcomes; product outcomes
    whose effect was numerically zero are absent and count as zero when
    marginals are rebuilt.
    """

    joint: DiscreteObservable
    pairs: tuple[tuple[str, str], ...]
    a_labels: tuple[str, ...]
    b_labels: tuple[str, ...]
    marginal_residual_a: float
    marginal_residual_b: float
    provenance: str

    def marginal_a(self) -> dict[str, np.ndarray]:
        return self._marginal(0, self.a_labels)

    def marginal_b(self) -> dict[str, np.ndarray]:
        return self._marginal(1, self.b_labels)

    def _marginal(self, axis: int, labels: tuple[str, ...]) -> dict[str, np.ndarray]:
        dim = self.joint.dim
        sums = {label: np.zeros((dim, dim), dtype=complex) for label in labels}
        for pair, effect in zip(self.pairs, self.joint.effects):
            sums[pair[axis]] = sums[pair[axis]] + effect
        return sums

    def verify_against(
        self, a: DiscreteObservable, b: DiscreteObservable
    ) -> tuple[float, float]:
        """Recompute both marginal residuals from scratch."""
        marg_a = self.marginal_a()
        marg_b = self.marginal_b()
        res_a = max(frob(marg_a[l] - e) for l, e in a.outcomes)
        res_b = max(frob(marg_b[l] - e) for l, e in b.outcomes)
        return res_a, res_b


def joint_certificate_from_blocks(
    a: DiscreteObservable,
    b: DiscreteObservable,
    blocks: dict[tuple[int, int], np.ndarray],
    provenance: str,
    tol: Tolerance | None = None,
) -> JointCertificate:
    """Assemble a certificate from per-pair effect blocks (missing pairs are zero)."""
    tol = tol or a.tol
    labeled = []
    pairs = []
    for i, la in enumerate(a.labels):
        for j, lb in enumerate(b.labels):
            block = blocks.get((i, j))
            if block is None:
                continue
            labeled.append((product_label(la, lb), block))
            pairs.append((la, lb))
    joint = DiscreteObservable(a.dim, labeled, tol)
    kept = {label: pair for (label, _), pair in zip(labeled, pairs)}
    kept_pairs = tuple(kept[label] for label in joint.labels)
    cert = JointCertificate(
        joint=joint,
        pairs=kept_pairs,
        a_labels=a.labels,
        b_labels=b.labels,
        marginal_residual_a=0.0,
        marginal_residual_b=0.0,
        provenance=provenance,
    )
    res_a, res_b = cert.verify_against(a, b)
    return JointCertificate(
        joint=joint,
        pairs=kept_pairs,
        a_labels=a.labels,
        b_labels=b.labels,
        marginal_residual_a=res_a,
        marginal_residual_b=res_b,
        provenance=provenance,
    )


def product_joint(
    a: DiscreteObservable, b: DiscreteObservable, tol: Tolerance | None = None
) -> JointCertificate:
    """Joint observable ``G_ij = A_i B_j`` for commuting observables."""
    tol = tol or a.tol
    if not commutes(a, b, tol):
        raise NotApplicableError("product_joint requires commuting observables")
    blocks = {}
    for i, x in enumerate(a.effects):
        for j, y in enumerate(b.effects):
            g = x @ y
            blocks[(i, j)] = (g + dagger(g)) / 2.0
    return joint_certificate_from_blocks(a, b, blocks, "product", tol)


class StochasticMatrix:
    """Row-stochastic processing kernel: rows index source outcomes."""

    def __init__(self, matrix, tol: Tolerance = DEFAULT_TOL):
        mat = np.asarray(matrix, dtype=float)
        if mat.ndim != 2:
            raise ShapeError("kernel must be a 2-D array")
        if np.any(mat < -tol.eq_tol):
            raise ShapeError(f"kernel has negative entries (min {mat.min():.3e})")
        row_sums = mat.sum(axis=1)
        worst = float(np.max(np.abs(row_sums - 1.0)))
        if worst > tol.eq_tol:
            raise ShapeError(f"kernel rows must sum to 1 (worst residual {worst:.3e})")
        mat = mat.copy()
        mat.setflags(write=False)
        self.matrix = mat

    @property
    def n_source(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_target(self) -> int:
        return self.matrix.shape[1]

    @classmethod
    def deterministic(cls, relabeling: Sequence[int], n_target: int) -> "StochasticMatrix":
        """0/1 kernel of a relabeling map (source index -> target index)."""
        mat = np.zeros((len(relabeling), n_target))
        for z, x in enumerate(relabeling):
            mat[z, int(x)] = 1.0
        return cls(mat)

    def compose(self, other: "StochasticMatrix") -> "StochasticMatrix":
        """Kernel composition: first this kernel, then ``other``."""
        return StochasticMatrix(self.matrix @ other.matrix)


def post_process(
    m: DiscreteObservable,
    kernel: StochasticMatrix | np.ndarray,
    labels: Sequence[str] | None = None,
) -> DiscreteObservable:
    """Smear ``m`` through a row-stochastic kernel: ``A_x = sum_z k[z, x] M_z``."""
    if not isinstance(kernel, StochasticMatrix):
        kernel = StochasticMatrix(kernel, m.tol)
    if kernel.n_source != m.n_outcomes:
        raise ShapeError(
            f"kernel has {kernel.n_source} rows for {m.n_outcomes} outcomes"
        )
    if labels is None:
        labels = [str(x) for x in range(kernel.n_target)]
    elif len(labels) != kernel.n_target:
        raise ShapeError("label count must match kernel columns")
    stacked = np.stack(m.effects)
    effects = np.einsum("zx,zij->xij", kernel.matrix, stacked)
    return DiscreteObservable(m.dim, list(zip(labels, effects)), m.tol)


def relabel(
    m: DiscreteObservable,
    relabeling: Sequence[int],
    labels: Sequence[str] | None = None,
) -> DiscreteObservable:
    """Deterministic coarse-graining ``A_x = M(f^{-1}(x))``.

    Target outcomes with empty preimage are dropped.
    """
    if len(relabeling) != m.n_outcomes:
        raise ShapeError("relabeling must assign every source outcome")
    n_target = max(int(x) for x in relabeling) + 1
    if labels is not None and len(labels) < n_target:
        raise ShapeError("not enough labels for the relabeling targets")
    sums: dict[int, np.ndarray] = {}
    for z, x in enumerate(relabeling):
        x = int(x)
        sums[x] = sums.get(x, np.zeros((m.dim, m.dim), dtype=complex)) + m.effects[z]
    outcomes = []
    for x in sorted(sums):
        label = labels[x] if labels is not None else str(x)
        outcomes.append((label, sums[x]))
    return DiscreteObservable(m.dim, outcomes, m.tol)


def convex_mixture(
    a: DiscreteObservable, b: DiscreteObservable, t: float
) -> DiscreteObservable:
    """Outcome-wise mixture ``t*a + (1-t)*b``, matching outcomes by label.

    A label carried by only one of the two contributes a zero effect on the
    other side (outcomes dropped as numerically zero stay mixable this way).
    """
    if a.dim != b.dim:
        raise ShapeError(f"dimension mismatch: {a.dim} vs {b.dim}")
    if not (0.0 <= t <= 1.0):
        raise ValueError(f"mixing weight must be in [0, 1], got {t}")
    zero = np.zeros((a.dim, a.dim), dtype=complex)
    labels = list(a.labels) + [l for l in b.labels if l not in a.labels]
    outcomes = [
        (
            label,
            t * (a.effect(label) if label in a.labels else zero)
            + (1.0 - t) * (b.effect(label) if label in b.labels else zero),
        )
        for label in labels
    ]
    return DiscreteObservable(a.dim, outcomes, a.tol)


def mix_with_trivial(
    a: DiscreteObservable, eta: float, p: Sequence[float]
) -> DiscreteObservable:
    """Noise model: ``eta * A_i + (1 - eta) * p_i * I``."""
    if not (0.0 <= eta <= 1.0):
        raise ValueError(f"visibility must be in [0, 1], got {eta}")
    p = np.asarray(p, dtype=float)
    if p.shape != (a.n_outcomes,):
        raise ShapeError("probability vector length must match the outcome count")
    if np.any(p < -a.tol.eq_tol) or abs(p.sum() - 1.0) > a.tol.eq_tol:
        raise ValueError("p must be a probability vector")
    eye = np.eye(a.dim)
    outcomes = [
        (label, eta * effect + (1.0 - eta) * p[i] * eye)
        for i, (label, effect) in enumerate(a.outcomes)
    ]
    return DiscreteObservable(a.dim, outcomes, a.tol)


def trivial_observable(
    dim: int, p: Sequence[float], labels: Sequence[str] | None = None
) -> DiscreteObservable:
    """The observable ``(p_i * I)``; carries no information about the state."""
    p = np.asarray(p, dtype=float)
    if labels is None:
        labels = [str(i) for i in range(len(p))]
    eye = np.eye(int(dim))
    return DiscreteObservable(dim, [(l, w * eye) for l, w in zip(labels, p)])
