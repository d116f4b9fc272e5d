"""Minimal dilations of discrete observables and the extremality test.

The dilation space is the direct sum of the effect supports: the isometry
stacks the square-root factors of the effects, and each outcome's projection
selects its block.  Minimality is then a rank count, and extremality reduces
to the kernel of the real-linear map sending block-Hermitian perturbations
``D`` to their compression ``J* D J``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .linalg import (
    DEFAULT_TOL,
    Tolerance,
    clip_psd_eigenvalues,
    dagger,
    eigh_sorted,
    frob,
    herm_unvec,
    herm_vec,
)
from .observables import DiscreteObservable

KERNEL_RANK_CUTOFF = 1e-8  # relative singular-value threshold for kernel directions


@dataclass(frozen=True)
class NaimarkDilation:
    """Isometry plus per-outcome projections with ``A_i = J* P_i J``."""

    dim: int
    dilation_dim: int
    isometry: np.ndarray
    blocks: tuple[np.ndarray, ...]
    block_slices: tuple[tuple[int, int], ...]
    outcome_labels: tuple[str, ...]

    def block_rows(self, i: int) -> np.ndarray:
        """The rows of the isometry belonging to outcome ``i`` (maps H into block i)."""
        lo, hi = self.block_slices[i]
        return self.isometry[lo:hi, :]


@dataclass(frozen=True)
class DilationDiagnostics:
    isometry_residual: float
    orthogonality_residual: float
    completeness_residual: float
    reconstruction_residual: float
    rank_sum: int
    minimal: bool

    @property
    def max_residual(self) -> float:
        return max(
            self.isometry_residual,
            self.orthogonality_residual,
            self.completeness_residual,
            self.reconstruction_residual,
        )


@dataclass(frozen=True)
class ExtremalityReport:
    """Outcome of the extremality test.

    ``kernel_basis`` holds block-diagonal Hermitian matrices on the dilation
    space, each commuting with every block projection and compressing to
    (numerically) zero; the observable is extreme iff there are none.
    """

    is_extreme: bool
    kernel_dim: int
    kernel_basis: tuple[np.ndarray, ...]
    dilation: NaimarkDilation
    singular_values: tuple[float, ...]


def _support_factors(
    obs: DiscreteObservable, tol: Tolerance
) -> list[np.ndarray]:
    """Per outcome, the factor R_i with ``A_i = R_i* R_i`` and rows spanning supp(A_i)."""
    factors = []
    for effect in obs.effects:
        eigs, vecs = eigh_sorted(effect, tol)
        eigs = clip_psd_eigenvalues(eigs, tol)
        keep = eigs > tol.eig_tol
        factors.append((np.sqrt(eigs[keep])[:, None] * dagger(vecs[:, keep])))
    return factors


def dilate_minimal(
    obs: DiscreteObservable, tol: Tolerance | None = None
) -> NaimarkDilation:
    """Minimal dilation: block space ``K = (+)_i supp(A_i)``, isometry ``(+)_i sqrt(A_i)``."""
    tol = tol or obs.tol
    factors = _support_factors(obs, tol)
    ranks = [f.shape[0] for f in factors]
    total = sum(ranks)
    isometry = np.vstack(factors)
    blocks = []
    slices = []
    offset = 0
    for r in ranks:
        proj = np.zeros((total, total), dtype=complex)
        proj[offset : offset + r, offset : offset + r] = np.eye(r)
        proj.setflags(write=False)
        blocks.append(proj)
        slices.append((offset, offset + r))
        offset += r
    isometry.setflags(write=False)
    return NaimarkDilation(
        dim=obs.dim,
        dilation_dim=total,
        isometry=isometry,
        blocks=tuple(blocks),
        block_slices=tuple(slices),
        outcome_labels=obs.labels,
    )


def verify_dilation(
    obs: DiscreteObservable,
    dil: NaimarkDilation,
    tol: Tolerance | None = None,
) -> DilationDiagnostics:
    """Residuals for isometry, block orthogonality, reconstruction, and minimality."""
    tol = tol or obs.tol
    if dil.isometry.shape != (dil.dilation_dim, obs.dim):
        raise ShapeError("isometry shape does not match the dilation dimensions")
    if len(dil.blocks) != obs.n_outcomes:
        raise ShapeError("one block projection per outcome is required")
    j = dil.isometry
    iso_res = frob(dagger(j) @ j - np.eye(obs.dim))
    ortho = 0.0
    for a, pa in enumerate(dil.blocks):
        for b, pb in enumerate(dil.blocks):
            target = pa if a == b else np.zeros_like(pa)
            ortho = max(ortho, frob(pa @ pb - target))
    completeness = frob(sum(dil.blocks) - np.eye(dil.dilation_dim))
    recon = max(
        frob(dagger(j) @ p @ j - effect)
        for p, effect in zip(dil.blocks, obs.effects)
    )
    ranks = [f.shape[0] for f in _support_factors(obs, tol)]
    return DilationDiagnostics(
        isometry_residual=float(iso_res),
        orthogonality_residual=float(ortho),
        completeness_residual=float(completeness),
        reconstruction_residual=float(recon),
        rank_sum=sum(ranks),
        minimal=(dil.dilation_dim == sum(ranks)),
    )


def compression_map_matrix(dil: NaimarkDilation) -> np.ndarray:
    """Real matrix of ``D = (D_i) -> sum_i R_i* D_i R_i`` in isometric coordinates.

    Columns run over a Hermitian basis of each block in turn; rows over the
    Hermitian coordinates of the compressed d x d result.
    """
    d = dil.dim
    columns = []
    for i in range(len(dil.blocks)):
        rows = dil.block_rows(i)
        r = rows.shape[0]
        basis = herm_unvec(np.eye(r * r), r)  # (r*r, r, r) Hermitian basis
        images = np.einsum("ka,nkl,lb->nab", rows.conj(), basis, rows)
        columns.append(herm_vec(images).T)  # (d*d, r*r)
    if not columns:
        return np.zeros((d * d, 0))
    return np.hstack(columns)


def is_extreme(
    obs: DiscreteObservable, tol: Tolerance | None = None
) -> ExtremalityReport:
    """Classify extremality via the kernel of the block-compression map.

    The commutant of the block projections in the minimal dilation is the
    space of block-diagonal operators; its Hermitian part is scanned for
    directions compressing to zero.  Singular values below
    ``KERNEL_RANK_CUTOFF`` times the largest count as kernel directions.
    """
    tol = tol or obs.tol
    dil = dilate_minimal(obs, tol)
    mat = compression_map_matrix(dil)
    _, svals, vt = np.linalg.svd(mat, full_matrices=True)
    smax = svals[0] if len(svals) else 0.0
    n_cols = mat.shape[1]
    kernel_vecs = [
        vt[k]
        for k in range(n_cols)
        if k >= len(svals) or svals[k] <= KERNEL_RANK_CUTOFF * smax
    ]
    basis = []
    for vec in kernel_vecs:
        full = np.zeros((dil.dilation_dim, dil.dilation_dim), dtype=complex)
        offset = 0
        for lo, hi in dil.block_slices:
            r = hi - lo
            full[lo:hi, lo:hi] = herm_unvec(vec[offset : offset + r * r], r)
            offset += r * r
        full.setflags(write=False)
        basis.append(full)
    return ExtremalityReport(
        is_extreme=(len(basis) == 0),
        kernel_dim=len(basis),
        kernel_basis=tuple(basis),
        dilation=dil,
        singular_values=tuple(float(s) for s in svals),
    )


def perturbed_pair(
    obs: DiscreteObservable,
    report: ExtremalityReport,
    which: int = 0,
    eps: float = 1e-3,
) -> tuple[DiscreteObservable, DiscreteObservable]:
    """Explicit witnesses ``A +- eps * (J* P_i D P_i J)_i`` for a kernel direction.

    Both perturbations are valid observables whose midpoint is ``obs``,
    certifying non-extremality.
    """
    kernel = report.kernel_basis[which]
    dil = report.dilation
    j = dil.isometry
    shifted = []
    for i, (label, effect) in enumerate(zip(obs.labels, obs.effects)):
        lo, hi = dil.block_slices[i]
        delta = dagger(j[lo:hi]) @ kernel[lo:hi, lo:hi] @ j[lo:hi]
        shifted.append((label, effect, delta))
    plus = DiscreteObservable(
        obs.dim, [(l, e + eps * d) for l, e, d in shifted], obs.tol
    )
    minus = DiscreteObservable(
        obs.dim, [(l, e - eps * d) for l, e, d in shifted], obs.tol
    )
    return plus, minus
