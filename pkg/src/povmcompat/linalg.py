"""Dense complex matrix primitives with toleranced positivity and ordering.

Everything downstream (observables, dilations, the feasibility engine)
builds on these few operations.  All matrices are plain ``numpy`` arrays of
``complex128``; functions are pure and never mutate their arguments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import HermiticityError, OrderError, PositivityError, ShapeError

PINV_CUTOFF = 1e-10  # relative singular-value cutoff for pseudoinverses


@dataclass(frozen=True)
class Tolerance:
    """Numerical slack: ``eig_tol`` for eigenvalue bounds, ``eq_tol`` for equality.

    Both are absolute and must lie in ``(0, 1e-3]``; matrices handled here are
    normalized so that operator norms stay at desk scale (<= dimension).
    """

    eig_tol: float = 1e-9
    eq_tol: float = 1e-9

    def __post_init__(self):
        for name in ("eig_tol", "eq_tol"):
            value = getattr(self, name)
            if not (0.0 < value <= 1e-3):
                raise ValueError(f"{name} must be in (0, 1e-3], got {value}")


DEFAULT_TOL = Tolerance()


def as_matrix(data) -> np.ndarray:
    """Coerce to a 2-D complex array, rejecting NaN/Inf entries."""
    mat = np.asarray(data, dtype=complex)
    if mat.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got ndim={mat.ndim}")
    if not np.all(np.isfinite(mat.real)) or not np.all(np.isfinite(mat.imag)):
        raise ShapeError("matrix entries must be finite")
    return mat


def require_square(mat: np.ndarray) -> np.ndarray:
    mat = as_matrix(mat)
    if mat.shape[0] != mat.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {mat.shape}")
    return mat


def frob(mat: np.ndarray) -> float:
    """Frobenius norm."""
    return float(np.linalg.norm(mat))


def dagger(mat: np.ndarray) -> np.ndarray:
    return mat.conj().T


def hermiticity_defect(mat: np.ndarray) -> float:
    return frob(mat - dagger(mat))


def hermitize(mat: np.ndarray, tol: Tolerance = DEFAULT_TOL) -> np.ndarray:
    """Return ``(X + X*)/2`` if X is Hermitian within ``eq_tol``, else raise."""
    mat = require_square(mat)
    if hermiticity_defect(mat) > tol.eq_tol:
        raise HermiticityError(
            f"matrix is not Hermitian (defect {hermiticity_defect(mat):.3e})"
        )
    return (mat + dagger(mat)) / 2.0


def eigh_sorted(mat: np.ndarray, tol: Tolerance = DEFAULT_TOL):
    """Hermitian eigendecomposition (ascending) after hermitizing the input."""
    return np.linalg.eigh(hermitize(mat, tol))


def max_eigenvalue(mat: np.ndarray, tol: Tolerance = DEFAULT_TOL) -> float:
    """Largest eigenvalue of a Hermitian matrix."""
    return float(eigh_sorted(mat, tol)[0][-1])


def min_eigenvalue(mat: np.ndarray, tol: Tolerance = DEFAULT_TOL) -> float:
    """Smallest eigenvalue of a Hermitian matrix."""
    return float(eigh_sorted(mat, tol)[0][0])


def check_effect(mat: np.ndarray, tol: Tolerance = DEFAULT_TOL) -> bool:
    """True iff the matrix is Hermitian within ``eq_tol`` with spectrum in [0, 1].

    Eigenvalues may spill out of [0, 1] by at most ``eig_tol``.
    """
    mat = require_square(mat)
    if hermiticity_defect(mat) > tol.eq_tol:
        return False
    eigs = np.linalg.eigh((mat + dagger(mat)) / 2.0)[0]
    return bool(eigs[0] >= -tol.eig_tol and eigs[-1] <= 1.0 + tol.eig_tol)


def loewner_leq(a: np.ndarray, b: np.ndarray, tol: Tolerance = DEFAULT_TOL) -> bool:
    """Loewner order check: ``a <= b`` iff ``b - a`` has no eigenvalue below ``-eig_tol``."""
    a = require_square(a)
    b = require_square(b)
    if a.shape != b.shape:
        raise ShapeError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return min_eigenvalue(b - a, tol) >= -tol.eig_tol


def clip_psd_eigenvalues(eigs: np.ndarray, tol: Tolerance) -> np.ndarray:
    """Clip eigenvalues in ``[-eig_tol, 0)`` to 0; more negative ones are errors."""
    if eigs[0] < -tol.eig_tol:
        raise PositivityError(f"matrix is not PSD (min eigenvalue {eigs[0]:.3e})")
    return np.clip(eigs, 0.0, None)


def sqrt_psd(mat: np.ndarray, tol: Tolerance = DEFAULT_TOL) -> np.ndarray:
    """PSD square root; eigenvalues within ``eig_tol`` below zero are clipped."""
    eigs, vecs = eigh_sorted(mat, tol)
    eigs = clip_psd_eigenvalues(eigs, tol)
    return (vecs * np.sqrt(eigs)) @ dagger(vecs)


def pinv(mat: np.ndarray, cutoff: float = PINV_CUTOFF) -> np.ndarray:
    """Moore-Penrose pseudoinverse, dropping singular values below ``cutoff * smax``."""
    return np.linalg.pinv(as_matrix(mat), rcond=cutoff)


def support_projector(mat: np.ndarray, tol: Tolerance = DEFAULT_TOL) -> np.ndarray:
    """Orthogonal projector onto the range of a PSD matrix."""
    eigs, vecs = eigh_sorted(mat, tol)
    clip_psd_eigenvalues(eigs, tol)
    keep = vecs[:, eigs > tol.eig_tol]
    return keep @ dagger(keep)


def douglas_factor(
    a: np.ndarray, b: np.ndarray, tol: Tolerance = DEFAULT_TOL
) -> np.ndarray:
    """Factor ``b = a* C a`` with ``0 <= C <= I`` and C supported on ran(a).

    ``a`` maps the domain space into a (possibly larger) codomain; ``b`` must
    satisfy ``0 <= b <= a* a`` within tolerance.  The factor is
    ``C = (a+)* b (a+)``, which vanishes on the orthogonal complement of
    ran(a) by construction.
    """
    a = as_matrix(a)
    b = require_square(b)
    if b.shape[0] != a.shape[1]:
        raise ShapeError(f"b acts on the domain of a: {b.shape} vs {a.shape}")
    b = hermitize(b, tol)
    gram = dagger(a) @ a
    if min_eigenvalue(b, tol) < -tol.eig_tol:
        raise OrderError("douglas_factor requires 0 <= b")
    if min_eigenvalue(gram - b, tol) < -tol.eig_tol:
        raise OrderError("douglas_factor requires b <= a* a")
    a_pinv = pinv(a)
    factor = dagger(a_pinv) @ b @ a_pinv
    factor = (factor + dagger(factor)) / 2.0
    eigs, vecs = np.linalg.eigh(factor)
    if eigs[0] < -tol.eig_tol or eigs[-1] > 1.0 + tol.eig_tol:
        raise OrderError(
            f"factor spectrum [{eigs[0]:.3e}, {eigs[-1]:.3e}] escapes [0, 1]"
        )
    eigs = np.clip(eigs, 0.0, 1.0)
    return (vecs * eigs) @ dagger(vecs)


def tensor(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product with row-major pair indexing ``(i_a i_b, j_a j_b)``."""
    return np.kron(as_matrix(a), as_matrix(b))


def partial_trace_first(
    mat: np.ndarray, dim_a: int, dim_b: int
) -> np.ndarray:
    """Trace out the first tensor factor of an operator on ``H_a (x) H_b``."""
    mat = require_square(mat)
    if mat.shape[0] != dim_a * dim_b:
        raise ShapeError(
            f"matrix of dimension {mat.shape[0]} does not factor as {dim_a}x{dim_b}"
        )
    return np.einsum("aiaj->ij", mat.reshape(dim_a, dim_b, dim_a, dim_b))


def herm_vec(mats: np.ndarray) -> np.ndarray:
    """Isometric real parametrization of Hermitian matrices.

    Maps shape ``(..., d, d)`` to ``(..., d*d)`` so that the Euclidean inner
    product of images equals the Frobenius inner product of the originals:
    diagonal entries, then sqrt(2) times the real and imaginary parts of the
    strict upper triangle.
    """
    mats = np.asarray(mats, dtype=complex)
    d = mats.shape[-1]
    iu, ju = np.triu_indices(d, k=1)
    diag = mats[..., np.arange(d), np.arange(d)].real
    upper = mats[..., iu, ju]
    return np.concatenate(
        [diag, np.sqrt(2.0) * upper.real, np.sqrt(2.0) * upper.imag], axis=-1
    )


def herm_unvec(vecs: np.ndarray, d: int) -> np.ndarray:
    """Inverse of :func:`herm_vec`: shape ``(..., d*d)`` back to ``(..., d, d)``."""
    vecs = np.asarray(vecs, dtype=float)
    iu, ju = np.triu_indices(d, k=1)
    n_off = len(iu)
    diag = vecs[..., :d]
    re = vecs[..., d : d + n_off] / np.sqrt(2.0)
    im = vecs[..., d + n_off :] / np.sqrt(2.0)
    mats = np.zeros(vecs.shape[:-1] + (d, d), dtype=complex)
    mats[..., np.arange(d), np.arange(d)] = diag
    mats[..., iu, ju] = re + 1j * im
    mats[..., ju, iu] = re - 1j * im
    return mats
