"""Dense complex matrix kernel.

Matrices are plain ``numpy.ndarray`` objects of dtype ``complex128``.  Every
numerical threshold used anywhere in the package lives in :class:`Tolerances`
so that it can be tightened or scaled from one place.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from typing import Sequence

import numpy as np


class NotPositiveSemidefinite(ValueError):
    """An operator that should be PSD has an eigenvalue below the clamp threshold."""


class NotHermitian(ValueError):
    pass


class EigenDecompositionError(RuntimeError):
    pass


@dataclass(frozen=True)
class Tolerances:
    """Tolerance policy shared by every module.

    ``eps_eq``, ``eps_rank`` and ``eps_psd`` follow the usual meanings (equality,
    singular-value cutoff factor, eigenvalue clamp).  ``eps_factor`` bounds the
    tensor-factorization residuals and ``eps_gap`` is the spectral gap used to
    split eigenvalue clusters.
    """

    eps_eq: float = 1e-9
    eps_rank: float = 1e-11
    eps_psd: float = 1e-9
    eps_herm: float = 1e-9
    eps_factor: float = 1e-8
    eps_gap: float = 1e-6

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not (0.0 < value < 1e-3):
                raise ValueError(f"tolerance {f.name}={value!r} must lie in (0, 1e-3)")

    def scaled(self, factor: float) -> "Tolerances":
        """Multiply every threshold by ``factor``."""
        if factor <= 0:
            raise ValueError("tolerance scale must be positive")
        return replace(self, **{f.name: getattr(self, f.name) * factor for f in fields(self)})


DEFAULT_TOL = Tolerances()


def as_matrix(M) -> np.ndarray:
    """Coerce to a finite complex128 2-d array (a copy)."""
    arr = np.array(M, dtype=np.complex128)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix has non-finite entries")
    return arr


def dagger(M: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(M, -1, -2))


def max_norm(M: np.ndarray) -> float:
    """Largest absolute entry."""
    M = np.asarray(M)
    return float(np.max(np.abs(M))) if M.size else 0.0


def hs_norm(M: np.ndarray) -> float:
    return float(np.linalg.norm(M))


def hermitize(M: np.ndarray) -> np.ndarray:
    """Return ``(M + M^dagger)/2``, which is bitwise Hermitian."""
    M = np.asarray(M, dtype=np.complex128)
    return (M + dagger(M)) / 2


def hermitian(M, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Check that ``M`` is Hermitian to ``eps_herm`` and return its symmetrized form."""
    arr = as_matrix(M)
    if arr.shape[0] != arr.shape[1]:
        raise NotHermitian(f"matrix of shape {arr.shape} is not square")
    err = max_norm(arr - dagger(arr))
    if err > tol.eps_herm:
        raise NotHermitian(f"Hermiticity residual {err:.3e} exceeds {tol.eps_herm:.1e}")
    return hermitize(arr)


def hermitian_eig(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and unitary eigenvector matrix of a Hermitian matrix."""
    herm = hermitize(M)
    try:
        return np.linalg.eigh(herm)
    except np.linalg.LinAlgError as exc:
        raise EigenDecompositionError(
            f"Hermitian eigensolver did not converge on a {herm.shape[0]}x{herm.shape[0]} matrix"
        ) from exc


def min_eigenvalue(M: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(hermitize(M))[0])


def is_psd(M: np.ndarray, tol: Tolerances = DEFAULT_TOL) -> bool:
    scale = max(1.0, float(np.linalg.norm(M, 2)))
    return min_eigenvalue(M) >= -tol.eps_psd * scale


def psd_sqrt(M: np.ndarray, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Principal square root of a positive semidefinite matrix.

    Eigenvalues in ``[-eps_psd*||M||, 0)`` are clamped to zero; anything more
    negative raises :class:`NotPositiveSemidefinite`.
    """
    w, V = hermitian_eig(M)
    norm = max(abs(w[0]), abs(w[-1])) if w.size else 0.0
    if w.size and w[0] < -tol.eps_psd * norm:
        raise NotPositiveSemidefinite(
            f"eigenvalue {w[0]:.3e} below -{tol.eps_psd:.1e}*||M|| (||M||={norm:.3e})"
        )
    root = np.sqrt(np.clip(w, 0.0, None))
    return hermitize((V * root) @ dagger(V))


def nullspace_basis(L: np.ndarray, tol: Tolerances = DEFAULT_TOL,
                    atol: float | None = None) -> np.ndarray:
    """Orthonormal basis (as columns) of the null space of ``L``.

    A singular direction counts as null when its singular value is at most
    ``eps_rank * sigma_max * max(rows, cols)``, or at most ``atol`` when given.
    The returned array has shape ``(cols, k)``; ``k`` may be zero.
    """
    L = np.asarray(L, dtype=np.complex128)
    rows, cols = L.shape
    if rows == 0 or cols == 0:
        return np.eye(cols, dtype=np.complex128)
    # Vh must be square; U is never needed
    if rows >= cols:
        s, Vh = np.linalg.svd(L, full_matrices=False)[1:]
    else:
        s, Vh = np.linalg.svd(L, full_matrices=True)[1:]
    if atol is None:
        smax = s[0] if s.size else 0.0
        atol = tol.eps_rank * smax * max(rows, cols)
    # singular values beyond min(rows, cols) are structurally zero
    padded = np.zeros(cols)
    padded[: s.size] = s
    null = padded <= atol
    return dagger(Vh[null])


def kron(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    return np.kron(left, right)


def partial_trace(M: np.ndarray, dims: tuple[int, int], side: str = "second") -> np.ndarray:
    """Trace out one factor of a ``d1*d2`` square matrix.

    ``side="second"`` returns ``tr_2 M`` (a ``d1 x d1`` matrix) and
    ``side="first"`` returns ``tr_1 M``.
    """
    d1, d2 = dims
    M = np.asarray(M)
    if M.shape != (d1 * d2, d1 * d2):
        raise ValueError(f"shape {M.shape} incompatible with dims {dims}")
    op = M.reshape(d1, d2, d1, d2)
    if side == "second":
        return np.einsum("ijkj->ik", op)
    if side == "first":
        return np.einsum("ijil->jl", op)
    raise ValueError(f"side must be 'first' or 'second', got {side!r}")


def trace_pairing(functional: np.ndarray, op: np.ndarray) -> complex:
    """``tr(mu T)`` computed without forming the product."""
    functional = np.asarray(functional)
    op = np.asarray(op)
    if functional.shape[1] != op.shape[0] or functional.shape[0] != op.shape[1]:
        raise ValueError(f"shapes {functional.shape} and {op.shape} cannot be paired")
    return complex(np.sum(functional * op.T))


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    from scipy.stats import unitary_group

    return unitary_group.rvs(n, random_state=rng) if n > 1 else np.exp(
        2j * np.pi * rng.random()) * np.ones((1, 1))


def ginibre(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    return (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / np.sqrt(2)


def random_hermitian(n: int, rng: np.random.Generator) -> np.ndarray:
    return hermitize(ginibre(n, n, rng))


def matrix_to_json(M: np.ndarray) -> dict:
    """Encode as ``{"rows", "cols", "data": [[re, im], ...]}`` (row-major)."""
    M = np.asarray(M, dtype=np.complex128)
    if M.ndim != 2:
        raise ValueError("only 2-d matrices can be encoded")
    flat = M.reshape(-1)
    return {
        "rows": int(M.shape[0]),
        "cols": int(M.shape[1]),
        "data": [[float(z.real), float(z.imag)] for z in flat],
    }


def matrix_from_json(obj: dict) -> np.ndarray:
    try:
        rows, cols, data = int(obj["rows"]), int(obj["cols"]), obj["data"]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed matrix object: {exc}") from exc
    if len(data) != rows * cols:
        raise ValueError(f"matrix data has {len(data)} entries, expected {rows * cols}")
    arr = np.array([complex(re, im) for re, im in data], dtype=np.complex128)
    return as_matrix(arr.reshape(rows, cols))


def stack(mats: Sequence[np.ndarray], n: int) -> np.ndarray:
    """Stack square matrices into an ``(k, n, n)`` array (``k`` may be 0)."""
    if len(mats) == 0:
        return np.zeros((0, n, n), dtype=np.complex128)
    return np.asarray([np.asarray(m, dtype=np.complex128) for m in mats])
