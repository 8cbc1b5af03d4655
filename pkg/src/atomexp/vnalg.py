"""Finite-dimensional von Neumann algebras of matrices.

An algebra is stored as a Hilbert-Schmidt orthonormal basis of a unital,
``*``-closed, multiplicatively closed subspace of ``M_n``.  The structure
theory is made constructive: centers, minimal central projections, the
Wedderburn factorization ``range(z_k) = C^{n_k} (x) C^{m_k}`` under which the
algebra acts as ``M_{n_k} (x) I``, and a resolution of the identity into
minimal projections.

Randomized steps (generic elements used to split spectra) draw from an
explicit ``numpy.random.Generator``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .matrixlab import (
    DEFAULT_TOL,
    Tolerances,
    dagger,
    hermitian_eig,
    hermitize,
    max_norm,
    nullspace_basis,
    partial_trace,
    stack,
)

MAX_RETRIES = 10


class RetriesExhausted(RuntimeError):
    """Random spectral splitting kept producing near-degenerate spectra."""


class FactorizationResidual(RuntimeError):
    pass


class AlgebraDimensionError(RuntimeError):
    """A computed rank is not close to an integer."""


def _as_int(value: float, what: str) -> int:
    k = int(round(value))
    if abs(value - k) > 0.1:
        raise AlgebraDimensionError(f"{what} = {value:.4f} is not within 0.1 of an integer")
    return k


@dataclass(frozen=True)
class VNAlgebra:
    """A unital ``*``-subalgebra of ``M_dim`` given by an HS-orthonormal basis.

    ``basis`` has shape ``(d, dim, dim)``.
    """

    dim: int
    basis: np.ndarray
    contains_identity: bool = True

    def __post_init__(self):
        bas = np.asarray(self.basis, dtype=np.complex128)
        if bas.ndim != 3 or bas.shape[1:] != (self.dim, self.dim):
            raise ValueError(f"basis of shape {bas.shape} does not fit dim {self.dim}")
        bas.setflags(write=False)
        object.__setattr__(self, "basis", bas)

    @property
    def dimension(self) -> int:
        return self.basis.shape[0]

    def __len__(self) -> int:
        return self.dimension

    @property
    def _rows(self) -> np.ndarray:
        return self.basis.reshape(self.dimension, -1)

    def coefficients(self, X: np.ndarray) -> np.ndarray:
        """HS coefficients ``tr(B_j^dagger X)``; accepts a stack of matrices too."""
        X = np.asarray(X)
        flat = X.reshape(*X.shape[:-2], -1)
        return flat @ self._rows.conj().T

    def project(self, X: np.ndarray) -> np.ndarray:
        """HS-orthogonal projection onto the algebra."""
        X = np.asarray(X)
        return (self.coefficients(X) @ self._rows).reshape(X.shape)

    def residual(self, X: np.ndarray) -> float:
        """HS distance from ``X`` to the algebra."""
        return float(np.linalg.norm(np.asarray(X) - self.project(X)))

    def contains(self, X: np.ndarray, tol: Tolerances = DEFAULT_TOL) -> bool:
        return self.residual(X) <= tol.eps_eq * (1.0 + float(np.linalg.norm(X)))

    def random_element(self, rng: np.random.Generator, hermitian: bool = True) -> np.ndarray:
        """A generic element (complex Gaussian coefficients), normalized in HS norm."""
        d = self.dimension
        c = rng.standard_normal(d) + 1j * rng.standard_normal(d)
        X = np.tensordot(c, self.basis, axes=1)
        if hermitian:
            X = hermitize(X)
        nrm = np.linalg.norm(X)
        return X / nrm if nrm > 0 else X

    def closure_residuals(self) -> dict[str, float]:
        """Orthonormality, identity membership, ``*``-closure and product closure residuals."""
        bas = self.basis
        d = self.dimension
        gram = self._rows.conj() @ self._rows.T
        out = {"orthonormality": max_norm(gram - np.eye(d))}
        out["identity"] = self.residual(np.eye(self.dim))
        adj = dagger(bas)
        out["adjoint"] = max((self.residual(adj_el) for adj_el in adj), default=0.0)
        prods = np.einsum("aij,bjk->abik", bas, bas).reshape(d * d, self.dim, self.dim)
        diff = prods - self.project(prods)
        out["product"] = float(np.max(np.linalg.norm(diff.reshape(d * d, -1), axis=1))) if d else 0.0
        return out

    def is_valid(self, tol: Tolerances = DEFAULT_TOL) -> bool:
        return all(v <= tol.eps_eq for v in self.closure_residuals().values())

    def subspace_distance(self, other: "VNAlgebra") -> float:
        """Largest HS residual of either basis projected onto the other algebra."""
        a = max((other.residual(el) for el in self.basis), default=0.0)
        b = max((self.residual(el) for el in other.basis), default=0.0)
        return max(a, b)


def full_algebra(n: int) -> VNAlgebra:
    basis = np.eye(n * n, dtype=np.complex128).reshape(n * n, n, n)
    return VNAlgebra(n, basis)


def scalar_algebra(n: int) -> VNAlgebra:
    return VNAlgebra(n, (np.eye(n, dtype=np.complex128) / np.sqrt(n))[None])


def span_algebra(n: int, mats: Sequence[np.ndarray], tol: Tolerances = DEFAULT_TOL) -> VNAlgebra:
    """Orthonormalize the span of ``mats``; the caller asserts it is an algebra."""
    M = stack(mats, n).reshape(len(mats), -1)
    if len(mats) == 0:
        return VNAlgebra(n, np.zeros((0, n, n)))
    U, s, _ = np.linalg.svd(M.T, full_matrices=False)
    keep = s > tol.eps_rank * (s[0] if s.size else 0.0) * max(M.shape)
    return VNAlgebra(n, U[:, keep].T.reshape(-1, n, n))


def _hermitian_basis(generators: Sequence[np.ndarray], n: int, tol: Tolerances) -> np.ndarray:
    """HS-orthonormal basis of the real span of the traceless Hermitian parts of ``generators``.

    ``X`` commutes with ``G`` and ``G^dagger`` iff it commutes with both
    Hermitian parts, and the identity component commutes with everything.
    """
    parts = []
    scale = 0.0
    for G in generators:
        G = np.asarray(G, dtype=np.complex128)
        scale = max(scale, float(np.linalg.norm(G)))
        for herm in (hermitize(G), hermitize(-1j * G)):
            parts.append(herm - np.trace(herm).real / n * np.eye(n))
    if not parts:
        return np.zeros((0, n, n), dtype=np.complex128)
    flat = np.asarray(parts).reshape(len(parts), -1)
    real = np.concatenate([flat.real, flat.imag], axis=1)
    U, s, Vh = np.linalg.svd(real, full_matrices=False)
    # relative to the generators, so numerically scalar ones drop out
    keep = s > tol.eps_rank * max(scale, 1e-300) * max(real.shape)
    rows = Vh[keep]
    basis = (rows[:, : n * n] + 1j * rows[:, n * n:]).reshape(-1, n, n)
    return hermitize(basis)


# stacked systems with more rows than this go through the Gram matrix
_STACK_LIMIT = 2048


def commutant(dim: int, generators: Sequence[np.ndarray], tol: Tolerances = DEFAULT_TOL) -> VNAlgebra:
    """``{X : XG = GX and XG^dagger = G^dagger X for every generator G}``.

    Solved as the null space of the stacked maps ``X -> HX - XH`` with ``H``
    running over an orthonormal basis of the Hermitian parts.  Large stacks
    use the Gram matrix ``sum_H ad_H^2`` instead of the stacked SVD; its
    eigenvalues are squared singular values, so the cutoff is applied to their
    square roots and floored at ``1e-7 * sigma_max``, the Gram noise level.
    """
    n = dim
    for G in generators:
        if np.shape(G) != (n, n):
            raise ValueError(f"generator of shape {np.shape(G)} does not act on C^{n}")
    hs = _hermitian_basis(generators, n, tol)
    k = hs.shape[0]
    if k == 0:
        return full_algebra(n)
    eye = np.eye(n)
    rows = k * n * n
    if rows <= _STACK_LIMIT:
        # row-major vec: vec(HX - XH) = (H (x) I - I (x) H^T) vec(X)
        L = np.concatenate([np.kron(herm, eye) - np.kron(eye, herm.T) for herm in hs])
        N = nullspace_basis(L, tol)
    else:
        # ad_H^2 = H^2 (x) I + I (x) (H^2)^T - 2 H (x) H^T
        P = np.einsum("kij,kjl->il", hs, hs)
        flat = hs.reshape(k, -1)
        cross = (flat.T @ flat).reshape(n, n, n, n)  # [a,c,d,b] = sum_k H_ac H_db
        cross = cross.transpose(0, 3, 1, 2).reshape(n * n, n * n)
        G = np.kron(P, eye) + np.kron(eye, P.T) - 2 * cross
        w, V = hermitian_eig(G)
        smax = np.sqrt(max(w[-1], 0.0))
        cut = max(tol.eps_rank * smax * rows, 1e-7 * smax)
        N = V[:, np.sqrt(np.clip(w, 0.0, None)) <= cut]
    return VNAlgebra(n, N.T.reshape(-1, n, n))


def generated_algebra(dim: int, generators: Sequence[np.ndarray],
                      tol: Tolerances = DEFAULT_TOL) -> VNAlgebra:
    """The von Neumann algebra generated by ``generators``: the double commutant."""
    return commutant(dim, commutant(dim, generators, tol).basis, tol)


def center(alg: VNAlgebra, tol: Tolerances = DEFAULT_TOL) -> VNAlgebra:
    """``alg`` intersected with its commutant, computed as the commutant of their union."""
    comm = commutant(alg.dim, alg.basis, tol)
    return commutant(alg.dim, list(alg.basis) + list(comm.basis), tol)


def cluster_eigenvalues(w: np.ndarray, tol: Tolerances = DEFAULT_TOL) -> list[np.ndarray] | None:
    """Group ascending eigenvalues into clusters split at gaps larger than ``eps_gap``.

    Returns ``None`` when some gap is ambiguous (between the within-cluster
    noise floor and ``eps_gap``), which callers treat as a reason to resample.
    """
    if w.size == 0:
        return []
    scale = max(1.0, float(np.max(np.abs(w))))
    noise = max(tol.eps_eq, 1e3 * np.finfo(float).eps) * scale
    gaps = np.diff(w)
    if np.any((gaps > noise) & (gaps <= tol.eps_gap * scale)):
        return None
    cuts = np.flatnonzero(gaps > tol.eps_gap * scale) + 1
    return np.split(np.arange(w.size), cuts)


def minimal_central_projections(alg: VNAlgebra, rng: np.random.Generator,
                                tol: Tolerances = DEFAULT_TOL,
                                center_alg: VNAlgebra | None = None) -> list[np.ndarray]:
    """Orthogonal projections onto the blocks of the center, summing to the identity.

    Found as spectral projections of a random Hermitian central element; the
    number of clusters must equal the dimension of the center.
    """
    Z = center(alg, tol) if center_alg is None else center_alg
    k = Z.dimension
    if k == 1:
        return [np.eye(alg.dim, dtype=np.complex128)]
    for _ in range(MAX_RETRIES):
        h = Z.random_element(rng)
        w, V = hermitian_eig(h)
        clusters = cluster_eigenvalues(w, tol)
        if clusters is None or len(clusters) != k:
            continue
        return [hermitize(V[:, c] @ dagger(V[:, c])) for c in clusters]
    raise RetriesExhausted(
        f"could not split a {k}-dimensional center into {k} clusters after {MAX_RETRIES} tries")


@dataclass(frozen=True)
class Block:
    """One Wedderburn block.

    ``isometry`` maps ``range(projection)`` onto ``C^n (x) C^m`` (shape
    ``(n*m, dim)``); conjugating an algebra element by it gives ``M (x) I_m``.
    ``minimal_projections`` are the ``n`` projections ``isometry^dagger (e_ii (x) I) isometry``.
    """

    projection: np.ndarray
    n: int
    m: int
    isometry: np.ndarray
    minimal_projections: tuple[np.ndarray, ...]

    def compress(self, X: np.ndarray) -> np.ndarray:
        U = self.isometry
        return U @ X @ dagger(U)


@dataclass(frozen=True)
class WedderburnData:
    blocks: tuple[Block, ...]
    algebra_dim: int
    commutant_dim: int
    center_dim: int

    @property
    def profile(self) -> list[tuple[int, int]]:
        return [(b.n, b.m) for b in self.blocks]

    def invariant_residuals(self, dim: int) -> dict[str, float]:
        zs = [b.projection for b in self.blocks]
        out = {"sum_to_identity": max_norm(sum(zs) - np.eye(dim))}
        out["projection"] = max(max(max_norm(z @ z - z), max_norm(z - dagger(z))) for z in zs)
        out["orthogonality"] = max((max_norm(zs[i] @ zs[j]) for i in range(len(zs))
                                    for j in range(len(zs)) if i != j), default=0.0)
        out["isometry"] = max(max_norm(dagger(b.isometry) @ b.isometry - b.projection)
                              for b in self.blocks)
        return out

    def to_json(self) -> dict:
        return {"blocks": [{"n": b.n, "m": b.m} for b in self.blocks],
                "algebra_dim": self.algebra_dim,
                "commutant_dim": self.commutant_dim,
                "center_dim": self.center_dim}


def split_tensor_component(X: np.ndarray, n: int, m: int, factor: str) -> tuple[np.ndarray, float]:
    """Best ``M (x) I_m`` (``factor="first"``) or ``I_n (x) N`` (``"second"``) approximation.

    Obtained by averaging over the other factor with a partial trace.  Returns
    the component and the max-norm residual of the approximation.
    """
    if factor == "first":
        C = partial_trace(X, (n, m), "second") / m
        approx = np.kron(C, np.eye(m))
    elif factor == "second":
        C = partial_trace(X, (n, m), "first") / n
        approx = np.kron(np.eye(n), C)
    else:
        raise ValueError(f"factor must be 'first' or 'second', got {factor!r}")
    return C, max_norm(X - approx)


def _block_rank(mats: np.ndarray, tol: Tolerances) -> int:
    flat = mats.reshape(mats.shape[0], -1)
    if flat.size == 0:
        return 0
    s = np.linalg.svd(flat, compute_uv=False)
    return int(np.sum(s > tol.eps_rank * s[0] * max(flat.shape))) if s[0] > 0 else 0


def _factor_block(alg: VNAlgebra, z: np.ndarray, rng: np.random.Generator,
                  tol: Tolerances) -> Block:
    n_amb = alg.dim
    w, V = hermitian_eig(z)
    r = _as_int(float(np.trace(z).real), "rank of central projection")
    Q = V[:, n_amb - r:]  # orthonormal basis of range(z)
    compressed = dagger(Q)[None] @ alg.basis @ Q[None]
    d = _block_rank(compressed, tol)
    nk = _as_int(np.sqrt(d), "factor size (sqrt of block algebra dimension)")
    if nk * nk != d or r % nk:
        raise FactorizationResidual(
            f"block of rank {r} has algebra dimension {d}, not n^2 with n dividing {r}")
    mk = r // nk

    def generic(hermitian: bool) -> np.ndarray:
        c = rng.standard_normal(alg.dimension) + 1j * rng.standard_normal(alg.dimension)
        X = np.tensordot(c, compressed, axes=1)
        X = hermitize(X) if hermitian else X
        return X / np.linalg.norm(X)

    for _ in range(MAX_RETRIES):
        # minimal projections of the block: eigenclusters of a generic Hermitian element
        ew, EV = hermitian_eig(generic(True))
        clusters = cluster_eigenvalues(ew, tol)
        if clusters is None or len(clusters) != nk or any(len(c) != mk for c in clusters):
            continue
        Vs = [EV[:, c] for c in clusters]
        # partial isometries p_1 -> p_i from the polar part of p_i G p_1
        G = generic(False)
        cols = [Vs[0]]
        ok = True
        for Vi in Vs[1:]:
            Y = dagger(Vi) @ G @ Vs[0]
            u, s, vh = np.linalg.svd(Y)
            if s[-1] <= tol.eps_gap:
                ok = False
                break
            cols.append(Vi @ (u @ vh))
        if not ok:
            continue
        # column index i*m + j  <->  e_i (x) e_j
        Wcols = np.concatenate(cols, axis=1)
        isometry = dagger(Q @ Wcols)
        minimal = tuple(hermitize(Q @ Vi @ dagger(Vi) @ dagger(Q)) for Vi in Vs)
        block = Block(hermitize(z), nk, mk, isometry, minimal)
        _check_block(alg, block, tol)
        return block
    raise RetriesExhausted(
        f"could not resolve a rank-{r} block into {nk} minimal projections of rank {mk} "
        f"after {MAX_RETRIES} tries")


def _check_block(alg: VNAlgebra, block: Block, tol: Tolerances) -> None:
    U = block.isometry
    X = U[None] @ alg.basis @ dagger(U)[None]
    worst = 0.0
    comps = []
    for Xi in X:
        C, res = split_tensor_component(Xi, block.n, block.m, "first")
        worst = max(worst, res)
        comps.append(C)
    if worst > tol.eps_factor:
        raise FactorizationResidual(
            f"block ({block.n},{block.m}): algebra not of the form M (x) I, residual {worst:.3e}")
    if _block_rank(np.asarray(comps), tol) != block.n ** 2:
        raise FactorizationResidual(f"block ({block.n},{block.m}): compressed algebra is not all of M_n")
    iso = max_norm(U @ dagger(U) - np.eye(U.shape[0]))
    if iso > tol.eps_factor:
        raise FactorizationResidual(f"block ({block.n},{block.m}): isometry residual {iso:.3e}")


def wedderburn(alg: VNAlgebra, rng: np.random.Generator, tol: Tolerances = DEFAULT_TOL) -> WedderburnData:
    """Block decomposition ``alg = sum_k M_{n_k} (x) I_{m_k}`` with explicit isometries."""
    if not alg.contains(np.eye(alg.dim), tol):
        raise ValueError("wedderburn requires a unital algebra")
    comm = commutant(alg.dim, alg.basis, tol)
    Z = commutant(alg.dim, list(alg.basis) + list(comm.basis), tol)
    zs = minimal_central_projections(alg, rng, tol, center_alg=Z)
    blocks = tuple(_factor_block(alg, z, rng, tol) for z in zs)
    data = WedderburnData(blocks, alg.dimension, comm.dimension, Z.dimension)
    if sum(b.n ** 2 for b in blocks) != alg.dimension:
        raise FactorizationResidual("block dimensions do not account for the algebra dimension")
    if sum(b.m ** 2 for b in blocks) != comm.dimension:
        raise FactorizationResidual("block multiplicities do not account for the commutant dimension")
    bad = {k: v for k, v in data.invariant_residuals(alg.dim).items() if v > tol.eps_factor}
    if bad:
        raise FactorizationResidual(f"Wedderburn invariants violated: {bad}")
    return data


def minimal_projection_resolution(alg: VNAlgebra, rng: np.random.Generator,
                                  tol: Tolerances = DEFAULT_TOL) -> list[np.ndarray]:
    """Mutually orthogonal minimal projections of ``alg`` summing to the identity."""
    data = wedderburn(alg, rng, tol)
    return [p for b in data.blocks for p in b.minimal_projections]


def corner_dimension(alg: VNAlgebra, p: np.ndarray, tol: Tolerances = DEFAULT_TOL) -> int:
    """``dim(p alg p)``; equals 1 exactly when ``p`` is minimal in ``alg``."""
    return _block_rank(p[None] @ alg.basis @ p[None], tol)
