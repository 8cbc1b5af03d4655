"""Trace-preserving conditional expectations onto matrix algebras.

For a unital ``*``-subalgebra ``N`` of ``M_n`` the Hilbert-Schmidt orthogonal
projection ``Phi(T) = sum_j B_j tr(B_j^dagger T)`` onto ``N`` is the unique
trace-preserving conditional expectation.  It is unital, completely positive,
idempotent, an ``N``-bimodule map, and symmetric for the pairing
``<mu, T> = tr(mu T)``, so its predual coincides with ``Phi`` itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .matrixlab import DEFAULT_TOL, Tolerances, dagger, max_norm, trace_pairing
from .scenario import POVMFamily
from .vnalg import VNAlgebra


class InvalidAlgebra(ValueError):
    """The target subspace is not a unital ``*``-algebra."""


class NotCompletelyPositive(RuntimeError):
    pass


@dataclass(frozen=True)
class ConditionalExpectation:
    target: VNAlgebra
    superoperator: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.target.dim

    def __call__(self, ops: np.ndarray) -> np.ndarray:
        return apply(self, ops)


def expectation_onto(alg: VNAlgebra, tol: Tolerances = DEFAULT_TOL,
                     check_cp: bool = False) -> ConditionalExpectation:
    """Build ``Phi`` onto ``alg``; ``check_cp`` additionally verifies the Choi matrix (O(n^6))."""
    bad = {k: v for k, v in alg.closure_residuals().items() if v > tol.eps_eq}
    if bad:
        raise InvalidAlgebra(f"target is not a unital *-algebra: {bad}")
    rows = alg.basis.reshape(alg.dimension, -1)
    # vec(Phi(T)) = S vec(T) with row-major vec
    sup = rows.T @ rows.conj()
    cexp = ConditionalExpectation(alg, sup)
    if check_cp:
        lam = float(np.linalg.eigvalsh(choi_matrix(cexp))[0])
        if lam < -tol.eps_psd:
            raise NotCompletelyPositive(f"Choi matrix has eigenvalue {lam:.3e}")
    return cexp


def _check_shape(cexp: ConditionalExpectation, ops: np.ndarray) -> np.ndarray:
    ops = np.asarray(ops, dtype=np.complex128)
    if ops.shape[-2:] != (cexp.dim, cexp.dim):
        raise ValueError(f"operator of shape {ops.shape} does not act on C^{cexp.dim}")
    return ops


def apply(cexp: ConditionalExpectation, ops: np.ndarray) -> np.ndarray:
    """``Phi(T)``; also accepts a stack of matrices."""
    ops = _check_shape(cexp, ops)
    flat = ops.reshape(*ops.shape[:-2], -1)
    return (flat @ cexp.superoperator.T).reshape(ops.shape)


def predual_apply(cexp: ConditionalExpectation, functional: np.ndarray) -> np.ndarray:
    """``Phi_*(mu)``, the unique ``nu`` with ``tr(nu T) = tr(mu Phi(T))`` for all ``T``.

    With row-major vectorization ``tr(mu X) = vec(mu^T) . vec(X)``, so the
    predual acts on ``vec(mu^T)`` through ``S^T``.  That this equals ``Phi(mu)``
    is the trace-pairing symmetry, checked separately rather than assumed here.
    """
    functional = _check_shape(cexp, functional)
    v = np.swapaxes(functional, -1, -2).reshape(*functional.shape[:-2], -1)
    image_t = (v @ cexp.superoperator).reshape(functional.shape)
    return np.swapaxes(image_t, -1, -2)


def matrix_units(n: int) -> np.ndarray:
    return np.eye(n * n, dtype=np.complex128).reshape(n * n, n, n)


def predual_identity_residual(cexp: ConditionalExpectation, functional: np.ndarray) -> float:
    """max over matrix units ``T`` of ``|tr(Phi_*(mu) T) - tr(mu Phi(T))|``."""
    image = predual_apply(cexp, functional)
    units = matrix_units(cexp.dim)
    images = apply(cexp, units)
    return max(abs(trace_pairing(image, ops) - trace_pairing(functional, P)) for ops, P in zip(units, images))


def choi_matrix(cexp: ConditionalExpectation) -> np.ndarray:
    """``sum_ij E_ij (x) Phi(E_ij)``."""
    n = cexp.dim
    # S[(k,l),(i,j)] = Phi(E_ij)_kl
    sup = cexp.superoperator.reshape(n, n, n, n)
    return sup.transpose(2, 0, 3, 1).reshape(n * n, n * n)


def invariant_residuals(cexp: ConditionalExpectation, rng: np.random.Generator,
                        n_samples: int = 4) -> dict[str, float]:
    """Residuals of the defining properties of a conditional expectation on random inputs."""
    from .matrixlab import ginibre, min_eigenvalue

    n = cexp.dim
    ops = np.asarray([ginibre(n, n, rng) for _ in range(n_samples)])
    projected = apply(cexp, ops)
    out = {"idempotence": max_norm(apply(cexp, projected) - projected),
           "unitality": max_norm(apply(cexp, np.eye(n)) - np.eye(n))}
    G = np.asarray([ginibre(n, n, rng) for _ in range(n_samples)])
    psd = G @ dagger(G)
    out["positivity"] = max(max(0.0, -min_eigenvalue(X)) for X in apply(cexp, psd))
    left = np.asarray([cexp.target.random_element(rng, hermitian=False) for _ in range(n_samples)])
    right = np.asarray([cexp.target.random_element(rng, hermitian=False) for _ in range(n_samples)])
    out["bimodule"] = max_norm(apply(cexp, left @ ops @ right) - left @ projected @ right)
    functional = np.asarray([ginibre(n, n, rng) for _ in range(n_samples)])
    out["pairing_symmetry"] = max(abs(trace_pairing(apply(cexp, m), t) - trace_pairing(m, apply(cexp, t)))
                                  for m, t in zip(functional, ops))
    return out


@dataclass
class SandwichReport:
    """Residuals of ``span(F) in range(Phi)`` and ``range(Phi) in comm(E)``."""

    containment: float
    commutation: float
    threshold: float

    @property
    def containment_ok(self) -> bool:
        return self.containment <= self.threshold

    @property
    def commutation_ok(self) -> bool:
        return self.commutation <= self.threshold

    @property
    def ok(self) -> bool:
        return self.containment_ok and self.commutation_ok

    def to_json(self) -> dict:
        return {"containment": self.containment, "commutation": self.commutation,
                "pass": self.ok}


def verify_sandwich(cexp: ConditionalExpectation, alice: POVMFamily, bob: POVMFamily,
                    tol: Tolerances = DEFAULT_TOL) -> SandwichReport:
    """Check that ``range(Phi)`` contains every Bob element and commutes with every Alice element.

    Containment is the HS distance of each ``F`` from its image ``Phi(F)``;
    commutation is ``max ||[R, E]||_max`` over the HS basis ``R`` of the range.
    """
    if alice.dim != cexp.dim or bob.dim != cexp.dim:
        raise ValueError("POVM dimensions do not match the conditional expectation")
    bob_el = np.asarray(bob.all_elements())
    containment = float(np.max(np.linalg.norm((bob_el - apply(cexp, bob_el)).reshape(len(bob_el), -1), axis=1)))
    alice_el = np.asarray(alice.all_elements())
    range_basis = cexp.target.basis
    prod_re = np.einsum("rij,ajk->raik", range_basis, alice_el)
    prod_er = np.einsum("aij,rjk->raik", alice_el, range_basis)
    commutation = max_norm(prod_re - prod_er)
    return SandwichReport(containment, commutation, tol.eps_eq)
