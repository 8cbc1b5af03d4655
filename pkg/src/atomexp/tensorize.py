"""Tensor-product realizations of commuting-operator models.

The algebra generated by one party's POVM elements splits as
``sum_k M_{n_k} (x) I_{m_k}`` on ``range(z_k) = C^{n_k} (x) C^{m_k}``; the
other party's elements lie in the commutant and so act as ``I (x) N`` on each
block.  Collecting first factors into ``H_A = sum_k C^{n_k}`` and second
factors into ``H_B = sum_k C^{m_k}`` and embedding ``C^n`` block-diagonally
into ``H_A (x) H_B`` gives a tensor-product model with the same behavior.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .matrixlab import (
    DEFAULT_TOL,
    Tolerances,
    dagger,
    hermitize,
    matrix_to_json,
    max_norm,
    nullspace_basis,
)
from .scenario import (
    Behavior,
    BipartiteModel,
    MeasurementScenario,
    ModelValidationError,
    POVMFamily,
    ScenarioMismatch,
    behavior,
    validate_model,
)
from .vnalg import WedderburnData, generated_algebra, split_tensor_component, wedderburn


class ComponentExtractionResidual(RuntimeError):
    """A conjugated POVM element is not of the required ``M (x) I`` / ``I (x) N`` form."""


@dataclass(frozen=True)
class TensorModel:
    """POVMs on ``C^dimA`` and ``C^dimB`` and a state on ``C^dimA (x) C^dimB``.

    ``embedding`` is the isometry ``C^n -> C^dimA (x) C^dimB`` that carried
    the original model over, and ``blocks`` the ``(n_k, m_k)`` profile used
    (``n_k`` counts Alice's factor).
    """

    scenario: MeasurementScenario
    dimA: int
    dimB: int
    alice: POVMFamily
    bob: POVMFamily
    state: np.ndarray
    embedding: np.ndarray | None = None
    blocks: tuple[tuple[int, int], ...] = ()

    def as_bipartite(self) -> BipartiteModel:
        """The same model with ``E (x) I`` and ``I (x) F`` on the joint space."""
        IA, IB = np.eye(self.dimA), np.eye(self.dimB)
        n = self.dimA * self.dimB
        alice = POVMFamily(n, {x: tuple(np.kron(alice_el, IB) for alice_el in mats) for x, mats in self.alice.elements.items()})
        bob = POVMFamily(n, {y: tuple(np.kron(IA, bob_el) for bob_el in mats) for y, mats in self.bob.elements.items()})
        return BipartiteModel(self.scenario, n, alice, bob, self.state)

    def invariant_residuals(self) -> dict[str, float]:
        dens = self.state
        return {
            "alice_completeness": self.alice.completeness_residual(),
            "bob_completeness": self.bob.completeness_residual(),
            "alice_positive": self.alice.positivity_residual(),
            "bob_positive": self.bob.positivity_residual(),
            "state_positive": max(0.0, -float(np.linalg.eigvalsh(hermitize(dens))[0])),
            "state_trace": abs(np.trace(dens) - 1.0),
        }

    def with_state(self, state: np.ndarray) -> "TensorModel":
        return TensorModel(self.scenario, self.dimA, self.dimB, self.alice, self.bob,
                           np.asarray(state, dtype=np.complex128), self.embedding, self.blocks)

    def to_json(self) -> dict:
        return {
            "dimA": self.dimA,
            "dimB": self.dimB,
            "scenario": self.scenario.to_json(),
            "alice_povms": {x: [matrix_to_json(M) for M in mats] for x, mats in self.alice.elements.items()},
            "bob_povms": {y: [matrix_to_json(M) for M in mats] for y, mats in self.bob.elements.items()},
            "state": matrix_to_json(self.state),
        }


def tensor_behavior(t: TensorModel) -> dict[tuple[str, str], np.ndarray]:
    """``tr(rho~ (E~ (x) F~))`` for every setting pair, without the validation gate."""
    dens = t.state.reshape(t.dimA, t.dimB, t.dimA, t.dimB)
    table = {}
    for x, _ in t.scenario.alice:
        alice_el = np.asarray(t.alice[x])
        for y, _ in t.scenario.bob:
            bob_el = np.asarray(t.bob[y])
            # tr(rho (E (x) F)) = sum rho_{ij,kl} E_{ki} F_{lj}
            table[(x, y)] = np.einsum("ijkl,aki,blj->ab", dens, alice_el, bob_el).real
    return table


def verify_tensor_model(t: TensorModel, beh: Behavior) -> float:
    """max over ``(a,x,b,y)`` of ``|tr(rho~ (E~^x_a (x) F~^y_b)) - p(a,b|x,y)|``."""
    if t.scenario != beh.scenario:
        raise ScenarioMismatch("tensor model and behavior belong to different scenarios")
    table = tensor_behavior(t)
    return max(float(np.max(np.abs(table[k] - beh.table[k]))) for k in beh.table)


def _embedding(data: WedderburnData, dim_own: int, dim_other: int, own_first: bool) -> np.ndarray:
    """Isometry ``C^n -> H_A (x) H_B`` sending block ``k`` to ``C^{n_k} (x) C^{m_k}``."""
    n = data.blocks[0].isometry.shape[1]
    dA, dB = (dim_own, dim_other) if own_first else (dim_other, dim_own)
    V = np.zeros((dA * dB, n), dtype=np.complex128)
    off_own = off_other = 0
    for blk in data.blocks:
        for i in range(blk.n):
            for j in range(blk.m):
                row, col = off_own + i, off_other + j
                if not own_first:
                    row, col = col, row
                V[row * dB + col] = blk.isometry[i * blk.m + j]
        off_own += blk.n
        off_other += blk.m
    return V


def _direct_sum(parts: list[np.ndarray]) -> np.ndarray:
    size = sum(p.shape[0] for p in parts)
    out = np.zeros((size, size), dtype=np.complex128)
    o = 0
    for p in parts:
        k = p.shape[0]
        out[o:o + k, o:o + k] = p
        o += k
    return out


def _extract(fam: POVMFamily, data: WedderburnData, factor: str, tol: Tolerances) -> POVMFamily:
    out = {}
    for label, mats in fam.elements.items():
        new = []
        for M in mats:
            parts = []
            for blk in data.blocks:
                C, res = split_tensor_component(blk.compress(M), blk.n, blk.m, factor)
                if res > tol.eps_factor:
                    raise ComponentExtractionResidual(
                        f"element of setting {label!r} deviates from the {factor}-factor form on block "
                        f"({blk.n},{blk.m}) by {res:.3e}")
                parts.append(hermitize(C))
            new.append(_direct_sum(parts))
        out[label] = tuple(new)
    dim = sum((blk.n if factor == "first" else blk.m) for blk in data.blocks)
    return POVMFamily(dim, out)


def tensorize(m: BipartiteModel, rng: np.random.Generator, side: str = "alice",
              padding: bool = False, tol: Tolerances = DEFAULT_TOL) -> TensorModel:
    """Construct ``(E~, F~, rho~)`` on ``H_A (x) H_B`` reproducing the behavior of ``m``.

    ``side`` selects whose algebra is decomposed.  With ``padding`` both
    factors are enlarged to dimension ``n`` (see :func:`pad`).
    """
    report = validate_model(m, tol)
    if not report.ok:
        raise ModelValidationError(f"model fails validation: {', '.join(report.failures())}")
    if side == "alice":
        own, other = m.alice, m.bob
    elif side == "bob":
        own, other = m.bob, m.alice
    else:
        raise ValueError(f"side must be 'alice' or 'bob', got {side!r}")
    alg = generated_algebra(m.dim, own.all_elements(), tol)
    data = wedderburn(alg, rng, tol)
    own_t = _extract(own, data, "first", tol)
    other_t = _extract(other, data, "second", tol)
    V = _embedding(data, own_t.dim, other_t.dim, own_first=(side == "alice"))
    dens = hermitize(V @ m.state @ dagger(V))
    if side == "alice":
        alice_t, bob_t, prof = own_t, other_t, tuple(data.profile)
    else:
        alice_t, bob_t, prof = other_t, own_t, tuple((b.m, b.n) for b in data.blocks)
    t = TensorModel(m.scenario, alice_t.dim, bob_t.dim, alice_t, bob_t, dens, V, prof)
    if padding:
        t = pad(t, m.dim)
    bad = {k: v for k, v in t.invariant_residuals().items() if v > tol.eps_eq}
    if bad:
        raise ComponentExtractionResidual(f"tensor model invariants violated: {bad}")
    return t


def pad(t: TensorModel, size: int) -> TensorModel:
    """Enlarge both factors to ``size``; on the added null block each setting is uniform."""
    if size < t.dimA or size < t.dimB:
        raise ValueError(f"cannot pad factors of size ({t.dimA}, {t.dimB}) down to {size}")

    def grow(fam: POVMFamily) -> POVMFamily:
        extra = size - fam.dim
        return POVMFamily(size, {
            label: tuple(_direct_sum([M, np.eye(extra) / len(mats)]) for M in mats)
            for label, mats in fam.elements.items()})

    J = np.kron(np.eye(size)[:, :t.dimA], np.eye(size)[:, :t.dimB])
    dens = J @ t.state @ J.T
    V = None if t.embedding is None else J @ t.embedding
    return TensorModel(t.scenario, size, size, grow(t.alice), grow(t.bob), dens, V, t.blocks)


def cross_check(m: BipartiteModel, rng: np.random.Generator, tol: Tolerances = DEFAULT_TOL) -> float:
    """Tensorize from both sides and return the largest difference between their behaviors."""
    ta = tensor_behavior(tensorize(m, rng, "alice", tol=tol))
    tb = tensor_behavior(tensorize(m, rng, "bob", tol=tol))
    return max(float(np.max(np.abs(ta[k] - tb[k]))) for k in ta)


def intertwining_unitary(source: list[np.ndarray], target: list[np.ndarray],
                         tol: Tolerances = DEFAULT_TOL) -> np.ndarray | None:
    """Unitary ``W`` with ``W S W^dagger = T`` for paired lists, if one exists.

    Solves ``T_i W = W S_i`` as a null-space problem.  When the source
    generates the full matrix algebra the solution is unique up to phase.
    Returns ``None`` when no invertible intertwiner is found.
    """
    d = source[0].shape[0]
    eye = np.eye(d)
    # row-major vec: vec(T W - W S) = (T (x) I - I (x) S^T) vec(W)
    L = np.concatenate([np.kron(tgt, eye) - np.kron(eye, src.T) for src, tgt in zip(source, target)])
    N = nullspace_basis(L, tol)
    if N.shape[1] == 0:
        return None
    W = N[:, 0].reshape(d, d)
    W = W * np.sqrt(d) / np.linalg.norm(W)
    if max_norm(W @ dagger(W) - eye) > 1e-6:
        return None
    return W


def behavior_of(t: TensorModel, tol: Tolerances = DEFAULT_TOL) -> Behavior:
    return behavior(t.as_bipartite(), tol)
