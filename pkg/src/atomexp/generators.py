"""Seeded factories for test models with known block structure.

Every generator takes an explicit ``numpy.random.Generator``; :func:`gen` is
the front door that seeds one from an integer.

``hidden_tensor``  POVMs ``e (x) I`` and ``I (x) f`` on ``C^dA (x) C^dB``, hidden by a random unitary.
``direct_sum``     a direct sum of hidden-tensor blocks mixed with random weights.
``chsh``           the maximally entangled two-qubit strategy reaching ``2 sqrt 2``.
``classical``      every operator diagonal in one basis.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .matrixlab import dagger, ginibre, hermitize, psd_sqrt, random_unitary
from .scenario import BipartiteModel, MeasurementScenario, POVMFamily

KINDS = ("hidden-tensor", "direct-sum", "chsh", "classical")


class GeneratorError(ValueError):
    pass


def random_povm(dim: int, n_outcomes: int, rng: np.random.Generator) -> tuple[np.ndarray, ...]:
    """Random full-rank POVM: ``S^{-1/2} G_a S^{-1/2}`` with Wishart ``G_a`` and ``S = sum_a G_a``."""
    if n_outcomes < 1:
        raise GeneratorError("a POVM needs at least one outcome")
    if dim == 1:
        p = rng.dirichlet(np.ones(n_outcomes))
        return tuple(np.array([[q]], dtype=np.complex128) for q in p)
    G = [(lambda X: X @ dagger(X))(ginibre(dim, dim, rng)) for _ in range(n_outcomes)]
    S_inv_half = np.linalg.inv(psd_sqrt(sum(G)))
    elems = [hermitize(S_inv_half @ g @ S_inv_half) for g in G]
    # push the rounding error of the normalization into the last element
    elems[-1] = hermitize(np.eye(dim) - sum(elems[:-1]))
    return tuple(elems)


def random_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    X = ginibre(dim, dim, rng)
    dens = X @ dagger(X)
    return hermitize(dens / np.trace(dens).real)


def _scenario(alice_outcomes: Sequence[int], bob_outcomes: Sequence[int]) -> MeasurementScenario:
    if not alice_outcomes or not bob_outcomes:
        raise GeneratorError("each party needs at least one setting")
    if any(k < 1 for k in list(alice_outcomes) + list(bob_outcomes)):
        raise GeneratorError("every setting needs at least one outcome")
    return MeasurementScenario.from_counts(alice_outcomes, bob_outcomes)


def hidden_tensor(dA: int, dB: int, rng: np.random.Generator,
                  alice_outcomes: Sequence[int] = (2, 2), bob_outcomes: Sequence[int] = (2, 2),
                  obfuscate: bool = True, product_state: bool = False) -> BipartiteModel:
    """Random local POVMs on ``C^dA (x) C^dB``; ground-truth block profile ``[(dA, dB)]``.

    With fewer than two Alice settings and fewer than three outcomes, Alice's
    elements commute and do not generate ``M_dA``; the profile then differs.
    """
    if dA < 1 or dB < 1:
        raise GeneratorError("factor dimensions must be positive")
    sc = _scenario(alice_outcomes, bob_outcomes)
    n = dA * dB
    alice = POVMFamily(n, {x: tuple(np.kron(alice_el, np.eye(dB)) for alice_el in random_povm(dA, k, rng))
                           for x, k in sc.alice})
    bob = POVMFamily(n, {y: tuple(np.kron(np.eye(dA), bob_el) for bob_el in random_povm(dB, k, rng))
                         for y, k in sc.bob})
    if product_state:
        state = np.kron(random_state(dA, rng), random_state(dB, rng))
    else:
        state = random_state(n, rng)
    m = BipartiteModel(sc, n, alice, bob, state)
    if obfuscate:
        m = m.conjugated(random_unitary(n, rng))
    return m


def direct_sum(blocks: Sequence[tuple[int, int]], rng: np.random.Generator,
               alice_outcomes: Sequence[int] = (2, 2), bob_outcomes: Sequence[int] = (2, 2),
               obfuscate: bool = True) -> BipartiteModel:
    """Direct sum of independent hidden-tensor blocks ``(n_k, m_k)`` with a random convex mixture."""
    if not blocks:
        raise GeneratorError("direct sum needs at least one block")
    sc = _scenario(alice_outcomes, bob_outcomes)
    parts = [hidden_tensor(nk, mk, rng, alice_outcomes, bob_outcomes, obfuscate=False) for nk, mk in blocks]
    weights = rng.dirichlet(np.ones(len(parts)))
    n = sum(p.dim for p in parts)

    def dsum(mats):
        out = np.zeros((n, n), dtype=np.complex128)
        o = 0
        for M in mats:
            k = M.shape[0]
            out[o:o + k, o:o + k] = M
            o += k
        return out

    alice = POVMFamily(n, {x: tuple(dsum([p.alice[x][a] for p in parts]) for a in range(k))
                           for x, k in sc.alice})
    bob = POVMFamily(n, {y: tuple(dsum([p.bob[y][b] for p in parts]) for b in range(k))
                         for y, k in sc.bob})
    state = dsum([w * p.state for w, p in zip(weights, parts)])
    m = BipartiteModel(sc, n, alice, bob, state)
    if obfuscate:
        m = m.conjugated(random_unitary(n, rng))
    return m


def chsh(rng: np.random.Generator | None = None, obfuscate: bool = False) -> BipartiteModel:
    """Alice measures X, Z; Bob measures (X +- Z)/sqrt 2; state is the Bell state (|00>+|11>)/sqrt 2."""
    X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
    Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
    I2 = np.eye(2)

    def binarize(obs):
        return ((I2 + obs) / 2, (I2 - obs) / 2)

    alice = POVMFamily(4, {x: tuple(np.kron(P, I2) for P in binarize(O))
                           for x, O in (("x0", X), ("x1", Z))})
    bob = POVMFamily(4, {y: tuple(np.kron(I2, P) for P in binarize(O))
                         for y, O in (("y0", (X + Z) / np.sqrt(2)), ("y1", (X - Z) / np.sqrt(2)))})
    vec = np.array([1, 0, 0, 1], dtype=np.complex128) / np.sqrt(2)
    m = BipartiteModel(MeasurementScenario.from_counts((2, 2), (2, 2)), 4, alice, bob, np.outer(vec, vec.conj()))
    if obfuscate:
        if rng is None:
            raise GeneratorError("obfuscation needs a random generator")
        m = m.conjugated(random_unitary(4, rng))
    return m


def classical(n_hidden: int, rng: np.random.Generator, alice_outcomes: Sequence[int] = (2, 2),
              bob_outcomes: Sequence[int] = (2, 2)) -> BipartiteModel:
    """Diagonal POVMs ``diag(p(a|x,lambda))`` and a diagonal state over ``n_hidden`` hidden values."""
    if n_hidden < 1:
        raise GeneratorError("need at least one hidden value")
    sc = _scenario(alice_outcomes, bob_outcomes)

    def family(settings):
        return POVMFamily(n_hidden, {
            s: tuple(np.diag(col).astype(np.complex128)
                     for col in _stochastic_columns(n_hidden, k, rng))
            for s, k in settings})

    alice, bob = family(sc.alice), family(sc.bob)
    weights = rng.dirichlet(np.ones(n_hidden))
    return BipartiteModel(sc, n_hidden, alice, bob, np.diag(weights).astype(np.complex128))


def _stochastic_columns(n: int, k: int, rng) -> list[np.ndarray]:
    P = rng.dirichlet(np.ones(k), size=n)  # row lambda: p(.|lambda)
    P[:, -1] = 1.0 - P[:, :-1].sum(axis=1)
    return [P[:, a] for a in range(k)]


def gen(kind: str, seed: int, **params) -> BipartiteModel:
    """Build a model of the given kind from an integer seed.

    Parameters per kind: ``hidden-tensor``: ``dA, dB``; ``direct-sum``:
    ``blocks``; ``classical``: ``n_hidden``; ``chsh``: ``obfuscate``.  All
    kinds except ``chsh`` accept ``alice_outcomes`` and ``bob_outcomes``.
    """
    rng = np.random.default_rng(seed)
    try:
        if kind == "hidden-tensor":
            return hidden_tensor(params.pop("dA", 2), params.pop("dB", 3), rng, **params)
        if kind == "direct-sum":
            return direct_sum(params.pop("blocks", [(2, 2), (1, 3)]), rng, **params)
        if kind == "chsh":
            return chsh(rng, **params)
        if kind == "classical":
            return classical(params.pop("n_hidden", 4), rng, **params)
    except TypeError as exc:
        raise GeneratorError(f"bad parameters for {kind!r}: {exc}") from exc
    raise GeneratorError(f"unknown generator kind {kind!r}; choose from {', '.join(KINDS)}")


def ground_truth_blocks(kind: str, **params) -> list[tuple[int, int]] | None:
    """Block profile of Alice's algebra implied by the generator parameters, where known."""
    if kind == "hidden-tensor":
        return [(params.get("dA", 2), params.get("dB", 3))]
    if kind == "direct-sum":
        return [tuple(b) for b in params.get("blocks", [(2, 2), (1, 3)])]
    if kind == "chsh":
        return [(2, 2)]
    return None


def random_block_algebra_generators(profile: Sequence[tuple[int, int]], rng: np.random.Generator,
                                    count: int = 2, obfuscate: bool = True) -> list[np.ndarray]:
    """Generic elements of ``sum_k M_{n_k} (x) I_{m_k}``, optionally in a random basis."""
    n = sum(a * b for a, b in profile)
    U = random_unitary(n, rng) if obfuscate else np.eye(n)
    gens = []
    for _ in range(count):
        G = np.zeros((n, n), dtype=np.complex128)
        o = 0
        for a, b in profile:
            G[o:o + a * b, o:o + a * b] = np.kron(ginibre(a, a, rng), np.eye(b))
            o += a * b
        gens.append(U @ G @ dagger(U))
    return gens


def corpus_params(kind: str, rng: np.random.Generator) -> dict:
    """Random generator parameters: dims <= 12, 2-3 settings, 2-3 outcomes per setting.

    Alice always gets at least two settings so that her elements generate the
    full factor in every block, which keeps the ground truth exact.
    """
    outcomes = lambda: [int(k) for k in rng.integers(2, 4, size=rng.integers(2, 4))]  # noqa: E731
    params: dict = dict(alice_outcomes=outcomes(), bob_outcomes=outcomes())
    if kind == "hidden-tensor":
        params.update(dA=int(rng.integers(2, 4)), dB=int(rng.integers(2, 4)))
    elif kind == "direct-sum":
        K = int(rng.integers(2, 4))
        while True:
            blocks = [(int(rng.integers(1, 4)), int(rng.integers(1, 4))) for _ in range(K)]
            if sum(a * b for a, b in blocks) <= 12:
                break
        params["blocks"] = blocks
    elif kind == "classical":
        params["n_hidden"] = int(rng.integers(2, 13))
    else:
        raise GeneratorError(f"no corpus for kind {kind!r}")
    return params


def corpus(kind: str, count: int = 100, seed: int = 0) -> list[tuple[int, dict, BipartiteModel]]:
    """``count`` seeded models of one kind as ``(seed, params, model)`` triples."""
    out = []
    for i in range(count):
        s = seed * 100_003 + i
        params = corpus_params(kind, np.random.default_rng([s, 1]))
        out.append((s, params, gen(kind, s, **dict(params))))
    return out


def random_profile(rng: np.random.Generator, max_dim: int = 12, max_blocks: int = 3) -> list[tuple[int, int]]:
    """Random block profile ``[(n_k, m_k)]`` with ``n_k, m_k <= 3`` and ``sum n_k m_k <= max_dim``."""
    while True:
        K = int(rng.integers(1, max_blocks + 1))
        prof = [(int(rng.integers(1, 4)), int(rng.integers(1, 4))) for _ in range(K)]
        if sum(a * b for a, b in prof) <= max_dim:
            return prof


def algebra_corpus(count: int = 100, seed: int = 0) -> list[tuple[int, list[tuple[int, int]], list[np.ndarray]]]:
    """``(seed, profile, generators)`` for random obfuscated block algebras of dimension <= 12."""
    out = []
    for i in range(count):
        s = seed * 100_003 + i
        rng = np.random.default_rng([s, 2])
        prof = random_profile(rng)
        out.append((s, prof, random_block_algebra_generators(prof, rng)))
    return out
