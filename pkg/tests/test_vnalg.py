import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from atomexp import generators, vnalg
from atomexp.matrixlab import max_norm, random_unitary
from atomexp.vnalg import (
    RetriesExhausted,
    center,
    commutant,
    corner_dimension,
    full_algebra,
    generated_algebra,
    minimal_central_projections,
    minimal_projection_resolution,
    scalar_algebra,
    span_algebra,
    split_tensor_component,
    wedderburn,
)

from conftest import pauli


def units(n):
    return [np.outer(np.eye(n)[i], np.eye(n)[j]) for i in range(n) for j in range(n)]


def block_units(sizes):
    """Matrix units of the block-diagonal algebra with the given block sizes."""
    n = sum(sizes)
    out, o = [], 0
    for s in sizes:
        for i in range(s):
            for j in range(s):
                alice_el = np.zeros((n, n))
                alice_el[o + i, o + j] = 1
                out.append(alice_el)
        o += s
    return out


def brute_commutant_dim(n, gens):
    cols = [np.concatenate([(G @ alice_el - alice_el @ G).ravel() for G in gens]) for alice_el in units(n)]
    return n * n - np.linalg.matrix_rank(np.array(cols).T, tol=1e-10)


def diag_algebra(n):
    return span_algebra(n, [np.diag(np.eye(n)[i]) for i in range(n)])


M2_M3 = span_algebra(5, block_units([2, 3]))


def test_commutant_examples():
    X, _, Z = pauli()
    assert commutant(3, []).dimension == 9
    assert commutant(2, [X, Z]).dimension == 1 == brute_commutant_dim(2, [X, Z])
    D = np.diag([1.0, 2.0, 2.0])
    assert commutant(3, [D]).dimension == 5 == brute_commutant_dim(3, [D])


@pytest.mark.parametrize("seed", range(5))
def test_commutant_matches_brute_force(seed):
    r = np.random.default_rng(seed)
    prof = generators.random_profile(r, max_dim=6)
    gens = generators.random_block_algebra_generators(prof, r)
    n = gens[0].shape[0]
    comm = commutant(n, gens)
    assert comm.dimension == brute_commutant_dim(n, gens) == sum(m * m for _, m in prof)
    assert comm.is_valid()


def test_commutant_of_non_normal_generator_is_an_algebra():
    J = np.diag([1.0, 1.0], k=1)  # nilpotent Jordan block on C^3
    comm = commutant(3, [J])
    # X commutes with J and J^dagger only for scalars
    assert comm.dimension == 1
    assert generated_algebra(3, [J]).dimension == 9


def test_generated_algebra_examples():
    assert generated_algebra(3, [np.eye(3)]).dimension == 1
    alg = generated_algebra(2, [np.diag([1.0, 0.0]), np.diag([0.0, 1.0])])
    assert alg.dimension == 2
    assert alg.subspace_distance(diag_algebra(2)) < 1e-12


def test_generated_algebra_is_double_commutant_fixed_point(rng):
    gens = [rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6)) for _ in range(2)]
    alg = generated_algebra(6, gens)
    assert alg.dimension == 36
    alg2 = generated_algebra(6, list(alg.basis))
    assert alg2.dimension == alg.dimension
    assert alg.subspace_distance(alg2) <= 1e-9
    for G in gens + [g.conj().T for g in gens] + [np.eye(6)]:
        assert alg.residual(G) <= 1e-9 * np.linalg.norm(G)


def test_center_examples():
    assert center(full_algebra(4)).dimension == 1
    D = diag_algebra(3)
    assert center(D).dimension == 3
    assert center(D).subspace_distance(D) < 1e-12
    assert center(M2_M3).dimension == 2


def test_minimal_central_projections_examples(rng):
    (P,) = minimal_central_projections(scalar_algebra(3), rng)
    assert np.allclose(P, np.eye(3))
    ranks = sorted(round(np.trace(z).real) for z in minimal_central_projections(M2_M3, rng))
    assert ranks == [2, 3]
    zs = minimal_central_projections(diag_algebra(3), rng)
    assert len(zs) == 3 and all(abs(np.trace(z) - 1) < 1e-12 for z in zs)
    assert max_norm(sum(zs) - np.eye(3)) < 1e-12


def test_minimal_central_projections_retry_cap(rng, monkeypatch):
    monkeypatch.setattr(vnalg, "cluster_eigenvalues", lambda w, tol=None: None)
    with pytest.raises(RetriesExhausted):
        minimal_central_projections(M2_M3, rng)


def test_cluster_eigenvalues():
    assert [list(c) for c in vnalg.cluster_eigenvalues(np.array([0.0, 1e-14, 1.0]))] == [[0, 1], [2]]
    assert vnalg.cluster_eigenvalues(np.array([0.0, 1e-7, 1.0])) is None


def test_wedderburn_examples(rng):
    assert wedderburn(full_algebra(3), rng).profile == [(3, 1)]
    assert wedderburn(scalar_algebra(4), rng).profile == [(1, 4)]
    m = generators.gen("hidden-tensor", 11, dA=2, dB=3)
    data = wedderburn(generated_algebra(6, m.alice.all_elements()), rng)
    assert data.profile == [(2, 3)]
    assert data.to_json() == {"blocks": [{"n": 2, "m": 3}], "algebra_dim": 4,
                              "commutant_dim": 9, "center_dim": 1}


def test_wedderburn_isometries_factor_the_algebra(rng):
    prof = [(2, 2), (1, 3), (3, 1)]
    gens = generators.random_block_algebra_generators(prof, rng)
    alg = generated_algebra(10, gens)
    data = wedderburn(alg, rng)
    assert sorted(data.profile) == sorted(prof)
    assert all(v < 1e-10 for v in data.invariant_residuals(10).values())
    for blk in data.blocks:
        for alg2 in alg.basis:
            _, res = split_tensor_component(blk.compress(alg2), blk.n, blk.m, "first")
            assert res < 1e-10


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_wedderburn_profile_is_unitarily_invariant(seed):
    r = np.random.default_rng(seed)
    prof = generators.random_profile(r, max_dim=8)
    gens = generators.random_block_algebra_generators(prof, r, obfuscate=False)
    n = gens[0].shape[0]
    U = random_unitary(n, r)
    p1 = wedderburn(generated_algebra(n, gens), r).profile
    p2 = wedderburn(generated_algebra(n, [U @ G @ U.conj().T for G in gens]), r).profile
    assert sorted(p1) == sorted(p2) == sorted(prof)


def test_minimal_projection_resolution_examples(rng):
    ps = minimal_projection_resolution(diag_algebra(3), rng)
    expected = [np.diag(np.eye(3)[i]) for i in range(3)]
    assert len(ps) == 3
    for alice_el in expected:
        assert min(max_norm(P - alice_el) for P in ps) < 1e-12
    (P,) = minimal_projection_resolution(scalar_algebra(4), rng)
    assert np.allclose(P, np.eye(4))
    ps = minimal_projection_resolution(M2_M3, rng)
    assert sorted(round(np.trace(p).real) for p in ps) == [1] * 5
    assert max_norm(sum(ps) - np.eye(5)) < 1e-12
    assert all(corner_dimension(M2_M3, p) == 1 for p in ps)
    assert corner_dimension(M2_M3, np.eye(5)) == 13


def test_split_tensor_component():
    alg = np.array([[1.0, 2.0], [3.0, 4.0]])
    C, res = split_tensor_component(np.kron(alg, np.eye(3)), 2, 3, "first")
    assert np.allclose(C, alg) and res < 1e-15
    C, res = split_tensor_component(np.kron(np.eye(3), alg), 3, 2, "second")
    assert np.allclose(C, alg) and res < 1e-15
    _, res = split_tensor_component(np.kron(alg, np.diag([1.0, 0.0])), 2, 2, "first")
    assert res > 0.1


def test_closure_residuals_detect_non_algebra():
    E01 = np.array([[0, 1], [0, 0]], dtype=complex)
    bad = span_algebra(2, [np.eye(2), E01])
    res = bad.closure_residuals()
    assert res["adjoint"] > 0.5
    assert not bad.is_valid()
