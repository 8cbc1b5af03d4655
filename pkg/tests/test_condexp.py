import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from atomexp import generators
from atomexp.condexp import (
    InvalidAlgebra,
    apply,
    choi_matrix,
    expectation_onto,
    invariant_residuals,
    predual_apply,
    predual_identity_residual,
    verify_sandwich,
)
from atomexp.matrixlab import ginibre, max_norm, partial_trace
from atomexp.scenario import POVMFamily
from atomexp.vnalg import full_algebra, generated_algebra, scalar_algebra, span_algebra


def diagonal(n):
    return span_algebra(n, [np.diag(np.eye(n)[i]) for i in range(n)])


def test_onto_diagonal_is_pinching(rng):
    op = ginibre(4, 4, rng)
    cexp = expectation_onto(diagonal(4))
    assert max_norm(cexp(op) - np.diag(np.diag(op))) < 1e-14
    assert np.allclose(apply(cexp, np.eye(4)), np.eye(4))


def test_pinching_two_by_two():
    cexp = expectation_onto(diagonal(2))
    assert max_norm(cexp(np.array([[1.0, 5.0], [5.0, 1.0]])) - np.eye(2)) < 1e-15


def test_onto_scalars_is_normalized_trace(rng):
    op = ginibre(5, 5, rng)
    cexp = expectation_onto(scalar_algebra(5))
    assert max_norm(cexp(op) - np.trace(op) / 5 * np.eye(5)) < 1e-14


@pytest.mark.parametrize("d,m", [(2, 3), (3, 2), (2, 2)])
def test_onto_factor_is_partial_trace(d, m, rng):
    units = [np.kron(np.outer(np.eye(d)[i], np.eye(d)[j]), np.eye(m)) for i in range(d) for j in range(d)]
    cexp = expectation_onto(span_algebra(d * m, units))
    op = ginibre(d * m, d * m, rng)
    expected = np.kron(partial_trace(op, (d, m), "second") / m, np.eye(m))
    assert max_norm(cexp(op) - expected) < 1e-13


def test_fixes_identity_and_range(rng):
    gens = generators.random_block_algebra_generators([(2, 1), (1, 2)], rng)
    alg = generated_algebra(4, gens)
    cexp = expectation_onto(alg)
    assert max_norm(cexp(np.eye(4)) - np.eye(4)) < 1e-12
    elem = alg.random_element(rng, hermitian=False)
    assert max_norm(cexp(elem) - elem) < 1e-12
    assert alg.residual(cexp(ginibre(4, 4, rng))) < 1e-12


def test_apply_accepts_stacks(rng):
    cexp = expectation_onto(diagonal(3))
    op = np.asarray([ginibre(3, 3, rng) for _ in range(4)])
    assert np.allclose(apply(cexp, op), [cexp(t) for t in op])
    with pytest.raises(ValueError):
        cexp(np.eye(4))


def test_predual_examples(rng):
    alg = generated_algebra(6, generators.random_block_algebra_generators([(2, 2), (1, 2)], rng))
    cexp = expectation_onto(alg)
    assert max_norm(predual_apply(cexp, np.eye(6) / 6) - np.eye(6) / 6) < 1e-14
    functional = ginibre(6, 6, rng)
    assert abs(np.trace(predual_apply(cexp, functional)) - np.trace(functional)) < 1e-12
    assert predual_identity_residual(cexp, functional) <= 1e-10


def test_choi_matrix_is_psd(rng):
    alg = generated_algebra(5, generators.random_block_algebra_generators([(1, 2), (3, 1)], rng))
    C = choi_matrix(expectation_onto(alg, check_cp=True))
    assert np.linalg.eigvalsh(C)[0] >= -1e-12
    # Choi of the identity map on M_2 is the unnormalized Bell projector
    C = choi_matrix(expectation_onto(full_algebra(2)))
    vec = np.array([1, 0, 0, 1])
    assert np.allclose(C, np.outer(vec, vec))


def test_rejects_non_algebra():
    E01 = np.array([[0, 1], [0, 0]], dtype=complex)
    with pytest.raises(InvalidAlgebra):
        expectation_onto(span_algebra(2, [np.eye(2), E01]))


def test_hs_contraction(rng):
    alg = generated_algebra(6, generators.random_block_algebra_generators([(2, 3)], rng))
    cexp = expectation_onto(alg)
    for _ in range(5):
        op = ginibre(6, 6, rng)
        assert np.linalg.norm(cexp(op)) <= np.linalg.norm(op) + 1e-12


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_invariants_on_random_block_algebras(seed):
    r = np.random.default_rng(seed)
    prof = generators.random_profile(r, max_dim=8)
    gens = generators.random_block_algebra_generators(prof, r)
    cexp = expectation_onto(generated_algebra(gens[0].shape[0], gens), check_cp=True)
    assert all(v <= 1e-9 for v in invariant_residuals(cexp, r).values())


def test_sandwich_holds_for_valid_models():
    for kind in ("hidden-tensor", "direct-sum", "classical", "chsh"):
        m = generators.gen(kind, 4)
        cexp = expectation_onto(generated_algebra(m.dim, m.bob.all_elements()))
        rep = verify_sandwich(cexp, m.alice, m.bob)
        assert rep.ok, (kind, rep)
        assert rep.containment < 1e-10 and rep.commutation < 1e-10


def test_sandwich_onto_scalars_fails_containment():
    m = generators.gen("hidden-tensor", 4, dA=2, dB=2)
    cexp = expectation_onto(scalar_algebra(4))
    rep = verify_sandwich(cexp, m.alice, m.bob)
    expected = max(np.linalg.norm(bob_el - np.trace(bob_el) / 4 * np.eye(4)) for bob_el in m.bob.all_elements())
    assert rep.containment == pytest.approx(expected, rel=1e-10)
    assert not rep.containment_ok and rep.commutation_ok


def test_sandwich_onto_full_algebra_fails_commutation():
    m = generators.gen("hidden-tensor", 4, dA=2, dB=2)
    cexp = expectation_onto(full_algebra(4))
    rep = verify_sandwich(cexp, m.alice, m.bob)
    assert rep.containment_ok and not rep.commutation_ok
    trivial = POVMFamily(4, {"x0": (np.eye(4),)})
    assert verify_sandwich(cexp, trivial, m.bob).ok
    assert set(rep.to_json()) == {"containment", "commutation", "pass"}
