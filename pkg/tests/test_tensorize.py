import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from atomexp import generators
from atomexp.matrixlab import DEFAULT_TOL, max_norm
from atomexp.scenario import ModelValidationError, POVMFamily, behavior, chsh_value, make_model
from atomexp.tensorize import (
    ComponentExtractionResidual,
    _extract,
    behavior_of,
    cross_check,
    intertwining_unitary,
    tensor_behavior,
    tensorize,
    verify_tensor_model,
)
from atomexp.vnalg import generated_algebra, wedderburn


def local_factors(dA, dB, seed):
    """The unobfuscated model together with the local POVMs it was built from."""
    m = generators.gen("hidden-tensor", seed, dA=dA, dB=dB, obfuscate=False)
    e = {x: [M.reshape(dA, dB, dA, dB)[:, 0, :, 0] for M in mats] for x, mats in m.alice.elements.items()}
    f = {y: [M.reshape(dA, dB, dA, dB)[0, :, 0, :] for M in mats] for y, mats in m.bob.elements.items()}
    return m, e, f


def test_explicit_tensor_product_recovers_factors(rng):
    m, e, f = local_factors(2, 3, 5)
    t = tensorize(m, rng)
    assert (t.dimA, t.dimB) == (2, 3)
    assert t.blocks == ((2, 3),)
    for fam, local in ((t.alice, e), (t.bob, f)):
        src = [M for mats in local.values() for M in mats]
        dst = fam.all_elements()
        W = intertwining_unitary(src, dst)
        assert W is not None
        assert max_norm(W @ W.conj().T - np.eye(W.shape[0])) < 1e-9
        assert max(max_norm(W @ s_el @ W.conj().T - t_el) for s_el, t_el in zip(src, dst)) < 1e-9
    assert verify_tensor_model(t, behavior(m)) < 1e-12


def test_intertwiner_absent_for_inequivalent_lists():
    assert intertwining_unitary([np.diag([1.0, 0.0])], [np.diag([1.0, 1.0])]) is None


def test_classical_model_gives_scalar_blocks(rng):
    m = generators.gen("classical", 3, n_hidden=6)
    t = tensorize(m, rng)
    assert all(n == 1 for n, _ in t.blocks)
    for alice_el in t.alice.all_elements():
        assert max_norm(alice_el - np.diag(np.diag(alice_el))) < 1e-12
    assert verify_tensor_model(t, behavior(m)) < 1e-12


def test_obfuscated_chsh(rng):
    m = generators.gen("chsh", 17, obfuscate=True)
    t = tensorize(m, rng)
    assert (t.dimA, t.dimB) == (2, 2)
    assert verify_tensor_model(t, behavior(m)) <= 1e-9
    assert abs(chsh_value(behavior_of(t)) - 2 * np.sqrt(2)) <= 1e-9


def test_maximally_mixed_state_residual(rng):
    m = generators.gen("chsh", 0)
    t = tensorize(m, rng)
    b = behavior(m)
    mixed = t.with_state(np.eye(t.dimA * t.dimB) / (t.dimA * t.dimB))
    expected = 0.0
    for x, _ in m.scenario.alice:
        for y, _ in m.scenario.bob:
            for a, alice_el in enumerate(t.alice[x]):
                for bb, bob_el in enumerate(t.bob[y]):
                    q = np.trace(alice_el).real * np.trace(bob_el).real / (t.dimA * t.dimB)
                    expected = max(expected, abs(b(a, bb, x, y) - q))
    assert verify_tensor_model(mixed, b) == pytest.approx(expected, abs=1e-14)
    assert expected > 0.1


def test_trivial_scenario(rng):
    m = make_model({"x0": (np.eye(3),)}, {"y0": (np.eye(3),)}, np.diag([0.5, 0.3, 0.2]))
    t = tensorize(m, rng)
    assert verify_tensor_model(t, behavior(m)) == pytest.approx(0.0, abs=1e-15)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10**6), kind=st.sampled_from(["hidden-tensor", "direct-sum", "classical"]))
def test_reproduction_economy_and_completeness(seed, kind):
    params = generators.corpus_params(kind, np.random.default_rng(seed))
    m = generators.gen(kind, seed, **params)
    b = behavior(m)
    t = tensorize(m, np.random.default_rng(seed))
    assert verify_tensor_model(t, b) <= 1e-8
    assert t.dimA <= m.dim and t.dimB <= m.dim
    assert t.alice.completeness_residual() <= 1e-9
    assert t.bob.completeness_residual() <= 1e-9
    gt = generators.ground_truth_blocks(kind, **params)
    if gt is not None:
        assert sorted(t.blocks) == sorted(gt)


def test_chsh_preserved_on_two_by_two_models(rng):
    for seed in range(5):
        m = generators.gen("direct-sum", seed, blocks=[(2, 1), (1, 2)])
        b = behavior(m)
        t = tensorize(m, rng)
        assert abs(chsh_value(b) - chsh_value(behavior_of(t))) <= 1e-8


def test_padding_mode(rng):
    m = generators.gen("direct-sum", 4, blocks=[(2, 1), (1, 2)])
    t = tensorize(m, rng, padding=True)
    assert t.dimA == t.dimB == m.dim
    assert verify_tensor_model(t, behavior(m)) <= 1e-9
    assert all(v <= 1e-9 for v in t.invariant_residuals().values())


def test_bob_side_and_cross_check(rng):
    m = generators.gen("direct-sum", 12, blocks=[(2, 3), (1, 2)])
    tb = tensorize(m, rng, side="bob")
    assert sorted(tb.blocks) == [(1, 2), (2, 3)]
    assert verify_tensor_model(tb, behavior(m)) <= 1e-9
    assert cross_check(m, rng) <= 1e-9
    with pytest.raises(ValueError):
        tensorize(m, rng, side="charlie")


def test_invalid_model_rejected(rng):
    m = generators.gen("hidden-tensor", 1, dA=2, dB=2)
    broken = make_model({x: [2 * alice_el for alice_el in mats] for x, mats in m.alice.elements.items()},
                        dict(m.bob.elements), m.state)
    with pytest.raises(ModelValidationError):
        tensorize(broken, rng)


def test_extraction_residual_for_non_commuting_family(rng):
    m = generators.gen("hidden-tensor", 1, dA=2, dB=2)
    data = wedderburn(generated_algebra(4, m.alice.all_elements()), rng)
    X = np.diag([1.0, 0, 0, 0])
    fam = POVMFamily(4, {"y0": (X, np.eye(4) - X)})
    with pytest.raises(ComponentExtractionResidual):
        _extract(fam, data, "second", DEFAULT_TOL)


def test_tensor_json_and_behavior_table(rng):
    m = generators.gen("hidden-tensor", 2, dA=2, dB=3)
    t = tensorize(m, rng)
    obj = json.loads(json.dumps(t.to_json()))
    assert obj["dimA"] == 2 and obj["dimB"] == 3
    assert set(obj) >= {"scenario", "alice_povms", "bob_povms", "state"}
    tab = tensor_behavior(t)
    b = behavior_of(t)
    assert max(float(np.max(np.abs(tab[k] - b.table[k]))) for k in tab) < 1e-13
