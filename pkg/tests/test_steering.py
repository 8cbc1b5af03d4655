import json

import numpy as np
import pytest

from atomexp import generators
from atomexp.condexp import expectation_onto, predual_apply
from atomexp.matrixlab import max_norm, partial_trace
from atomexp.scenario import POVMFamily, behavior, make_model
from atomexp.steering import (
    SandwichViolation,
    SteeringAssemblage,
    build_assemblage,
    verify_reproduction,
    verify_x_independence,
)
from atomexp.vnalg import generated_algebra, scalar_algebra


def phi_bob(m):
    return expectation_onto(generated_algebra(m.dim, m.bob.all_elements()))


@pytest.mark.parametrize("dA,dB", [(2, 2), (2, 3), (3, 2)])
def test_product_state_assemblage_matches_hand_form(dA, dB):
    m = generators.gen("hidden-tensor", 21, dA=dA, dB=dB, obfuscate=False, product_state=True)
    s = build_assemblage(m, phi_bob(m))
    for x, mats in m.alice.elements.items():
        for a, alice_el in enumerate(mats):
            hand = np.kron(np.eye(dA) / dA, partial_trace(alice_el @ m.state, (dA, dB), "first"))
            assert max_norm(s.members[x][a] - hand) <= 1e-10


def test_single_outcome_member_is_barycenter():
    base = generators.gen("hidden-tensor", 2, dA=2, dB=2)
    alice = POVMFamily(4, {"x0": (np.eye(4),)})
    m = make_model(dict(alice.elements), dict(base.bob.elements), base.state)
    cexp = phi_bob(m)
    s = build_assemblage(m, cexp)
    assert max_norm(s.members["x0"][0] - predual_apply(cexp, m.state)) < 1e-12
    assert max_norm(s.members["x0"][0] - s.barycenter) < 1e-12


def test_chsh_member_traces_are_alice_marginals(chsh_model):
    s = build_assemblage(chsh_model, phi_bob(chsh_model))
    b = behavior(chsh_model)
    for x, ss in s.members.items():
        for a, member in enumerate(ss):
            assert abs(np.trace(member).real - b.alice_marginal(x, "y0")[a]) < 1e-12
            assert abs(np.trace(member).real - 0.5) < 1e-12


@pytest.mark.parametrize("kind", ["hidden-tensor", "direct-sum", "classical", "chsh"])
def test_setting_independence_and_reproduction(kind):
    for seed in range(5):
        m = generators.gen(kind, seed)
        s = build_assemblage(m, phi_bob(m))
        assert verify_x_independence(s) <= 1e-9
        assert verify_reproduction(s, m, behavior(m)) <= 1e-9
        assert all(v <= 1e-9 for v in s.invariant_residuals().values())


def test_x_independence_hand_built():
    bad = SteeringAssemblage.from_members({"x0": [np.diag([1.0, 0.0])], "x1": [np.diag([0.0, 1.0])]})
    assert verify_x_independence(bad) == 1.0
    single = SteeringAssemblage.from_members({"x0": [np.diag([0.3, 0.1]), np.diag([0.2, 0.4])]})
    assert verify_x_independence(single) == 0.0


def test_reproduction_with_uniform_bob():
    m = generators.gen("direct-sum", 6, bob_outcomes=[2, 3])
    b = behavior(m)
    s = build_assemblage(m, phi_bob(m))
    uniform = {y: tuple(np.eye(m.dim) / k for _ in range(k)) for y, k in m.scenario.bob}
    m_unif = make_model(dict(m.alice.elements), uniform, m.state)
    expected = 0.0
    for (x, y), t in b.table.items():
        expected = max(expected, float(np.max(np.abs(t - t.sum(axis=1, keepdims=True) / t.shape[1]))))
    assert verify_reproduction(s, m_unif, b) == pytest.approx(expected, abs=1e-12)
    assert expected > 1e-3


def test_trivial_scenario_reproduces_exactly():
    ident = np.eye(3, dtype=complex)
    m = make_model({"x0": (ident,)}, {"y0": (ident,)}, np.eye(3) / 3)
    s = build_assemblage(m, phi_bob(m))
    assert verify_reproduction(s, m, behavior(m)) == 0.0


def test_sandwich_violation_raised():
    m = generators.gen("hidden-tensor", 3, dA=2, dB=2)
    with pytest.raises(SandwichViolation):
        build_assemblage(m, expectation_onto(scalar_algebra(4)))


def test_barycenter_trace_and_bookkeeping():
    m = generators.gen("hidden-tensor", 9, dA=3, dB=2)
    s = build_assemblage(m, phi_bob(m))
    assert abs(np.trace(s.barycenter) - 1) < 1e-12
    for x, ss in s.members.items():
        assert abs(sum(np.trace(t).real for t in ss) - 1) < 1e-12


def test_assemblage_json():
    m = generators.gen("chsh", 0)
    s = build_assemblage(m, phi_bob(m))
    obj = json.loads(json.dumps(s.to_json({"x_independence": 0.0, "reproduction": 0.0})))
    assert set(obj) == {"barycenter", "members", "residuals"}
    assert set(obj["members"]["x0"]) == {"0", "1"}
    back = SteeringAssemblage.from_json(obj)
    assert np.array_equal(back.barycenter, s.barycenter)
    assert np.array_equal(back.members["x1"][1], s.members["x1"][1])
