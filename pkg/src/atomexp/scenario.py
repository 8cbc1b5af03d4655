"""Bipartite commuting-operator measurement models and their behaviors.

A model consists of two POVM families acting on the same Hilbert space
``C^n`` together with a density operator.  Every Alice element must commute
with every Bob element; the joint outcome statistics are then
``p(a,b|x,y) = tr(rho E^x_a F^y_b)``.

Settings carry opaque string labels; outcomes are labelled ``"0", "1", ...``
by their position.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .matrixlab import (
    DEFAULT_TOL,
    Tolerances,
    as_matrix,
    dagger,
    matrix_from_json,
    matrix_to_json,
    max_norm,
    min_eigenvalue,
)


class ModelStructureError(ValueError):
    """Shapes or labels of a model are inconsistent."""


class ModelValidationError(ValueError):
    """A numerical hypothesis on the model (completeness, positivity, commutation) fails."""


class InternalConsistencyError(RuntimeError):
    pass


class ScenarioMismatch(ValueError):
    pass


@dataclass(frozen=True)
class MeasurementScenario:
    """Settings and outcome counts for both parties.

    ``alice`` and ``bob`` are tuples of ``(setting_label, n_outcomes)``.
    """

    alice: tuple[tuple[str, int], ...]
    bob: tuple[tuple[str, int], ...]

    def __post_init__(self):
        for side, settings in (("alice", self.alice), ("bob", self.bob)):
            if not settings:
                raise ModelStructureError(f"{side} has no settings")
            labels = [s for s, _ in settings]
            if len(set(labels)) != len(labels):
                raise ModelStructureError(f"{side} has duplicate setting labels")
            for label, k in settings:
                if int(k) < 1:
                    raise ModelStructureError(f"{side} setting {label!r} has no outcomes")

    @classmethod
    def from_counts(cls, alice: Sequence[int], bob: Sequence[int]) -> "MeasurementScenario":
        return cls(tuple((f"x{i}", int(k)) for i, k in enumerate(alice)),
                   tuple((f"y{i}", int(k)) for i, k in enumerate(bob)))

    def settings(self, side: str) -> tuple[tuple[str, int], ...]:
        if side == "alice":
            return self.alice
        if side == "bob":
            return self.bob
        raise ValueError(f"side must be 'alice' or 'bob', got {side!r}")

    @property
    def shape(self) -> tuple[tuple[int, ...], tuple[int, ...]]:
        return tuple(k for _, k in self.alice), tuple(k for _, k in self.bob)

    def swapped(self) -> "MeasurementScenario":
        return MeasurementScenario(self.bob, self.alice)

    def to_json(self) -> dict:
        return {"alice": [[s, k] for s, k in self.alice], "bob": [[s, k] for s, k in self.bob]}

    @classmethod
    def from_json(cls, obj: dict) -> "MeasurementScenario":
        try:
            return cls(tuple((str(s), int(k)) for s, k in obj["alice"]),
                       tuple((str(s), int(k)) for s, k in obj["bob"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelStructureError(f"malformed scenario: {exc}") from exc


@dataclass(frozen=True)
class POVMFamily:
    """POVM elements per setting: ``elements[label]`` is a tuple of ``dim x dim`` matrices."""

    dim: int
    elements: Mapping[str, tuple[np.ndarray, ...]]

    def __post_init__(self):
        cleaned = {}
        for label, mats in self.elements.items():
            if len(mats) == 0:
                raise ModelStructureError(f"setting {label!r} has no POVM elements")
            arrs = []
            for M in mats:
                arr = as_matrix(M)
                if arr.shape != (self.dim, self.dim):
                    raise ModelStructureError(
                        f"POVM element for {label!r} has shape {arr.shape}, expected "
                        f"({self.dim}, {self.dim})")
                arr.setflags(write=False)
                arrs.append(arr)
            cleaned[str(label)] = tuple(arrs)
        object.__setattr__(self, "elements", cleaned)

    def settings(self) -> tuple[tuple[str, int], ...]:
        return tuple((label, len(mats)) for label, mats in self.elements.items())

    def all_elements(self) -> list[np.ndarray]:
        return [M for mats in self.elements.values() for M in mats]

    def __getitem__(self, label: str) -> tuple[np.ndarray, ...]:
        return self.elements[label]

    def completeness_residual(self) -> float:
        eye = np.eye(self.dim)
        return max(max_norm(sum(mats) - eye) for mats in self.elements.values())

    def positivity_residual(self) -> float:
        """How far the worst element is below zero (0 when all are PSD)."""
        return max(max(0.0, -min_eigenvalue(M)) for M in self.all_elements())

    def hermiticity_residual(self) -> float:
        return max(max_norm(M - dagger(M)) for M in self.all_elements())

    def transformed(self, f) -> "POVMFamily":
        return POVMFamily(self.dim, {k: tuple(f(M) for M in v) for k, v in self.elements.items()})


@dataclass
class ValidationReport:
    """Worst residual and pass flag for each model hypothesis."""

    residuals: dict[str, float] = field(default_factory=dict)
    passed: dict[str, bool] = field(default_factory=dict)

    def add(self, name: str, residual: float, threshold: float) -> None:
        self.residuals[name] = float(residual)
        self.passed[name] = bool(residual <= threshold)

    @property
    def ok(self) -> bool:
        return all(self.passed.values())

    def failures(self) -> list[str]:
        return [k for k, v in self.passed.items() if not v]

    def to_json(self) -> dict:
        return {"pass": self.ok,
                "conditions": {k: {"residual": self.residuals[k], "pass": self.passed[k]}
                               for k in self.residuals}}


@dataclass(frozen=True)
class BipartiteModel:
    scenario: MeasurementScenario
    dim: int
    alice: POVMFamily
    bob: POVMFamily
    state: np.ndarray

    def __post_init__(self):
        if self.alice.dim != self.dim or self.bob.dim != self.dim:
            raise ModelStructureError(
                f"POVM dimensions ({self.alice.dim}, {self.bob.dim}) differ from model dim {self.dim}")
        if self.alice.settings() != self.scenario.alice:
            raise ModelStructureError("Alice POVMs do not match the scenario")
        if self.bob.settings() != self.scenario.bob:
            raise ModelStructureError("Bob POVMs do not match the scenario")
        dens = as_matrix(self.state)
        if dens.shape != (self.dim, self.dim):
            raise ModelStructureError(f"state has shape {dens.shape}, expected ({self.dim}, {self.dim})")
        dens.setflags(write=False)
        object.__setattr__(self, "state", dens)

    def conjugated(self, U: np.ndarray) -> "BipartiteModel":
        """The same model after the change of basis ``X -> U X U^dagger``."""
        f = lambda M: U @ M @ dagger(U)  # noqa: E731
        return BipartiteModel(self.scenario, self.dim, self.alice.transformed(f),
                              self.bob.transformed(f), f(self.state))

    def swapped(self) -> "BipartiteModel":
        """Exchange the roles of Alice and Bob."""
        return BipartiteModel(self.scenario.swapped(), self.dim, self.bob, self.alice, self.state)

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "scenario": self.scenario.to_json(),
            "alice_povms": {x: [matrix_to_json(M) for M in mats] for x, mats in self.alice.elements.items()},
            "bob_povms": {y: [matrix_to_json(M) for M in mats] for y, mats in self.bob.elements.items()},
            "state": matrix_to_json(self.state),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "BipartiteModel":
        try:
            dim = int(obj["dim"])
            scenario = MeasurementScenario.from_json(obj["scenario"])
            alice = _povms_from_json(dim, scenario.alice, obj["alice_povms"])
            bob = _povms_from_json(dim, scenario.bob, obj["bob_povms"])
            state = matrix_from_json(obj["state"])
        except (KeyError, TypeError) as exc:
            raise ModelStructureError(f"malformed model JSON: missing or bad field {exc}") from exc
        return cls(scenario, dim, alice, bob, state)


def _povms_from_json(dim, settings, obj) -> POVMFamily:
    elements = {}
    for label, k in settings:
        mats = obj[label]
        if len(mats) != k:
            raise ModelStructureError(f"setting {label!r} declares {k} outcomes but has {len(mats)} elements")
        elements[label] = tuple(matrix_from_json(m) for m in mats)
    extra = set(obj) - {s for s, _ in settings}
    if extra:
        raise ModelStructureError(f"POVMs given for undeclared settings {sorted(extra)}")
    return POVMFamily(dim, elements)


def commutation_residual(alice: POVMFamily, bob: POVMFamily) -> float:
    """max over all element pairs of ``||[E, F]||_max``."""
    alice_el = np.asarray(alice.all_elements())
    bob_el = np.asarray(bob.all_elements())
    prod_ab = np.einsum("aij,bjk->abik", alice_el, bob_el)
    prod_ba = np.einsum("bij,ajk->abik", bob_el, alice_el)
    return max_norm(prod_ab - prod_ba)


def validate_model(m: BipartiteModel, tol: Tolerances = DEFAULT_TOL) -> ValidationReport:
    """Check POVM completeness and positivity, the state, and cross-commutation."""
    if m.alice.dim != m.dim or m.bob.dim != m.dim or m.state.shape != (m.dim, m.dim):
        raise ModelStructureError("dimension mismatch between POVM families and state")
    eps = tol.eps_eq
    r = ValidationReport()
    r.add("alice_hermitian", m.alice.hermiticity_residual(), tol.eps_herm)
    r.add("bob_hermitian", m.bob.hermiticity_residual(), tol.eps_herm)
    r.add("alice_positive", m.alice.positivity_residual(), tol.eps_psd)
    r.add("bob_positive", m.bob.positivity_residual(), tol.eps_psd)
    r.add("alice_completeness", m.alice.completeness_residual(), eps)
    r.add("bob_completeness", m.bob.completeness_residual(), eps)
    r.add("commutation", commutation_residual(m.alice, m.bob), eps)
    dens = m.state
    r.add("state_hermitian", max_norm(dens - dagger(dens)), tol.eps_herm)
    r.add("state_positive", max(0.0, -min_eigenvalue(dens)), tol.eps_psd)
    r.add("state_trace", abs(np.trace(dens) - 1.0), eps)
    return r


class Behavior:
    """Joint outcome probabilities ``p(a,b|x,y)``.

    ``table[(x, y)]`` is an ``|A_x| x |B_y|`` real array indexed by outcome.
    """

    def __init__(self, scenario: MeasurementScenario, table: Mapping[tuple[str, str], np.ndarray]):
        self.scenario = scenario
        self.table = {}
        for x, ka in scenario.alice:
            for y, kb in scenario.bob:
                t = np.array(table[(x, y)], dtype=float)
                if t.shape != (ka, kb):
                    raise ScenarioMismatch(f"table entry ({x},{y}) has shape {t.shape}, expected {(ka, kb)}")
                t.setflags(write=False)
                self.table[(x, y)] = t

    def __call__(self, a: int, b: int, x: str, y: str) -> float:
        return float(self.table[(x, y)][a, b])

    def alice_marginal(self, x: str, y: str) -> np.ndarray:
        return self.table[(x, y)].sum(axis=1)

    def bob_marginal(self, x: str, y: str) -> np.ndarray:
        return self.table[(x, y)].sum(axis=0)

    def invariant_residuals(self) -> dict[str, float]:
        """Residuals of range, normalization and no-signalling."""
        tabs = list(self.table.values())
        below = max(max(0.0, -t.min()) for t in tabs)
        above = max(max(0.0, t.max() - 1.0) for t in tabs)
        norm = max(abs(t.sum() - 1.0) for t in tabs)
        ns_a = 0.0
        for x, _ in self.scenario.alice:
            margs = [self.alice_marginal(x, y) for y, _ in self.scenario.bob]
            ns_a = max(ns_a, max(float(np.max(np.abs(m - margs[0]))) for m in margs))
        ns_b = 0.0
        for y, _ in self.scenario.bob:
            margs = [self.bob_marginal(x, y) for x, _ in self.scenario.alice]
            ns_b = max(ns_b, max(float(np.max(np.abs(m - margs[0]))) for m in margs))
        return {"range": max(below, above), "normalization": norm,
                "no_signalling_alice": ns_a, "no_signalling_bob": ns_b}

    def max_difference(self, other: "Behavior") -> float:
        if other.scenario != self.scenario:
            raise ScenarioMismatch("behaviors belong to different scenarios")
        return max(float(np.max(np.abs(self.table[k] - other.table[k]))) for k in self.table)

    def to_json(self) -> dict:
        return {"scenario": self.scenario.to_json(),
                "table": {x: {y: self.table[(x, y)].tolist() for y, _ in self.scenario.bob}
                          for x, _ in self.scenario.alice}}


def behavior(m: BipartiteModel, tol: Tolerances = DEFAULT_TOL) -> Behavior:
    """``p(a,b|x,y) = tr(rho E^x_a F^y_b)`` for a model that passes validation."""
    report = validate_model(m, tol)
    if not report.ok:
        raise ModelValidationError(f"model fails validation: {', '.join(report.failures())}")
    table = {}
    dens = m.state
    for x, _ in m.scenario.alice:
        alice_el = np.asarray(m.alice[x])
        for y, _ in m.scenario.bob:
            bob_el = np.asarray(m.bob[y])
            # tr(rho E F) = sum_ijk rho_ij E_jk F_ki
            p = np.einsum("ij,ajk,bki->ab", dens, alice_el, bob_el)
            if max_norm(p.imag) > tol.eps_eq:
                raise InternalConsistencyError(
                    f"probabilities for ({x},{y}) have imaginary part {max_norm(p.imag):.3e}")
            table[(x, y)] = p.real
    beh = Behavior(m.scenario, table)
    res = beh.invariant_residuals()
    bad = {k: v for k, v in res.items() if v > tol.eps_eq}
    if bad:
        raise InternalConsistencyError(f"behavior invariants violated: {bad}")
    return beh


def correlator(beh: Behavior, x: str, y: str) -> float:
    t = beh.table[(x, y)]
    sign = np.array([[(-1) ** (i + j) for j in range(t.shape[1])] for i in range(t.shape[0])])
    return float(np.sum(sign * t))


def chsh_value(beh: Behavior) -> float:
    """``E00 + E01 + E10 - E11`` for a two-setting, two-outcome scenario."""
    (ka, kb) = beh.scenario.shape
    if ka != (2, 2) or kb != (2, 2):
        raise ScenarioMismatch(f"CHSH needs 2 settings with 2 outcomes each, got {ka} and {kb}")
    (x0, _), (x1, _) = beh.scenario.alice
    (y0, _), (y1, _) = beh.scenario.bob
    return (correlator(beh, x0, y0) + correlator(beh, x0, y1)
            + correlator(beh, x1, y0) - correlator(beh, x1, y1))


def deterministic_chsh_values() -> list[float]:
    """CHSH values of all 16 deterministic local strategies (outputs a_x, b_y in {0,1})."""
    values = []
    for a0 in (0, 1):
        for a1 in (0, 1):
            for b0 in (0, 1):
                for b1 in (0, 1):
                    s = lambda a, b: (-1) ** (a + b)  # noqa: E731
                    values.append(s(a0, b0) + s(a0, b1) + s(a1, b0) - s(a1, b1))
    return values


def make_model(alice: Mapping[str, Sequence[np.ndarray]], bob: Mapping[str, Sequence[np.ndarray]],
               state: np.ndarray) -> BipartiteModel:
    """Convenience constructor inferring the scenario and dimension from the inputs."""
    state = as_matrix(state)
    n = state.shape[0]
    alice_fam = POVMFamily(n, {k: tuple(v) for k, v in alice.items()})
    bob_fam = POVMFamily(n, {k: tuple(v) for k, v in bob.items()})
    return BipartiteModel(MeasurementScenario(alice_fam.settings(), bob_fam.settings()), n, alice_fam, bob_fam, state)

