"""Steering assemblages obtained from a conditional expectation.

Given a model whose Bob elements lie in the range of ``Phi`` and whose Alice
elements commute with that range, the family

    sigma^x_a = Phi_*( sqrt(E^x_a) rho sqrt(E^x_a) )

has a setting-independent barycenter ``Phi_*(rho)`` and reproduces the
behavior: ``tr(sigma^x_a F^y_b) = p(a,b|x,y)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .condexp import ConditionalExpectation, predual_apply, verify_sandwich
from .matrixlab import (
    DEFAULT_TOL,
    NotPositiveSemidefinite,
    Tolerances,
    hermitize,
    matrix_from_json,
    matrix_to_json,
    max_norm,
    min_eigenvalue,
    psd_sqrt,
    trace_pairing,
)
from .scenario import (
    Behavior,
    BipartiteModel,
    InternalConsistencyError,
    ModelValidationError,
    validate_model,
)


class SandwichViolation(ValueError):
    """``Phi`` does not satisfy ``span(F) in range(Phi) in comm(E)`` for the model."""


@dataclass(frozen=True)
class SteeringAssemblage:
    """``members[x][a]`` is ``sigma^x_a``; ``barycenter`` is ``Phi_*(rho)``."""

    members: Mapping[str, tuple[np.ndarray, ...]]
    barycenter: np.ndarray

    def settings(self) -> list[str]:
        return list(self.members)

    def invariant_residuals(self) -> dict[str, float]:
        return {
            "positivity": max(max(0.0, -min_eigenvalue(s)) for ss in self.members.values() for s in ss),
            "x_independence": verify_x_independence(self),
            "trace": abs(np.trace(self.barycenter).real - 1.0),
        }

    def to_json(self, residuals: Mapping[str, float] | None = None) -> dict:
        out = {"barycenter": matrix_to_json(self.barycenter),
               "members": {x: {str(a): matrix_to_json(s) for a, s in enumerate(ss)}
                           for x, ss in self.members.items()}}
        if residuals is not None:
            out["residuals"] = dict(residuals)
        return out

    @classmethod
    def from_members(cls, members: Mapping[str, Sequence[np.ndarray]]) -> "SteeringAssemblage":
        """Hand-built assemblage whose barycenter is the sum over the first setting."""
        members = {str(x): tuple(np.asarray(s, dtype=np.complex128) for s in ss)
                   for x, ss in members.items()}
        first = next(iter(members.values()))
        return cls(members, sum(first[1:], first[0].copy()))

    @classmethod
    def from_json(cls, obj: dict) -> "SteeringAssemblage":
        members = {}
        for x, by_a in obj["members"].items():
            members[x] = tuple(matrix_from_json(by_a[a]) for a in sorted(by_a, key=int))
        return cls(members, matrix_from_json(obj["barycenter"]))


def build_assemblage(m: BipartiteModel, cexp: ConditionalExpectation,
                     tol: Tolerances = DEFAULT_TOL) -> SteeringAssemblage:
    """Assemble ``sigma^x_a = Phi_*(sqrt(E^x_a) rho sqrt(E^x_a))`` and check its invariants."""
    report = validate_model(m, tol)
    if not report.ok:
        raise ModelValidationError(f"model fails validation: {', '.join(report.failures())}")
    sandwich = verify_sandwich(cexp, m.alice, m.bob, tol)
    if not sandwich.ok:
        raise SandwichViolation(
            f"containment residual {sandwich.containment:.3e}, "
            f"commutation residual {sandwich.commutation:.3e} (threshold {sandwich.threshold:.1e})")
    dens = m.state
    members = {}
    for x, mats in m.alice.elements.items():
        sig = []
        for alice_el in mats:
            root = psd_sqrt(alice_el, tol)
            inner = hermitize(root @ dens @ root)
            if min_eigenvalue(inner) < -tol.eps_psd:
                raise NotPositiveSemidefinite(f"sqrt(E) rho sqrt(E) for setting {x!r} is not PSD")
            s = hermitize(predual_apply(cexp, inner))
            if min_eigenvalue(s) < -tol.eps_psd:
                raise NotPositiveSemidefinite(f"assemblage member for setting {x!r} is not PSD")
            sig.append(s)
        members[x] = tuple(sig)
    bary = hermitize(predual_apply(cexp, dens))
    s = SteeringAssemblage(members, bary)
    bad = {k: v for k, v in s.invariant_residuals().items() if v > tol.eps_eq}
    if bad:
        raise InternalConsistencyError(f"assemblage invariants violated: {bad}")
    return s


def verify_x_independence(s: SteeringAssemblage) -> float:
    """max over settings ``x`` of ``||sum_a sigma^x_a - barycenter||_max``."""
    return max(max_norm(sum(ss) - s.barycenter) for ss in s.members.values())


def verify_reproduction(s: SteeringAssemblage, m: BipartiteModel, beh: Behavior) -> float:
    """max over ``(a,x,b,y)`` of ``|tr(sigma^x_a F^y_b) - p(a,b|x,y)|``."""
    worst = 0.0
    for x, ka in m.scenario.alice:
        if len(s.members[x]) != ka:
            raise ValueError(f"assemblage has {len(s.members[x])} members for {x!r}, expected {ka}")
        for y, _ in m.scenario.bob:
            table = beh.table[(x, y)]
            for a, member in enumerate(s.members[x]):
                for bb, bob_el in enumerate(m.bob[y]):
                    worst = max(worst, abs(trace_pairing(member, bob_el) - table[a, bb]))
    return worst
