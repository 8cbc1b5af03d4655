"""End-to-end verification: validation, W*(F), Phi, assemblage, tensorization."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .condexp import expectation_onto, invariant_residuals, verify_sandwich
from .matrixlab import DEFAULT_TOL, Tolerances
from .scenario import BipartiteModel, ScenarioMismatch, behavior, chsh_value, validate_model
from .steering import build_assemblage, verify_reproduction, verify_x_independence
from .tensorize import behavior_of, tensorize, verify_tensor_model
from .vnalg import center, commutant, generated_algebra

STAGES = ("validate", "behavior", "algebra", "expectation", "steering", "tensorize", "conclusion")


@dataclass
class StageResult:
    name: str
    status: str  # "pass" | "fail" | "skipped"
    residuals: dict[str, float] = field(default_factory=dict)
    info: dict[str, Any] = field(default_factory=dict)
    error: str | None = None
    elapsed_ms: float = 0.0

    def to_json(self) -> dict:
        out: dict[str, Any] = {"status": self.status, "residuals": self.residuals}
        if self.info:
            out["info"] = self.info
        if self.error is not None:
            out["error"] = self.error
        return out


@dataclass
class PipelineReport:
    stages: list[StageResult]
    chsh: dict[str, float] | None = None

    @property
    def ok(self) -> bool:
        return all(s.status == "pass" for s in self.stages)

    @property
    def first_failure(self) -> str | None:
        return next((s.name for s in self.stages if s.status == "fail"), None)

    @property
    def exit_code(self) -> int:
        return 0 if self.ok else 1

    def stage(self, name: str) -> StageResult:
        return next(s for s in self.stages if s.name == name)

    def to_json(self, include_timing: bool = True) -> dict:
        out: dict[str, Any] = {
            "pass": self.ok,
            "first_failure": self.first_failure,
            "stages": {s.name: s.to_json() for s in self.stages},
        }
        if self.chsh is not None:
            out["chsh"] = self.chsh
        if include_timing:
            out["timing_ms"] = {s.name: round(s.elapsed_ms, 3) for s in self.stages}
        return out


def _maybe_chsh(beh) -> float | None:
    try:
        return chsh_value(beh)
    except ScenarioMismatch:
        return None


def run_pipeline(model: BipartiteModel, seed: int = 0, side: str = "alice", padding: bool = False,
                 tol: Tolerances = DEFAULT_TOL, check_cp: bool = True) -> PipelineReport:
    """Run every stage in order; stop at the first failing one and mark the rest skipped.

    ``side`` picks the party whose algebra is decomposed during tensorization;
    ``Phi`` is always built onto the algebra generated by the other party.
    """
    rng = np.random.default_rng(seed)
    ctx: dict[str, Any] = {}
    m = model if side == "alice" else model.swapped()

    def validate(st: StageResult):
        r = validate_model(model, tol)
        st.residuals.update(r.residuals)
        st.info["failed_conditions"] = r.failures()
        return r.ok

    def behave(st: StageResult):
        beh = behavior(model, tol)
        ctx["behavior"] = beh
        st.residuals.update(beh.invariant_residuals())
        return all(v <= tol.eps_eq for v in st.residuals.values())

    def algebra(st: StageResult):
        gens = m.bob.all_elements()
        alg = generated_algebra(m.dim, gens, tol)
        comm = commutant(m.dim, gens, tol)
        ctx["range"] = alg
        st.info.update(algebra_dim=alg.dimension, commutant_dim=comm.dimension,
                       center_dim=center(alg, tol).dimension)
        st.residuals.update(alg.closure_residuals())
        st.residuals["generator_containment"] = max(alg.residual(G) for G in gens)
        return all(v <= tol.eps_eq for v in st.residuals.values())

    def expectation(st: StageResult):
        cexp = expectation_onto(ctx["range"], tol, check_cp=check_cp)
        ctx["cexp"] = cexp
        sw = verify_sandwich(cexp, m.alice, m.bob, tol)
        st.residuals.update(containment=sw.containment, commutation=sw.commutation)
        st.residuals.update(invariant_residuals(cexp, rng))
        return all(v <= tol.eps_eq for v in st.residuals.values())

    def steering(st: StageResult):
        s = build_assemblage(m, ctx["cexp"], tol)
        beh = ctx["behavior"] if side == "alice" else behavior(m, tol)
        st.residuals["x_independence"] = verify_x_independence(s)
        st.residuals["reproduction"] = verify_reproduction(s, m, beh)
        st.residuals["positivity"] = s.invariant_residuals()["positivity"]
        return all(v <= tol.eps_eq for v in st.residuals.values())

    def tensor(st: StageResult):
        t = tensorize(model, rng, side=side, padding=padding, tol=tol)
        ctx["tensor"] = t
        st.info.update(blocks=[{"n": a, "m": b} for a, b in t.blocks], dimA=t.dimA, dimB=t.dimB)
        st.residuals.update(t.invariant_residuals())
        return all(v <= tol.eps_eq for v in st.residuals.values())

    def conclusion(st: StageResult):
        st.residuals["behavior_reproduction"] = verify_tensor_model(ctx["tensor"], ctx["behavior"])
        return st.residuals["behavior_reproduction"] <= tol.eps_factor

    runners: dict[str, Callable[[StageResult], bool]] = {
        "validate": validate, "behavior": behave, "algebra": algebra, "expectation": expectation,
        "steering": steering, "tensorize": tensor, "conclusion": conclusion}
    stages = []
    failed = False
    for name in STAGES:
        st = StageResult(name, "skipped")
        if not failed:
            t0 = time.perf_counter()
            try:
                ok = runners[name](st)
            except Exception as exc:  # a stage failure is reported, not raised
                ok = False
                st.error = f"{type(exc).__name__}: {exc}"
            st.elapsed_ms = 1e3 * (time.perf_counter() - t0)
            st.status = "pass" if ok else "fail"
            failed = not ok
        stages.append(st)

    report = PipelineReport(stages)
    if "behavior" in ctx:
        before = _maybe_chsh(ctx["behavior"])
        if before is not None:
            report.chsh = {"model": before}
            if "tensor" in ctx:
                report.chsh["tensor"] = chsh_value(behavior_of(ctx["tensor"], tol))
    return report
