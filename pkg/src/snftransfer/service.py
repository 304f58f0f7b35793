"""JSON-over-HTTP advisor.

The server holds an immutable snapshot (instance + pre-computed policies);
``/recommend`` is a table lookup plus explanation assembly, so concurrent
requests are cheap and always consistent.  ``POST /solve`` computes the
optimal policy and swaps in a fresh snapshot atomically.
"""

from __future__ import annotations

import csv
import datetime
import json
import threading
from dataclasses import dataclass
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import __version__
from .model import Instance, InstanceError, SystemState, instance_digest
from .policies import explain_state, myopic_policy, rpr_policy, two_step_policy
from .solve import Policy, SolveResult, SolverError, policy_iteration_average

__all__ = ["create_app", "Advisor"]


class RecommendRequest(BaseModel):
    patient_type: int | str
    availability: list[bool]
    policy: str = "myopic"


class SolveRequest(BaseModel):
    tol: float = Field(default=1e-9, gt=0)


@dataclass(frozen=True)
class _Snapshot:
    instance: Instance
    policies: dict[str, Policy]
    solve_result: Optional[SolveResult] = None


class Advisor:
    """Mutable holder of the current solved snapshot."""

    def __init__(self, instance: Instance, two_step_weight: float = 0.75,
                 decision_log: Optional[str] = None):
        self._lock = threading.Lock()
        self.two_step_weight = two_step_weight
        self.decision_log = decision_log
        self._snapshot = _Snapshot(
            instance=instance,
            policies={
                "myopic": myopic_policy(instance),
                "rpr": rpr_policy(instance),
                "two_step": two_step_policy(instance, two_step_weight),
            })

    @property
    def snapshot(self) -> _Snapshot:
        return self._snapshot

    def solve(self, tol: float) -> SolveResult:
        snap = self._snapshot
        result = policy_iteration_average(snap.instance, tol=tol)
        policies = dict(snap.policies)
        policies["optimal"] = result.policy
        with self._lock:
            self._snapshot = _Snapshot(instance=snap.instance,
                                       policies=policies, solve_result=result)
        return result

    def log_decision(self, patient_type, availability, policy, action) -> None:
        if not self.decision_log:
            return
        with self._lock, open(self.decision_log, "a", newline="") as fh:
            csv.writer(fh).writerow([
                datetime.datetime.now(datetime.timezone.utc).isoformat(),
                patient_type,
                "".join("1" if b else "0" for b in availability),
                policy, action])


def create_app(instance: Instance, two_step_weight: float = 0.75,
               decision_log: Optional[str] = None,
               solve_on_startup: bool = False) -> FastAPI:
    advisor = Advisor(instance, two_step_weight, decision_log)
    if solve_on_startup:
        advisor.solve(tol=1e-9)
    app = FastAPI(title="snftransfer advisor", version=__version__)
    app.state.advisor = advisor

    @app.exception_handler(RequestValidationError)
    async def _validation_handler(request: Request, exc: RequestValidationError):
        # malformed JSON is a 400; a well-formed body with bad fields is a 422
        malformed = any(e.get("type") == "json_invalid" for e in exc.errors())
        return JSONResponse(status_code=400 if malformed else 422,
                            content={"detail": exc.errors()})

    def _error(status: int, message: str) -> JSONResponse:
        return JSONResponse(status_code=status, content={"detail": message})

    @app.get("/health")
    def health():
        snap = advisor.snapshot
        return {"status": "ok", "version": __version__,
                "instance": instance_digest(snap.instance)}

    @app.get("/instance")
    def instance_info():
        snap = advisor.snapshot
        inst = snap.instance
        return {
            "digest": instance_digest(inst),
            "num_types": inst.num_types,
            "num_facilities": inst.num_facilities,
            "facility_labels": [inst.facility_label(j)
                                for j in range(1, inst.num_facilities + 1)],
            "type_labels": [inst.type_label(i) for i in range(1, inst.num_types + 1)],
            "loss_penalty": inst.loss_penalty,
        }

    @app.get("/policies")
    def policies():
        return {"policies": sorted(advisor.snapshot.policies)}

    @app.post("/solve")
    def solve(req: SolveRequest):
        try:
            result = advisor.solve(tol=req.tol)
        except SolverError as exc:
            return _error(500, str(exc))
        return {"gain": result.gain, "iterations": result.iterations,
                "residual": result.residual, "policies": sorted(advisor.snapshot.policies)}

    @app.post("/recommend")
    def recommend(req: RecommendRequest):
        snap = advisor.snapshot
        inst = snap.instance
        if len(req.availability) != inst.num_facilities:
            return _error(422, f"availability must list {inst.num_facilities} facilities")
        try:
            patient = inst.type_index(req.patient_type)
        except InstanceError as exc:
            return _error(422, str(exc))
        policy = snap.policies.get(req.policy)
        if policy is None:
            return _error(422, f"unknown policy {req.policy!r}; "
                               f"available: {sorted(snap.policies)}")
        state = SystemState(patient=patient,
                            avail=(1, *(1 if b else 0 for b in req.availability)))
        action = policy.action(inst, state)
        explanation = explain_state(inst, state, snap.solve_result
                                    if req.policy == "optimal" else None)
        advisor.log_decision(req.patient_type, req.availability, req.policy, action)
        return {
            "action": action,
            "facility": inst.facility_label(action),
            "loss": action == 0,
            "policy": policy.label,
            "explanation": explanation,
        }

    return app


def run_server(instance: Instance, host: str = "127.0.0.1", port: int = 8000,
               decision_log: Optional[str] = None,
               solve_on_startup: bool = False) -> None:
    import uvicorn

    app = create_app(instance, decision_log=decision_log,
                     solve_on_startup=solve_on_startup)
    uvicorn.run(app, host=host, port=port, log_level="warning")
