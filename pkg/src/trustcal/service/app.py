"""FastAPI application for live belief tracking and policy queries.

Sessions are isolated: each owns its model, policy, belief, and trace.  The
per-step contract is act-then-observe: the returned transparency is chosen
from the belief *before* this step's observation is folded in, exactly as
the closed-loop simulator does, so a recorded simulator trace replayed
through the batch endpoint reproduces the belief series bit for bit.
"""

from __future__ import annotations

import asyncio
import json

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import StreamingResponse
from fastapi.staticfiles import StaticFiles

from ..categories import Context, ObservationTuple
from ..errors import SchemaMismatch, UnknownSession
from ..serialization import (
    categories_of_document,
    model_from_document,
    policy_from_document,
)
from .schemas import (
    BatchStepRequest,
    BatchStepResponse,
    SessionCreate,
    SessionInfo,
    SessionMetrics,
    StepRequest,
    StepResult,
    TraceEntry,
    TraceResponse,
)
from .store import SessionStore, StepRecord

STREAM_POLL_SECONDS = 0.05


def _record_to_result(record: StepRecord) -> StepResult:
    return StepResult(**{k: v for k, v in record.to_payload().items()
                         if k in StepResult.model_fields})


def _record_to_entry(record: StepRecord) -> TraceEntry:
    return TraceEntry(**record.to_payload())


def create_app(model_document: str | None = None,
               policy_document: str | None = None,
               journal_dir: str | None = None,
               ui_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="trustcal interaction service")
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])
    store = SessionStore(journal_dir=journal_dir)
    app.state.store = store
    app.state.default_model_document = model_document
    app.state.default_policy_document = policy_document

    def _session(session_id: str):
        try:
            return store.get(session_id)
        except UnknownSession as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from None

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/sessions", response_model=SessionInfo)
    def create_session(body: SessionCreate):
        model_doc = body.model or app.state.default_model_document
        policy_doc = body.policy or app.state.default_policy_document
        if model_doc is None or policy_doc is None:
            raise HTTPException(
                status_code=400,
                detail="no model/policy document given and the server has "
                       "no defaults")
        try:
            model = model_from_document(model_doc)
            policy = policy_from_document(policy_doc)
            if categories_of_document(model_doc) != \
                    categories_of_document(policy_doc):
                raise SchemaMismatch(
                    "model and policy documents carry different category sets")
        except SchemaMismatch as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        session = store.create(model, policy, body.carry_belief)
        belief = session.snapshot_belief()
        return SessionInfo(
            session_id=session.id, carry_belief=session.carry_belief,
            belief=[float(x) for x in belief],
            p_trust_high=float(belief[2] + belief[3]),
            p_workload_high=float(belief[1] + belief[3]))

    @app.post("/sessions/{session_id}/step", response_model=StepResult)
    def step(session_id: str, body: StepRequest):
        session = _session(session_id)
        record = session.step(
            Context(**body.context.model_dump()),
            ObservationTuple(**body.observation.model_dump()),
            body.episode_start)
        return _record_to_result(record)

    @app.post("/sessions/{session_id}/steps", response_model=BatchStepResponse)
    def steps(session_id: str, body: BatchStepRequest):
        session = _session(session_id)
        results = []
        for item in body.steps:
            record = session.step(
                Context(**item.context.model_dump()),
                ObservationTuple(**item.observation.model_dump()),
                item.episode_start)
            results.append(_record_to_result(record))
        return BatchStepResponse(results=results)

    @app.get("/sessions/{session_id}/trace", response_model=TraceResponse)
    def trace(session_id: str):
        session = _session(session_id)
        return TraceResponse(
            session_id=session.id, carry_belief=session.carry_belief,
            steps=[_record_to_entry(r) for r in session.trace_snapshot()])

    @app.get("/sessions/{session_id}/metrics", response_model=SessionMetrics)
    def metrics(session_id: str):
        session = _session(session_id)
        records = session.trace_snapshot()
        n = len(records)
        calibrated = sum(r.reward >= 0.0 for r in records)
        on_frames = sum(r.action == "AR_on" for r in records)
        return SessionMetrics(
            session_id=session.id, n_steps=n,
            discounted_return=(records[-1].cumulative_discounted_reward
                               if records else 0.0),
            calibration_rate=calibrated / n if n else 0.0,
            transparency_on_rate=on_frames / n if n else 0.0,
            zero_likelihood_resets=sum(r.belief_reset for r in records))

    @app.get("/sessions/{session_id}/stream")
    async def stream(session_id: str, limit: int | None = None):
        """Server-sent events; one event per step, ids are step indices.

        ``limit`` ends the stream after that many events (mainly for
        polling clients and tests); without it the stream runs until the
        client disconnects.
        """
        session = _session(session_id)

        async def events():
            cursor = 0
            sent = 0
            while limit is None or sent < limit:
                records = session.trace_snapshot()
                while cursor < len(records) and \
                        (limit is None or sent < limit):
                    payload = records[cursor].to_payload()
                    yield (f"id: {payload['step_index']}\n"
                           f"data: {json.dumps(payload)}\n\n")
                    cursor += 1
                    sent += 1
                if limit is None or sent < limit:
                    await asyncio.sleep(STREAM_POLL_SECONDS)

        return StreamingResponse(events(), media_type="text/event-stream")

    if ui_dir is not None:
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
