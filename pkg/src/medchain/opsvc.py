"""Operations service: live world state, request intake, planning, what-if
exploration, dispatch commits, and a position feed.

The session holds one authoritative world snapshot guarded by a lock. Reads
never change the revision; every applied mutation bumps it by exactly one and
broadcasts to all subscribers in order. Planning always runs on an immutable
snapshot, so recommend/what-if interleave freely with reads.

The session clock only moves on explicit /tick (or the events a /commit fires
at the current instant), keeping console demos reproducible.
"""

from __future__ import annotations

import asyncio
import collections
import os
import threading
from dataclasses import replace

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse

from .geo import GeoPoint
from .planner import PlannerConfig, Recommendation, plan
from .scenario import Scenario, load
from .smdp import (
    ActionKind,
    DispatchAction,
    Event,
    EventKind,
    IllegalAction,
    WorldState,
    advance,
    apply_action,
    initial_state,
    is_terminal,
    legal_actions,
    predict_timeline,
)
from .world import EvacRequest, Precedence, watercraft_position


class NoSession(RuntimeError):
    pass


class UnknownRequest(KeyError):
    pass


class UnknownEntity(KeyError):
    pass


class StaleFix(ValueError):
    pass


class Infeasible(ValueError):
    pass


class DuplicateRequest(ValueError):
    pass


DEFAULT_PLANNER = PlannerConfig(iterations=300, seed=2023)


class OpsService:
    """Single-session, in-memory operations state behind a writer lock."""

    def __init__(self, planner_cfg: PlannerConfig = DEFAULT_PLANNER):
        self._lock = threading.Lock()
        self._state: WorldState | None = None
        self._revision = 0
        self._planner_cfg = planner_cfg
        self._subscribers: list[collections.deque] = []
        self._aircraft_fixes: dict[str, float] = {}

    # -- session lifecycle --

    def start_session(self, scenario: Scenario) -> int:
        with self._lock:
            state, _ = initial_state(scenario)
            self._state = state
            self._revision += 1
            self._broadcast({"kind": "session_started", "scenario": scenario.name})
            return self._revision

    def _require(self) -> WorldState:
        if self._state is None:
            raise NoSession("no active session")
        return self._state

    # -- reads --

    def get_state(self) -> dict:
        with self._lock:
            s = self._require()
            return self._state_doc(s)

    def _state_doc(self, s: WorldState) -> dict:
        clock = s.clock
        aircraft = []
        for a in s.aircraft:
            pos = a.position(s.clock_ms)
            aircraft.append({
                "id": a.id, "status": a.status.value,
                "position": {"lat": pos.lat, "lon": pos.lon},
                "fuel_range_remaining_m": a.fuel_range_remaining,
            })
        watercraft = []
        for w in s.scenario.watercraft:
            pos = watercraft_position(w, clock)
            watercraft.append({
                "id": w.id, "helipad": w.helipad, "refuel": w.refuel,
                "position": {"lat": pos.lat, "lon": pos.lon},
            })
        facilities = [
            {"id": f.id, "role": f.role,
             "position": {"lat": f.location.lat, "lon": f.location.lon}}
            for f in s.scenario.facilities
        ]
        def req_doc(r):
            return {"id": r.id, "time": r.time, "precedence": r.precedence.value,
                    "patient_count": r.patient_count, "destination": r.destination,
                    "position": {"lat": r.location.lat, "lon": r.location.lon}}
        return {
            "revision": self._revision,
            "clock": clock,
            "scenario": s.scenario.name,
            "terminal": is_terminal(s),
            "aircraft": aircraft,
            "watercraft": watercraft,
            "facilities": facilities,
            "pending_requests": [req_doc(s.request(rid)) for rid in s.pending],
            "in_transit": [{"request_id": rid, "carrier": cid, "leg": tag}
                           for rid, cid, tag in s.in_transit],
            "delivered": [{"request_id": rid, "time": t_ms / 1000.0}
                          for rid, t_ms in s.delivered],
        }

    def recommend(self, request_id: str, cfg: PlannerConfig | None = None) -> Recommendation:
        with self._lock:
            s = self._require()
            if request_id not in s.pending:
                raise UnknownRequest(request_id)
        return plan(s, cfg or self._planner_cfg, restrict_to_request=request_id)

    def whatif(self, request_id: str, forced_axp: str | None = None,
               forced_aircraft: str | None = None) -> dict:
        with self._lock:
            s = self._require()
            if request_id not in s.pending:
                raise UnknownRequest(request_id)
        if forced_axp is None and forced_aircraft is None:
            rec = plan(s, self._planner_cfg, restrict_to_request=request_id)
            action = rec.action
        else:
            action = _forced_action(s, request_id, forced_axp, forced_aircraft)
            if action is None:
                raise Infeasible(
                    f"no feasible assignment for request {request_id} via "
                    f"{forced_axp or 'direct'}")
        events, delivery = predict_timeline(s, action)
        req = s.request(request_id)
        return {
            "action": action_doc(action),
            "timeline": [[e.kind.value, e.t_ms / 1000.0] for e in events],
            "total_time_s": None if delivery is None else delivery - req.time,
        }

    # -- mutations --

    def submit_request(self, req: EvacRequest) -> int:
        with self._lock:
            s = self._require()
            known = {r.id for r in s.scenario.requests}
            if req.id in known:
                raise DuplicateRequest(req.id)
            s.scenario.facility(req.destination)  # KeyError -> caller error
            if req.patient_count > s.scenario.config.cabin_capacity:
                raise ValueError(
                    f"patient_count exceeds cabin capacity "
                    f"{s.scenario.config.cabin_capacity}")
            sc = replace(s.scenario, requests=s.scenario.requests + (req,))
            if req.time > s.clock:
                # Future-dated: arrives through the normal event flow.
                ev = Event(t_ms=round(req.time * 1000.0),
                           kind=EventKind.REQUEST_ARRIVAL, request_id=req.id)
                queue = tuple(sorted(s.queue + (ev,), key=Event.sort_key))
                self._state = replace(s, scenario=sc, queue=queue)
            else:
                self._state = replace(s, scenario=sc, pending=s.pending + (req.id,))
            self._revision += 1
            self._broadcast({"kind": "request_submitted", "request_id": req.id,
                             "time": req.time})
            return self._revision

    def commit(self, action: DispatchAction) -> int:
        with self._lock:
            s = self._require()
            new_state = apply_action(s, action)  # raises IllegalAction
            self._state = new_state
            self._revision += 1
            self._broadcast({"kind": "committed", "action": action_doc(action)})
            return self._revision

    def tick(self, steps: int = 1) -> dict:
        with self._lock:
            s = self._require()
            fired = []
            advanced = 0
            for _ in range(max(1, steps)):
                if is_terminal(s) or not s.queue:
                    break
                tr = advance(s, rng=None)
                s = tr.next_state
                fired.extend(tr.events)
                advanced += 1
            if advanced:
                self._state = s
                self._revision += 1
                self._broadcast({
                    "kind": "ticked", "clock": s.clock,
                    "events": [[e.t_ms / 1000.0, e.kind.value] for e in fired],
                })
            return {"revision": self._revision, "advanced": advanced,
                    "clock": s.clock}

    def ingest_position(self, entity_id: str, t: float, point: GeoPoint) -> int:
        with self._lock:
            s = self._require()
            for w in s.scenario.watercraft:
                if w.id == entity_id:
                    if w.override_track and t < w.override_track[-1][0]:
                        raise StaleFix(
                            f"fix at t={t} regresses before {w.override_track[-1][0]}")
                    track = tuple(f for f in w.override_track if f[0] < t) + ((t, point),)
                    new_w = replace(w, override_track=track)
                    sc = replace(s.scenario, watercraft=tuple(
                        new_w if x.id == entity_id else x for x in s.scenario.watercraft))
                    self._state = replace(s, scenario=sc)
                    break
            else:
                for a in s.aircraft:
                    if a.id == entity_id:
                        last = self._aircraft_fixes.get(entity_id, -1.0)
                        if t < last:
                            raise StaleFix(f"fix at t={t} regresses before {last}")
                        self._aircraft_fixes[entity_id] = t
                        new_a = replace(a, location=point)
                        self._state = replace(
                            s, aircraft=tuple(
                                new_a if x.id == entity_id else x for x in s.aircraft))
                        break
                else:
                    raise UnknownEntity(entity_id)
            self._revision += 1
            self._broadcast({"kind": "position", "entity_id": entity_id, "t": t,
                             "position": {"lat": point.lat, "lon": point.lon}})
            return self._revision

    # -- subscriptions --

    def subscribe(self) -> collections.deque:
        with self._lock:
            q: collections.deque = collections.deque()
            self._subscribers.append(q)
            return q

    def unsubscribe(self, q: collections.deque) -> None:
        with self._lock:
            if q in self._subscribers:
                self._subscribers.remove(q)

    def _broadcast(self, event: dict) -> None:
        doc = {"revision": self._revision, "event": event}
        for q in self._subscribers:
            q.append(doc)


def _forced_action(s: WorldState, request_id: str, forced_axp: str | None,
                   forced_aircraft: str | None) -> DispatchAction | None:
    """Cheapest legal action honoring the forced AXP/aircraft choices."""
    candidates = []
    for a in legal_actions(s):
        if a.kind is ActionKind.HOLD or a.request_id != request_id:
            continue
        if forced_axp is not None:
            if a.kind is not ActionKind.DISPATCH_VIA_AXP:
                continue
            if a.axp_watercraft_id != forced_axp:
                continue
        if forced_aircraft is not None and a.aircraft_id != forced_aircraft:
            continue
        candidates.append(a)
    best, best_key = None, None
    for a in candidates:
        _, delivery = predict_timeline(s, a)
        if delivery is None:
            continue
        key = (delivery, a.sort_key())
        if best_key is None or key < best_key:
            best, best_key = a, key
    return best


def action_doc(a: DispatchAction) -> dict:
    return {
        "kind": a.kind.value,
        "aircraft_id": a.aircraft_id,
        "request_id": a.request_id,
        "axp_watercraft_id": a.axp_watercraft_id,
        "receiving_aircraft_id": a.receiving_aircraft_id,
        "launch_time": a.launch_time,
    }


def action_from_doc(doc: dict) -> DispatchAction:
    return DispatchAction(
        kind=ActionKind(doc["kind"]),
        aircraft_id=doc.get("aircraft_id"),
        request_id=doc.get("request_id"),
        axp_watercraft_id=doc.get("axp_watercraft_id"),
        receiving_aircraft_id=doc.get("receiving_aircraft_id"),
        launch_time=float(doc.get("launch_time", 0.0)),
    )


# --- HTTP boundary ----------------------------------------------------------

def build_app(service: OpsService) -> FastAPI:
    """FastAPI app exposing the documented HTTP+WebSocket contract."""
    app = FastAPI(title="medchain operations service")

    def error(status: int, exc: Exception) -> JSONResponse:
        return JSONResponse(status_code=status,
                            content={"error": type(exc).__name__, "detail": str(exc)})

    @app.exception_handler(NoSession)
    async def _no_session(_, exc):
        return error(409, exc)

    @app.exception_handler(UnknownRequest)
    async def _unknown_request(_, exc):
        return error(404, exc)

    @app.exception_handler(UnknownEntity)
    async def _unknown_entity(_, exc):
        return error(404, exc)

    @app.exception_handler(StaleFix)
    async def _stale(_, exc):
        return error(409, exc)

    @app.exception_handler(IllegalAction)
    async def _illegal(_, exc):
        return error(409, exc)

    @app.exception_handler(Infeasible)
    async def _infeasible(_, exc):
        return error(409, exc)

    @app.exception_handler(DuplicateRequest)
    async def _dupe(_, exc):
        return error(422, exc)

    @app.exception_handler(ValueError)
    async def _value(_, exc):
        return error(422, exc)

    @app.get("/state")
    async def get_state():
        return service.get_state()

    @app.post("/requests")
    async def submit_request(doc: dict):
        req = EvacRequest(
            id=str(doc["id"]), time=float(doc.get("time", 0.0)),
            location=GeoPoint(float(doc["location"]["lat"]),
                              float(doc["location"]["lon"])),
            precedence=Precedence(doc["precedence"]),
            patient_count=int(doc.get("patient_count", 1)),
            destination=str(doc["destination"]),
        )
        revision = service.submit_request(req)
        return {"revision": revision, "request_id": req.id}

    @app.post("/recommend")
    async def recommend(doc: dict):
        cfg = None
        if "iterations" in doc or "seed" in doc:
            cfg = PlannerConfig(
                iterations=int(doc.get("iterations", DEFAULT_PLANNER.iterations)),
                seed=int(doc.get("seed", DEFAULT_PLANNER.seed)),
                stochastic=bool(doc.get("stochastic", False)),
            )
        rec = service.recommend(str(doc["request_id"]), cfg)
        return {
            "action": action_doc(rec.action),
            "estimated_return": rec.estimated_return,
            "visit_counts": [[action_doc(a), c] for a, c in rec.visit_counts],
            "predicted_timeline": [list(x) for x in rec.predicted_timeline],
        }

    @app.post("/whatif")
    async def whatif(doc: dict):
        return service.whatif(
            str(doc["request_id"]),
            forced_axp=doc.get("forced_axp"),
            forced_aircraft=doc.get("forced_aircraft"),
        )

    @app.post("/commit")
    async def commit(doc: dict):
        revision = service.commit(action_from_doc(doc))
        return {"revision": revision}

    @app.post("/positions")
    async def positions(doc: dict):
        revision = service.ingest_position(
            str(doc["id"]), float(doc["t"]),
            GeoPoint(float(doc["position"]["lat"]), float(doc["position"]["lon"])))
        return {"revision": revision}

    @app.post("/tick")
    async def tick(doc: dict | None = None):
        steps = int((doc or {}).get("steps", 1))
        return service.tick(steps)

    @app.websocket("/events")
    async def events(ws: WebSocket):
        await ws.accept()
        q = service.subscribe()
        try:
            while True:
                while q:
                    await ws.send_json(q.popleft())
                await asyncio.sleep(0.02)
        except WebSocketDisconnect:
            pass
        finally:
            service.unsubscribe(q)

    return app


def serve(scenario_id: str = "mpw2023", port: int | None = None,
          host: str = "127.0.0.1") -> None:
    import uvicorn

    service = OpsService()
    service.start_session(load(scenario_id))
    app = build_app(service)
    port = port or int(os.environ.get("MEDCHAIN_PORT", "8040"))
    uvicorn.run(app, host=host, port=port, log_level="warning")
