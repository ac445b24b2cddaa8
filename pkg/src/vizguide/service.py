"""HTTP surface: dashboards, sessions, lasso, menus, turns, voice tokens,
and the server-push event stream.

Stateless apart from the in-memory dashboard/session stores; specs and
session logs can optionally be persisted to a directory so a restarted
server replays identically. Request and response bodies are UTF-8 JSON;
the documented shapes live in the README and are pinned by contract
tests.
"""

from __future__ import annotations

import argparse
import json
import logging
import queue
import threading
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse, StreamingResponse

from . import highlight
from .config import Settings, load_settings
from .errors import (
    DanglingRefError,
    DegenerateGeometry,
    GatewayError,
    GeometryError,
    NoHit,
    OverlappingSpans,
    SchemaError,
    TokenExpired,
    TokenReused,
    TokenUnknown,
    UnknownAnchor,
    UnknownDashboard,
    UnknownSession,
    UnknownVisual,
    VizguideError,
)
from .events import EventBus
from .gateway import VoiceTokenService
from .menu import HelpMenuModel, build_component_graph, open_menu, serialize_menu
from .model import DashboardSpec, RegionKind, parse_dashboard_spec, serialize_dashboard_spec
from .orchestrator import Modality, Orchestrator, Session, SessionStore, export_session_log
from .resolver import LassoPath, RegionHit, resolve_lasso, resolve_point
from .subregions import infer_sub_regions

logger = logging.getLogger(__name__)

_BAD_REQUEST = (SchemaError, GeometryError, DanglingRefError, DegenerateGeometry, OverlappingSpans)
_NOT_FOUND = (UnknownSession, UnknownDashboard, UnknownVisual, UnknownAnchor, TokenUnknown, NoHit)
_CONFLICT = (TokenExpired, TokenReused)


class DuplicateDashboard(VizguideError):
    pass


def _api_error(exc: Exception) -> tuple[int, str]:
    if isinstance(exc, _BAD_REQUEST) or isinstance(exc, ValueError):
        return 400, "BadRequest"
    if isinstance(exc, _NOT_FOUND):
        return 404, "NotFound"
    if isinstance(exc, _CONFLICT) or isinstance(exc, DuplicateDashboard):
        return 409, "Conflict"
    if isinstance(exc, GatewayError):
        return 502, "UpstreamFailure"
    return 500, "UpstreamFailure"


@dataclass
class DashboardRecord:
    spec: DashboardSpec  # with inferred sub-regions
    menus: dict[str, HelpMenuModel]
    orchestrator: Orchestrator


@dataclass
class AppState:
    settings: Settings
    sessions: SessionStore = field(default_factory=SessionStore)
    events: EventBus = field(default_factory=EventBus)
    dashboards: dict[str, DashboardRecord] = field(default_factory=dict)
    lock: threading.Lock = field(default_factory=threading.Lock)

    def __post_init__(self) -> None:
        self.tokens = VoiceTokenService(
            session_exists=self.sessions.exists,
            ttl_s=self.settings.voice_token_ttl_s,
        )

    # -- dashboards ---------------------------------------------------------

    def load_dashboard(self, document: dict | str) -> DashboardRecord:
        spec = infer_sub_regions(parse_dashboard_spec(document))
        with self.lock:
            if spec.id in self.dashboards:
                raise DuplicateDashboard(f"dashboard {spec.id!r} already loaded")
            record = DashboardRecord(
                spec=spec,
                menus=build_component_graph(spec),
                orchestrator=Orchestrator(spec, self.settings.provider_config()),
            )
            self.dashboards[spec.id] = record
        self._persist_dashboard(spec)
        return record

    def dashboard(self, dashboard_id: str) -> DashboardRecord:
        with self.lock:
            record = self.dashboards.get(dashboard_id)
        if record is None:
            raise UnknownDashboard(f"no dashboard {dashboard_id!r}")
        return record

    def record_for_session(self, session: Session) -> DashboardRecord:
        return self.dashboard(session.dashboard_id)

    # -- persistence ----------------------------------------------------------

    def _persist_dashboard(self, spec: DashboardSpec) -> None:
        if not self.settings.persist_dir:
            return
        target = Path(self.settings.persist_dir) / "dashboards"
        target.mkdir(parents=True, exist_ok=True)
        (target / f"{spec.id}.json").write_text(
            json.dumps(serialize_dashboard_spec(spec), indent=2), encoding="utf-8"
        )

    def persist_session(self, session: Session) -> None:
        if not self.settings.persist_dir:
            return
        target = Path(self.settings.persist_dir) / "sessions"
        target.mkdir(parents=True, exist_ok=True)
        (target / f"{session.session_id}.ndjson").write_text(
            export_session_log(session) + "\n", encoding="utf-8"
        )

    def preload(self) -> None:
        if self.settings.persist_dir:
            stored = Path(self.settings.persist_dir) / "dashboards"
            if stored.is_dir():
                for path in sorted(stored.glob("*.json")):
                    self._try_load(path)
        for path in self.settings.dashboards:
            self._try_load(Path(path))

    def _try_load(self, path: Path) -> None:
        try:
            self.load_dashboard(path.read_text(encoding="utf-8"))
        except DuplicateDashboard:
            pass
        except VizguideError as exc:
            logger.warning("skipping dashboard %s: %s", path, exc)


def _hit_highlight(hit: RegionHit) -> highlight.HighlightCommand:
    """Highlight command for a region hit; non-anchorable regions fall back
    to the visual body id but keep the hit's exact rectangle."""
    part = highlight.REGION_TO_PART.get(hit.region, "body")
    anchor = highlight.HighlightAnchor(anchor_id=f"{hit.visual_id}.{part}", bounds=hit.anchor_bounds)
    return highlight.HighlightCommand(anchor=anchor, sequence_index=0)


def _parse_points(raw) -> list[tuple[float, float]]:
    if not isinstance(raw, list):
        raise ValueError("points must be a list")
    points: list[tuple[float, float]] = []
    for item in raw:
        if isinstance(item, dict):
            points.append((float(item["x"]), float(item["y"])))
        elif isinstance(item, (list, tuple)) and len(item) == 2:
            points.append((float(item[0]), float(item[1])))
        else:
            raise ValueError("each point must be {x, y} or [x, y]")
    return points


def create_app(settings: Settings | None = None) -> FastAPI:
    settings = settings or Settings()
    state = AppState(settings=settings)
    state.preload()

    app = FastAPI(title="vizguide", version="0.1.0")
    app.state.vizguide = state

    @app.exception_handler(VizguideError)
    def handle_domain_error(_request: Request, exc: VizguideError) -> JSONResponse:
        status, code = _api_error(exc)
        detail = {"path": exc.path} if isinstance(exc, SchemaError) else None
        body = {"error": {"code": code, "message": str(exc)}}
        if detail:
            body["error"]["detail"] = detail
        return JSONResponse(status_code=status, content=body)

    @app.exception_handler(ValueError)
    def handle_value_error(_request: Request, exc: ValueError) -> JSONResponse:
        return JSONResponse(
            status_code=400, content={"error": {"code": "BadRequest", "message": str(exc)}}
        )

    # -- dashboards ---------------------------------------------------------

    @app.post("/dashboards", status_code=201)
    async def load_dashboard(request: Request) -> dict:
        document = await request.json()
        record = state.load_dashboard(document)
        return {"dashboardId": record.spec.id}

    @app.get("/dashboards/{dashboard_id}")
    def get_dashboard(dashboard_id: str) -> dict:
        record = state.dashboard(dashboard_id)
        return {"dashboard": serialize_dashboard_spec(record.spec)}

    @app.get("/dashboards/{dashboard_id}/menus")
    def get_menus(dashboard_id: str) -> dict:
        record = state.dashboard(dashboard_id)
        return {"menus": {vid: serialize_menu(m) for vid, m in record.menus.items()}}

    @app.get("/dashboards/{dashboard_id}/visuals/{visual_id}/menu")
    def get_menu(dashboard_id: str, visual_id: str, region: str | None = None) -> dict:
        record = state.dashboard(dashboard_id)
        model = record.menus.get(visual_id)
        visual = record.spec.visual(visual_id)
        if model is None or visual is None:
            raise UnknownVisual(f"no visual {visual_id!r} in dashboard {dashboard_id!r}")
        if region is not None:
            try:
                region_kind = RegionKind(region)
            except ValueError:
                raise ValueError(f"unknown region {region!r}") from None
            model = open_menu(model, visual.kind, region_kind)
        return {"menu": serialize_menu(model)}

    # -- sessions -------------------------------------------------------------

    @app.post("/sessions", status_code=201)
    async def create_session(request: Request) -> dict:
        body = await request.json()
        dashboard_id = body.get("dashboardId", "")
        state.dashboard(dashboard_id)  # raises UnknownDashboard
        session = state.sessions.create(dashboard_id)
        return {"sessionId": session.session_id}

    @app.post("/sessions/{session_id}/lasso")
    async def lasso(session_id: str, request: Request) -> dict:
        body = await request.json()
        session = state.sessions.get(session_id)
        record = state.record_for_session(session)
        points = _parse_points(body.get("points"))
        hit = resolve_lasso(LassoPath.of(points), record.spec)
        record.orchestrator.attach_lasso_context(session, hit)
        visual = record.spec.visual(hit.visual_id)
        assert visual is not None
        menu_model = open_menu(record.menus[hit.visual_id], visual.kind, hit.region)
        command = _hit_highlight(hit)
        state.events.publish(session_id, {"type": "highlight", "command": command.to_dict()})
        state.persist_session(session)
        return {
            "hit": hit.to_dict(),
            "menu": serialize_menu(menu_model),
            "highlight": command.to_dict(),
        }

    @app.post("/sessions/{session_id}/hover")
    async def hover(session_id: str, request: Request) -> dict:
        body = await request.json()
        session = state.sessions.get(session_id)
        record = state.record_for_session(session)
        hit = resolve_point((float(body.get("x", -1)), float(body.get("y", -1))), record.spec)
        return {"hit": hit.to_dict()}

    @app.post("/sessions/{session_id}/context")
    async def attach_context(session_id: str, request: Request) -> dict:
        body = await request.json()
        session = state.sessions.get(session_id)
        record = state.record_for_session(session)
        hit = RegionHit.from_dict(body.get("hit", {}))
        record.orchestrator.attach_lasso_context(session, hit)
        state.persist_session(session)
        return {"attached": hit.to_dict()["visualId"]}

    @app.post("/sessions/{session_id}/menu-open")
    async def menu_open(session_id: str, request: Request) -> dict:
        body = await request.json()
        session = state.sessions.get(session_id)
        record = state.record_for_session(session)
        region = RegionKind(body["region"]) if body.get("region") else None
        record.orchestrator.record_menu_open(session, body.get("visualId", ""), region)
        state.persist_session(session)
        return {"recorded": True}

    @app.post("/sessions/{session_id}/turns")
    async def chat_turn(session_id: str, request: Request) -> dict:
        body = await request.json()
        session = state.sessions.get(session_id)
        record = state.record_for_session(session)
        modality = Modality(body.get("modality", "chat"))
        reply = record.orchestrator.handle_user_turn(session, modality, body.get("text", ""))

        commands = []
        for i, anchor_id in enumerate(reply.anchors):
            anchor = highlight.resolve_anchor(anchor_id, record.spec)
            commands.append(highlight.HighlightCommand(anchor=anchor, sequence_index=i))
        state.events.publish(
            session_id,
            {"type": "turn", "turn": session.history[-1].to_dict()},
        )
        for command in commands:
            state.events.publish(session_id, {"type": "highlight", "command": command.to_dict()})
        state.persist_session(session)

        response = reply.to_dict()
        response["highlights"] = [c.to_dict() for c in commands]
        return response

    # -- voice tokens -----------------------------------------------------------

    @app.post("/sessions/{session_id}/voice-token", status_code=201)
    def voice_token(session_id: str) -> dict:
        token = state.tokens.mint(session_id)
        return token.to_dict()

    @app.post("/voice-token/redeem")
    async def redeem_voice_token(request: Request) -> dict:
        body = await request.json()
        session_id = state.tokens.redeem(body.get("token", ""))
        return {"sessionId": session_id}

    # -- events and logs ---------------------------------------------------------

    @app.get("/sessions/{session_id}/events")
    def events(session_id: str, once: bool = False, timeout_ms: int = 30_000) -> StreamingResponse:
        state.sessions.get(session_id)  # raises UnknownSession
        subscription = state.events.subscribe(session_id)

        def stream():
            try:
                for event in subscription.backlog:
                    yield f"data: {json.dumps(event)}\n\n"
                if once:
                    return
                deadline_s = timeout_ms / 1000.0
                while True:
                    try:
                        event = subscription.live.get(timeout=deadline_s)
                    except queue.Empty:
                        return
                    yield f"data: {json.dumps(event)}\n\n"
            finally:
                state.events.unsubscribe(session_id, subscription)

        return StreamingResponse(stream(), media_type="text/event-stream")

    @app.get("/sessions/{session_id}/log")
    def session_log(session_id: str) -> PlainTextResponse:
        session = state.sessions.get(session_id)
        return PlainTextResponse(export_session_log(session), media_type="application/x-ndjson")

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok", "dashboards": sorted(state.dashboards)}

    if settings.ui_dir and Path(settings.ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=settings.ui_dir, html=True), name="ui")

    return app


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="vizguide-server", description="Dashboard onboarding service")
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--host")
    parser.add_argument("--port", type=int)
    parser.add_argument("--provider", choices=["mock", "http"])
    parser.add_argument(
        "--dashboard",
        action="append",
        default=None,
        help="spec file to preload; repeatable. Use 'sample' for the bundled dashboard",
    )
    parser.add_argument("--persist-dir")
    parser.add_argument("--ui-dir")
    args = parser.parse_args(argv)

    dashboards = None
    if args.dashboard:
        from .sample import sample_dashboard_path

        dashboards = tuple(
            str(sample_dashboard_path()) if d == "sample" else d for d in args.dashboard
        )

    settings = load_settings(
        config_path=args.config,
        host=args.host,
        port=args.port,
        provider_mode=args.provider,
        dashboards=dashboards,
        persist_dir=args.persist_dir,
        ui_dir=args.ui_dir,
    )
    app = create_app(settings)

    import uvicorn

    logging.basicConfig(level=logging.INFO)
    uvicorn.run(app, host=settings.host, port=settings.port, log_level="info")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
