"""REST + WebSocket gateway.

Reads are served from the document cache only; no GET ever touches a
backend. Mutations validate, pre-flight authorization against stored
credentials, persist a typed event, and answer 202 with the event id;
completion is observed through the change feed (WebSocket) or by
polling the event document. Every non-2xx body is exactly
``{"code", "message", "event_id"?}``.

WebSocket subprotocol "fedbroker.v1": the client authenticates
(``{"action": "auth", "token": ...}``), subscribes
(``{"action": "subscribe", "collections": [...], "since"?: seq}``), and
then receives ``{"type": "change", seq, collection, id, version,
deleted, body}`` frames in sequence order, ``{"type": "ping"}``
keepalives, and ``{"type": "resync"}`` when its cursor precedes the
retained feed horizon (re-fetch over REST, then continue).
"""

from __future__ import annotations

import asyncio
import functools
import hashlib
import json
import secrets
import threading
from datetime import datetime, timedelta, timezone

from aiohttp import WSMsgType, web

from ..engine import EventType, PayloadInvalid
from ..engine.engine import HandlerError
from ..engine.events import EVENTS_COLLECTION
from ..engine.handlers import _find_credential
from ..model import MalformedHrn, Privilege, parse_hrn
from ..service import Broker
from ..store import NotFound, SeqTooOld, SubscriptionClosed
from ..sync.handlers import SYNC_STATUS_COLLECTION

WS_PROTOCOL = "fedbroker.v1"
SESSION_TTL_HOURS = 24
MAX_PAGE = 500
DEFAULT_PAGE = 100


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, event_id: str | None = None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.event_id = event_id

    def body(self) -> dict:
        body = {"code": self.code, "message": self.message}
        if self.event_id:
            body["event_id"] = self.event_id
        return body


def _json(data, status: int = 200) -> web.Response:
    return web.json_response(data, status=status)


def _doc_envelope(doc) -> dict:
    return {
        "id": doc.id,
        "version": doc.version,
        "seq": doc.seq,
        "updated_at": doc.updated_at,
        "body": doc.body,
    }


@web.middleware
async def error_middleware(request: web.Request, handler):
    try:
        return await handler(request)
    except ApiError as exc:
        return _json(exc.body(), status=exc.status)
    except PayloadInvalid as exc:
        return _json({"code": "PayloadInvalid", "message": str(exc)}, status=400)
    except web.HTTPException as exc:
        return _json({"code": exc.reason.lower().replace(" ", "_"), "message": exc.reason},
                     status=exc.status)
    except Exception as exc:  # noqa: BLE001 - error body schema must always hold
        return _json({"code": "internal", "message": repr(exc)}, status=500)


def cors_middleware(origin: str):
    @web.middleware
    async def middleware(request: web.Request, handler):
        if request.method == "OPTIONS":
            response = web.Response(status=204)
        else:
            response = await handler(request)
        response.headers["Access-Control-Allow-Origin"] = origin
        response.headers["Access-Control-Allow-Methods"] = "GET, POST, DELETE, OPTIONS"
        response.headers["Access-Control-Allow-Headers"] = "Authorization, Content-Type"
        return response

    return middleware


class Gateway:
    def __init__(self, broker: Broker, *, ws_ping_interval: float | None = None):
        self.broker = broker
        self.store = broker.store
        self.ws_ping_interval = (
            ws_ping_interval
            if ws_ping_interval is not None
            else broker.config.ws_ping_interval
        )

    # -- sessions -----------------------------------------------------------------

    def _create_session(self, user: str) -> str:
        token = secrets.token_hex(32)
        now = datetime.now(timezone.utc)
        # Only the digest is persisted; the raw token exists nowhere but
        # in the client's hands.
        self.store.upsert(
            "sessions",
            hashlib.sha256(token.encode()).hexdigest(),
            {
                "user": user,
                "created_at": now.strftime("%Y-%m-%dT%H:%M:%SZ"),
                "expires_at": (now + timedelta(hours=SESSION_TTL_HOURS)).strftime(
                    "%Y-%m-%dT%H:%M:%SZ"
                ),
            },
        )
        return token

    def _session_user(self, token: str | None) -> str | None:
        if not token:
            return None
        digest = hashlib.sha256(token.encode()).hexdigest()
        try:
            session = self.store.get("sessions", digest).body
        except NotFound:
            return None
        expires = datetime.strptime(session["expires_at"], "%Y-%m-%dT%H:%M:%SZ").replace(
            tzinfo=timezone.utc
        )
        if expires <= datetime.now(timezone.utc):
            return None
        return session["user"]

    def _require_user(self, request: web.Request) -> str:
        header = request.headers.get("Authorization", "")
        token = header[7:] if header.startswith("Bearer ") else None
        user = self._session_user(token)
        if user is None:
            raise ApiError(401, "unauthenticated", "missing or invalid session token")
        return user

    def _require_privilege(self, user: str, privilege: Privilege, scope: str) -> None:
        try:
            _find_credential(self.broker.context, user, privilege, parse_hrn(scope))
        except HandlerError as exc:
            raise ApiError(403, "forbidden", exc.message) from None

    async def _submit(self, event_type: EventType, payload: dict, actor: str):
        loop = asyncio.get_running_loop()
        try:
            return await loop.run_in_executor(
                None, functools.partial(self.broker.submit, event_type, payload, actor)
            )
        except PayloadInvalid:
            raise

    # -- auth endpoints ---------------------------------------------------------------

    async def register(self, request: web.Request) -> web.Response:
        body = await _request_json(request)
        hrn = body.get("hrn", "")
        event = await self._submit(EventType.user_register,
                                   {"hrn": hrn, "email": body.get("email", "")}, hrn)
        return _json({"event_id": event.event_id}, status=202)

    async def login(self, request: web.Request) -> web.Response:
        body = await _request_json(request)
        hrn = body.get("hrn", "")
        try:
            self.store.get("users", hrn)
        except NotFound:
            raise ApiError(401, "unknown_user", f"no account for {hrn!r}") from None
        token = self._create_session(hrn)
        return _json({"token": token, "user": hrn})

    # -- read endpoints ---------------------------------------------------------------

    async def testbeds(self, request: web.Request) -> web.Response:
        self._require_user(request)
        items = []
        for entry in self.broker.config.testbeds:
            items.append(
                {
                    "name": entry.name,
                    "description": entry.description,
                    "node_count": self.store.count("resources", {"testbed": entry.name}),
                    "resource_types": sorted(
                        {
                            doc.body.get("resource_type")
                            for doc in self.store.query("resources", {"testbed": entry.name})
                        }
                    ),
                }
            )
        return _json({"items": items})

    async def resources(self, request: web.Request) -> web.Response:
        self._require_user(request)
        filters = {}
        if "testbed" in request.query:
            filters["testbed"] = request.query["testbed"]
        if "type" in request.query:
            filters["resource_type"] = request.query["type"]
        if "available" in request.query:
            filters["available"] = _parse_bool(request.query["available"])
        limit, offset = _pagination(request)
        docs = self.store.query("resources", filters, limit=limit, offset=offset)
        total = self.store.count("resources", filters)
        return _json(
            {
                "items": [_doc_envelope(d) for d in docs],
                "total": total,
                "limit": limit,
                "offset": offset,
            }
        )

    async def leases(self, request: web.Request) -> web.Response:
        self._require_user(request)
        filters = {}
        if "testbed" in request.query:
            filters["testbed"] = request.query["testbed"]
        if "slice" in request.query:
            filters["slice"] = request.query["slice"]
        limit, offset = _pagination(request)
        docs = self.store.query("leases", filters, limit=limit, offset=offset)
        total = self.store.count("leases", filters)
        return _json({"items": [_doc_envelope(d) for d in docs], "total": total,
                      "limit": limit, "offset": offset})

    async def projects(self, request: web.Request) -> web.Response:
        self._require_user(request)
        docs = self.store.query("projects")
        member = request.query.get("member")
        if member:
            docs = [d for d in docs if member in d.body.get("members", ())]
        return _json({"items": [_doc_envelope(d) for d in docs]})

    async def slices(self, request: web.Request) -> web.Response:
        self._require_user(request)
        filters = {}
        if "project" in request.query:
            filters["project"] = request.query["project"]
        docs = self.store.query("slices", filters)
        return _json({"items": [_doc_envelope(d) for d in docs]})

    async def get_event(self, request: web.Request) -> web.Response:
        # Unauthenticated by design: the uuid is the capability, and the
        # register flow must be observable before any login exists.
        event_id = request.match_info["event_id"]
        try:
            doc = self.store.get(EVENTS_COLLECTION, event_id)
        except NotFound:
            raise ApiError(404, "not_found", f"no event {event_id}") from None
        return _json(_doc_envelope(doc))

    async def status(self, request: web.Request) -> web.Response:
        self._require_user(request)
        sync_docs = self.store.query(SYNC_STATUS_COLLECTION)
        return _json(
            {
                "sync": [_doc_envelope(d) for d in sync_docs],
                "queues": self.broker.engine.queue_depths(),
            }
        )

    # -- mutation endpoints ---------------------------------------------------------------

    async def create_project(self, request: web.Request) -> web.Response:
        user = self._require_user(request)
        body = await _request_json(request)
        hrn = _require_hrn_field(body, "hrn", 2)
        if self.store.count("projects", {"hrn": hrn}):
            raise ApiError(409, "duplicate", f"project {hrn} already exists")
        self._require_privilege(user, Privilege.register, _parent(hrn))
        event = await self._submit(EventType.project_create, {"hrn": hrn}, user)
        return _json({"event_id": event.event_id}, status=202)

    async def create_slice(self, request: web.Request) -> web.Response:
        user = self._require_user(request)
        body = await _request_json(request)
        hrn = _require_hrn_field(body, "hrn", 3)
        if self.store.count("slices", {"hrn": hrn}):
            raise ApiError(409, "duplicate", f"slice {hrn} already exists")
        project = _parent(hrn)
        try:
            project_doc = self.store.get("projects", project).body
        except NotFound:
            raise ApiError(404, "parent_not_found", f"project {project} not found") from None
        if user not in project_doc.get("members", ()):
            raise ApiError(403, "forbidden", f"{user} is not a member of {project}")
        self._require_privilege(user, Privilege.register, project)
        event = await self._submit(EventType.slice_create, {"hrn": hrn}, user)
        return _json({"event_id": event.event_id}, status=202)

    async def delete_slice(self, request: web.Request) -> web.Response:
        user = self._require_user(request)
        hrn = request.match_info["hrn"]
        try:
            self.store.get("slices", hrn)
        except NotFound:
            raise ApiError(404, "not_found", f"no slice {hrn}") from None
        self._require_privilege(user, Privilege.register, _parent(hrn))
        event = await self._submit(EventType.slice_delete, {"hrn": hrn}, user)
        return _json({"event_id": event.event_id}, status=202)

    async def create_lease(self, request: web.Request) -> web.Response:
        user = self._require_user(request)
        body = await _request_json(request)
        payload = {
            key: body.get(key)
            for key in ("slice_hrn", "testbed", "component_ids", "start_time", "end_time")
        }
        slice_hrn = payload.get("slice_hrn") or ""
        try:
            self.store.get("slices", slice_hrn)
        except NotFound:
            raise ApiError(404, "parent_not_found", f"no slice {slice_hrn}") from None
        self._require_privilege(user, Privilege.allocate, slice_hrn)
        event = await self._submit(EventType.lease_create, payload, user)
        return _json({"event_id": event.event_id}, status=202)

    async def delete_lease(self, request: web.Request) -> web.Response:
        user = self._require_user(request)
        lease_id = request.match_info["lease_id"]
        try:
            lease = self.store.get("leases", lease_id).body
        except NotFound:
            raise ApiError(404, "not_found", f"no lease {lease_id}") from None
        if lease.get("slice"):
            self._require_privilege(user, Privilege.delete, lease["slice"])
        event = await self._submit(EventType.lease_delete, {"lease_id": lease_id}, user)
        return _json({"event_id": event.event_id}, status=202)

    # -- websocket ---------------------------------------------------------------

    async def websocket(self, request: web.Request) -> web.WebSocketResponse:
        ws = web.WebSocketResponse(protocols=(WS_PROTOCOL,))
        await ws.prepare(request)
        authed = False
        pump: _FeedPump | None = None
        ping_task = asyncio.create_task(self._ping_loop(ws))
        try:
            async for msg in ws:
                if msg.type is not WSMsgType.TEXT:
                    break
                try:
                    frame = json.loads(msg.data)
                    action = frame["action"]
                except (ValueError, TypeError, KeyError):
                    await ws.close(code=4400, message=b"malformed frame")
                    break
                if action == "auth":
                    if self._session_user(frame.get("token")) is None:
                        await ws.close(code=4401, message=b"bad token")
                        break
                    authed = True
                elif action == "subscribe" and authed and pump is None:
                    collections = frame.get("collections")
                    if collections is not None and not isinstance(collections, list):
                        await ws.close(code=4400, message=b"malformed frame")
                        break
                    since = frame.get("since")
                    if since is not None and not isinstance(since, int):
                        await ws.close(code=4400, message=b"malformed frame")
                        break
                    pump = _FeedPump(self.store, ws, collections, since)
                    pump.start()
                else:
                    await ws.close(code=4400, message=b"malformed frame")
                    break
        finally:
            ping_task.cancel()
            if pump is not None:
                pump.stop()
        return ws

    async def _ping_loop(self, ws: web.WebSocketResponse) -> None:
        try:
            while not ws.closed:
                await asyncio.sleep(self.ws_ping_interval)
                if ws.closed:
                    return
                await ws.send_json({"type": "ping"})
        except (asyncio.CancelledError, ConnectionError):
            return


class _FeedPump:
    """Bridges the store's blocking change feed onto one WebSocket."""

    def __init__(self, store, ws: web.WebSocketResponse, collections, since):
        self._store = store
        self._ws = ws
        self._collections = collections
        self._since = since
        self._loop = asyncio.get_running_loop()
        self._stopping = threading.Event()
        self._thread = threading.Thread(target=self._run, name="ws-pump", daemon=True)

    def start(self) -> None:
        self._thread.start()

    def stop(self) -> None:
        self._stopping.set()

    def _send(self, payload: dict) -> None:
        def _dispatch():
            if not self._ws.closed:
                asyncio.ensure_future(self._ws.send_json(payload))

        self._loop.call_soon_threadsafe(_dispatch)

    def _run(self) -> None:
        since = self._since if self._since is not None else self._store.last_seq
        subscription = None
        while not self._stopping.is_set():
            if subscription is None:
                try:
                    subscription = self._store.changes_since(since, self._collections)
                except SeqTooOld:
                    # Cursor behind the horizon: tell the client to
                    # re-bootstrap over REST, then stream from now on.
                    self._send({"type": "resync"})
                    since = self._store.last_seq
                    continue
            try:
                event = subscription.get(timeout=0.25)
            except TimeoutError:
                continue
            except SeqTooOld:
                subscription.close()
                subscription = None
                self._send({"type": "resync"})
                since = self._store.last_seq
                continue
            except SubscriptionClosed:
                return
            since = event.seq
            self._send(
                {
                    "type": "change",
                    "seq": event.seq,
                    "collection": event.collection,
                    "id": event.id,
                    "version": event.version,
                    "deleted": event.deleted,
                    "body": event.body,
                }
            )
        if subscription is not None:
            subscription.close()


# -- request plumbing ------------------------------------------------------------


async def _request_json(request: web.Request) -> dict:
    try:
        body = await request.json()
    except ValueError:
        raise ApiError(400, "PayloadInvalid", "request body is not JSON") from None
    if not isinstance(body, dict):
        raise ApiError(400, "PayloadInvalid", "request body must be an object")
    return body


def _require_hrn_field(body: dict, field: str, min_segments: int) -> str:
    value = body.get(field)
    if not isinstance(value, str):
        raise ApiError(400, "PayloadInvalid", f"{field}: required string")
    try:
        hrn = parse_hrn(value)
    except MalformedHrn as exc:
        raise ApiError(400, "PayloadInvalid", f"{field}: {exc}") from None
    if len(hrn.segments) < min_segments:
        raise ApiError(400, "PayloadInvalid",
                       f"{field}: needs at least {min_segments} segments")
    return value


def _parent(hrn: str) -> str:
    return parse_hrn(hrn).parent().render()


def _parse_bool(text: str) -> bool:
    if text in ("true", "1"):
        return True
    if text in ("false", "0"):
        return False
    raise ApiError(400, "PayloadInvalid", f"expected true or false, got {text!r}")


def _pagination(request: web.Request) -> tuple[int, int]:
    try:
        limit = int(request.query.get("limit", DEFAULT_PAGE))
        offset = int(request.query.get("offset", 0))
    except ValueError:
        raise ApiError(400, "PayloadInvalid", "limit/offset must be integers") from None
    if limit < 1 or limit > MAX_PAGE:
        raise ApiError(400, "PayloadInvalid", f"limit must be in [1, {MAX_PAGE}]")
    if offset < 0:
        raise ApiError(400, "PayloadInvalid", "offset must be >= 0")
    return limit, offset


def build_app(broker: Broker, *, ws_ping_interval: float | None = None) -> web.Application:
    gateway = Gateway(broker, ws_ping_interval=ws_ping_interval)
    # CORS outermost so even error bodies carry the headers.
    middlewares = []
    if broker.config.cors_origin:
        middlewares.append(cors_middleware(broker.config.cors_origin))
    middlewares.append(error_middleware)
    app = web.Application(middlewares=middlewares)
    v1 = "/api/v1"
    app.router.add_post(f"{v1}/auth/register", gateway.register)
    app.router.add_post(f"{v1}/auth/login", gateway.login)
    app.router.add_get(f"{v1}/testbeds", gateway.testbeds)
    app.router.add_get(f"{v1}/resources", gateway.resources)
    app.router.add_get(f"{v1}/leases", gateway.leases)
    app.router.add_get(f"{v1}/projects", gateway.projects)
    app.router.add_get(f"{v1}/slices", gateway.slices)
    app.router.add_post(f"{v1}/projects", gateway.create_project)
    app.router.add_post(f"{v1}/slices", gateway.create_slice)
    app.router.add_delete(f"{v1}/slices/{{hrn}}", gateway.delete_slice)
    app.router.add_post(f"{v1}/leases", gateway.create_lease)
    app.router.add_delete(f"{v1}/leases/{{lease_id}}", gateway.delete_lease)
    app.router.add_get(f"{v1}/events/{{event_id}}", gateway.get_event)
    app.router.add_get(f"{v1}/status", gateway.status)
    app.router.add_get(f"{v1}/ws", gateway.websocket)
    return app


class GatewayServer:
    """Runs the aiohttp app on a dedicated event-loop thread, so the
    thread-based broker and synchronous callers can drive it."""

    def __init__(self, broker: Broker, *, host: str | None = None, port: int | None = None,
                 ws_ping_interval: float | None = None):
        self.broker = broker
        self.host = host if host is not None else broker.config.bind_host
        self.port = port if port is not None else broker.config.bind_port
        self._ws_ping_interval = ws_ping_interval
        self._loop: asyncio.AbstractEventLoop | None = None
        self._runner: web.AppRunner | None = None
        self._thread: threading.Thread | None = None
        self._ready = threading.Event()

    def start(self) -> "GatewayServer":
        self._thread = threading.Thread(target=self._run, name="gateway", daemon=True)
        self._thread.start()
        if not self._ready.wait(timeout=10):
            raise RuntimeError("gateway failed to start")
        return self

    def _run(self) -> None:
        loop = asyncio.new_event_loop()
        asyncio.set_event_loop(loop)
        self._loop = loop

        async def _setup():
            app = build_app(self.broker, ws_ping_interval=self._ws_ping_interval)
            runner = web.AppRunner(app)
            await runner.setup()
            site = web.TCPSite(runner, self.host, self.port)
            await site.start()
            self._runner = runner
            actual = runner.addresses[0]
            self.port = actual[1]

        loop.run_until_complete(_setup())
        self._ready.set()
        loop.run_forever()
        loop.run_until_complete(self._runner.cleanup())
        loop.close()

    def stop(self) -> None:
        if self._loop is None:
            return
        self._loop.call_soon_threadsafe(self._loop.stop)
        if self._thread is not None:
            self._thread.join(timeout=10)
        self._loop = None
        self._thread = None

    @property
    def url(self) -> str:
        return f"http://{self.host}:{self.port}"
