"""HTTP edit-session service.

Holds live Gaussian sets in memory, applies edit commands serially per
session, and renders PNG previews through the same code path as the CLI
so identical state produces identical bytes.

Endpoints (JSON unless noted):
  POST /sessions                      create from a document or synth spec
  GET  /sessions/{id}                 state: document fields + id + revision
  POST /sessions/{id}/edits           apply one edit command
  POST /sessions/{id}/undo            revert the last edit
  GET  /sessions/{id}/render?w=&h=    PNG of the current state
  GET  /healthz                       liveness probe
"""

from __future__ import annotations

import dataclasses
import json
import threading
import uuid
from collections import deque
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

import numpy as np

from . import editing, formats, synth
from .model import AffineTransform2D, GaussianSet, ImageFrame, apply_affine
from .splatting import render_preview, splat

UNDO_LIMIT = 64


class BadRequest(ValueError):
    """Malformed payload or unknown command shape."""


class Conflict(ValueError):
    """Command is well-formed but cannot apply to the current state."""

    def __init__(self, message: str, **extra):
        super().__init__(message)
        self.extra = extra


class InvalidDocument(ValueError):
    def __init__(self, violations):
        super().__init__("invalid document")
        self.violations = list(violations)


class EditSession:
    """One mutable texture with a bounded undo history.

    `lock` serializes edits; reads take a snapshot under the lock and
    render outside it (GaussianSet is immutable, so snapshots are safe).
    """

    def __init__(self, session_id: str, current: GaussianSet):
        self.id = session_id
        self.current = current
        self.history: deque[GaussianSet] = deque(maxlen=UNDO_LIMIT)
        self.revision = 0
        self.lock = threading.Lock()

    def snapshot(self) -> tuple[GaussianSet, int]:
        with self.lock:
            return self.current, self.revision

    def apply(self, fn, expect_revision=None) -> tuple[GaussianSet, int]:
        with self.lock:
            if expect_revision is not None and expect_revision != self.revision:
                raise Conflict("stale revision", revision=self.revision)
            new_state = fn(self.current)
            self.history.append(self.current)
            self.current = new_state
            self.revision += 1
            return self.current, self.revision

    def undo(self) -> tuple[GaussianSet, int]:
        with self.lock:
            if not self.history:
                raise Conflict("nothing to undo")
            self.current = self.history.pop()
            self.revision += 1
            return self.current, self.revision


class SessionStore:
    def __init__(self):
        self._sessions: dict[str, EditSession] = {}
        self._lock = threading.Lock()

    def create(self, s: GaussianSet) -> EditSession:
        session = EditSession(uuid.uuid4().hex, s)
        with self._lock:
            self._sessions[session.id] = session
        return session

    def get(self, session_id: str) -> EditSession:
        with self._lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise KeyError(session_id)
        return session


def _require(payload: dict, key: str):
    if key not in payload:
        raise BadRequest(f"missing field {key!r}")
    return payload[key]


def _load_document(doc) -> GaussianSet:
    if not isinstance(doc, dict):
        raise BadRequest("document must be an object")
    try:
        return formats.document_to_set(doc)
    except ValueError as e:
        msg = str(e)
        if msg.startswith("invalid document"):
            parts = msg.split(": ", 1)
            raise InvalidDocument(parts[1].split("; ") if len(parts) > 1 else [msg])
        raise BadRequest(msg)


def _build_initial_set(payload: dict) -> GaussianSet:
    if "document" in payload:
        return _load_document(payload["document"])
    if "synth" in payload:
        spec = payload["synth"]
        if not isinstance(spec, dict):
            raise BadRequest("synth must be an object")
        try:
            world = synth.WorldSpec(
                frame=ImageFrame(
                    width=int(spec.get("width", 128)),
                    height=int(spec.get("height", 128)),
                ),
                k=int(_require(spec, "k")),
                feature_dim=int(spec.get("nf", 3)),
                layout=spec.get("layout", "grid"),
            )
            truth, _, _ = synth.synth_world(world, int(spec.get("seed", 0)))
        except (TypeError, ValueError) as e:
            raise BadRequest(str(e))
        return truth
    raise BadRequest("payload needs 'document' or 'synth'")


def _apply_command(s: GaussianSet, cmd: dict) -> GaussianSet:
    op = _require(cmd, "op")
    try:
        if op == "move":
            return editing.transform_texton(
                s, int(_require(cmd, "index")), "move", delta=_require(cmd, "delta")
            )
        if op == "scale":
            return editing.transform_texton(
                s, int(_require(cmd, "index")), "scale", factor=np.asarray(_require(cmd, "factor"))
            )
        if op == "rotate":
            return editing.transform_texton(
                s, int(_require(cmd, "index")), "rotate", theta=float(_require(cmd, "theta"))
            )
        if op == "reshuffle":
            if "permutation" in cmd:
                plan = editing.ReshufflePlan(
                    permutation=cmd["permutation"],
                    gamma=float(cmd.get("gamma", 0.5)),
                    mode=cmd.get("mode", "hard"),
                )
            else:
                plan = editing.ReshufflePlan.random(
                    len(s),
                    int(cmd.get("seed", 0)),
                    float(cmd.get("gamma", 0.5)),
                    cmd.get("mode", "hard"),
                )
            return editing.reshuffle(s, plan)
        if op == "vary":
            edit = editing.VariationEdit(
                delta_f=float(cmd.get("delta_f", 1.0)),
                delta_u=float(cmd.get("delta_u", 1.0)),
            )
            return editing.modify_variations(s, edit)
        if op == "transfer":
            appearance = _load_document(_require(cmd, "appearance"))
            if cmd.get("mode", "mean") == "replace":
                return editing.transfer_replace(s, appearance, int(cmd.get("seed", 0)))
            return editing.transfer_mean_align(s, appearance)
        if op == "interpolate":
            target = _load_document(_require(cmd, "target"))
            return editing.interpolate(
                s, target, float(_require(cmd, "eta")), int(cmd.get("seed", 0))
            )
    except IndexError as e:
        raise Conflict(str(e), index=int(cmd.get("index", -1)))
    except (BadRequest, Conflict, InvalidDocument):
        raise
    except (TypeError, KeyError) as e:
        raise BadRequest(str(e))
    except ValueError as e:
        raise Conflict(str(e))
    raise BadRequest(f"unknown op {op!r}")


def _state_body(session: EditSession, s: GaussianSet, revision: int) -> dict:
    body = formats.set_to_document(s)
    body["id"] = session.id
    body["revision"] = revision
    return body


def _render_png(s: GaussianSet, width: int, height: int) -> bytes:
    if width <= 0 or height <= 0:
        raise BadRequest("render size must be positive")
    if (width, height) != (s.frame.width, s.frame.height):
        sx = width / s.frame.width
        sy = height / s.frame.height
        # Map pixel centers proportionally: x' = (x + 1/2) sx - 1/2.
        t = AffineTransform2D(
            np.diag([sx, sy]), np.array([0.5 * sx - 0.5, 0.5 * sy - 0.5])
        )
        s = dataclasses.replace(
            apply_affine(s, t), frame=ImageFrame(width=width, height=height)
        )
    return formats.encode_png(render_preview(splat(s)))


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    store: SessionStore  # injected by make_server

    def log_message(self, fmt, *args):  # tests want quiet servers
        pass

    def _send_json(self, status: int, body: dict) -> None:
        data = (json.dumps(body) + "\n").encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def _send_png(self, data: bytes) -> None:
        self.send_response(200)
        self.send_header("Content-Type", "image/png")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def _read_json(self) -> dict:
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b""
        try:
            payload = json.loads(raw.decode() or "null")
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise BadRequest(f"bad JSON: {e}")
        if not isinstance(payload, dict):
            raise BadRequest("body must be a JSON object")
        return payload

    def _session(self, session_id: str) -> EditSession:
        try:
            return self.store.get(session_id)
        except KeyError:
            raise _NotFound(session_id)

    def _route(self, method: str) -> None:
        url = urlparse(self.path)
        parts = [p for p in url.path.split("/") if p]
        try:
            if method == "GET" and parts == ["healthz"]:
                self._send_json(200, {"status": "ok"})
            elif method == "POST" and parts == ["sessions"]:
                session = self.store.create(_build_initial_set(self._read_json()))
                self._send_json(201, _state_body(session, *session.snapshot()))
            elif len(parts) == 2 and parts[0] == "sessions" and method == "GET":
                session = self._session(parts[1])
                self._send_json(200, _state_body(session, *session.snapshot()))
            elif len(parts) == 3 and parts[0] == "sessions" and parts[2] == "edits" and method == "POST":
                session = self._session(parts[1])
                cmd = self._read_json()
                expect = cmd.get("revision")
                expect = int(expect) if expect is not None else None
                state, rev = session.apply(
                    lambda s: _apply_command(s, cmd), expect_revision=expect
                )
                self._send_json(200, _state_body(session, state, rev))
            elif len(parts) == 3 and parts[0] == "sessions" and parts[2] == "undo" and method == "POST":
                session = self._session(parts[1])
                state, rev = session.undo()
                self._send_json(200, _state_body(session, state, rev))
            elif len(parts) == 3 and parts[0] == "sessions" and parts[2] == "render" and method == "GET":
                session = self._session(parts[1])
                state, _ = session.snapshot()
                q = parse_qs(url.query)
                try:
                    w = int(q["w"][0]) if "w" in q else state.frame.width
                    h = int(q["h"][0]) if "h" in q else state.frame.height
                except ValueError as e:
                    raise BadRequest(f"bad render size: {e}")
                self._send_png(_render_png(state, w, h))
            else:
                self._send_json(404, {"error": "no such route", "path": url.path})
        except _NotFound as e:
            self._send_json(404, {"error": "unknown session", "id": e.session_id})
        except InvalidDocument as e:
            self._send_json(422, {"error": str(e), "violations": e.violations})
        except Conflict as e:
            self._send_json(409, {"error": str(e), **e.extra})
        except BadRequest as e:
            self._send_json(400, {"error": str(e)})

    def do_GET(self):
        self._route("GET")

    def do_POST(self):
        self._route("POST")


class _NotFound(Exception):
    def __init__(self, session_id: str):
        self.session_id = session_id


def make_server(addr: str = "127.0.0.1:0") -> ThreadingHTTPServer:
    """Build a server bound to ``host:port`` (port 0 picks a free one)."""
    host, _, port = addr.rpartition(":")
    handler = type("Handler", (_Handler,), {"store": SessionStore()})
    server = ThreadingHTTPServer((host or "127.0.0.1", int(port)), handler)
    server.daemon_threads = True
    return server


def run_server(addr: str) -> None:
    server = make_server(addr)
    host, port = server.server_address[:2]
    print(f"serving on http://{host}:{port}", flush=True)
    try:
        server.serve_forever()
    finally:
        server.server_close()
