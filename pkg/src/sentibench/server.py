"""JSON-over-HTTP prediction endpoint on the standard library server.

``POST /predict`` takes ``{"text": "..."}`` and answers with one prediction
record, or ``{"texts": [...]}`` and answers with ``{"predictions": [...]}``.
``GET /health`` echoes the artifact metadata. The loaded model is never
mutated, so the threaded server needs no locking.
"""
from __future__ import annotations

import json
import logging
from http import HTTPStatus
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from . import store
from .pipeline import Predictor

log = logging.getLogger(__name__)

MAX_BODY = 64 * 1024


class _BadRequest(Exception):
    def __init__(self, status, message):
        super().__init__(message)
        self.status = status


def _parse_body(raw: bytes):
    try:
        body = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise _BadRequest(HTTPStatus.BAD_REQUEST, f"malformed JSON: {exc}") from None
    if not isinstance(body, dict):
        raise _BadRequest(HTTPStatus.BAD_REQUEST, "body must be a JSON object")
    if "text" in body and isinstance(body["text"], str):
        return [body["text"]], False
    texts = body.get("texts")
    if isinstance(texts, list) and all(isinstance(t, str) for t in texts):
        return texts, True
    raise _BadRequest(HTTPStatus.BAD_REQUEST, "expected {\"text\": string} or {\"texts\": [string, ...]}")


def make_handler(artifact: store.ModelArtifact):
    predictor = Predictor(artifact.pipeline, artifact.family)
    health = {
        "family": artifact.family,
        "params": artifact.n_params(),
        "labels": list(artifact.labels),
        "metadata": artifact.metadata,
    }

    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"
        server_version = "sentibench"

        def _send(self, status, payload):
            data = json.dumps(payload, ensure_ascii=False).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json; charset=utf-8")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def do_GET(self):
            if self.path == "/health":
                self._send(HTTPStatus.OK, health)
            else:
                self._send(HTTPStatus.NOT_FOUND, {"error": f"no route {self.path}"})

        def do_POST(self):
            if self.path != "/predict":
                self._send(HTTPStatus.NOT_FOUND, {"error": f"no route {self.path}"})
                return
            try:
                length = int(self.headers.get("Content-Length", "0"))
            except ValueError:
                length = -1
            if length < 0:
                self._send(HTTPStatus.BAD_REQUEST, {"error": "bad Content-Length"})
                return
            if length > MAX_BODY:
                self.close_connection = True
                self._send(HTTPStatus.REQUEST_ENTITY_TOO_LARGE, {"error": f"body exceeds {MAX_BODY} bytes"})
                return
            try:
                texts, batch = _parse_body(self.rfile.read(length))
            except _BadRequest as exc:
                self._send(exc.status, {"error": str(exc)})
                return
            records = predictor.predict_texts(texts)
            self._send(HTTPStatus.OK, {"predictions": records} if batch else records[0])

        def log_message(self, fmt, *args):
            log.info("%s %s", self.address_string(), fmt % args)

    return Handler


class _Server(ThreadingHTTPServer):
    daemon_threads = True
    # the default backlog of 5 resets connections under modest bursts
    request_queue_size = 128


def make_server(model_path, host="127.0.0.1", port=8000) -> ThreadingHTTPServer:
    return _Server((host, port), make_handler(store.load(model_path)))


def serve(model_path, host="127.0.0.1", port=8000):
    server = make_server(model_path, host, port)
    print(f"serving {model_path} on http://{server.server_address[0]}:{server.server_address[1]}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
