"""Live event feed: newline-delimited JSON over TCP, WebSocket on the same port.

Each client connection runs its own independent session. Server to client:
hello, snapshot, gaze, event. Client to server: layout (keyboard handshake),
mouse_gaze (fallback gaze source), blink. A connection whose first bytes
form an HTTP GET is upgraded to a WebSocket (one JSON message per text
frame) so a browser client can speak the same protocol.
"""

from __future__ import annotations

import asyncio
import base64
import hashlib
import json
from dataclasses import dataclass, field

from .container import frame_time_ms
from .datasets import Dataset
from .detect import DetectorConfig, extract_features
from .events import (GazeSample, NonMonotonicTime, SessionConfig, SessionMachine)
from .keyboard import KeyboardLayout, Lexicon
from .pipeline import check_model_matches, map_features

_WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"


class MalformedMessage(ValueError):
    pass


# ---------------------------------------------------------------------------
# transports
# ---------------------------------------------------------------------------

class LineConn:
    """One JSON object per newline-terminated line."""

    def __init__(self, reader, writer, first_chunk: bytes = b""):
        self.reader = reader
        self.writer = writer
        self._buf = bytearray(first_chunk)

    async def recv(self):
        while b"\n" not in self._buf:
            chunk = await self.reader.read(4096)
            if not chunk:
                return None
            self._buf.extend(chunk)
        line, _, rest = bytes(self._buf).partition(b"\n")
        self._buf = bytearray(rest)
        line = line.strip()
        if not line:
            return await self.recv()
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise MalformedMessage(f"invalid JSON: {e}") from e
        if not isinstance(obj, dict):
            raise MalformedMessage("message must be a JSON object")
        return obj

    async def send(self, obj) -> None:
        self.writer.write(json.dumps(obj, separators=(",", ":")).encode() + b"\n")
        await self.writer.drain()

    async def close(self) -> None:
        self.writer.close()
        try:
            await self.writer.wait_closed()
        except (ConnectionError, OSError):
            pass


class WsConn:
    """Minimal RFC6455 server endpoint: text frames carry one JSON object."""

    def __init__(self, reader, writer):
        self.reader = reader
        self.writer = writer

    @staticmethod
    def accept_key(key: str) -> str:
        digest = hashlib.sha1((key + _WS_GUID).encode()).digest()
        return base64.b64encode(digest).decode()

    async def _read_frame(self):
        head = await self.reader.readexactly(2)
        fin = head[0] & 0x80
        opcode = head[0] & 0x0F
        masked = head[1] & 0x80
        length = head[1] & 0x7F
        if length == 126:
            length = int.from_bytes(await self.reader.readexactly(2), "big")
        elif length == 127:
            length = int.from_bytes(await self.reader.readexactly(8), "big")
        mask = await self.reader.readexactly(4) if masked else None
        payload = await self.reader.readexactly(length) if length else b""
        if mask:
            payload = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
        return fin, opcode, payload

    async def recv(self):
        buffer = b""
        while True:
            try:
                fin, opcode, payload = await self._read_frame()
            except (asyncio.IncompleteReadError, ConnectionError):
                return None
            if opcode == 0x8:                    # close
                await self._send_raw(0x8, b"")
                return None
            if opcode == 0x9:                    # ping -> pong
                await self._send_raw(0xA, payload)
                continue
            if opcode in (0x1, 0x0):             # text / continuation
                buffer += payload
                if not fin:
                    continue
                text = buffer.strip()
                buffer = b""
                if not text:
                    continue
                try:
                    obj = json.loads(text)
                except json.JSONDecodeError as e:
                    raise MalformedMessage(f"invalid JSON: {e}") from e
                if not isinstance(obj, dict):
                    raise MalformedMessage("message must be a JSON object")
                return obj
            # binary and unknown opcodes are ignored

    async def _send_raw(self, opcode: int, payload: bytes) -> None:
        header = bytearray([0x80 | opcode])
        n = len(payload)
        if n < 126:
            header.append(n)
        elif n < 1 << 16:
            header.append(126)
            header += n.to_bytes(2, "big")
        else:
            header.append(127)
            header += n.to_bytes(8, "big")
        self.writer.write(bytes(header) + payload)
        await self.writer.drain()

    async def send(self, obj) -> None:
        await self._send_raw(0x1, json.dumps(obj, separators=(",", ":")).encode())

    async def close(self) -> None:
        try:
            await self._send_raw(0x8, b"")
        except (ConnectionError, OSError):
            pass
        self.writer.close()
        try:
            await self.writer.wait_closed()
        except (ConnectionError, OSError):
            pass


async def _maybe_upgrade(reader, writer):
    """Sniff the first bytes; do a WebSocket handshake on HTTP GET."""
    first = await reader.read(4)
    if not first:
        return None
    if first != b"GET ":
        return LineConn(reader, writer, first_chunk=first)
    head = first
    while b"\r\n\r\n" not in head:
        chunk = await reader.read(4096)
        if not chunk:
            return None
        head += chunk
    headers = {}
    for line in head.split(b"\r\n")[1:]:
        if b":" in line:
            k, v = line.split(b":", 1)
            headers[k.strip().lower().decode()] = v.strip().decode()
    key = headers.get("sec-websocket-key")
    if key is None or "upgrade" not in headers.get("connection", "").lower():
        writer.write(b"HTTP/1.1 400 Bad Request\r\n\r\n")
        await writer.drain()
        writer.close()
        return None
    accept = WsConn.accept_key(key)
    writer.write(
        b"HTTP/1.1 101 Switching Protocols\r\n"
        b"Upgrade: websocket\r\n"
        b"Connection: Upgrade\r\n"
        b"Sec-WebSocket-Accept: " + accept.encode() + b"\r\n\r\n")
    await writer.drain()
    return WsConn(reader, writer)


# ---------------------------------------------------------------------------
# serving
# ---------------------------------------------------------------------------

@dataclass
class ServeOptions:
    model: object                                 # CalibrationModel | LearnedRegressor
    dataset: Dataset | None = None
    layout: KeyboardLayout | None = None
    lexicon: Lexicon | None = None
    session: SessionConfig | None = None
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    pacing: bool = True
    host: str = "127.0.0.1"
    port: int = 8791

    def resolved_session(self) -> SessionConfig:
        if self.session is not None:
            return self.session
        return SessionConfig(width=self.model.width, height=self.model.height)


def _precompute_rows(opts: ServeOptions):
    """Feature-extract the whole dataset once; clients just replay rows."""
    rows = []
    for i, frame in enumerate(opts.dataset.frames):
        feats = extract_features(frame, opts.detector)
        point = map_features(opts.model, feats)
        rows.append((frame_time_ms(i, opts.dataset.fps), point))
    return rows


class FeedServer:
    def __init__(self, opts: ServeOptions):
        self.opts = opts
        self.fps = 0.0
        self.rows = None
        if opts.dataset is not None:
            check_model_matches(opts.model, opts.dataset)
            num, den = opts.dataset.fps
            self.fps = num / den
            self.rows = _precompute_rows(opts)
        self._server = None

    async def start(self) -> None:
        self._server = await asyncio.start_server(
            self._handle, host=self.opts.host, port=self.opts.port)

    @property
    def port(self) -> int:
        return self._server.sockets[0].getsockname()[1]

    async def serve_forever(self) -> None:
        async with self._server:
            await self._server.serve_forever()

    async def close(self) -> None:
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()

    async def _handle(self, reader, writer) -> None:
        try:
            conn = await _maybe_upgrade(reader, writer)
            if conn is None:
                return
            await self._session(conn)
        except (ConnectionError, asyncio.IncompleteReadError, OSError):
            pass

    async def _session(self, conn) -> None:
        opts = self.opts
        machine = SessionMachine(opts.resolved_session(), opts.layout, opts.lexicon)
        await conn.send({"type": "hello", "w": machine.cfg.width,
                         "h": machine.cfg.height, "fps": self.fps})
        await conn.send({"type": "snapshot", "state": machine.snapshot()})
        producer = None
        if self.rows is not None:
            producer = asyncio.ensure_future(self._replay_rows(conn, machine))
        try:
            while True:
                try:
                    msg = await conn.recv()
                except MalformedMessage as e:
                    await conn.send({"type": "error", "message": str(e)})
                    break
                if msg is None:
                    break
                if not await self._dispatch(conn, machine, msg):
                    break
        finally:
            if producer is not None:
                producer.cancel()
            await conn.close()

    async def _dispatch(self, conn, machine, msg) -> bool:
        kind = msg.get("type")
        if kind is None:
            await conn.send({"type": "error", "message": "message missing 'type'"})
            return False
        try:
            if kind == "layout":
                machine.set_layout(KeyboardLayout.from_json(msg), self.opts.lexicon)
            elif kind == "mouse_gaze":
                sample = GazeSample(t=float(msg["t"]),
                                    point=(float(msg["x"]), float(msg["y"])), valid=True)
                events = machine.feed(sample)
                await conn.send({"type": "gaze", "t": sample.t,
                                 "x": sample.point[0], "y": sample.point[1], "valid": True})
                for ev in events:
                    await conn.send({"type": "event", **ev.to_json()})
            elif kind == "blink":
                events = machine.feed_blink(float(msg["t"]), float(msg["dur"]))
                for ev in events:
                    await conn.send({"type": "event", **ev.to_json()})
            # unknown types are ignored for forward compatibility
            return True
        except (KeyError, TypeError, ValueError, NonMonotonicTime) as e:
            await conn.send({"type": "error", "message": f"bad {kind} message: {e}"})
            return False

    async def _replay_rows(self, conn, machine) -> None:
        period = 1.0 / self.fps if self.fps > 0 else 0.0
        loop = asyncio.get_running_loop()
        start = loop.time()
        last_point = ((machine.cfg.width - 1) / 2.0, (machine.cfg.height - 1) / 2.0)
        try:
            for i, (t, point) in enumerate(self.rows):
                if self.opts.pacing and period > 0:
                    delay = start + i * period - loop.time()
                    if delay > 0:
                        await asyncio.sleep(delay)
                valid = point is not None
                if valid:
                    last_point = point
                sample = GazeSample(t=t, point=point, valid=valid)
                events = machine.feed(sample)
                px, py = point if valid else last_point
                await conn.send({"type": "gaze", "t": t, "x": px, "y": py, "valid": valid})
                for ev in events:
                    await conn.send({"type": "event", **ev.to_json()})
            for ev in machine.finish():
                await conn.send({"type": "event", **ev.to_json()})
        except (ConnectionError, OSError):
            pass


def run_server(opts: ServeOptions) -> int:
    """Blocking entry; returns an exit code (6 when the port cannot bind)."""
    async def main():
        server = FeedServer(opts)
        await server.start()
        print(f"serving on {opts.host}:{server.port}", flush=True)
        await server.serve_forever()

    try:
        asyncio.run(main())
    except OSError as e:
        print(f"bind failed: {e}", flush=True)
        return 6
    except KeyboardInterrupt:
        pass
    return 0
