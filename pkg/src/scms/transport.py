"""Request transports: in-process loopback and length-prefixed TCP.

TCP frame: ``length(4, big-endian) || role(1) || body`` where ``length``
counts the role octet plus the body. Responses use the same framing with
the role of the node that answered.
"""

from __future__ import annotations

import contextvars
import enum
import logging
import socket
import socketserver
import struct
import threading
from typing import Callable, Mapping, Protocol

from scms.errors import TransportError

log = logging.getLogger(__name__)

MAX_FRAME = 64 * 1024 * 1024


class NodeRole(enum.IntEnum):
    ECA = 1
    RA = 2
    ACA = 3


Handler = Callable[[bytes], bytes]


class Transport(Protocol):
    def send(self, role: NodeRole, payload: bytes) -> bytes: ...


class LoopbackTransport:
    """Calls handlers directly, one request at a time.

    Handlers run in an empty context so client-side operation counters do
    not see server work, which keeps counts identical to the TCP transport.
    """

    def __init__(self, handlers: Mapping[NodeRole, Handler]):
        self.handlers = dict(handlers)
        self._lock = threading.RLock()  # RA -> ACA re-enters on the same thread

    def send(self, role: NodeRole, payload: bytes) -> bytes:
        handler = self.handlers.get(role)
        if handler is None:
            raise TransportError(f"no {NodeRole(role).name} node on this transport")
        with self._lock:
            return contextvars.Context().run(handler, bytes(payload))


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise TransportError("connection closed mid-frame")
        buf += chunk
    return bytes(buf)


def write_frame(sock: socket.socket, role: int, body: bytes) -> None:
    sock.sendall(struct.pack(">IB", len(body) + 1, role) + body)


def read_frame(sock: socket.socket) -> tuple[int, bytes]:
    (length,) = struct.unpack(">I", _recv_exact(sock, 4))
    if not 1 <= length <= MAX_FRAME:
        raise TransportError(f"bad frame length {length}")
    frame = _recv_exact(sock, length)
    return frame[0], frame[1:]


def parse_address(addr: str) -> tuple[str, int]:
    host, _, port = addr.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"address must look like host:port, got {addr!r}")
    return host, int(port)


class TcpTransport:
    """One connection per request; at-most-once delivery."""

    def __init__(self, address: tuple[str, int] | str, timeout: float = 30.0):
        self.address = parse_address(address) if isinstance(address, str) else address
        self.timeout = timeout

    def send(self, role: NodeRole, payload: bytes) -> bytes:
        try:
            with socket.create_connection(self.address, timeout=self.timeout) as sock:
                write_frame(sock, int(role), payload)
                got_role, body = read_frame(sock)
        except OSError as exc:
            raise TransportError(f"{self.address}: {exc}") from exc
        if got_role != role:
            raise TransportError(f"answered by role {got_role}, expected {int(role)}")
        return body


class _Server(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


def serve_tcp(handlers: Mapping[NodeRole, Handler], address: tuple[str, int]) -> socketserver.TCPServer:
    """Bind a TCP server; the caller runs ``serve_forever``. Handlers are serialized."""
    lock = threading.Lock()
    table = dict(handlers)

    class _Handler(socketserver.BaseRequestHandler):
        def handle(self):
            try:
                role, body = read_frame(self.request)
            except TransportError as exc:
                log.warning("dropping bad frame from %s: %s", self.client_address, exc)
                return
            handler = table.get(role)
            if handler is None:
                log.warning("no handler for role %s", role)
                return
            with lock:
                out = contextvars.Context().run(handler, body)
            write_frame(self.request, role, out)

    return _Server(address, _Handler)
