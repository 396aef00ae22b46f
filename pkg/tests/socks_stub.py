"""A tiny in-process SOCKS5 proxy serving canned HTTP responses for tests."""

from __future__ import annotations

import socket
import threading
import time
from typing import Callable

Responder = Callable[[str], bytes | str | None]


class StubSocksProxy:
    """Speaks the server side of RFC 1928, then replies per the responder.

    The responder receives the requested hostname and returns either raw
    response bytes, the string "hang" (never reply, for timeout tests), or
    None (close the connection without a reply).
    """

    def __init__(self, responder: Responder):
        self.responder = responder
        self._server = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._server.bind(("127.0.0.1", 0))
        self._server.listen(16)
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._serve, daemon=True)

    @property
    def endpoint(self) -> str:
        host, port = self._server.getsockname()
        return f"{host}:{port}"

    def start(self) -> "StubSocksProxy":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._stop.set()
        try:
            self._server.close()
        except OSError:
            pass

    def _serve(self) -> None:
        while not self._stop.is_set():
            try:
                conn, _ = self._server.accept()
            except OSError:
                return
            threading.Thread(target=self._handle, args=(conn,), daemon=True).start()

    def _handle(self, conn: socket.socket) -> None:
        try:
            conn.settimeout(5.0)
            greeting = self._recv_exact(conn, 2)
            nmethods = greeting[1]
            self._recv_exact(conn, nmethods)
            conn.sendall(b"\x05\x00")
            header = self._recv_exact(conn, 4)
            atyp = header[3]
            if atyp == 0x03:
                ln = self._recv_exact(conn, 1)[0]
                host = self._recv_exact(conn, ln).decode("ascii")
            elif atyp == 0x01:
                host = ".".join(str(b) for b in self._recv_exact(conn, 4))
            else:
                conn.close()
                return
            self._recv_exact(conn, 2)  # port
            conn.sendall(b"\x05\x00\x00\x01" + b"\x00" * 4 + b"\x00\x50")

            # consume the HTTP request head
            raw = b""
            while b"\r\n\r\n" not in raw:
                chunk = conn.recv(4096)
                if not chunk:
                    break
                raw += chunk

            response = self.responder(host)
            if response == "hang":
                time.sleep(5.0)
            elif response is not None:
                conn.sendall(response if isinstance(response, bytes) else response.encode())
        except OSError:
            pass
        finally:
            try:
                conn.close()
            except OSError:
                pass

    @staticmethod
    def _recv_exact(conn: socket.socket, n: int) -> bytes:
        buf = b""
        while len(buf) < n:
            chunk = conn.recv(n - len(buf))
            if not chunk:
                raise OSError("peer closed")
            buf += chunk
        return buf


def http_response(body: bytes, status: int = 200, chunked: bool = False) -> bytes:
    if chunked:
        payload = b"%x\r\n%s\r\n0\r\n\r\n" % (len(body), body) if body else b"0\r\n\r\n"
        head = (
            f"HTTP/1.1 {status} X\r\nContent-Type: text/html\r\n"
            "Transfer-Encoding: chunked\r\nConnection: close\r\n\r\n"
        ).encode()
        return head + payload
    head = (
        f"HTTP/1.1 {status} X\r\nContent-Type: text/html\r\n"
        f"Content-Length: {len(body)}\r\nConnection: close\r\n\r\n"
    ).encode()
    return head + body
