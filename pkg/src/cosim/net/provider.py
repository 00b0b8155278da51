"""Slave-provider daemon: publishes models over TCP and spawns live slaves.

One listening socket answers control requests (HELLO, LIST_MODELS,
DESCRIBE, SPAWN); every spawned slave gets a dedicated ephemeral listening
socket whose address travels back in SPAWNED.  Each slave endpoint accepts
exactly one connection and serves it single-threaded, so per-slave request
ordering is trivially strict.
"""
from __future__ import annotations

import logging
import socket
import threading
from dataclasses import dataclass, field

from ..errors import (
    ConnectionLost,
    CosimError,
    ProtocolError,
    SpawnLimitExceeded,
    UnknownModel,
)
from ..slave import ModelRegistry, SlaveInstance
from . import wire
from .wire import MessageType as MT, Reader, Writer

log = logging.getLogger(__name__)


@dataclass
class ProviderConfig:
    host: str = "127.0.0.1"
    port: int = 0  # 0 picks an ephemeral port
    model_ids: tuple[str, ...] = ()  # empty means every registered model
    max_slaves: int = 64

    def __post_init__(self):
        if self.max_slaves < 1:
            raise ValueError("max_slaves must be at least 1")


class Provider:
    """Serves one model registry to the network."""

    def __init__(self, registry: ModelRegistry, config: ProviderConfig | None = None):
        self.registry = registry
        self.config = config or ProviderConfig()
        known = registry.model_ids()
        wanted = self.config.model_ids or known
        missing = sorted(set(wanted) - set(known))
        if missing:
            raise CosimError(f"models not in the registry: {', '.join(missing)}")
        self.model_ids = tuple(sorted(wanted))
        self._sock: socket.socket | None = None
        self._lock = threading.Lock()
        self._live_slaves = 0
        self._slave_sockets: set[socket.socket] = set()
        self._closing = False
        self._thread: threading.Thread | None = None

    # -- lifecycle -----------------------------------------------------

    def start(self) -> "Provider":
        """Bind and serve in a background thread; returns immediately."""
        self._bind()
        self._thread = threading.Thread(
            target=self._accept_loop, name=f"provider:{self.port}", daemon=True
        )
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        """Bind and serve on the calling thread until shutdown()."""
        self._bind()
        self._accept_loop()

    def shutdown(self) -> None:
        self._closing = True
        if self._sock is not None:
            try:
                self._sock.close()
            except OSError:
                pass
        with self._lock:
            leftovers = list(self._slave_sockets)
        for s in leftovers:
            try:
                s.close()
            except OSError:
                pass

    @property
    def port(self) -> int:
        if self._sock is None:
            raise CosimError("provider is not bound yet")
        return self._sock.getsockname()[1]

    @property
    def address(self) -> str:
        return f"{self.config.host}:{self.port}"

    # -- internals -----------------------------------------------------

    def _bind(self) -> None:
        self._sock = socket.create_server((self.config.host, self.config.port))
        log.info("provider listening on %s (models: %s)",
                 self.address, ", ".join(self.model_ids))

    def _accept_loop(self) -> None:
        assert self._sock is not None
        while not self._closing:
            try:
                conn, peer = self._sock.accept()
            except OSError:
                break
            threading.Thread(
                target=self._serve_control,
                args=(conn, peer),
                name=f"control:{peer}",
                daemon=True,
            ).start()

    def _serve_control(self, conn: socket.socket, peer) -> None:
        try:
            with conn:
                if not self._handshake(conn):
                    return
                while True:
                    msg_type, payload = wire.recv_frame(conn)
                    self._dispatch_control(conn, msg_type, payload)
        except ConnectionLost:
            pass
        except ProtocolError as exc:
            log.warning("control connection from %s dropped: %s", peer, exc)
        except Exception:
            log.exception("control connection from %s crashed", peer)

    def _handshake(self, conn: socket.socket) -> bool:
        msg_type, payload = wire.recv_frame(conn)
        if msg_type != MT.HELLO:
            _send_error(conn, ProtocolError("expected HELLO first"))
            return False
        r = Reader(payload)
        version = r.u64()
        r.done()
        if version != wire.PROTOCOL_VERSION:
            _send_error(conn, ProtocolError(
                f"unsupported protocol version {version}, "
                f"this provider speaks {wire.PROTOCOL_VERSION}"))
            return False
        wire.send_frame(conn, MT.HELLO_OK,
                        Writer().u64(wire.PROTOCOL_VERSION).payload())
        return True

    def _dispatch_control(self, conn: socket.socket, msg_type: int, payload: bytes) -> None:
        try:
            if msg_type == MT.LIST_MODELS:
                Reader(payload).done()
                w = Writer().count(len(self.model_ids))
                for model_id in self.model_ids:
                    w.string(model_id)
                wire.send_frame(conn, MT.MODEL_LIST, w.payload())
            elif msg_type == MT.DESCRIBE:
                r = Reader(payload)
                model_id = r.string()
                r.done()
                desc = self._describe(model_id)
                w = Writer()
                wire.write_descriptor(w, desc)
                wire.send_frame(conn, MT.DESCRIPTION, w.payload())
            elif msg_type == MT.SPAWN:
                r = Reader(payload)
                model_id = r.string()
                parameters = {}
                for _ in range(r.count()):
                    name = r.string()
                    parameters[name] = r.f64()
                r.done()
                endpoint = self._spawn(conn, model_id, parameters)
                wire.send_frame(conn, MT.SPAWNED,
                                Writer().string(endpoint).payload())
            else:
                _send_error(conn, ProtocolError(
                    f"unexpected control message type {msg_type}"))
        except CosimError as exc:
            _send_error(conn, exc)

    def _describe(self, model_id: str):
        # Hide registry entries this provider was told not to publish.
        if model_id not in self.model_ids:
            raise UnknownModel(f"unknown model {model_id!r}")
        return self.registry.describe(model_id)

    def _spawn(self, conn: socket.socket, model_id: str, parameters: dict) -> str:
        if model_id not in self.model_ids:
            raise UnknownModel(f"unknown model {model_id!r}")
        with self._lock:
            if self._live_slaves >= self.config.max_slaves:
                raise SpawnLimitExceeded(
                    f"provider is at its limit of {self.config.max_slaves} slaves")
            self._live_slaves += 1
        try:
            instance = self.registry.create(model_id, parameters)
            listener = socket.create_server((self.config.host, 0))
        except BaseException:
            with self._lock:
                self._live_slaves -= 1
            raise
        with self._lock:
            self._slave_sockets.add(listener)
        host = self.config.host
        if host in ("", "0.0.0.0", "::"):
            # Advertise the interface the client actually reached us on.
            host = conn.getsockname()[0]
        port = listener.getsockname()[1]
        threading.Thread(
            target=self._serve_slave,
            args=(listener, instance),
            name=f"slave:{model_id}:{port}",
            daemon=True,
        ).start()
        return f"{host}:{port}"

    def _release(self, listener: socket.socket, instance: SlaveInstance) -> None:
        with self._lock:
            self._slave_sockets.discard(listener)
            self._live_slaves -= 1
        try:
            listener.close()
        except OSError:
            pass
        try:
            instance.terminate()
        except CosimError:
            pass  # already terminated through the protocol

    def _serve_slave(self, listener: socket.socket, instance: SlaveInstance) -> None:
        try:
            conn, _ = listener.accept()
        except OSError:
            self._release(listener, instance)
            return
        # Track the live session socket too so shutdown() severs it;
        # closing only the listener would leave the session running.
        with self._lock:
            self._slave_sockets.add(conn)
        try:
            with conn:
                while True:
                    msg_type, payload = wire.recv_frame(conn)
                    if not self._dispatch_slave(conn, instance, msg_type, payload):
                        break
        except ConnectionLost:
            pass
        except Exception:
            log.exception("slave connection crashed")
        finally:
            with self._lock:
                self._slave_sockets.discard(conn)
            self._release(listener, instance)

    def _dispatch_slave(self, conn, instance: SlaveInstance,
                        msg_type: int, payload: bytes) -> bool:
        """Handle one request; False ends the session."""
        try:
            if msg_type == MT.SETUP:
                r = Reader(payload)
                t_start, t_end = r.f64(), r.f64()
                r.done()
                instance.setup(t_start, t_end)
                wire.send_frame(conn, MT.OK)
            elif msg_type == MT.INITIALIZE:
                Reader(payload).done()
                instance.initialize()
                wire.send_frame(conn, MT.OK)
            elif msg_type == MT.SET_INPUTS:
                r = Reader(payload)
                variables = instance.descriptor().variables
                pairs = []
                for _ in range(r.count()):
                    index = r.u64()
                    value = r.f64()
                    if index >= len(variables):
                        raise ProtocolError(f"variable index {index} out of range")
                    pairs.append((variables[index].name, value))
                r.done()
                instance.set_inputs(pairs)
                wire.send_frame(conn, MT.OK)
            elif msg_type == MT.STEP:
                r = Reader(payload)
                t, dt = r.f64(), r.f64()
                r.done()
                outcome = instance.do_step(t, dt)
                if outcome.ok:
                    wire.send_frame(conn, MT.STEP_OK,
                                    Writer().f64(outcome.end_time).payload())
                else:
                    w = Writer().f64(outcome.end_time).string(outcome.diagnostic)
                    wire.send_frame(conn, MT.STEP_FAIL, w.payload())
            elif msg_type == MT.GET_OUTPUTS:
                r = Reader(payload)
                variables = instance.descriptor().variables
                names = []
                for _ in range(r.count()):
                    index = r.u64()
                    if index >= len(variables):
                        raise ProtocolError(f"variable index {index} out of range")
                    names.append(variables[index].name)
                r.done()
                values = instance.get_outputs(names)
                w = Writer().count(len(values))
                for value in values:
                    w.f64(value)
                wire.send_frame(conn, MT.OUTPUTS, w.payload())
            elif msg_type == MT.TERMINATE:
                Reader(payload).done()
                instance.terminate()
                wire.send_frame(conn, MT.TERMINATED)
                return False
            else:
                _send_error(conn, ProtocolError(
                    f"unexpected slave message type {msg_type}"))
        except CosimError as exc:
            _send_error(conn, exc)
        except Exception as exc:  # keep serving; report the failure
            log.exception("slave operation failed")
            _send_error(conn, CosimError(f"{type(exc).__name__}: {exc}"))
        return True


def _send_error(conn: socket.socket, exc: BaseException) -> None:
    payload = Writer().u64(wire.error_code(exc)).string(str(exc)).payload()
    wire.send_frame(conn, MT.ERROR, payload)
