"""Client side of the provider protocol: catalogue access and remote slaves.

A RemoteSlave satisfies the same contract as an in-process slave; every
call maps to one request/response exchange, and reals cross the wire as
exact binary64, so a distributed run reproduces an in-process run bit for
bit.
"""
from __future__ import annotations

import socket
from dataclasses import dataclass

from ..errors import ConnectionLost, InvalidState, ProtocolError, UnknownVariable
from ..slave import ModelRegistry, SlaveInstance, StepOutcome, StepStatus
from ..system import SlaveDescriptor, SlaveSpec
from . import wire
from .wire import MessageType as MT, Reader, Writer

CONTROL_TIMEOUT = 5.0
STEP_TIMEOUT = 60.0


def _split_address(address: str) -> tuple[str, int]:
    host, sep, port = address.rpartition(":")
    if not sep or not host:
        raise ProtocolError(f"expected host:port, got {address!r}")
    try:
        return host, int(port)
    except ValueError as exc:
        raise ProtocolError(f"bad port in {address!r}") from exc


def _request(sock: socket.socket, msg_type: int, payload: bytes,
             expect: int) -> Reader:
    """One round trip; ERROR frames come back as typed exceptions."""
    wire.send_frame(sock, msg_type, payload)
    got, body = wire.recv_frame(sock)
    if got == MT.ERROR:
        r = Reader(body)
        code = r.u64()
        text = r.string()
        r.done()
        raise wire.make_error(code, text)
    if got != expect:
        raise ProtocolError(f"expected {MT(expect).name}, got message type {got}")
    return Reader(body)


class ProviderClient:
    """Control connection to one provider."""

    def __init__(self, address: str, timeout: float = CONTROL_TIMEOUT):
        self.address = address
        host, port = _split_address(address)
        self._sock = socket.create_connection((host, port), timeout=timeout)
        self._sock.settimeout(timeout)
        try:
            r = _request(self._sock, MT.HELLO,
                         Writer().u64(wire.PROTOCOL_VERSION).payload(),
                         MT.HELLO_OK)
            version = r.u64()
            r.done()
            if version != wire.PROTOCOL_VERSION:
                raise ProtocolError(
                    f"provider answered HELLO_OK with version {version}, "
                    f"expected {wire.PROTOCOL_VERSION}")
        except BaseException:
            self._sock.close()
            raise

    def list_models(self) -> tuple[str, ...]:
        r = _request(self._sock, MT.LIST_MODELS, b"", MT.MODEL_LIST)
        models = tuple(r.string() for _ in range(r.count()))
        r.done()
        return models

    def describe(self, model_id: str) -> SlaveDescriptor:
        r = _request(self._sock, MT.DESCRIBE,
                     Writer().string(model_id).payload(), MT.DESCRIPTION)
        desc = wire.read_descriptor(r)
        r.done()
        return desc

    def spawn(self, model_id: str, parameters: dict[str, float] | None = None) -> str:
        w = Writer().string(model_id)
        parameters = parameters or {}
        w.count(len(parameters))
        for name, value in parameters.items():
            if not isinstance(value, (int, float)):
                raise ProtocolError(
                    f"parameter {name!r} is {type(value).__name__}; "
                    f"remote slaves take numeric parameters only")
            w.string(name)
            w.f64(value)
        r = _request(self._sock, MT.SPAWN, w.payload(), MT.SPAWNED)
        endpoint = r.string()
        r.done()
        return endpoint

    def close(self) -> None:
        try:
            self._sock.close()
        except OSError:
            pass

    def __enter__(self) -> "ProviderClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


class RemoteSlave(SlaveInstance):
    """Proxy for a spawned slave living behind a provider."""

    def __init__(self, endpoint: str, descriptor: SlaveDescriptor,
                 control_timeout: float = CONTROL_TIMEOUT,
                 step_timeout: float = STEP_TIMEOUT):
        self.endpoint = endpoint
        self._desc = descriptor
        self._control_timeout = control_timeout
        self._step_timeout = step_timeout
        host, port = _split_address(endpoint)
        self._sock = socket.create_connection((host, port), timeout=control_timeout)
        self._sock.settimeout(control_timeout)
        self._closed = False

    def descriptor(self) -> SlaveDescriptor:
        return self._desc

    def setup(self, t_start: float, t_end: float) -> None:
        payload = Writer().f64(t_start).f64(t_end).payload()
        _request(self._sock, MT.SETUP, payload, MT.OK).done()

    def initialize(self) -> None:
        _request(self._sock, MT.INITIALIZE, b"", MT.OK).done()

    def _index(self, name: str) -> int:
        try:
            return self._desc.index_of(name)
        except KeyError:
            raise UnknownVariable(f"no variable named {name!r}") from None

    def set_inputs(self, pairs: list[tuple[str, float]]) -> None:
        indexed = sorted((self._index(name), value) for name, value in pairs)
        w = Writer().count(len(indexed))
        for index, value in indexed:
            w.u64(index)
            w.f64(value)
        _request(self._sock, MT.SET_INPUTS, w.payload(), MT.OK).done()

    def do_step(self, t: float, dt: float) -> StepOutcome:
        payload = Writer().f64(t).f64(dt).payload()
        # STEP is the one slow call; it gets its own, longer deadline.
        self._sock.settimeout(self._step_timeout)
        try:
            wire.send_frame(self._sock, MT.STEP, payload)
            got, body = wire.recv_frame(self._sock)
        finally:
            self._sock.settimeout(self._control_timeout)
        r = Reader(body)
        if got == MT.STEP_OK:
            end_time = r.f64()
            r.done()
            return StepOutcome(StepStatus.OK, end_time)
        if got == MT.STEP_FAIL:
            end_time = r.f64()
            diagnostic = r.string()
            r.done()
            return StepOutcome(StepStatus.FAILED, end_time, diagnostic)
        if got == MT.ERROR:
            code = r.u64()
            text = r.string()
            r.done()
            raise wire.make_error(code, text)
        raise ProtocolError(f"unexpected STEP response type {got}")

    def get_outputs(self, names: list[str]) -> list[float]:
        w = Writer().count(len(names))
        for name in names:
            w.u64(self._index(name))
        r = _request(self._sock, MT.GET_OUTPUTS, w.payload(), MT.OUTPUTS)
        count = r.count()
        if count != len(names):
            raise ProtocolError(f"asked for {len(names)} outputs, got {count}")
        values = [r.f64() for _ in range(count)]
        r.done()
        return values

    def terminate(self) -> None:
        if self._closed:
            raise InvalidState("slave is already terminated")
        try:
            _request(self._sock, MT.TERMINATE, b"", MT.TERMINATED).done()
        finally:
            self._closed = True
            try:
                self._sock.close()
            except OSError:
                pass


@dataclass(frozen=True)
class CatalogueEntry:
    provider: str
    model_id: str
    descriptor: SlaveDescriptor


def discover(addresses: list[str],
             timeout: float = CONTROL_TIMEOUT,
             ) -> tuple[list[CatalogueEntry], list[str]]:
    """Collect (provider, model, descriptor) from each reachable provider.

    Unreachable or misbehaving providers produce warnings, not failures;
    two providers sharing a model id both stay in the catalogue.
    """
    entries: list[CatalogueEntry] = []
    warnings: list[str] = []
    for address in addresses:
        try:
            with ProviderClient(address, timeout=timeout) as client:
                for model_id in client.list_models():
                    entries.append(CatalogueEntry(
                        address, model_id, client.describe(model_id)))
        except (OSError, ConnectionLost, ProtocolError) as exc:
            warnings.append(f"provider {address}: {exc}")
    return entries, warnings


class NetworkResolver:
    """Builds slaves locally or on providers, per each spec's provider field.

    Control connections are opened lazily and shared across specs that name
    the same provider address.
    """

    def __init__(self, registry: ModelRegistry | None = None,
                 control_timeout: float = CONTROL_TIMEOUT,
                 step_timeout: float = STEP_TIMEOUT):
        self.registry = registry
        self._control_timeout = control_timeout
        self._step_timeout = step_timeout
        self._clients: dict[str, ProviderClient] = {}

    def _client(self, address: str) -> ProviderClient:
        client = self._clients.get(address)
        if client is None:
            client = ProviderClient(address, timeout=self._control_timeout)
            self._clients[address] = client
        return client

    def describe(self, spec: SlaveSpec) -> SlaveDescriptor:
        if spec.provider:
            return self._client(spec.provider).describe(spec.model_id)
        if self.registry is None:
            raise ProtocolError(
                f"slave {spec.name!r} names no provider and no local "
                f"registry is configured")
        return self.registry.describe(spec.model_id)

    def create(self, spec: SlaveSpec) -> SlaveInstance:
        if spec.provider:
            client = self._client(spec.provider)
            endpoint = client.spawn(spec.model_id, spec.parameters)
            return RemoteSlave(
                endpoint,
                client.describe(spec.model_id),
                control_timeout=self._control_timeout,
                step_timeout=self._step_timeout,
            )
        if self.registry is None:
            raise ProtocolError(
                f"slave {spec.name!r} names no provider and no local "
                f"registry is configured")
        return self.registry.create(spec.model_id, spec.parameters)

    def close(self) -> None:
        for client in self._clients.values():
            client.close()
        self._clients.clear()

    def __enter__(self) -> "NetworkResolver":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
