"""Slave lifecycle contract and the in-process model base class.

A slave walks created -> initialized -> stepping -> terminated.  Every
method checks the state it requires and raises ``InvalidState``
otherwise, so misuse fails loudly instead of producing silent garbage.
Remote proxies implement the same interface, which is what lets the
master run unchanged against local or networked slaves.
"""

from __future__ import annotations

import enum
from abc import ABC, abstractmethod
from dataclasses import dataclass

from .errors import (
    InvalidState,
    NotAnInput,
    NotAnOutput,
    StepRejected,
    UnknownModel,
    UnknownParameter,
    UnknownVariable,
)
from .system import Causality, SlaveDescriptor

# Relative slack when comparing the caller's notion of time with the
# slave clock; absolute near zero.
TIME_RTOL = 1e-9


class StepStatus(enum.Enum):
    OK = "ok"
    FAILED = "failed"


@dataclass(frozen=True)
class StepOutcome:
    """Result of one macro step attempt.

    ``end_time`` equals the requested target time exactly when
    ``status`` is OK; on failure it reports how far the slave got.
    """

    status: StepStatus
    end_time: float
    diagnostic: str = ""

    @property
    def ok(self) -> bool:
        return self.status is StepStatus.OK


def time_matches(expected: float, actual: float) -> bool:
    return abs(expected - actual) <= TIME_RTOL * max(1.0, abs(expected))


class SlaveInstance(ABC):
    """Interface the master drives; local models and remote proxies share it."""

    @abstractmethod
    def descriptor(self) -> SlaveDescriptor: ...

    @abstractmethod
    def setup(self, t_start: float, t_end: float) -> None: ...

    @abstractmethod
    def initialize(self) -> None: ...

    @abstractmethod
    def set_inputs(self, pairs: list[tuple[str, float]]) -> None: ...

    @abstractmethod
    def do_step(self, t: float, dt: float) -> StepOutcome: ...

    @abstractmethod
    def get_outputs(self, names: list[str]) -> list[float]: ...

    @abstractmethod
    def terminate(self) -> None: ...


class _State(enum.Enum):
    CREATED = "created"
    INITIALIZED = "initialized"
    STEPPING = "stepping"
    TERMINATED = "terminated"


class ModelSlave(SlaveInstance):
    """Base class for in-process models.

    Subclasses set ``DESCRIPTOR``, take parameter overrides at
    construction, and implement ``_initialize`` and ``_step``.  Input
    latching, output bookkeeping, state and clock checks live here.
    """

    DESCRIPTOR: SlaveDescriptor

    def __init__(self, parameters: dict[str, float] | None = None):
        self._state = _State.CREATED
        self._setup_done = False
        self._time = 0.0
        self._t_end = 0.0
        self._latched_dt: float | None = None
        self.params: dict[str, float] = dict(self.DESCRIPTOR.parameters)
        for name, value in (parameters or {}).items():
            if name not in self.DESCRIPTOR.parameters:
                raise UnknownParameter(
                    f"{self.DESCRIPTOR.model_id!r} has no parameter {name!r}"
                )
            self.params[name] = float(value)
        self.inputs: dict[str, float] = {}
        self.outputs: dict[str, float] = {}

    # -- interface ----------------------------------------------------

    def descriptor(self) -> SlaveDescriptor:
        return self.DESCRIPTOR

    def setup(self, t_start: float, t_end: float) -> None:
        self._require(_State.CREATED, "setup")
        if self._setup_done:
            raise InvalidState("setup called twice")
        self._time = float(t_start)
        self._t_end = float(t_end)
        self._setup_done = True

    def initialize(self) -> None:
        self._require(_State.CREATED, "initialize")
        if not self._setup_done:
            raise InvalidState("initialize before setup")
        for v in self.descriptor().variables:
            if v.causality is Causality.INPUT:
                self.inputs[v.name] = 0.0
        self._initialize(self._time)
        missing = [v.name for v in self.descriptor().outputs() if v.name not in self.outputs]
        if missing:
            raise InvalidState(f"model left outputs unset after initialize: {missing}")
        self._state = _State.INITIALIZED

    def set_inputs(self, pairs: list[tuple[str, float]]) -> None:
        self._require((_State.INITIALIZED, _State.STEPPING), "set_inputs")
        for name, value in pairs:
            var = self._variable(name)
            if var.causality is not Causality.INPUT:
                raise NotAnInput(f"{name} is not an input")
            self.inputs[name] = float(value)
        self._refresh_feedthrough()

    def do_step(self, t: float, dt: float) -> StepOutcome:
        self._require((_State.INITIALIZED, _State.STEPPING), "do_step")
        if not dt > 0.0:
            raise StepRejected(f"step size must be positive (got {dt})")
        if not time_matches(t, self._time):
            raise InvalidState(
                f"do_step at t={t!r} but slave clock is {self._time!r}"
            )
        if not self.descriptor().supports_variable_step:
            if self._latched_dt is None:
                self._latched_dt = dt
            elif abs(dt - self._latched_dt) > 1e-12 * self._latched_dt:
                raise StepRejected(
                    f"fixed-step model: dt changed from {self._latched_dt!r} to {dt!r}"
                )
        try:
            self._step(t, dt)
        except StepRejected:
            raise
        except Exception as exc:  # solver blow-ups become a failed outcome
            self._state = _State.STEPPING
            return StepOutcome(StepStatus.FAILED, self._time, f"{type(exc).__name__}: {exc}")
        self._time = t + dt
        self._state = _State.STEPPING
        return StepOutcome(StepStatus.OK, self._time)

    def get_outputs(self, names: list[str]) -> list[float]:
        self._require((_State.INITIALIZED, _State.STEPPING), "get_outputs")
        values = []
        for name in names:
            var = self._variable(name)
            if var.causality is not Causality.OUTPUT:
                raise NotAnOutput(f"{name} is not an output")
            values.append(self.outputs[name])
        return values

    def terminate(self) -> None:
        if self._state is _State.TERMINATED:
            raise InvalidState("terminate called twice")
        self._state = _State.TERMINATED

    # -- hooks for subclasses ------------------------------------------

    @abstractmethod
    def _initialize(self, t0: float) -> None:
        """Set initial state and fill ``self.outputs`` for every output."""

    @abstractmethod
    def _step(self, t: float, dt: float) -> None:
        """Advance internal state from t to t+dt and refresh ``self.outputs``."""

    def _refresh_feedthrough(self) -> None:
        """Recompute direct-feedthrough outputs from freshly set inputs."""

    # -- helpers --------------------------------------------------------

    @property
    def current_time(self) -> float:
        return self._time

    def _variable(self, name: str):
        try:
            return self.descriptor().variable(name)
        except KeyError:
            raise UnknownVariable(f"no variable named {name!r}") from None

    def _require(self, states, what: str):
        if not isinstance(states, tuple):
            states = (states,)
        if self._state not in states:
            raise InvalidState(f"{what} not allowed in state {self._state.value!r}")


class ModelRegistry:
    """Maps model ids to descriptors and instance factories."""

    def __init__(self):
        self._entries: dict[str, tuple[SlaveDescriptor, type[ModelSlave]]] = {}

    def register(self, cls: type[ModelSlave]) -> type[ModelSlave]:
        desc = cls.DESCRIPTOR
        if desc.model_id in self._entries:
            raise ValueError(f"model {desc.model_id!r} already registered")
        self._entries[desc.model_id] = (desc, cls)
        return cls

    def model_ids(self) -> list[str]:
        return sorted(self._entries)

    def describe(self, model_id: str) -> SlaveDescriptor:
        try:
            return self._entries[model_id][0]
        except KeyError:
            raise UnknownModel(f"unknown model {model_id!r}") from None

    def create(self, model_id: str, parameters: dict[str, float] | None = None) -> ModelSlave:
        try:
            cls = self._entries[model_id][1]
        except KeyError:
            raise UnknownModel(f"unknown model {model_id!r}") from None
        return cls(parameters)

    def descriptors(self) -> dict[str, SlaveDescriptor]:
        return {mid: desc for mid, (desc, _) in self._entries.items()}
