"""The explicit parallel co-simulation master.

Every macro step runs the same fixed sequence: latch inputs, step all
slaves concurrently to the barrier, gather outputs, evaluate the
connection plan, account residual energies, notify observers, advance
the clock.  Inputs are held constant over the step and every slave
integrates from the same snapshot, so permuting the slave list cannot
change any value.

The clock is kept in double-double precision and the final step is
fitted so the recorded step sizes sum exactly (under compensated
summation) to the requested span.
"""

from __future__ import annotations

import concurrent.futures
import logging
import math
from dataclasses import dataclass

from .energy import (
    BondEnergy,
    EnergyReport,
    StepController,
    bracket_powers,
    error_indicator,
    residual_energy,
    residual_power,
)
from .errors import (
    BarrierTimeout,
    ConnectionLost,
    InvalidSystem,
    RunAborted,
    StepRejected,
    UnknownModel,
)
from .function_units import EvaluationPlan, build_plan, evaluate_plan
from .slave import ModelRegistry, SlaveInstance, time_matches
from .system import (
    FixedStepPolicy,
    PortRef,
    SlaveSpec,
    SystemDescription,
    VarKind,
    validate_system,
)

log = logging.getLogger(__name__)


def _two_sum(a: float, b: float) -> tuple[float, float]:
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


class _Clock:
    """Double-double simulation clock: time = hi + lo with hi = fl(sum)."""

    def __init__(self, t0: float):
        self.hi = t0
        self.lo = 0.0

    @property
    def time(self) -> float:
        return self.hi

    def advance(self, dt: float) -> None:
        s, e = _two_sum(self.hi, dt)
        self.hi, self.lo = _two_sum(s, e + self.lo)

    def remaining(self, t_end: float) -> float:
        s, e = _two_sum(t_end, -self.hi)
        return s + (e - self.lo)


@dataclass(frozen=True)
class StartInfo:
    """Metadata observers receive before the first step."""

    system: SystemDescription
    output_ports: tuple[PortRef, ...]
    bond_names: tuple[str, ...]
    t_start: float
    t_end: float


@dataclass(frozen=True)
class StepRecord:
    """Everything exchanged and accounted over one accepted macro step."""

    index: int
    t: float
    dt: float
    t_next: float
    inputs: dict[PortRef, float]
    outputs: dict[PortRef, float]
    energy: EnergyReport


@dataclass
class SimulationResult:
    records: list[StepRecord]
    t_start: float
    t_end: float

    @property
    def steps(self) -> int:
        return len(self.records)


@dataclass(frozen=True)
class _BondBinding:
    name: str
    sign: float
    e_out: PortRef
    f_out: PortRef
    e_in: PortRef
    f_in: PortRef
    e_out_si: float
    f_out_si: float
    e_in_si: float
    f_in_si: float


class LocalResolver:
    """Finds descriptors and builds instances from the in-process registry."""

    def __init__(self, registry: ModelRegistry):
        self.registry = registry

    def describe(self, spec: SlaveSpec):
        return self.registry.describe(spec.model_id)

    def create(self, spec: SlaveSpec) -> SlaveInstance:
        return self.registry.create(spec.model_id, spec.parameters)


class SimulationRun:
    """A live run: slaves, plan, clock, latched inputs, controller."""

    def __init__(
        self,
        system: SystemDescription,
        slaves: dict[str, SlaveInstance],
        plan: EvaluationPlan,
        observers: list,
        step_timeout: float,
    ):
        self.system = system
        self.slaves = slaves
        self.plan = plan
        self.observers = list(observers)
        self.step_timeout = step_timeout
        self.clock = _Clock(system.t_start)
        self.index = 0
        self.dts: list[float] = []
        self.latched: dict[PortRef, float] = {}
        self.outputs: dict[PortRef, float] = {}
        self.cumulative: dict[str, float] = {}
        self.forced_fixed = False
        self._terminated = False
        self._pool = concurrent.futures.ThreadPoolExecutor(
            max_workers=max(1, len(slaves))
        )

        policy = system.step_policy
        if isinstance(policy, FixedStepPolicy):
            self.controller = None
            self.next_dt = policy.dt
        else:
            self.controller = StepController(
                tolerance=policy.tolerance,
                dt_min=policy.dt_min,
                dt_max=policy.dt_max,
                safety=policy.safety,
                alpha=policy.alpha,
                theta_min=policy.theta_min,
                theta_max=policy.theta_max,
            )
            self.next_dt = policy.dt0
            rigid = [
                name
                for name, s in slaves.items()
                if not s.descriptor().supports_variable_step
            ]
            if rigid:
                log.warning(
                    "slaves %s do not support variable steps; "
                    "adaptive policy degraded to fixed dt=%g",
                    rigid,
                    policy.dt0,
                )
                self.forced_fixed = True

        self._bindings = _bind_bonds(system, slaves)
        self._input_order = _input_order(system, slaves)
        self._output_ports = _output_ports(system, slaves)

    @property
    def time(self) -> float:
        return self.clock.time

    def start_info(self) -> StartInfo:
        return StartInfo(
            system=self.system,
            output_ports=tuple(self._output_ports),
            bond_names=tuple(b.name for b in self._bindings),
            t_start=self.system.t_start,
            t_end=self.system.t_end,
        )

    # -- lifecycle ------------------------------------------------------

    def terminate(self) -> None:
        if self._terminated:
            return
        self._terminated = True
        self._pool.shutdown(wait=True)
        for slave in self.slaves.values():
            try:
                slave.terminate()
            except Exception:
                log.debug("terminate failed for a slave", exc_info=True)

    # -- internals ------------------------------------------------------

    def _notify(self, method: str, *args) -> None:
        # A broken observer is dropped; it must never take the run down.
        for obs in list(self.observers):
            try:
                getattr(obs, method)(*args)
            except Exception:
                log.warning("observer %r failed in %s; disabling", obs, method, exc_info=True)
                self.observers.remove(obs)

    def _abort(self, reason: str, exc_type: type[RunAborted] = RunAborted):
        if not self._terminated:
            self._notify("on_end", f"aborted: {reason}")
            self.terminate()
        raise exc_type(reason)

    def gather_outputs(self) -> dict[PortRef, float]:
        snapshot: dict[PortRef, float] = {}
        for spec in self.system.slaves:
            slave = self.slaves[spec.name]
            names = [v.name for v in slave.descriptor().outputs()]
            values = slave.get_outputs(names)
            for name, value in zip(names, values):
                snapshot[PortRef(spec.name, name)] = value
        return snapshot

    def push_inputs(self, assigned: dict[PortRef, float]) -> None:
        for spec in self.system.slaves:
            pairs = self._input_order.get(spec.name)
            if not pairs:
                continue
            self.slaves[spec.name].set_inputs(
                [(name, assigned[PortRef(spec.name, name)]) for name in pairs]
            )


def _input_order(system, slaves) -> dict[str, list[str]]:
    """Input variable names per slave in descriptor order."""
    order = {}
    for spec in system.slaves:
        desc = slaves[spec.name].descriptor()
        names = [v.name for v in desc.inputs()]
        if names:
            order[spec.name] = names
    return order


def _output_ports(system, slaves) -> list[PortRef]:
    ports = []
    for spec in system.slaves:
        for v in slaves[spec.name].descriptor().outputs():
            ports.append(PortRef(spec.name, v.name))
    return ports


def _si(var) -> float:
    return var.unit.scale_to_si if var.unit is not None else 1.0


def _bind_bonds(system, slaves) -> list[_BondBinding]:
    bindings = []
    for bond in system.bonds:
        refs = {}
        scales = {}
        for side in bond.sides():
            desc = slaves[side.slave].descriptor()
            out_v = desc.variable(side.output)
            in_v = desc.variable(side.input)
            okind = "e_out" if out_v.kind is VarKind.EFFORT else "f_out"
            ikind = "e_in" if in_v.kind is VarKind.EFFORT else "f_in"
            refs[okind] = PortRef(side.slave, side.output)
            refs[ikind] = PortRef(side.slave, side.input)
            scales[okind] = _si(out_v)
            scales[ikind] = _si(in_v)
        bindings.append(
            _BondBinding(
                name=bond.name,
                sign=1.0 if bond.positive_side == "a" else -1.0,
                e_out=refs["e_out"],
                f_out=refs["f_out"],
                e_in=refs["e_in"],
                f_in=refs["f_in"],
                e_out_si=scales["e_out"],
                f_out_si=scales["f_out"],
                e_in_si=scales["e_in"],
                f_in_si=scales["f_in"],
            )
        )
    return bindings


def initialize_run(
    system: SystemDescription,
    resolver,
    observers: list | None = None,
    step_timeout: float = 60.0,
) -> SimulationRun:
    """Validate, instantiate, set up, initialize, and settle a system.

    The evaluation plan is applied repeatedly at t_start (once plus one
    pass per node on the longest same-instant chain) so feedthrough
    chains reach their fixed point before the first step.  On any
    failure every slave created so far is terminated.
    """
    desc_map = {}
    for spec in system.slaves:
        try:
            desc_map[spec.model_id] = resolver.describe(spec)
        except UnknownModel:
            pass  # validation reports the unresolvable model
    report = validate_system(system, desc_map)
    if not report.ok:
        raise InvalidSystem(list(report.findings))

    plan = build_plan(system, desc_map)

    slaves: dict[str, SlaveInstance] = {}
    try:
        for spec in system.slaves:
            slaves[spec.name] = resolver.create(spec)
        for slave in slaves.values():
            slave.setup(system.t_start, system.t_end)
            slave.initialize()
    except Exception:
        for slave in slaves.values():
            try:
                slave.terminate()
            except Exception:
                pass
        raise

    run = SimulationRun(
        system, slaves, plan,
        observers=list(observers or ()),
        step_timeout=step_timeout,
    )

    snapshot = run.gather_outputs()
    assigned = evaluate_plan(plan, snapshot, system.t_start)
    for _ in range(plan.n_init):
        run.push_inputs(assigned)
        snapshot = run.gather_outputs()
        assigned = evaluate_plan(plan, snapshot, system.t_start)
    run.outputs = snapshot
    run.latched = assigned
    return run


def step_once(run: SimulationRun, dt: float) -> StepRecord:
    """Advance the whole system by one macro step of size dt.

    A lost slave connection aborts the run the same way a rejected step
    does: observers get the end notification, everything terminates, and
    the caller sees a RunAborted.
    """
    try:
        return _step_once(run, dt)
    except ConnectionLost as exc:
        run._abort(f"connection lost: {exc}")


def _step_once(run: SimulationRun, dt: float) -> StepRecord:
    t = run.time
    held = run.latched

    # (1) latch inputs on every slave
    run.push_inputs(held)

    # (2) concurrent stepping to the barrier
    futures = {
        name: run._pool.submit(run.slaves[name].do_step, t, dt)
        for name in run.slaves
    }
    outcomes = {}
    for spec in run.system.slaves:
        name = spec.name
        try:
            outcomes[name] = futures[name].result(timeout=run.step_timeout)
        except concurrent.futures.TimeoutError:
            run._abort(
                f"slave {name!r} missed the step barrier after {run.step_timeout}s",
                BarrierTimeout,
            )
        except StepRejected as exc:
            run._abort(f"slave {name!r} rejected the step: {exc}")
    t_next = t + dt
    for name, outcome in outcomes.items():
        if not outcome.ok:
            run._abort(f"slave {name!r} failed: {outcome.diagnostic}")
        if not time_matches(t_next, outcome.end_time):
            run._abort(
                f"slave {name!r} ended at {outcome.end_time!r}, expected {t_next!r}"
            )

    # (3) gather fresh outputs
    snapshot = run.gather_outputs()

    # (4) connection plan at the new communication point
    assigned = evaluate_plan(run.plan, snapshot, t_next)

    # (5) residual-energy accounting over the held/fresh bracket
    entries = []
    reports = []
    for b in run._bindings:
        e_held = held[b.e_in] * b.e_in_si
        f_held = held[b.f_in] * b.f_in_si
        e_new = snapshot[b.e_out] * b.e_out_si
        f_new = snapshot[b.f_out] * b.f_out_si
        p1, p2 = bracket_powers(b.sign, e_held, f_held, e_new, f_new)
        dp = residual_power(p1, p2)
        de = residual_energy(dp, dt)
        cum = run.cumulative.get(b.name, 0.0) + de
        run.cumulative[b.name] = cum
        entries.append((de, p1, p2))
        reports.append(BondEnergy(b.name, p1, p2, dp, de, cum))
    epsilon = error_indicator(entries, dt)
    energy = EnergyReport(tuple(reports), epsilon)

    record = StepRecord(
        index=run.index,
        t=t,
        dt=dt,
        t_next=t_next,
        inputs=dict(held),
        outputs=snapshot,
        energy=energy,
    )

    # (6) observers see the finished step
    run._notify("on_step", record)

    # (7) advance
    run.clock.advance(dt)
    run.dts.append(dt)
    run.index += 1
    run.latched = assigned
    run.outputs = snapshot
    if run.controller is not None and not run.forced_fixed:
        run.next_dt = run.controller.propose(epsilon, dt)
    return record


def run_to_end(run: SimulationRun) -> SimulationResult:
    """Step until the clock lands exactly on t_end; terminate everything."""
    t_end = run.system.t_end
    t_start = run.system.t_start
    records: list[StepRecord] = []
    run._notify("on_start", run.start_info())
    try:
        while True:
            rem = run.clock.remaining(t_end)
            if rem <= 0.0:
                break
            dt = run.next_dt
            if rem <= dt * (1.0 + 1e-9):
                # Fit the last step so the compensated sum of all step
                # sizes equals t_end - t_start exactly.
                dt = math.fsum([t_end, -t_start] + [-d for d in run.dts])
                if dt <= 0.0:
                    break
            records.append(step_once(run, dt))
        run._notify("on_end", "completed")
    finally:
        run.terminate()
    return SimulationResult(records, t_start, t_end)
