"""Stateless transformation nodes evaluated between macro steps.

Function units (FUs) close the gap between plain output-to-input
routing and subsimulators: they transform same-instant values without
introducing a macro-step delay and without carrying state.  The plan
builder orders FU evaluations topologically and interleaves the
connection copies so every value is ready before it is consumed.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

from .errors import AlgebraicLoop
from .system import (
    Causality,
    FunctionUnitSpec,
    PortRef,
    SlaveDescriptor,
    SystemDescription,
    VariableDescriptor,
    VarKind,
    find_algebraic_loop,
)
from .units import AMPERE, METER, NEWTON, NEWTON_METER, VOLT, conversion_factor, parse_unit

IN = Causality.INPUT
OUT = Causality.OUTPUT
SIG = VarKind.SIGNAL


def _sig(name: str, causality: Causality, unit=None) -> VariableDescriptor:
    return VariableDescriptor(name, causality, SIG, unit)


class FunctionUnit(ABC):
    """One stateless node: outputs = g(inputs, t)."""

    def __init__(self, spec: FunctionUnitSpec):
        self.spec = spec
        self.desc = self._describe(spec)

    @abstractmethod
    def _describe(self, spec: FunctionUnitSpec) -> SlaveDescriptor: ...

    @abstractmethod
    def evaluate(self, values: dict[str, float], t: float) -> dict[str, float]: ...

    @staticmethod
    def _params(spec: FunctionUnitSpec, **expected):
        """Merge spec params over defaults; unknown or missing keys error."""
        out = {}
        for key, default in expected.items():
            if key in spec.params:
                out[key] = spec.params[key]
            elif default is None:
                raise ValueError(f"fu kind {spec.kind!r} requires parameter {key!r}")
            else:
                out[key] = default
        unknown = set(spec.params) - set(expected)
        if unknown:
            raise ValueError(
                f"fu kind {spec.kind!r} does not accept {sorted(unknown)}"
            )
        return out

    @staticmethod
    def _arity(params, key="n") -> int:
        n = int(params[key])
        if n < 1:
            raise ValueError(f"arity must be >= 1 (got {n})")
        return n


class Gain(FunctionUnit):
    """y = c * u."""

    def _describe(self, spec):
        p = self._params(spec, c=1.0)
        self.c = float(p["c"])
        return SlaveDescriptor(
            model_id="fu:gain",
            variables=(_sig("u", IN), _sig("y", OUT)),
        )

    def evaluate(self, values, t):
        return {"y": self.c * values["u"]}


class Sum(FunctionUnit):
    """y = u1 + u2 + ... + un, summed left to right."""

    def _describe(self, spec):
        p = self._params(spec, n=2)
        self.n = self._arity(p)
        return SlaveDescriptor(
            model_id="fu:sum",
            variables=tuple(_sig(f"u{i}", IN) for i in range(1, self.n + 1))
            + (_sig("y", OUT),),
        )

    def evaluate(self, values, t):
        acc = 0.0
        for i in range(1, self.n + 1):
            acc += values[f"u{i}"]
        return {"y": acc}


class UnitConvert(FunctionUnit):
    """y = u rescaled from one unit to a dimension-equal other."""

    def _describe(self, spec):
        p = self._params(spec, **{"from": None, "to": None})
        src = parse_unit(str(p["from"]))
        dst = parse_unit(str(p["to"]))
        self.factor = conversion_factor(src, dst)  # raises on dimension mismatch
        return SlaveDescriptor(
            model_id="fu:unit_convert",
            variables=(_sig("u", IN, src), _sig("y", OUT, dst)),
        )

    def evaluate(self, values, t):
        return {"y": values["u"] * self.factor}


class Splitter(FunctionUnit):
    """One input fanned out to n identical outputs."""

    def _describe(self, spec):
        p = self._params(spec, n=2)
        self.n = self._arity(p)
        return SlaveDescriptor(
            model_id="fu:splitter",
            variables=(_sig("u", IN),)
            + tuple(_sig(f"y{i}", OUT) for i in range(1, self.n + 1)),
        )

    def evaluate(self, values, t):
        u = values["u"]
        return {f"y{i}": u for i in range(1, self.n + 1)}


class ForceAggregator(FunctionUnit):
    """Net force and moment of n point forces: F = sum F_k, M = sum r_k x F_k.

    Inputs per contribution k: force components fx_k, fy_k, fz_k (N)
    and application point rx_k, ry_k, rz_k (m).
    """

    def _describe(self, spec):
        p = self._params(spec, n=1)
        self.n = self._arity(p)
        ins = []
        for k in range(1, self.n + 1):
            ins += [_sig(f"{c}{k}", IN, NEWTON) for c in ("fx", "fy", "fz")]
            ins += [_sig(f"{c}{k}", IN, METER) for c in ("rx", "ry", "rz")]
        outs = [_sig(c, OUT, NEWTON) for c in ("fx", "fy", "fz")]
        outs += [_sig(c, OUT, NEWTON_METER) for c in ("mx", "my", "mz")]
        return SlaveDescriptor(
            model_id="fu:force_aggregator", variables=tuple(ins) + tuple(outs)
        )

    def evaluate(self, values, t):
        F = [0.0, 0.0, 0.0]
        M = [0.0, 0.0, 0.0]
        for k in range(1, self.n + 1):
            f = [values[f"fx{k}"], values[f"fy{k}"], values[f"fz{k}"]]
            r = [values[f"rx{k}"], values[f"ry{k}"], values[f"rz{k}"]]
            for i in range(3):
                F[i] += f[i]
            M[0] += r[1] * f[2] - r[2] * f[1]
            M[1] += r[2] * f[0] - r[0] * f[2]
            M[2] += r[0] * f[1] - r[1] * f[0]
        return {"fx": F[0], "fy": F[1], "fz": F[2], "mx": M[0], "my": M[1], "mz": M[2]}


class Switchboard(FunctionUnit):
    """Voltage fan-out and current summation over n breaker-gated legs.

    leg_v_k mirrors bus_v while breaker_k >= 0.5 (closed), else 0;
    bus_i sums the leg currents of closed legs.
    """

    def _describe(self, spec):
        p = self._params(spec, n=1)
        self.n = self._arity(p)
        ins = [_sig("bus_v", IN, VOLT)]
        for k in range(1, self.n + 1):
            ins.append(_sig(f"leg_i_{k}", IN, AMPERE))
            ins.append(_sig(f"breaker_{k}", IN))
        outs = [_sig("bus_i", OUT, AMPERE)]
        outs += [_sig(f"leg_v_{k}", OUT, VOLT) for k in range(1, self.n + 1)]
        return SlaveDescriptor(
            model_id="fu:switchboard", variables=tuple(ins) + tuple(outs)
        )

    def evaluate(self, values, t):
        out = {}
        bus_v = values["bus_v"]
        bus_i = 0.0
        for k in range(1, self.n + 1):
            closed = values[f"breaker_{k}"] >= 0.5
            out[f"leg_v_{k}"] = bus_v if closed else 0.0
            if closed:
                bus_i += values[f"leg_i_{k}"]
        out["bus_i"] = bus_i
        return out


FU_KINDS: dict[str, type[FunctionUnit]] = {
    "gain": Gain,
    "sum": Sum,
    "unit_convert": UnitConvert,
    "splitter": Splitter,
    "force_aggregator": ForceAggregator,
    "switchboard": Switchboard,
}


def make_fu(spec: FunctionUnitSpec) -> FunctionUnit:
    try:
        cls = FU_KINDS[spec.kind]
    except KeyError:
        raise KeyError(
            f"unknown fu kind {spec.kind!r}; known: {sorted(FU_KINDS)}"
        ) from None
    return cls(spec)


def build_fu_descriptor(spec: FunctionUnitSpec) -> SlaveDescriptor:
    return make_fu(spec).desc


@dataclass(frozen=True)
class CopyOp:
    src: PortRef
    dst: PortRef
    factor: float  # unit conversion, exactly 1.0 for identical units


@dataclass(frozen=True)
class EvalOp:
    fu: str


@dataclass(frozen=True)
class EvaluationPlan:
    """Ordered copies and FU evaluations turning outputs into inputs."""

    ops: tuple[CopyOp | EvalOp, ...]
    fus: dict[str, FunctionUnit]
    slave_names: frozenset[str]
    chain_length: int  # nodes on the longest same-instant chain

    @property
    def n_init(self) -> int:
        return 1 + self.chain_length


def _copy_factor(src_v: VariableDescriptor, dst_v: VariableDescriptor) -> float:
    if src_v.unit is None or dst_v.unit is None or src_v.unit == dst_v.unit:
        return 1.0
    return conversion_factor(src_v.unit, dst_v.unit)


def build_plan(
    system: SystemDescription, descriptors: dict[str, SlaveDescriptor]
) -> EvaluationPlan:
    """Order all copies and FU evaluations for one communication point.

    Assumes the system already passed validation; still raises
    AlgebraicLoop when the same-instant graph is cyclic, since an
    unplannable system must never reach the master loop.
    """
    slave_desc = {s.name: descriptors[s.model_id] for s in system.slaves}
    fus = {fu.name: make_fu(fu) for fu in system.function_units}
    fu_desc = {name: fu.desc for name, fu in fus.items()}

    cycle = find_algebraic_loop(system, slave_desc, fu_desc)
    if cycle is not None:
        raise AlgebraicLoop(cycle)

    def var_of(ref: PortRef) -> VariableDescriptor:
        d = slave_desc.get(ref.owner) or fu_desc[ref.owner]
        return d.variable(ref.var)

    # Collect every directed copy: bond legs first, then signals, in
    # declaration order, which fixes evaluation determinism.
    copies: list[tuple[PortRef, PortRef]] = []
    for bond in system.bonds:
        a, b = bond.side_a, bond.side_b
        copies.append((PortRef(a.slave, a.output), PortRef(b.slave, b.input)))
        copies.append((PortRef(b.slave, b.output), PortRef(a.slave, a.input)))
    for sig in system.signals:
        copies.append((sig.source, sig.target))

    # Topological order of FUs via dependency counting on FU-to-FU copies.
    fu_deps: dict[str, set[str]] = {name: set() for name in fus}
    for src, dst in copies:
        if src.owner in fus and dst.owner in fus:
            fu_deps[dst.owner].add(src.owner)
    order: list[str] = []
    placed: set[str] = set()
    remaining = dict(fu_deps)
    while remaining:
        ready = sorted(n for n, deps in remaining.items() if deps <= placed)
        if not ready:  # unreachable after the cycle check above
            raise AlgebraicLoop(sorted(remaining))
        for n in ready:
            order.append(n)
            placed.add(n)
            del remaining[n]

    ops: list[CopyOp | EvalOp] = []
    emitted: set[int] = set()

    def emit_copies(pred):
        for i, (src, dst) in enumerate(copies):
            if i in emitted or not pred(src):
                continue
            ops.append(CopyOp(src, dst, _copy_factor(var_of(src), var_of(dst))))
            emitted.add(i)

    emit_copies(lambda src: src.owner not in fus)
    for name in order:
        ops.append(EvalOp(name))
        emit_copies(lambda src, name=name: src.owner == name)

    chain = _longest_chain(system, slave_desc, fu_desc)
    return EvaluationPlan(
        ops=tuple(ops),
        fus=fus,
        slave_names=frozenset(slave_desc),
        chain_length=chain,
    )


def _longest_chain(system, slave_desc, fu_desc) -> int:
    """Longest path (node count) through the same-instant graph."""
    from .system import _same_instant_edges

    edges = _same_instant_edges(system, slave_desc, fu_desc)
    nodes = set(edges)
    for nbrs in edges.values():
        nodes.update(nbrs)
    depth: dict[str, int] = {}

    def dfs(node: str) -> int:
        if node in depth:
            return depth[node]
        best = 1
        for nbr in edges.get(node, ()):
            best = max(best, 1 + dfs(nbr))
        depth[node] = best
        return best

    return max((dfs(n) for n in nodes), default=0)


def evaluate_plan(
    plan: EvaluationPlan, snapshot: dict[PortRef, float], t: float
) -> dict[PortRef, float]:
    """Run the plan on an output snapshot; return the slave input values.

    Pure: identical snapshot and t give bit-identical results.
    """
    values = dict(snapshot)
    assigned: dict[PortRef, float] = {}
    for op in plan.ops:
        if isinstance(op, CopyOp):
            v = values[op.src] * op.factor
            values[op.dst] = v
            if op.dst.owner in plan.slave_names:
                assigned[op.dst] = v
        else:
            fu = plan.fus[op.fu]
            ins = {
                var.name: values[PortRef(op.fu, var.name)]
                for var in fu.desc.inputs()
            }
            outs = fu.evaluate(ins, t)
            for name, v in outs.items():
                values[PortRef(op.fu, name)] = v
    return assigned
