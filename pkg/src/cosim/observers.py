"""Passive run participants: they see everything and influence nothing.

An observer receives the run metadata once, every step record in order,
and a final end notification.  It has no channel back into the run; a
failing observer is dropped by the master and the simulation continues.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, TextIO, runtime_checkable

from .master import StartInfo, StepRecord

log = logging.getLogger(__name__)


@runtime_checkable
class Observer(Protocol):
    def on_start(self, info: StartInfo) -> None: ...

    def on_step(self, record: StepRecord) -> None: ...

    def on_end(self, reason: str) -> None: ...


@dataclass
class MemoryObserver:
    """Keeps everything it sees; convenient for tests and scripting."""

    info: StartInfo | None = None
    records: list[StepRecord] = field(default_factory=list)
    end_reason: str | None = None

    def on_start(self, info: StartInfo) -> None:
        self.info = info

    def on_step(self, record: StepRecord) -> None:
        self.records.append(record)

    def on_end(self, reason: str) -> None:
        self.end_reason = reason


def _fmt(x: float) -> str:
    # repr is the shortest decimal that round-trips to the same binary64
    return repr(x)


class CsvObserver:
    """Writes ``signals.csv`` and ``energy.csv`` under an output directory.

    ``signals.csv`` has one row per completed macro step with every slave
    output at the step's end time; ``energy.csv`` has one row per bond per
    step with the power/energy accounting.  A run with zero steps leaves
    headers only.  Values are written as shortest round-trip decimals, so
    parsing a column back yields bit-identical floats.

    IO errors disable this observer; they never propagate into the run.
    """

    def __init__(self, out_dir: str | Path):
        self.out_dir = Path(out_dir)
        self._signals: TextIO | None = None
        self._energy: TextIO | None = None
        self._ports: tuple = ()

    def on_start(self, info: StartInfo) -> None:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self._ports = info.output_ports
        header = [f"{p.owner}.{p.var}" for p in self._ports]
        self._signals = open(self.out_dir / "signals.csv", "w", newline="")
        self._signals.write(",".join(["time"] + header) + "\n")
        self._energy = open(self.out_dir / "energy.csv", "w", newline="")
        self._energy.write("time,bond,P1,P2,dP,dE,cumulative_dE,epsilon\n")

    def on_step(self, record: StepRecord) -> None:
        if self._signals is None or self._energy is None:
            return
        try:
            t = _fmt(record.t_next)
            row = [t] + [_fmt(record.outputs[p]) for p in self._ports]
            self._signals.write(",".join(row) + "\n")
            eps = _fmt(record.energy.epsilon)
            for b in record.energy.bonds:
                cells = (t, b.bond, _fmt(b.p1), _fmt(b.p2), _fmt(b.dp),
                         _fmt(b.de), _fmt(b.cumulative_de), eps)
                self._energy.write(",".join(cells) + "\n")
        except OSError:
            log.warning("csv observer write failed; disabling", exc_info=True)
            self._close()

    def on_end(self, reason: str) -> None:
        self._close()

    def _close(self) -> None:
        for f in (self._signals, self._energy):
            if f is not None:
                try:
                    f.close()
                except OSError:
                    pass
        self._signals = None
        self._energy = None
