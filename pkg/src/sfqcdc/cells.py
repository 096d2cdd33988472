"""Behavioral models of the SFQ cells used by the FIFO designs.

Every cell is a small state machine with a ``deliver(sim, port, time)``
method that schedules pulses on its output nets.  JTLs and splitters are
pure delays; the C-element fires once both inputs are armed; the DRO is a
destructive-readout storage element whose clock-to-Q delay comes from a
``ClockToQModel``.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum

from .kernel import Simulator
from .timing import DEFERRED, ClockToQModel


class CellKind(Enum):
    SOURCE = "source"
    CLOCK_GEN = "clockgen"
    JTL = "jtl"
    SPLITTER = "splitter"
    C_ELEMENT = "c"
    C_ELEMENT_DOTTED = "c_dotted"
    DRO = "dro"
    PROBE = "probe"


# port names, fixed per kind
PORTS_IN = {
    CellKind.SOURCE: (),
    CellKind.CLOCK_GEN: (),
    CellKind.JTL: ("in",),
    CellKind.SPLITTER: ("in",),
    CellKind.C_ELEMENT: ("a", "b"),
    CellKind.C_ELEMENT_DOTTED: ("a", "b"),
    CellKind.DRO: ("data", "clk"),
    CellKind.PROBE: ("in",),
}
PORTS_OUT = {
    CellKind.SOURCE: ("out",),
    CellKind.CLOCK_GEN: ("out",),
    CellKind.JTL: ("out",),
    CellKind.SPLITTER: ("out0", "out1"),
    CellKind.C_ELEMENT: ("out",),
    CellKind.C_ELEMENT_DOTTED: ("out",),
    CellKind.DRO: ("q",),
    CellKind.PROBE: (),
}


class ProtocolViolation(Exception):
    """Raised in strict mode when a cell receives an illegal pulse."""


@dataclass
class ProtocolStats:
    """Counters for tolerated protocol irregularities."""

    c_element_double_arm: int = 0
    dro_double_data: int = 0
    strict: bool = False

    def total(self) -> int:
        return self.c_element_double_arm + self.dro_double_data


class Cell:
    """Base cell: name, output-net bindings, delivery interface."""

    kind: CellKind

    def __init__(self, name: str) -> None:
        self.name = name
        self.out_nets: dict[str, str] = {}

    def bind_output(self, port: str, net: str) -> None:
        self.out_nets[port] = net

    def emit(self, sim: Simulator, port: str, time: int) -> None:
        net = self.out_nets.get(port)
        if net is not None:
            sim.schedule(net, time)

    def deliver(self, sim: Simulator, port: str, time: int) -> None:
        raise NotImplementedError

    def start(self, sim: Simulator) -> None:
        """Hook for self-starting cells (sources, clock generators)."""


class Jtl(Cell):
    """Pulse repeater: pure delay, also used as a calibrated delay line."""

    kind = CellKind.JTL

    def __init__(self, name: str, delay: int) -> None:
        super().__init__(name)
        if delay <= 0:
            raise ValueError(f"jtl {name!r}: delay must be positive")
        self.delay = delay

    def deliver(self, sim: Simulator, port: str, time: int) -> None:
        self.emit(sim, "out", time + self.delay)


class Splitter(Cell):
    """Duplicates one input pulse onto two outputs (explicit fanout)."""

    kind = CellKind.SPLITTER

    def __init__(self, name: str, delay: int) -> None:
        super().__init__(name)
        if delay <= 0:
            raise ValueError(f"splitter {name!r}: delay must be positive")
        self.delay = delay

    def deliver(self, sim: Simulator, port: str, time: int) -> None:
        self.emit(sim, "out0", time + self.delay)
        self.emit(sim, "out1", time + self.delay)


class CElement(Cell):
    """Coincidence junction: fires after both inputs received a pulse.

    The dotted variant starts with port ``a`` armed, so the first pulse on
    ``b`` alone produces an output; afterwards it behaves like the plain
    cell.
    """

    kind = CellKind.C_ELEMENT

    def __init__(self, name: str, delay: int, stats: ProtocolStats | None = None) -> None:
        super().__init__(name)
        if delay <= 0:
            raise ValueError(f"c-element {name!r}: delay must be positive")
        self.delay = delay
        self.armed = {"a": False, "b": False}
        self.stats = stats if stats is not None else ProtocolStats()

    def deliver(self, sim: Simulator, port: str, time: int) -> None:
        if self.armed[port]:
            self.stats.c_element_double_arm += 1
            if self.stats.strict:
                raise ProtocolViolation(
                    f"{self.name}: pulse on already-armed port {port!r} at {time} fs"
                )
            return
        other = "b" if port == "a" else "a"
        if self.armed[other]:
            self.armed[other] = False
            self.emit(sim, "out", time + self.delay)
        else:
            self.armed[port] = True


class DottedCElement(CElement):
    kind = CellKind.C_ELEMENT_DOTTED

    def __init__(self, name: str, delay: int, stats: ProtocolStats | None = None) -> None:
        super().__init__(name, delay, stats)
        self.armed["a"] = True  # initialized armed at t=0


class Dro(Cell):
    """Destructive-readout storage element (D-element).

    A data pulse stores one flux quantum; a clock pulse reads it out after
    the model's clock-to-Q delay for the observed setup slack.  Slacks at
    or below the failure threshold defer the readout: the flux is held and
    the next clock pulse releases it with the nominal delay.
    """

    kind = CellKind.DRO

    def __init__(self, name: str, model: ClockToQModel, stats: ProtocolStats | None = None) -> None:
        super().__init__(name)
        self.model = model
        self.stored = False
        self.armed_at = 0
        self.deferred = False
        self.stats = stats if stats is not None else ProtocolStats()

    def deliver(self, sim: Simulator, port: str, time: int) -> None:
        if port == "data":
            if self.stored:
                # absorbed by the already-present flux; arrival time keeps
                # its original value (destructive-readout physics)
                self.stats.dro_double_data += 1
                if self.stats.strict:
                    raise ProtocolViolation(
                        f"{self.name}: data pulse while storing flux at {time} fs"
                    )
                return
            self.stored = True
            self.armed_at = time
            return
        # clock port
        if not self.stored:
            return
        if self.deferred:
            self.deferred = False
            self.stored = False
            self.emit(sim, "q", time + self.model.delay_fs_nominal())
            return
        d = self.model.delay_fs(time - self.armed_at)
        if d is DEFERRED:
            self.deferred = True
            return
        self.stored = False
        self.emit(sim, "q", time + d)


class Source(Cell):
    """Injects a fixed list of pulses at elaboration time."""

    kind = CellKind.SOURCE

    def __init__(self, name: str, times: list[int]) -> None:
        super().__init__(name)
        self.times = sorted(times)

    def deliver(self, sim: Simulator, port: str, time: int) -> None:
        raise ValueError(f"source {self.name!r} has no input ports")

    def start(self, sim: Simulator) -> None:
        for t in self.times:
            self.emit(sim, "out", t)


@dataclass(frozen=True)
class JitterSpec:
    """Optional per-edge clock jitter; deterministic given the seed."""

    kind: str  # "uniform" or "normal"
    magnitude_fs: float  # half-range for uniform, sigma for normal
    seed: int = 0


class ClockGen(Cell):
    """Periodic pulse train: phase + k*period, optional additive jitter.

    Self-rescheduling: each delivered tick schedules the next, so the train
    follows ``run_until`` horizons without a precomputed pulse list.
    """

    kind = CellKind.CLOCK_GEN

    def __init__(self, name: str, period: int, phase: int = 0,
                 jitter: JitterSpec | None = None) -> None:
        super().__init__(name)
        if period <= 0:
            raise ValueError(f"clockgen {name!r}: period must be positive")
        if not 0 <= phase < period:
            raise ValueError(f"clockgen {name!r}: phase must lie in [0, period)")
        self.period = period
        self.phase = phase
        self.jitter = jitter
        self._rng = random.Random(jitter.seed) if jitter else None
        self._tick_net = f"__tick_{name}"
        self._k = 0

    def start(self, sim: Simulator) -> None:
        sim.connect(self._tick_net, self, "tick")
        sim.schedule(self._tick_net, self.phase)

    def deliver(self, sim: Simulator, port: str, time: int) -> None:
        edge = time
        if self.jitter is not None:
            if self.jitter.kind == "uniform":
                j = self._rng.uniform(-self.jitter.magnitude_fs, self.jitter.magnitude_fs)
            elif self.jitter.kind == "normal":
                j = self._rng.gauss(0.0, self.jitter.magnitude_fs)
            else:
                raise ValueError(f"unknown jitter kind {self.jitter.kind!r}")
            edge = max(time + round(j), sim.now)
        self.emit(sim, "out", edge)
        self._k += 1
        sim.schedule(self._tick_net, self.phase + self._k * self.period)


class Probe(Cell):
    """Sink that records arrivals; used to terminate observation-only nets."""

    kind = CellKind.PROBE

    def __init__(self, name: str) -> None:
        super().__init__(name)
        self.arrivals: list[int] = []

    def deliver(self, sim: Simulator, port: str, time: int) -> None:
        self.arrivals.append(time)
