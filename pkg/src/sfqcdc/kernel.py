"""Deterministic discrete-event kernel for pulse-based logic.

Time is kept in integer femtoseconds (1 ps = 1000 fs) so that event order is
exact and runs are bit-reproducible.  Events carry a schedule-order serial
number that breaks ties between pulses landing on the same femtosecond.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

FS_PER_PS = 1000

# Integer times above this are almost certainly an arithmetic bug upstream
# (2^62 fs is ~53 days of simulated time).
_TIME_LIMIT = 1 << 62


def ps_to_fs(ps: float) -> int:
    """Convert picoseconds to the integer femtosecond time base."""
    return round(ps * FS_PER_PS)


def fs_to_ps(fs: int) -> float:
    return fs / FS_PER_PS


def check_time(t: int) -> int:
    """Validate a simulation time: non-negative, no silent wrap."""
    if not isinstance(t, int):
        raise TypeError(f"simulation time must be an int (fs), got {type(t).__name__}")
    if t < 0:
        raise ValueError(f"simulation time must be non-negative, got {t}")
    if t > _TIME_LIMIT:
        raise OverflowError(f"simulation time {t} fs exceeds the supported range")
    return t


class SchedulingError(Exception):
    """Raised when a cell behavior schedules an event in the past."""


class EventStormError(Exception):
    """Raised when the event count exceeds the configured cap (oscillation)."""


@dataclass(frozen=True, order=True)
class PulseEvent:
    """A dimensionless SFQ pulse on a net at a point in time."""

    time: int
    serial: int
    net: str = field(compare=False)


class Trace:
    """Pulse instants recorded on probed nets, strictly increasing per net."""

    def __init__(self) -> None:
        self._pulses: dict[str, list[int]] = {}

    def record(self, net: str, time: int) -> None:
        lst = self._pulses.setdefault(net, [])
        if lst and time <= lst[-1]:
            # Two pulses on one net in the same femtosecond would be a
            # physically meaningless merge; flag it instead of recording.
            raise ValueError(f"non-increasing pulse time on net {net!r}: {time}")
        lst.append(time)

    def pulses(self, net: str) -> list[int]:
        return list(self._pulses.get(net, []))

    def nets(self) -> list[str]:
        return sorted(self._pulses)

    def __contains__(self, net: str) -> bool:
        return net in self._pulses

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Trace) and self._pulses == other._pulses

    def total_pulses(self) -> int:
        return sum(len(v) for v in self._pulses.values())

    def export_text(self) -> str:
        """One record per pulse: ``<net-name> <time-fs>``, sorted by (time, net)."""
        rows = [(t, net) for net, times in self._pulses.items() for t in times]
        rows.sort()
        return "".join(f"{net} {t}\n" for t, net in rows)

    def export_vcd(self) -> str:
        """Value-change-dump style export.

        Each pulse is rendered as a 1-then-0 toggle one femtosecond apart so
        that ordinary waveform viewers can display the pulse train.
        """
        nets = self.nets()
        ids = {net: _vcd_id(i) for i, net in enumerate(nets)}
        out = ["$timescale 1fs $end", "$scope module sfqcdc $end"]
        for net in nets:
            out.append(f"$var wire 1 {ids[net]} {net} $end")
        out.append("$upscope $end")
        out.append("$enddefinitions $end")
        changes: list[tuple[int, str]] = []
        for net, times in self._pulses.items():
            for t in times:
                changes.append((t, "1" + ids[net]))
                changes.append((t + 1, "0" + ids[net]))
        changes.sort()
        last_t = None
        for t, tok in changes:
            if t != last_t:
                out.append(f"#{t}")
                last_t = t
            out.append(tok)
        return "\n".join(out) + "\n"


def _vcd_id(i: int) -> str:
    # printable identifier characters per the VCD convention
    chars = "".join(chr(c) for c in range(33, 127))
    s = ""
    while True:
        s = chars[i % len(chars)] + s
        i //= len(chars)
        if i == 0:
            return s


class Simulator:
    """Event queue plus the wiring between nets and cell behaviors.

    A single instance is strictly sequential; independent instances share
    nothing and may run on separate threads.
    """

    def __init__(self, event_cap: int = 10**8) -> None:
        self.now = 0
        self.event_cap = event_cap
        self.events_processed = 0
        self._queue: list[tuple[int, int, str]] = []
        self._serial = 0
        # net -> list of (cell, port) sinks
        self._sinks: dict[str, list[tuple[object, str]]] = {}
        self._probes: set[str] = set()
        self.trace = Trace()

    # -- wiring ---------------------------------------------------------

    def connect(self, net: str, cell: object, port: str) -> None:
        self._sinks.setdefault(net, []).append((cell, port))

    def probe(self, net: str) -> None:
        self._probes.add(net)

    # -- scheduling -----------------------------------------------------

    def schedule(self, net: str, time: int) -> PulseEvent:
        check_time(time)
        if time < self.now:
            raise SchedulingError(
                f"event on {net!r} at {time} fs is in the past (now={self.now} fs)"
            )
        ev = PulseEvent(time=time, serial=self._serial, net=net)
        self._serial += 1
        heapq.heappush(self._queue, (time, ev.serial, net))
        return ev

    # `inject` is the harness-facing alias used to drive external ports.
    inject = schedule

    # -- execution ------------------------------------------------------

    def run_until(self, t_end: int) -> Trace:
        """Process all events with time <= t_end; resumable afterwards."""
        check_time(t_end)
        while self._queue and self._queue[0][0] <= t_end:
            time, serial, net = heapq.heappop(self._queue)
            self.now = time
            self.events_processed += 1
            if self.events_processed > self.event_cap:
                raise EventStormError(
                    f"event cap {self.event_cap} exceeded at t={time} fs; "
                    "the netlist is probably oscillating"
                )
            if net in self._probes:
                self.trace.record(net, time)
            for cell, port in self._sinks.get(net, ()):
                cell.deliver(self, port, time)
        if t_end > self.now:
            self.now = t_end
        return self.trace

    def pending_events(self) -> int:
        return len(self._queue)
