"""Netlist data model, validation, text format, and elaboration.

Format (documented grammar, ``#`` starts a comment anywhere):

    cells:
      <name> <kind> [param=value ...]
    nets:
      <driver> -> <sink>[, <sink> ...]

A ``<driver>`` is ``cell.port`` for a cell output or a bare identifier for
an external input port.  A ``<sink>`` is ``cell.port`` for a cell input or
a bare identifier for an external output port.  Delays and times are
integer femtoseconds.  Fanout is explicit: a net may feed at most one
non-probe sink; duplication requires splitter cells.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import cells as _cells
from .cells import Cell, CellKind, ClockGen, CElement, DottedCElement, Dro, Jtl, JitterSpec, \
    Probe, ProtocolStats, Source, Splitter, PORTS_IN, PORTS_OUT
from .kernel import Simulator
from .timing import ClockToQModel

EXTERNAL_PORTS = ("WRITE_CLK", "READ_CLK", "DATA_IN", "SEND_IN", "DATA_OUT", "VALID_OUT")

_KIND_BY_NAME = {k.value: k for k in CellKind}


class NetlistError(ValueError):
    """Raised for structural violations and parse errors."""


@dataclass(frozen=True)
class CellSpec:
    name: str
    kind: CellKind
    params: tuple[tuple[str, str], ...] = ()

    def param(self, key: str, default: str | None = None) -> str | None:
        for k, v in self.params:
            if k == key:
                return v
        return default


@dataclass(frozen=True)
class Net:
    driver: str  # "cell.port" or external input port name
    sinks: tuple[str, ...]  # "cell.port" or external output port names


@dataclass
class Netlist:
    cells: list[CellSpec] = field(default_factory=list)
    nets: list[Net] = field(default_factory=list)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Netlist)
            and self.cells == other.cells
            and self.nets == other.nets
        )

    # -- construction helpers (used by the generators) -------------------

    def add_cell(self, name: str, kind: CellKind, **params) -> str:
        items = tuple((k, str(v)) for k, v in params.items())
        self.cells.append(CellSpec(name=name, kind=kind, params=items))
        return name

    def connect(self, driver: str, *sinks: str) -> None:
        self.nets.append(Net(driver=driver, sinks=tuple(sinks)))

    # -- queries ----------------------------------------------------------

    def cell_map(self) -> dict[str, CellSpec]:
        return {c.name: c for c in self.cells}

    def external_inputs(self) -> list[str]:
        return [n.driver for n in self.nets if "." not in n.driver]

    def external_outputs(self) -> list[str]:
        return [s for n in self.nets for s in n.sinks if "." not in s]

    def net_name(self, net: Net) -> str:
        """Simulator-facing net name: the output port alias when present."""
        for s in net.sinks:
            if "." not in s:
                return s
        return net.driver

    def counts_by_kind(self) -> dict[CellKind, int]:
        out: dict[CellKind, int] = {}
        for c in self.cells:
            out[c.kind] = out.get(c.kind, 0) + 1
        return out

    # -- validation --------------------------------------------------------

    def validate(self) -> None:
        by_name = {}
        for c in self.cells:
            if c.name in by_name:
                raise NetlistError(f"duplicate cell name {c.name!r}")
            if "." in c.name:
                raise NetlistError(f"cell name {c.name!r} may not contain '.'")
            by_name[c.name] = c

        def split(endpoint: str, want_out: bool, ctx: str) -> tuple[str, str] | None:
            if "." not in endpoint:
                return None  # external port
            cell_name, _, port = endpoint.partition(".")
            if cell_name not in by_name:
                raise NetlistError(f"{ctx}: unknown cell {cell_name!r}")
            kind = by_name[cell_name].kind
            ports = PORTS_OUT[kind] if want_out else PORTS_IN[kind]
            if port not in ports:
                side = "output" if want_out else "input"
                raise NetlistError(f"{ctx}: {port!r} is not an {side} port of {kind.value}")
            return cell_name, port

        seen_drivers: set[str] = set()
        seen_sinks: set[str] = set()
        out_port_names: set[str] = set()
        for net in self.nets:
            ctx = f"net {net.driver!r}"
            if net.driver in seen_drivers:
                raise NetlistError(f"{ctx}: two nets with the same driver")
            seen_drivers.add(net.driver)
            split(net.driver, want_out=True, ctx=ctx)
            non_probe_sinks = 0
            for s in net.sinks:
                ep = split(s, want_out=False, ctx=ctx)
                if ep is None:
                    if s in out_port_names:
                        raise NetlistError(f"{ctx}: output port {s!r} driven twice")
                    out_port_names.add(s)
                    continue
                if s in seen_sinks:
                    raise NetlistError(f"{ctx}: input {s!r} already driven by another net")
                seen_sinks.add(s)
                if by_name[ep[0]].kind is not CellKind.PROBE:
                    non_probe_sinks += 1
            if non_probe_sinks > 1:
                raise NetlistError(
                    f"{ctx}: fanout {non_probe_sinks} requires explicit splitters"
                )

        # every declared external port name participates in some net
        for c in self.cells:
            for port in PORTS_IN[c.kind]:
                if f"{c.name}.{port}" not in seen_sinks:
                    raise NetlistError(f"unconnected input {c.name}.{port}")


# -- text format -----------------------------------------------------------


def serialize(netlist: Netlist) -> str:
    lines = ["cells:"]
    for c in netlist.cells:
        parts = [c.name, c.kind.value]
        parts += [f"{k}={v}" for k, v in c.params]
        lines.append("  " + " ".join(parts))
    lines.append("nets:")
    for n in netlist.nets:
        lines.append(f"  {n.driver} -> " + ", ".join(n.sinks))
    return "\n".join(lines) + "\n"


def parse(text: str) -> Netlist:
    netlist = Netlist()
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        stripped = line.strip()
        if stripped == "cells:":
            section = "cells"
            continue
        if stripped == "nets:":
            section = "nets"
            continue
        if section == "cells":
            parts = stripped.split()
            if len(parts) < 2:
                raise NetlistError(f"line {lineno}: expected '<name> <kind> ...'")
            name, kind_name, *param_parts = parts
            if kind_name not in _KIND_BY_NAME:
                raise NetlistError(f"line {lineno}: unknown cell kind {kind_name!r}")
            params = []
            for p in param_parts:
                if "=" not in p:
                    raise NetlistError(f"line {lineno}: bad parameter {p!r} (need key=value)")
                k, _, v = p.partition("=")
                params.append((k, v))
            netlist.cells.append(
                CellSpec(name=name, kind=_KIND_BY_NAME[kind_name], params=tuple(params))
            )
        elif section == "nets":
            if "->" not in stripped:
                raise NetlistError(f"line {lineno}: expected '<driver> -> <sink>[, ...]'")
            driver, _, rhs = stripped.partition("->")
            sinks = tuple(s.strip() for s in rhs.split(",") if s.strip())
            if not sinks:
                raise NetlistError(f"line {lineno}: net needs at least one sink")
            netlist.nets.append(Net(driver=driver.strip(), sinks=sinks))
        else:
            raise NetlistError(f"line {lineno}: content before a 'cells:'/'nets:' section")
    netlist.validate()
    return netlist


# -- elaboration ------------------------------------------------------------


def _int_param(spec: CellSpec, key: str, default: int | None = None) -> int:
    raw = spec.param(key)
    if raw is None:
        if default is None:
            raise NetlistError(f"cell {spec.name!r}: missing parameter {key!r}")
        return default
    try:
        return int(raw)
    except ValueError as exc:
        raise NetlistError(f"cell {spec.name!r}: parameter {key}={raw!r} is not an integer") from exc


def build_cell(spec: CellSpec, model: ClockToQModel, stats: ProtocolStats) -> Cell:
    kind = spec.kind
    if kind is CellKind.JTL:
        return Jtl(spec.name, delay=_int_param(spec, "delay"))
    if kind is CellKind.SPLITTER:
        return Splitter(spec.name, delay=_int_param(spec, "delay"))
    if kind is CellKind.C_ELEMENT:
        return CElement(spec.name, delay=_int_param(spec, "delay"), stats=stats)
    if kind is CellKind.C_ELEMENT_DOTTED:
        return DottedCElement(spec.name, delay=_int_param(spec, "delay"), stats=stats)
    if kind is CellKind.DRO:
        return Dro(spec.name, model=model, stats=stats)
    if kind is CellKind.PROBE:
        return Probe(spec.name)
    if kind is CellKind.SOURCE:
        raw = spec.param("times", "")
        times = [int(t) for t in raw.split(",") if t]
        return Source(spec.name, times)
    if kind is CellKind.CLOCK_GEN:
        jitter = None
        jraw = spec.param("jitter")
        if jraw:
            jkind, mag, seed = jraw.split(":")
            jitter = JitterSpec(kind=jkind, magnitude_fs=float(mag), seed=int(seed))
        return ClockGen(
            spec.name,
            period=_int_param(spec, "period"),
            phase=_int_param(spec, "phase", 0),
            jitter=jitter,
        )
    raise NetlistError(f"cell {spec.name!r}: cannot elaborate kind {kind}")


@dataclass
class Elaboration:
    sim: Simulator
    cells: dict[str, Cell]
    stats: ProtocolStats
    input_nets: dict[str, str]  # external input port -> net name


def elaborate(
    netlist: Netlist,
    model: ClockToQModel,
    sim: Simulator | None = None,
    strict: bool = False,
    probe_all: bool = False,
) -> Elaboration:
    """Instantiate behaviors and wire them into a simulator.

    External output ports are probed automatically; set ``probe_all`` to
    record every net.
    """
    netlist.validate()
    if sim is None:
        sim = Simulator()
    stats = ProtocolStats(strict=strict)
    live: dict[str, Cell] = {}
    for spec in netlist.cells:
        live[spec.name] = build_cell(spec, model, stats)

    input_nets: dict[str, str] = {}
    for net in netlist.nets:
        name = netlist.net_name(net)
        if "." in net.driver:
            cell_name, _, port = net.driver.partition(".")
            live[cell_name].bind_output(port, name)
        else:
            input_nets[net.driver] = name
        for s in net.sinks:
            if "." in s:
                cell_name, _, port = s.partition(".")
                sim.connect(name, live[cell_name], port)
            else:
                sim.probe(name)
        if probe_all:
            sim.probe(name)

    for cell in live.values():
        cell.start(sim)
    return Elaboration(sim=sim, cells=live, stats=stats, input_nets=input_nets)
