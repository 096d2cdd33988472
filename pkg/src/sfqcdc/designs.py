"""Generators for the three FIFO designs, plus the JJ-count and area models.

Write side (all designs): a self-timed shift register.  Each stage holds a
data DRO and a dotted C-element whose ready port starts armed.  When a
stage fires, its pulse is split three ways: the stage's DRO readout clock,
the acknowledge that arms the downstream stage, and (after a delay) the
SEND' that re-arms the upstream stage.

Read side (baseline): the rightmost C-element is replaced by a
destructive-readout element clocked from READ_CLK.  Its output is split
into the VALID branch (splitter + delay line), the readout strobe of the
data DRO (whose clock-to-Q is therefore always nominal), and the SEND'
feedback that lets the write side refill.  The proposed design inserts
extra read-clocked DROs between the crossing element and that split, one
read period apiece, plus a dotted C-element that gates VALID release on
consumer readiness.

Delay lines (single JTL instances with per-instance delays) are sized per
target read period so the designs meet timing at both calibrated
operating points (30 and 50 GHz); intermediate periods interpolate
linearly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .calibration import Calibration, default_calibration
from .cells import CellKind
from .netlist import Netlist

# calibrated operating points: (read period fs, valid-path fs, data-path fs)
# both paths measured from READ_CLK arrival (they include the clock-tap
# offset and, on the data side, the nominal readout clock-to-Q)
_OPERATING_POINTS = ((20000, 6000, 11650), (33333, 15000, 20000))

SYNC_LINK_FS = 1200  # data link between synchronizer stages
CLOCK_TAP_STUB_FS = 150  # isolation stub on each clock-tree leaf
MIN_LINE_FS = 50  # shortest realizable delay line


def _interp(period_fs: int, idx: int) -> int:
    (p0, *v0), (p1, *v1) = _OPERATING_POINTS
    a, b = v0[idx], v1[idx]
    return round(a + (b - a) * (period_fs - p0) / (p1 - p0))


def valid_path_target(period_fs: int) -> int:
    return _interp(period_fs, 0)


def data_path_target(period_fs: int) -> int:
    return _interp(period_fs, 1)


@dataclass(frozen=True)
class DesignTiming:
    """Path constants the analysis layer needs; exported by the builders."""

    design: str
    n: int
    k: int
    read_period_fs: int
    x_clk_offset_fs: int  # READ_CLK -> crossing-DRO clock
    valid_path_fs: int  # READ_CLK-relative: crossing Q + valid branch
    data_path_fs: int  # READ_CLK-relative: crossing Q + readout + data branch
    sync_link_fs: int
    ack_arrival_offset_fs: int  # WRITE_CLK pulse -> ack at crossing data port
    data_in_lead_fs: int  # recommended DATA_IN lead before WRITE_CLK
    min_token_spacing_fs: int


@dataclass(frozen=True)
class Design:
    netlist: Netlist
    timing: DesignTiming


class DesignError(ValueError):
    pass


def _write_side(nl: Netlist, n: int, cal: Calibration) -> tuple[str, str, int]:
    """Stages N..2 plus the input adapter.

    Returns (ack_endpoint, data_endpoint, ack_offset): the dangling ack and
    data drivers headed for the read-side block, and the WRITE_CLK-to-ack
    path delay in fs.
    """
    jtl = cal.jtl_delay_fs
    spl = cal.splitter_delay_fs
    dc = cal.c_delay_fs

    nl.add_cell("in_data", CellKind.JTL, delay=jtl)
    nl.add_cell("in_wclk", CellKind.JTL, delay=jtl)
    nl.connect("DATA_IN", "in_data.in")
    nl.connect("WRITE_CLK", "in_wclk.in")

    ack_offset = jtl + dc  # adapter + first C-element firing
    ack_ep = ""
    data_ep = ""
    for i in range(n, 1, -1):
        reduced = i == n
        c = f"st{i}_c"
        dro = f"st{i}_dro"
        nl.add_cell(c, CellKind.C_ELEMENT_DOTTED, delay=dc)
        nl.add_cell(dro, CellKind.DRO)
        nl.add_cell(f"st{i}_spl1", CellKind.SPLITTER, delay=spl)
        nl.connect(f"{c}.out", f"st{i}_spl1.in")
        nl.connect(f"st{i}_spl1.out0", f"{dro}.clk")
        if reduced:
            ack_src = "st%d_spl1.out1" % i
            ack_offset += spl
        else:
            nl.add_cell(f"st{i}_spl2", CellKind.SPLITTER, delay=spl)
            nl.connect(f"st{i}_spl1.out1", f"st{i}_spl2.in")
            ack_src = f"st{i}_spl2.out0"
            nl.add_cell(f"st{i}_send", CellKind.JTL, delay=jtl)
            nl.connect(f"st{i}_spl2.out1", f"st{i}_send.in")
            nl.connect(f"st{i}_send.out", f"st{i + 1}_c.a")
            ack_offset += 2 * spl
        # acknowledge chain: isolation JTLs adding up to the hold-off that
        # keeps the downstream readout clock behind the data
        prev = ack_src
        for j in range(8):
            name = f"st{i}_ack{j}"
            nl.add_cell(name, CellKind.JTL, delay=jtl)
            nl.connect(prev, f"{name}.in")
            prev = f"{name}.out"
        ack_offset += 8 * jtl
        ack_ep = prev
        nl.add_cell(f"st{i}_link", CellKind.JTL, delay=jtl)
        nl.connect(f"{dro}.q", f"st{i}_link.in")
        data_ep = f"st{i}_link.out"
        if i > 2:
            nl.connect(ack_ep, f"st{i - 1}_c.b")
            nl.connect(data_ep, f"st{i - 1}_dro.data")
            ack_offset += dc  # next stage fires d_c after its arming
    nl.connect("in_data.out", f"st{n}_dro.data")
    nl.connect("in_wclk.out", f"st{n}_c.b")
    return ack_ep, data_ep, ack_offset


def _clock_tree(nl: Netlist, k: int, cal: Calibration) -> tuple[list[str], int]:
    """READ_CLK fanout to k equal-offset taps (crossing + sync stages).

    A balanced splitter tree with per-leaf trimming stubs; every tap sees
    the same offset 1600*depth + stub so the synchronizer stages step by
    exactly one read period.
    """
    spl = cal.splitter_delay_fs
    if k == 1:
        offset = spl + CLOCK_TAP_STUB_FS
        nl.add_cell("x_clk", CellKind.JTL, delay=offset)
        nl.connect("READ_CLK", "x_clk.in")
        return ["x_clk.out"], offset

    depth = max(1, math.ceil(math.log2(k)))
    offset = depth * spl + CLOCK_TAP_STUB_FS
    leaves: list[str] = []
    counter = [0]

    def grow(src: str, levels_left: int, want: int) -> None:
        if want == 1:
            idx = len(leaves)
            trim = offset - (depth - levels_left) * spl
            name = f"ctap{idx}"
            nl.add_cell(name, CellKind.JTL, delay=trim)
            nl.connect(src, f"{name}.in")
            leaves.append(f"{name}.out")
            return
        name = f"ctree{counter[0]}"
        counter[0] += 1
        nl.add_cell(name, CellKind.SPLITTER, delay=spl)
        nl.connect(src, f"{name}.in")
        left = (want + 1) // 2
        grow(f"{name}.out0", levels_left - 1, left)
        grow(f"{name}.out1", levels_left - 1, want - left)

    grow("READ_CLK", depth, k)
    return leaves, offset


def build_shift_register_fifo(n: int, cal: Calibration | None = None) -> Design:
    """Self-timed shift-register FIFO: data advances one stage per SEND."""
    if n < 1:
        raise DesignError("shift-register FIFO needs at least one stage")
    cal = cal or default_calibration()
    jtl, spl, dc = cal.jtl_delay_fs, cal.splitter_delay_fs, cal.c_delay_fs
    nl = Netlist()

    if n == 1:
        nl.add_cell("in_data", CellKind.JTL, delay=jtl)
        nl.add_cell("in_wclk", CellKind.JTL, delay=jtl)
        nl.connect("DATA_IN", "in_data.in")
        nl.connect("WRITE_CLK", "in_wclk.in")
        ack_ep, data_ep = "in_wclk.out", "in_data.out"
        ack_offset = jtl
    else:
        ack_ep, data_ep, ack_offset = _write_side(nl, n, cal)

    # output stage: C-element handshake against the consumer's SEND
    nl.add_cell("st1_c", CellKind.C_ELEMENT_DOTTED, delay=dc)
    nl.add_cell("st1_dro", CellKind.DRO)
    nl.add_cell("st1_spl1", CellKind.SPLITTER, delay=spl)
    nl.add_cell("st1_spl2", CellKind.SPLITTER, delay=spl)
    nl.add_cell("in_send", CellKind.JTL, delay=jtl)
    nl.add_cell("st1_valid", CellKind.JTL, delay=jtl)
    nl.connect("SEND_IN", "in_send.in")
    nl.connect("in_send.out", "st1_c.a")
    nl.connect(ack_ep, "st1_c.b")
    nl.connect(data_ep, "st1_dro.data")
    nl.connect("st1_c.out", "st1_spl1.in")
    nl.connect("st1_spl1.out0", "st1_dro.clk")
    nl.connect("st1_spl1.out1", "st1_spl2.in")
    nl.connect("st1_spl2.out0", "st1_valid.in")
    nl.connect("st1_valid.out", "VALID_OUT")
    nl.add_cell("st1_out", CellKind.JTL, delay=jtl)
    nl.connect("st1_dro.q", "st1_out.in")
    nl.connect("st1_out.out", "DATA_OUT")
    if n > 1:
        nl.add_cell("st1_send", CellKind.JTL, delay=jtl)
        nl.connect("st1_spl2.out1", "st1_send.in")
        nl.connect("st1_send.out", "st2_c.a")
    else:
        nl.add_cell("st1_send_probe", CellKind.PROBE)
        nl.connect("st1_spl2.out1", "st1_send_probe.in")
    # no read clock in the self-timed design; the port is observation-only
    nl.add_cell("rclk_probe", CellKind.PROBE)
    nl.connect("READ_CLK", "rclk_probe.in")
    nl.validate()

    timing = DesignTiming(
        design="shift",
        n=n,
        k=0,
        read_period_fs=0,
        x_clk_offset_fs=0,
        valid_path_fs=0,
        data_path_fs=0,
        sync_link_fs=0,
        ack_arrival_offset_fs=ack_offset,
        data_in_lead_fs=4 * jtl,
        min_token_spacing_fs=(n + 2) * (8 * jtl + 2 * spl + dc + 10000),
    )
    return Design(netlist=nl, timing=timing)


def _build_cdc(n: int, k: int, cal: Calibration, read_period_fs: int) -> Design:
    if n < 2:
        raise DesignError("CDC FIFOs need at least two stages")
    if k < 1:
        raise DesignError("synchronizer depth k must be >= 1")
    if read_period_fs <= 0:
        raise DesignError("read period must be positive")
    jtl, spl, dc = cal.jtl_delay_fs, cal.splitter_delay_fs, cal.c_delay_fs
    d_nom = cal.model().delay_fs_nominal()
    nl = Netlist()
    ack_ep, data_ep, ack_offset = _write_side(nl, n, cal)

    taps, x_offset = _clock_tree(nl, k, cal)

    # crossing element samples the token-available acknowledge
    nl.add_cell("x_dro", CellKind.DRO)
    nl.connect(ack_ep, "x_dro.data")
    nl.connect(taps[0], "x_dro.clk")
    q_ep = "x_dro.q"
    for s in range(2, k + 1):
        nl.add_cell(f"sync{s}_link", CellKind.JTL, delay=SYNC_LINK_FS)
        nl.add_cell(f"sync{s}_dro", CellKind.DRO)
        nl.connect(q_ep, f"sync{s}_link.in")
        nl.connect(f"sync{s}_link.out", f"sync{s}_dro.data")
        nl.connect(taps[s - 1], f"sync{s}_dro.clk")
        q_ep = f"sync{s}_dro.q"

    nl.add_cell("q_spl_a", CellKind.SPLITTER, delay=spl)
    nl.add_cell("q_spl_b", CellKind.SPLITTER, delay=spl)
    nl.connect(q_ep, "q_spl_a.in")
    nl.connect("q_spl_a.out1", "q_spl_b.in")

    # data branch: readout strobe for the stored-data DRO
    v_eff = valid_path_target(read_period_fs)
    w_eff = data_path_target(read_period_fs)
    ro_line = max(w_eff - (x_offset + spl + d_nom), MIN_LINE_FS)
    w_eff = x_offset + spl + ro_line + d_nom
    nl.add_cell("ro_clk", CellKind.JTL, delay=ro_line)
    nl.add_cell("ro_dro", CellKind.DRO)
    nl.connect("q_spl_a.out0", "ro_clk.in")
    nl.connect("ro_clk.out", "ro_dro.clk")
    nl.connect(data_ep, "ro_dro.data")
    nl.connect("ro_dro.q", "DATA_OUT")

    # valid branch
    if k == 1:
        v_line = max(v_eff - (x_offset + 2 * spl), MIN_LINE_FS)
        v_eff = x_offset + 2 * spl + v_line
        nl.add_cell("v_line", CellKind.JTL, delay=v_line)
        nl.connect("q_spl_b.out0", "v_line.in")
        nl.connect("v_line.out", "VALID_OUT")
        nl.add_cell("sendin_probe", CellKind.PROBE)
        nl.connect("SEND_IN", "sendin_probe.in")
    else:
        # consumer-readiness gate: dotted C withholds VALID while the
        # receiver has not signalled SEND (read-side stalling logic)
        v_stub = jtl
        v_line = max(v_eff - (x_offset + 2 * spl + v_stub + dc), MIN_LINE_FS)
        v_eff = x_offset + 2 * spl + v_stub + dc + v_line
        nl.add_cell("v_stub", CellKind.JTL, delay=v_stub)
        nl.add_cell("stall_c", CellKind.C_ELEMENT_DOTTED, delay=dc)
        nl.add_cell("v_line", CellKind.JTL, delay=v_line)
        nl.connect("q_spl_b.out0", "v_stub.in")
        nl.connect("v_stub.out", "stall_c.b")
        nl.connect("SEND_IN", "stall_c.a")
        nl.connect("stall_c.out", "v_line.in")
        nl.connect("v_line.out", "VALID_OUT")

    # write-side refill: SEND' fires once the token cleared the synchronizer
    nl.add_cell("x_send", CellKind.JTL, delay=jtl)
    nl.connect("q_spl_b.out1", "x_send.in")
    nl.connect("x_send.out", "st2_c.a")
    nl.validate()

    timing = DesignTiming(
        design="baseline" if k == 1 else "qcdc",
        n=n,
        k=k,
        read_period_fs=read_period_fs,
        x_clk_offset_fs=x_offset,
        valid_path_fs=v_eff,
        data_path_fs=w_eff,
        sync_link_fs=SYNC_LINK_FS,
        ack_arrival_offset_fs=ack_offset,
        data_in_lead_fs=4 * jtl,
        min_token_spacing_fs=ack_offset + (k + 3) * read_period_fs + 60000,
    )
    return Design(netlist=nl, timing=timing)


def build_baseline_cdc(n: int, cal: Calibration | None = None,
                       read_period_fs: int = 33333) -> Design:
    """Prior-art CDC FIFO: a single read-clocked crossing element."""
    return _build_cdc(n, 1, cal or default_calibration(), read_period_fs)


def build_qcdc(n: int, k: int, cal: Calibration | None = None,
               read_period_fs: int = 33333) -> Design:
    """Metastability-resilient CDC FIFO with a k-deep DRO synchronizer.

    k=1 degenerates to the baseline structure.
    """
    return _build_cdc(n, k, cal or default_calibration(), read_period_fs)


# -- JJ counts and area -------------------------------------------------------


@dataclass(frozen=True)
class AreaReport:
    jj_count: int
    area_um2: float
    by_kind: dict[str, tuple[int, int, float]]  # kind -> (cells, jj, area)


def jj_count(netlist: Netlist, jj_table: dict[str, int] | None = None) -> int:
    table = jj_table if jj_table is not None else default_calibration().jj_counts
    total = 0
    for cell in netlist.cells:
        kind = cell.kind.value
        if kind not in table:
            raise DesignError(f"jj table has no entry for cell kind {kind!r}")
        total += table[kind]
    return total


def area(netlist: Netlist, area_table: dict[str, float],
         jj_table: dict[str, int] | None = None) -> AreaReport:
    jj_table = jj_table if jj_table is not None else default_calibration().jj_counts
    by_kind: dict[str, tuple[int, int, float]] = {}
    total_area = 0.0
    total_jj = 0
    for cell in netlist.cells:
        kind = cell.kind.value
        if kind not in area_table:
            raise DesignError(f"area table has no entry for cell kind {kind!r}")
        cells_, jj_, area_ = by_kind.get(kind, (0, 0, 0.0))
        a = area_table[kind]
        j = jj_table.get(kind, 0)
        by_kind[kind] = (cells_ + 1, jj_ + j, area_ + a)
        total_area += a
        total_jj += j
    return AreaReport(jj_count=total_jj, area_um2=total_area, by_kind=by_kind)
