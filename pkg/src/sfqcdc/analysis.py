"""Experiment harness: transfer classification, phase sweeps, LER, MTBF,
depth sizing, the accumulator demo, and the pass/fail comparison table.

Conventions: read-clock cycle index of a pulse at time t is
floor((t - phase) / period).  A transfer is correctly synchronized when
VALID_OUT and DATA_OUT land in the same cycle; "late" means both landed in
the same cycle but after the cycle a zero-metastability reference would
produce; mis-synchronization means they landed in different cycles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .calibration import Calibration, default_calibration
from .designs import Design, DesignTiming, build_baseline_cdc, build_qcdc
from .kernel import FS_PER_PS, Trace
from .netlist import elaborate
from .timing import DEFERRED, ClockToQModel, DangerousWindow, dangerous_window, \
    propagate_window


class Classification(Enum):
    SYNC_SAME_CYCLE = "SyncSameCycle"
    SYNC_LATE = "SyncLate"
    MIS_SYNC = "MisSync"
    LOST = "Lost"


@dataclass(frozen=True)
class TransferOutcome:
    valid_cycle: int | None
    data_cycle: int | None
    classification: Classification

    @property
    def works(self) -> bool:
        return self.classification in (Classification.SYNC_SAME_CYCLE, Classification.SYNC_LATE)


class AnalysisError(ValueError):
    pass


def classify_transfer(
    trace: Trace,
    read_period_fs: int,
    read_phase_fs: int,
    nominal_cycle: int,
    index: int = 0,
    valid_net: str = "VALID_OUT",
    data_net: str = "DATA_OUT",
) -> TransferOutcome:
    """Classify the index-th transfer recorded on the VALID/DATA nets."""
    valid = trace.pulses(valid_net)
    data = trace.pulses(data_net)

    def cycle(t: int) -> int:
        return (t - read_phase_fs) // read_period_fs

    for pulses, net in ((valid, valid_net), (data, data_net)):
        seen: set[int] = set()
        for t in pulses:
            c = cycle(t)
            if c in seen:
                raise AnalysisError(f"multiple pulses in read cycle {c} on {net}")
            seen.add(c)

    vc = cycle(valid[index]) if len(valid) > index else None
    dc = cycle(data[index]) if len(data) > index else None
    if vc is None or dc is None:
        return TransferOutcome(vc, dc, Classification.LOST)
    if vc != dc:
        return TransferOutcome(vc, dc, Classification.MIS_SYNC)
    if vc == nominal_cycle:
        return TransferOutcome(vc, dc, Classification.SYNC_SAME_CYCLE)
    return TransferOutcome(vc, dc, Classification.SYNC_LATE)


# -- single-transfer experiment ------------------------------------------------


@dataclass(frozen=True)
class TransferResult:
    outcome: TransferOutcome
    slack_fs: int  # setup slack seen by the crossing element
    clock_to_q_fs: int | None  # observed first-stage clock-to-Q; None = deferred
    trace: Trace


def _run_transfer(
    design: Design,
    model: ClockToQModel,
    phase_fs: int,
    horizon_fs: int,
    strict: bool = False,
) -> Trace:
    t = design.timing
    elab = elaborate(design.netlist, model, strict=strict)
    sim = elab.sim
    sim.probe("x_dro.q")
    for m in range(0, horizon_fs // t.read_period_fs + 1):
        sim.inject(elab.input_nets["READ_CLK"], phase_fs + m * t.read_period_fs)
    w = 2 * t.read_period_fs  # write moment, clear of t=0 edge effects
    sim.inject(elab.input_nets["DATA_IN"], w - t.data_in_lead_fs)
    sim.inject(elab.input_nets["WRITE_CLK"], w)
    sim.run_until(horizon_fs)
    return sim.trace


def _phase_for_slack(t: DesignTiming, slack_fs: int, write_at: int) -> int:
    """Read-clock phase that makes the crossing element see the given slack."""
    ack = write_at + t.ack_arrival_offset_fs
    return (ack + slack_fs - t.x_clk_offset_fs) % t.read_period_fs


def single_transfer(
    design: Design,
    model: ClockToQModel,
    slack_fs: int | None = None,
    phase_fs: int | None = None,
    strict: bool = False,
) -> TransferResult:
    """Drive one token through a CDC design and classify the transfer."""
    t = design.timing
    if t.read_period_fs <= 0:
        raise AnalysisError(f"design {t.design!r} has no read clock domain")
    period = t.read_period_fs
    w = 2 * period
    ack = w + t.ack_arrival_offset_fs
    if (slack_fs is None) == (phase_fs is None):
        raise AnalysisError("specify exactly one of slack_fs or phase_fs")
    if slack_fs is not None:
        slack_fs %= period
        phase_fs = _phase_for_slack(t, slack_fs, w)
    else:
        slack_fs = (phase_fs + t.x_clk_offset_fs - ack) % period
    horizon = ack + (t.k + 5) * period + t.data_path_fs + 100_000
    trace = _run_transfer(design, model, phase_fs, horizon, strict=strict)

    edge = ack + slack_fs  # the crossing clock edge that samples the token
    deferred = slack_fs == 0 or model.delay_fs(slack_fs) is DEFERRED
    qs = trace.pulses("x_dro.q")
    ctq = None if (deferred or not qs) else qs[0] - edge
    nominal = nominal_cycle(t, phase_fs, edge)
    outcome = classify_transfer(trace, period, phase_fs, nominal)
    return TransferResult(outcome=outcome, slack_fs=slack_fs, clock_to_q_fs=ctq, trace=trace)


def nominal_cycle(t: DesignTiming, phase_fs: int, edge_fs: int) -> int:
    """Transfer cycle under a zero-metastability (constant d_nom) model.

    The capturing edge index plus one read period per extra synchronizer
    stage; the nominal valid/data branches land inside that cycle by
    construction of the path targets.
    """
    m0 = (edge_fs - t.x_clk_offset_fs - phase_fs) // t.read_period_fs
    return m0 + (t.k - 1)


# -- exact per-slack classifier (mirrors the event semantics) -------------------


def outcome_for_slack(t: DesignTiming, model: ClockToQModel, slack_fs: int) -> Classification:
    """Closed-form transfer outcome for a crossing-element slack in [0, P).

    Composes the quantized delay law through the synchronizer stages
    exactly as the event kernel does; used for window refinement and for
    fast Monte Carlo over the per-phase outcome table.
    """
    period = t.read_period_fs
    # stage 1: data precedes its edge by slack_fs (0 = simultaneous, defers)
    q = _stage_out(model, slack_fs, period)
    for _ in range(t.k - 1):
        arr = q + t.sync_link_fs
        m = -(-arr // period)  # first edge at or after arrival
        s = m * period - arr
        q = m * period + _stage_out(model, s, period)
    vpos = q + t.valid_path_fs
    dpos = q + t.data_path_fs
    vc = vpos // period
    dc = dpos // period
    if vc != dc:
        return Classification.MIS_SYNC
    if vc == t.k - 1:
        return Classification.SYNC_SAME_CYCLE
    return Classification.SYNC_LATE


def _stage_out(model: ClockToQModel, slack_fs: int, period: int) -> int:
    """Readout instant relative to the sampling edge, deferral included."""
    if slack_fs <= 0:
        return period + model.delay_fs_nominal()
    d = model.delay_fs(slack_fs)
    if d is DEFERRED:
        return period + model.delay_fs_nominal()
    return d


def design_window(
    t: DesignTiming, model: ClockToQModel, quantized: bool = True
) -> DangerousWindow:
    """Dangerous slack window of a CDC design at its read period.

    The continuum window comes from inverting the delay law at the cycle
    boundaries and propagating through the synchronizer stages; with
    ``quantized`` the interval edges are refined to half-integers so that
    femtosecond-slack membership agrees exactly with simulation.
    """
    period_ps = t.read_period_fs / FS_PER_PS
    w1 = dangerous_window(
        model, period_ps, t.valid_path_fs / FS_PER_PS, t.data_path_fs / FS_PER_PS
    )
    wk = propagate_window(model, w1, period_ps, t.k, t.sync_link_fs / FS_PER_PS)
    if not quantized:
        return wk
    refined = []
    for lo, hi in wk.intervals:
        a = _refine_edge(t, model, lo, rising=True)
        b = _refine_edge(t, model, hi, rising=False)
        if a is not None and b is not None and a <= b:
            refined.append((a - 0.5, b + 0.5))
    return DangerousWindow(intervals=tuple(refined))


def _refine_edge(t: DesignTiming, model: ClockToQModel, edge_ps: float, rising: bool):
    """First/last integer-fs slack near a continuum edge that mis-syncs."""
    center = round(edge_ps * FS_PER_PS)
    span = range(center - 4, center + 5)
    hits = [s for s in span if 0 < s < t.read_period_fs
            and outcome_for_slack(t, model, s) is Classification.MIS_SYNC]
    if not hits:
        return None
    return min(hits) if rising else max(hits)


# -- phase sweep ----------------------------------------------------------------


@dataclass(frozen=True)
class SweepPoint:
    phase_fs: int
    slack_fs: int
    outcome: TransferOutcome


def sweep_phase(
    design: Design,
    model: ClockToQModel,
    resolution_fs: int = 1,
    simulate: bool = True,
) -> list[SweepPoint]:
    """One transfer per read-clock phase step across a full period.

    With ``simulate`` each point is a full event-driven run; otherwise the
    exact per-slack classifier supplies the outcomes (identical results,
    used for large Monte Carlo tables).
    """
    t = design.timing
    period = t.read_period_fs
    if resolution_fs < 1:
        raise AnalysisError("resolution must be >= 1 fs")
    points = []
    w = 2 * period
    ack = w + t.ack_arrival_offset_fs
    for phase in range(0, period, resolution_fs):
        slack = (phase + t.x_clk_offset_fs - ack) % period
        if simulate:
            res = single_transfer(design, model, phase_fs=phase)
            points.append(SweepPoint(phase_fs=phase, slack_fs=res.slack_fs, outcome=res.outcome))
        else:
            cls = outcome_for_slack(t, model, slack)
            points.append(SweepPoint(
                phase_fs=phase, slack_fs=slack,
                outcome=TransferOutcome(None, None, cls),
            ))
    return points


def outcome_table(design: Design, model: ClockToQModel) -> np.ndarray:
    """Per-phase MisSync indicator over one read period at 1 fs resolution."""
    t = design.timing
    period = t.read_period_fs
    w = 2 * period
    ack = w + t.ack_arrival_offset_fs
    table = np.zeros(period, dtype=bool)
    for phase in range(period):
        slack = (phase + t.x_clk_offset_fs - ack) % period
        table[phase] = outcome_for_slack(t, model, slack) is Classification.MIS_SYNC
    return table


# -- logical error rate ----------------------------------------------------------


@dataclass(frozen=True)
class LerReport:
    design: str
    k: int
    read_period_fs: int
    trials: int
    failures: int
    ler: float
    wilson_lo: float
    wilson_hi: float
    method: str  # "MonteCarlo" or "Analytic"
    seed: int | None = None

    def mtbf_seconds(self, transfer_rate_hz: float) -> float:
        return mtbf(self.ler, transfer_rate_hz)


def wilson_interval(failures: int, trials: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """95% Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise AnalysisError("trials must be positive")
    p = failures / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return max(center - half, 0.0), min(center + half, 1.0)


def ler_analytic_design(design: Design, model: ClockToQModel) -> LerReport:
    t = design.timing
    win = design_window(t, model, quantized=False)
    ler = win.width * FS_PER_PS / t.read_period_fs
    return LerReport(
        design=t.design, k=t.k, read_period_fs=t.read_period_fs,
        trials=0, failures=0, ler=ler, wilson_lo=ler, wilson_hi=ler,
        method="Analytic",
    )


def ler_monte_carlo(
    design: Design,
    model: ClockToQModel,
    trials: int,
    seed: int,
    workers: int = 1,
    table: np.ndarray | None = None,
) -> LerReport:
    """Seeded Monte Carlo over uniformly random read-clock phases.

    The per-phase outcome table is exact (one entry per representable
    phase), so sampling it is equivalent to running one simulation per
    trial; results are reproducible per seed and independent of the
    worker count, which only chunks the counting.
    """
    if trials < 1:
        raise AnalysisError("trials must be >= 1")
    if workers < 1:
        raise AnalysisError("workers must be >= 1")
    t = design.timing
    if table is None:
        table = outcome_table(design, model)
    rng = np.random.Generator(np.random.PCG64(seed))
    draws = rng.integers(0, t.read_period_fs, size=trials)
    chunks = np.array_split(draws, workers)
    failures = sum(int(table[c].sum()) for c in chunks if len(c))
    lo, hi = wilson_interval(failures, trials)
    return LerReport(
        design=t.design, k=t.k, read_period_fs=t.read_period_fs,
        trials=trials, failures=failures, ler=failures / trials,
        wilson_lo=lo, wilson_hi=hi, method="MonteCarlo", seed=seed,
    )


def mtbf(ler: float, transfer_rate_hz: float) -> float:
    """Mean time between synchronization failures, in seconds."""
    if transfer_rate_hz <= 0:
        raise AnalysisError("transfer rate must be positive")
    if ler < 0 or ler > 1:
        raise AnalysisError("ler must lie in [0, 1]")
    if ler == 0:
        return math.inf
    return 1.0 / (ler * transfer_rate_hz)


# -- depth sizing (dynamic slack) -------------------------------------------------


def dynamic_slack(n: int, throughput: float, cycle_period: float) -> float:
    """Tokens a FIFO of n stages absorbs in a burst at average throughput."""
    if n < 0:
        raise AnalysisError("stage count must be non-negative")
    tp = throughput * cycle_period
    if tp < 0 or tp > 1:
        raise AnalysisError(f"throughput*period = {tp} outside [0, 1]")
    return n * (1.0 - tp)


def min_depth(throughput: float, cycle_period: float, slack_required: float) -> int:
    """Smallest stage count whose dynamic slack meets the requirement."""
    if slack_required < 0:
        raise AnalysisError("required slack must be non-negative")
    tp = throughput * cycle_period
    if tp < 0 or tp > 1:
        raise AnalysisError(f"throughput*period = {tp} outside [0, 1]")
    if slack_required == 0:
        return 0
    if tp >= 1:
        raise AnalysisError("no finite depth: unit throughput leaves zero slack per stage")
    n = max(math.ceil(slack_required / (1.0 - tp)), 0)
    while n * (1.0 - tp) < slack_required:  # guard against float-edge rounding
        n += 1
    while n > 0 and (n - 1) * (1.0 - tp) >= slack_required:
        n -= 1
    return n


# -- accumulator demo --------------------------------------------------------------


@dataclass(frozen=True)
class AccumulatorResult:
    expected_count: int
    actual_count: int
    outcomes: tuple[TransferOutcome, ...]


def accumulator_demo(
    design: Design,
    model: ClockToQModel,
    n_tokens: int,
    forced_phase_fs: int | None = None,
    slacks_fs: list[int] | None = None,
) -> AccumulatorResult:
    """Receiver-domain counter that increments only when VALID and DATA
    coincide in a read cycle; mis-synchronized transfers under-count.

    Tokens are injected far enough apart that transfers cannot overlap.
    Either a single forced phase applies to every token, or an explicit
    per-token slack list drives the schedule.
    """
    if n_tokens < 1:
        raise AnalysisError("need at least one token")
    t = design.timing
    period = t.read_period_fs
    spacing = ((t.min_token_spacing_fs // period) + 1) * period
    if slacks_fs is None:
        if forced_phase_fs is None:
            raise AnalysisError("specify forced_phase_fs or slacks_fs")
        base_slack = (forced_phase_fs + t.x_clk_offset_fs
                      - (2 * period + t.ack_arrival_offset_fs)) % period
        slacks = [base_slack] * n_tokens
    else:
        if len(slacks_fs) != n_tokens:
            raise AnalysisError("slack list length must equal n_tokens")
        slacks = [s % period for s in slacks_fs]

    elab = elaborate(design.netlist, model)
    sim = elab.sim
    phase = 0
    writes = []
    for j, s in enumerate(slacks):
        w = 2 * period + j * spacing
        ack = w + t.ack_arrival_offset_fs
        # shift the write instant so this token's ack meets its edge at
        # the requested slack on the common phase-0 read grid
        adjust = (t.x_clk_offset_fs - ack - s) % period
        writes.append(w + adjust)
    horizon = writes[-1] + t.ack_arrival_offset_fs + (t.k + 6) * period + 200_000
    for m in range(0, horizon // period + 1):
        sim.inject(elab.input_nets["READ_CLK"], phase + m * period)
    if "SEND_IN" in elab.input_nets:
        # consumer readiness for tokens after the first (pre-armed gate)
        for j in range(1, n_tokens):
            sim.inject(elab.input_nets["SEND_IN"], writes[j] - period)
    for w in writes:
        sim.inject(elab.input_nets["DATA_IN"], w - t.data_in_lead_fs)
        sim.inject(elab.input_nets["WRITE_CLK"], w)
    sim.run_until(horizon)
    trace = sim.trace

    outcomes = []
    for j, w in enumerate(writes):
        ack = w + t.ack_arrival_offset_fs
        slack = (phase + t.x_clk_offset_fs - ack) % period
        edge = ack + slack
        nominal = nominal_cycle(t, phase, edge)
        outcomes.append(classify_transfer(trace, period, phase, nominal, index=j))

    valid_cycles = {(v - phase) // period for v in trace.pulses("VALID_OUT")}
    data_cycles = {(d - phase) // period for d in trace.pulses("DATA_OUT")}
    actual = len(valid_cycles & data_cycles)
    return AccumulatorResult(
        expected_count=n_tokens, actual_count=actual, outcomes=tuple(outcomes)
    )


# -- pass/fail comparison table ------------------------------------------------------


@dataclass(frozen=True)
class Table1Row:
    read_ghz: float
    slack_ps: float
    baseline_ctq_ps: float | None  # None = deferred to the next cycle
    proposed_ctq_ps: float | None
    baseline_works: bool
    proposed_works: bool


def reproduce_table1(
    cal: Calibration | None = None,
    n: int = 2,
    frequencies_ghz: tuple[float, ...] = (30.0, 50.0),
    slacks_ps: tuple[float, ...] = (2.0, 1.0, 0.5, 0.1),
) -> list[Table1Row]:
    """Simulated works/fails comparison of the two CDC FIFOs.

    For each read frequency and forced arrival slack at the crossing
    element, runs both designs and reports the observed first-stage
    clock-to-Q plus whether VALID and DATA stayed synchronized.
    """
    cal = cal or default_calibration()
    model = cal.model()
    rows = []
    for ghz in frequencies_ghz:
        period = round(1e6 / ghz)  # fs
        base = build_baseline_cdc(n, cal, read_period_fs=period)
        prop = build_qcdc(n, 2, cal, read_period_fs=period)
        for slack_ps in slacks_ps:
            slack_fs = round(slack_ps * FS_PER_PS)
            rb = single_transfer(base, model, slack_fs=slack_fs)
            rp = single_transfer(prop, model, slack_fs=slack_fs)
            rows.append(Table1Row(
                read_ghz=ghz,
                slack_ps=slack_ps,
                baseline_ctq_ps=None if rb.clock_to_q_fs is None else rb.clock_to_q_fs / FS_PER_PS,
                proposed_ctq_ps=None if rp.clock_to_q_fs is None else rp.clock_to_q_fs / FS_PER_PS,
                baseline_works=rb.outcome.works,
                proposed_works=rp.outcome.works,
            ))
    return rows
