"""Clock-to-Q metastability model and analytic dangerous-window machinery.

The delay law is the standard logarithmic metastability-resolution form

    delay(slack) = d_nom + tau * ln(c / (slack - delta_fail))

clamped below at ``d_nom`` and diverging as the slack approaches
``delta_fail`` from above; at or below ``delta_fail`` the readout defers to
the next clock edge.  Model parameters live in picoseconds; the
``delay_fs`` adapter serves the integer-femtosecond kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .kernel import FS_PER_PS

DEFERRED = "deferred"


class FitError(ValueError):
    """Raised when anchors cannot produce a monotone divergence law."""


@dataclass(frozen=True)
class ClockToQModel:
    """Clock-to-Q delay as a function of setup slack (all fields in ps)."""

    d_nom: float
    delta_setup: float
    delta_fail: float
    tau: float
    c: float

    @property
    def delta_sat(self) -> float:
        """Slack above which the delay is exactly nominal."""
        return self.delta_fail + self.c

    def clock_to_q(self, slack_ps: float):
        """Delay in ps for a given setup slack, or DEFERRED.

        Negative slack means the data pulse arrived after the clock pulse:
        nothing is read out on this edge, which the caller sees as DEFERRED.
        """
        if slack_ps <= self.delta_fail:
            return DEFERRED
        if slack_ps >= self.delta_sat:
            return self.d_nom
        d = self.d_nom + self.tau * math.log(self.c / (slack_ps - self.delta_fail))
        return max(d, self.d_nom)

    def delay_fs(self, slack_fs: int):
        """Integer-fs delay used by the simulator, or DEFERRED.

        Rounding happens here, in one place, so the event kernel and the
        analytic classifiers quantize identically.
        """
        d = self.clock_to_q(slack_fs / FS_PER_PS)
        if d is DEFERRED:
            return DEFERRED
        return round(d * FS_PER_PS)

    def delay_fs_nominal(self) -> int:
        return round(self.d_nom * FS_PER_PS)

    def inverse(self, delay_ps: float) -> float:
        """The slack at which the law produces ``delay_ps`` (>= d_nom)."""
        if delay_ps < self.d_nom:
            raise ValueError(f"delay {delay_ps} ps is below nominal {self.d_nom} ps")
        return self.delta_fail + self.c * math.exp(-(delay_ps - self.d_nom) / self.tau)

    def replace_constant(self) -> "ClockToQModel":
        """Zero-metastability variant: constant d_nom, never defers.

        Used to establish the nominal transfer cycle for classification.
        """
        return ClockToQModel(
            d_nom=self.d_nom,
            delta_setup=self.delta_setup,
            delta_fail=-math.inf,
            tau=self.tau,
            c=0.0,
        )


def fit_from_anchors(
    anchors: list[tuple[float, float]],
    delta_fail: float,
    d_nom: float,
) -> ClockToQModel:
    """Fit (tau, c) of the divergence law to measured (slack, delay) anchors.

    Two anchors are solved exactly; more are fit in least squares on the
    linearized form delay = d_nom + tau*ln(c) - tau*ln(slack - delta_fail).
    """
    if len(anchors) < 2:
        raise FitError("at least two anchors are required")
    pts = sorted(anchors)
    for slack, delay in pts:
        if slack <= delta_fail:
            raise FitError(f"anchor slack {slack} ps is at or below delta_fail")
        if delay < d_nom:
            raise FitError(f"anchor delay {delay} ps is below d_nom")
    for (s1, d1), (s2, d2) in zip(pts, pts[1:]):
        if s1 == s2:
            raise FitError("anchors must have distinct slacks")
        if d1 <= d2:
            raise FitError("anchors must be strictly decreasing in delay vs slack")

    xs = [math.log(s - delta_fail) for s, _ in pts]
    ys = [d for _, d in pts]
    n = len(pts)
    # least squares for y = a + b*x with b = -tau; exact for n == 2
    mx = sum(xs) / n
    my = sum(ys) / n
    sxx = sum((x - mx) ** 2 for x in xs)
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    b = sxy / sxx
    a = my - b * mx
    tau = -b
    if tau <= 0:
        raise FitError("anchors do not produce a diverging law (tau <= 0)")
    c = math.exp((a - d_nom) / tau)
    # setup slack: where the law reaches 10% over nominal
    delta_setup = delta_fail + c * math.exp(-0.1 * d_nom / tau)
    return ClockToQModel(d_nom=d_nom, delta_setup=delta_setup, delta_fail=delta_fail, tau=tau, c=c)


@dataclass(frozen=True)
class DangerousWindow:
    """Setup-slack intervals (ps) that mis-synchronize the downstream pair.

    Normally a single interval; at short clock periods the delay law can
    straddle more than one cycle boundary, producing extra narrow bands.
    Intervals are half-open/closed as (lo, hi]: the lower edge itself lands
    the late signal exactly on the boundary of the *earlier* cycle.
    """

    intervals: tuple[tuple[float, float], ...]

    @property
    def width(self) -> float:
        return sum(hi - lo for lo, hi in self.intervals)

    @property
    def lo(self) -> float:
        return min((lo for lo, _ in self.intervals), default=0.0)

    @property
    def hi(self) -> float:
        return max((hi for _, hi in self.intervals), default=0.0)

    def contains(self, slack_ps: float) -> bool:
        return any(lo < slack_ps <= hi for lo, hi in self.intervals)

    def is_empty(self) -> bool:
        return self.width == 0.0


_WIDTH_FLOOR_PS = 1e-12  # drop bands narrower than a millionth of a fs


def dangerous_window(
    model: ClockToQModel,
    period_ps: float,
    valid_path_delay_ps: float,
    data_path_delay_ps: float,
) -> DangerousWindow:
    """Slacks at the capturing DRO that split VALID and DATA across a read-cycle boundary.

    VALID lands at Q + valid_path_delay and DATA at Q + data_path_delay; a
    transfer fails when exactly one of them crosses a cycle boundary
    m*period.  Inverting the delay law at each boundary yields the window.
    The deferral region is safe: a deferred readout shifts both paths by a
    whole period together.
    """
    if period_ps <= 0:
        raise ValueError("period must be positive")
    v = valid_path_delay_ps
    w = data_path_delay_ps
    if v > w:
        v, w = w, v  # symmetric "or vice versa" case
    if v == w:
        return DangerousWindow(intervals=())
    intervals = []
    m = 1
    while True:
        d_hi = m * period_ps - v  # delay at which VALID also slips (exclusive)
        d_lo = m * period_ps - w  # delay at which DATA slips (inclusive)
        if d_hi <= model.d_nom:
            m += 1
            continue
        lo = model.inverse(d_hi)
        hi = model.inverse(max(d_lo, model.d_nom))
        if d_lo <= model.d_nom:
            # even nominal readout puts DATA past this boundary: the band
            # extends to the saturation slack
            hi = model.delta_sat
        if hi - lo > _WIDTH_FLOOR_PS:
            intervals.append((lo, hi))
        # stop once the bands collapse below any representable slack
        if hi - model.delta_fail < _WIDTH_FLOOR_PS:
            break
        m += 1
        if m > 64:
            break
    return DangerousWindow(intervals=tuple(intervals))


def propagate_window(
    model: ClockToQModel,
    window: DangerousWindow,
    period_ps: float,
    k: int,
    stage_link_delay_ps: float = 1.2,
) -> DangerousWindow:
    """Pull a final-stage window back through k-1 cascaded DRO stages.

    A stage reading out at slack s hands the next stage the slack
    period - delay(s) - link, so the k-stage window is the (k-1)-fold
    preimage of the single-stage window under that map.  Deferral at any
    intermediate stage shifts valid and data together and is safe, so
    only the region above delta_fail maps through.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    out = window
    for _ in range(k - 1):
        out = _preimage(model, out, period_ps, stage_link_delay_ps)
    return out


def _preimage(
    model: ClockToQModel,
    window: DangerousWindow,
    period_ps: float,
    link_ps: float,
) -> DangerousWindow:
    intervals = []
    for lo, hi in window.intervals:
        # next-stage slack s2 = period - delay(s1) - link, increasing in s1
        d_hi = period_ps - link_ps - lo  # delay giving s2 = lo (exclusive end)
        d_lo = period_ps - link_ps - hi  # delay giving s2 = hi (inclusive end)
        if d_hi <= model.d_nom:
            continue  # even a nominal stage lands below this window
        s1_hi = model.inverse(max(d_lo, model.d_nom))
        if d_lo <= model.d_nom:
            s1_hi = model.delta_sat
        s1_lo = model.inverse(d_hi)
        if s1_hi - s1_lo > _WIDTH_FLOOR_PS:
            intervals.append((s1_lo, s1_hi))
    intervals.sort()
    return DangerousWindow(intervals=tuple(intervals))


def ler_analytic(
    model: ClockToQModel,
    period_ps: float,
    valid_path_delay_ps: float,
    data_path_delay_ps: float,
    k: int = 1,
    stage_link_delay_ps: float = 1.2,
) -> float:
    """Logical error rate: propagated dangerous-window width over the period."""
    w1 = dangerous_window(model, period_ps, valid_path_delay_ps, data_path_delay_ps)
    wk = propagate_window(model, w1, period_ps, k, stage_link_delay_ps)
    return wk.width / period_ps
