"""Calibration file handling: cell delays, DRO timing anchors, area table.

The file format is plain ``key = value`` text with ``#`` comments.  Keys
are dotted paths; the ``dro.anchor`` key may repeat, one measured
(slack, delay) pair per line.  Times are in picoseconds, areas in square
micrometers.  The packaged defaults live in ``sfqcdc/data``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from importlib import resources

from .kernel import ps_to_fs
from .timing import ClockToQModel, fit_from_anchors

ENV_CALIBRATION = "SFQCDC_CALIBRATION"

AREA_KINDS = ("jtl", "splitter", "c", "c_dotted", "dro", "source", "clockgen", "probe")


class CalibrationError(ValueError):
    """Raised for unreadable or incomplete calibration files."""


@dataclass
class Calibration:
    """Everything the generators and the timing model need, in one place."""

    jtl_delay_ps: float
    splitter_delay_ps: float
    c_delay_ps: float
    d_nom_ps: float
    delta_fail_ps: float
    anchors: list[tuple[float, float]]
    area_um2: dict[str, float]
    jj_counts: dict[str, int]
    source: str = "<builtin>"
    _model: ClockToQModel | None = field(default=None, repr=False)

    @property
    def jtl_delay_fs(self) -> int:
        return ps_to_fs(self.jtl_delay_ps)

    @property
    def splitter_delay_fs(self) -> int:
        return ps_to_fs(self.splitter_delay_ps)

    @property
    def c_delay_fs(self) -> int:
        return ps_to_fs(self.c_delay_ps)

    def model(self) -> ClockToQModel:
        if self._model is None:
            self._model = fit_from_anchors(self.anchors, self.delta_fail_ps, self.d_nom_ps)
        return self._model


def parse_calibration(text: str, source: str = "<string>") -> Calibration:
    values: dict[str, float] = {}
    anchors: list[tuple[float, float]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CalibrationError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        try:
            if key == "dro.anchor":
                s, d = val.split()
                anchors.append((float(s), float(d)))
            else:
                values[key] = float(val)
        except ValueError as exc:
            raise CalibrationError(f"{source}:{lineno}: bad value {val!r} for {key}") from exc

    def need(key: str) -> float:
        if key not in values:
            raise CalibrationError(f"{source}: missing required key {key!r}")
        return values[key]

    if len(anchors) < 2:
        raise CalibrationError(f"{source}: at least two dro.anchor lines are required")

    area = {}
    jj = {}
    for kind in AREA_KINDS:
        area[kind] = values.get(f"area_um2.{kind}", 0.0)
        jj[kind] = int(values.get(f"jj.{kind}", 0))
    return Calibration(
        jtl_delay_ps=need("cell_delay_ps.jtl"),
        splitter_delay_ps=need("cell_delay_ps.splitter"),
        c_delay_ps=need("cell_delay_ps.c"),
        d_nom_ps=need("dro.d_nom_ps"),
        delta_fail_ps=need("dro.delta_fail_ps"),
        anchors=anchors,
        area_um2=area,
        jj_counts=jj,
        source=source,
    )


def format_calibration(cal: Calibration) -> str:
    lines = [
        "# sfqcdc calibration",
        f"cell_delay_ps.jtl = {cal.jtl_delay_ps}",
        f"cell_delay_ps.splitter = {cal.splitter_delay_ps}",
        f"cell_delay_ps.c = {cal.c_delay_ps}",
        f"dro.d_nom_ps = {cal.d_nom_ps}",
        f"dro.delta_fail_ps = {cal.delta_fail_ps}",
    ]
    for s, d in cal.anchors:
        lines.append(f"dro.anchor = {s} {d}")
    for kind in AREA_KINDS:
        lines.append(f"area_um2.{kind} = {cal.area_um2.get(kind, 0.0)}")
    for kind in AREA_KINDS:
        lines.append(f"jj.{kind} = {cal.jj_counts.get(kind, 0)}")
    return "\n".join(lines) + "\n"


def load_calibration(path: str) -> Calibration:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise CalibrationError(f"cannot read calibration file {path!r}: {exc}") from exc
    return parse_calibration(text, source=path)


def _load_packaged(name: str) -> Calibration:
    text = resources.files("sfqcdc.data").joinpath(name).read_text(encoding="utf-8")
    return parse_calibration(text, source=f"builtin:{name}")


def default_calibration() -> Calibration:
    """The design calibration: honors SFQCDC_CALIBRATION when set."""
    path = os.environ.get(ENV_CALIBRATION)
    if path:
        return load_calibration(path)
    return _load_packaged("default.cal")


def characterization_calibration() -> Calibration:
    """Bench characterization of the isolated D-element (delay-curve anchors)."""
    return _load_packaged("characterization.cal")
