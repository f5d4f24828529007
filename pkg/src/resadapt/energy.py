"""Playback energy estimation from a per-resolution current calibration.

A calibration maps resolution (vertical lines) to average current draw in
milliamperes at a fixed supply voltage. Energy of a playback trace is then
sum(duration_s * current_mA * voltage_V) / 3600 milliwatt-hours, optionally
adding a constant idle current to every segment.

Calibrations must be measured and supplied by the user; the repository
ships only a clearly-labeled synthetic example. Non-monotone calibrations
are legal (software decode paths show a flat low end) and merely raise a
diagnostic flag.
"""

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ParseError, ValidationError

_DURATION_REL_TOL = 1e-9


@dataclass
class EnergyCalibration:
    codec_tag: str
    voltage: float
    currents_ma: dict
    idle_current_ma: float = 0.0

    def __post_init__(self):
        if self.voltage <= 0:
            raise ValidationError(f"voltage must be positive, got {self.voltage}")
        if not self.currents_ma:
            raise ValidationError("calibration needs at least one entry")
        for res, current in self.currents_ma.items():
            if current <= 0:
                raise ValidationError(f"non-positive current {current} at {res} lines")
        if self.idle_current_ma < 0:
            raise ValidationError("idle current must be non-negative")

    @property
    def monotone(self) -> bool:
        """Diagnostic: True when current never decreases with resolution."""
        ordered = [self.currents_ma[r] for r in sorted(self.currents_ma)]
        return all(a <= b for a, b in zip(ordered, ordered[1:]))

    def current(self, resolution: int) -> float:
        if resolution not in self.currents_ma:
            raise ValidationError(
                f"resolution {resolution} not covered by calibration "
                f"(have {sorted(self.currents_ma)})")
        return self.currents_ma[resolution]


@dataclass
class TraceSegment:
    resolution: int
    duration_s: float

    def __post_init__(self):
        if self.duration_s <= 0:
            raise ValidationError(f"segment duration must be positive, got {self.duration_s}")


@dataclass
class PlaybackTrace:
    segments: list = field(default_factory=list)

    @property
    def total_duration(self) -> float:
        return float(sum(s.duration_s for s in self.segments))

    def to_dict(self) -> dict:
        return {"segments": [{"resolution": s.resolution, "duration_s": s.duration_s}
                             for s in self.segments]}

    @classmethod
    def from_dict(cls, doc) -> "PlaybackTrace":
        return cls([TraceSegment(int(s["resolution"]), float(s["duration_s"]))
                    for s in doc["segments"]])


@dataclass
class EnergyReport:
    baseline: str
    energy_mwh: dict
    savings_percent: dict

    def to_dict(self) -> dict:
        return {"baseline": self.baseline, "energy_mwh": dict(self.energy_mwh),
                "savings_percent": dict(self.savings_percent)}


def load_calibration(path) -> EnergyCalibration:
    """Read a calibration CSV: comment block with voltage/codec_tag, then
    a resolution,current_ma table."""
    path = Path(path)
    codec_tag = ""
    voltage = None
    idle = 0.0
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        table = []
        for line in fh:
            stripped = line.strip()
            if not stripped:
                continue
            if stripped.startswith("#"):
                body = stripped.lstrip("#").strip()
                if ":" in body:
                    key, value = body.split(":", 1)
                    key = key.strip().lower()
                    value = value.strip()
                    if key == "voltage":
                        try:
                            voltage = float(value)
                        except ValueError:
                            raise ParseError(f"{path.name}: bad voltage {value!r}") from None
                    elif key == "codec_tag":
                        codec_tag = value
                    elif key == "idle_current_ma":
                        try:
                            idle = float(value)
                        except ValueError:
                            raise ParseError(f"{path.name}: bad idle current {value!r}") from None
                continue
            table.append(stripped)
    if voltage is None:
        raise ParseError(f"{path.name}: missing '# voltage:' in the comment block")
    reader = csv.DictReader(table)
    if reader.fieldnames is None or \
            not {"resolution", "current_ma"} <= set(reader.fieldnames):
        raise ParseError(f"{path.name}: expected header resolution,current_ma")
    for i, row in enumerate(reader, start=2):
        try:
            rows.append((int(row["resolution"]), float(row["current_ma"])))
        except (TypeError, ValueError):
            raise ParseError(f"{path.name}: bad table row {i}") from None
    currents = {}
    for res, current in rows:
        if res in currents:
            raise ValidationError(f"duplicate resolution key {res}")
        currents[res] = current
    return EnergyCalibration(codec_tag=codec_tag, voltage=voltage,
                             currents_ma=currents, idle_current_ma=idle)


def save_calibration(cal: EnergyCalibration, path):
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# codec_tag: {cal.codec_tag}\n")
        fh.write(f"# voltage: {cal.voltage!r}\n")
        if cal.idle_current_ma:
            fh.write(f"# idle_current_ma: {cal.idle_current_ma!r}\n")
        fh.write("resolution,current_ma\n")
        for res in sorted(cal.currents_ma):
            fh.write(f"{res},{cal.currents_ma[res]!r}\n")


def estimate_energy(trace: PlaybackTrace, cal: EnergyCalibration) -> float:
    """Energy of a trace in milliwatt-hours."""
    total = 0.0
    for seg in trace.segments:
        current = cal.current(seg.resolution) + cal.idle_current_ma
        total += seg.duration_s * current * cal.voltage
    return total / 3600.0


def compare_policies(traces: dict, baseline: str, cal: EnergyCalibration) -> EnergyReport:
    """Energy per named trace and savings relative to the baseline trace.

    All traces must span the same total duration; comparing policies over
    different session lengths would be meaningless.
    """
    if baseline not in traces:
        raise ValidationError(f"baseline {baseline!r} not among traces {sorted(traces)}")
    durations = {name: t.total_duration for name, t in traces.items()}
    ref = durations[baseline]
    for name, dur in durations.items():
        if not math.isclose(dur, ref, rel_tol=_DURATION_REL_TOL, abs_tol=1e-9):
            raise ValidationError(
                f"trace {name!r} spans {dur} s but baseline spans {ref} s")
    energy = {name: estimate_energy(t, cal) for name, t in traces.items()}
    base = energy[baseline]
    savings = {name: 100.0 * (base - e) / base for name, e in energy.items()}
    return EnergyReport(baseline=baseline, energy_mwh=energy, savings_percent=savings)
