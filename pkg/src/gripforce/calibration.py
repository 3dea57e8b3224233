"""FSR voltage-divider model and voltage/force calibration curves.

The FSR sits on the high side of a divider with a fixed pull-down resistor,
so the analog input reads ``R_pd * V_supply / (R_pd + R_fsr)``.  Voltage is
mapped to force by piecewise-linear interpolation over a knot table.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

OPEN_CIRCUIT = math.inf

DEFAULT_CURVE = ((50.0, 0.0), (1500.0, 10.0))


class DomainError(ValueError):
    """Input lies outside the domain where the conversion is defined."""


@dataclass(frozen=True)
class CalibrationModel:
    r_pulldown_ohm: float = 10_000.0
    v_supply_mV: float = 3300.0
    curve: tuple[tuple[float, float], ...] = field(default=DEFAULT_CURVE)

    def __post_init__(self):
        curve = tuple((float(v), float(f)) for v, f in self.curve)
        object.__setattr__(self, "curve", curve)
        if not self.r_pulldown_ohm > 0:
            raise ValueError("pull-down resistance must be positive")
        if not self.v_supply_mV > 0:
            raise ValueError("supply voltage must be positive")
        if len(curve) < 2:
            raise ValueError("calibration curve needs at least two knots")
        volts = [v for v, _ in curve]
        forces = [f for _, f in curve]
        if any(b <= a for a, b in zip(volts, volts[1:])):
            raise ValueError("knot voltages must be strictly increasing")
        if any(b < a for a, b in zip(forces, forces[1:])):
            raise ValueError("knot forces must be non-decreasing")
        if volts[-1] >= self.v_supply_mV or volts[0] < 0:
            raise ValueError("knot voltages must lie in [0, v_supply)")

    @property
    def knot_voltages(self) -> np.ndarray:
        return np.array([v for v, _ in self.curve])

    @property
    def knot_forces(self) -> np.ndarray:
        return np.array([f for _, f in self.curve])


def voltage_from_resistance(model: CalibrationModel, r_fsr: float) -> float:
    """Divider output in mV; ``OPEN_CIRCUIT`` (infinite resistance) gives 0."""
    if r_fsr < 0:
        raise DomainError("resistance cannot be negative")
    if math.isinf(r_fsr):
        return 0.0
    return model.r_pulldown_ohm * model.v_supply_mV / (model.r_pulldown_ohm + r_fsr)


def resistance_from_voltage(model: CalibrationModel, v_out: float) -> float:
    if not 0 < v_out < model.v_supply_mV:
        raise DomainError(
            f"v_out={v_out} mV is outside (0, {model.v_supply_mV}) mV: open or short circuit")
    return model.r_pulldown_ohm * (model.v_supply_mV - v_out) / v_out


def force_from_voltage(model: CalibrationModel, v):
    """Force in N; clamped to the first/last knot outside the table.

    Accepts a scalar or an array of voltages.
    """
    out = np.interp(v, model.knot_voltages, model.knot_forces)
    return float(out) if np.ndim(out) == 0 else out


def voltage_from_force(model: CalibrationModel, force: float) -> float:
    """Smallest knot-table voltage producing ``force``.

    Flat segments are ambiguous; the lower end is returned.  Forces outside
    the table range raise `DomainError`.
    """
    volts, forces = model.knot_voltages, model.knot_forces
    if not forces[0] <= force <= forces[-1]:
        raise DomainError(f"force {force} N outside calibrated range [{forces[0]}, {forces[-1]}] N")
    k = int(np.searchsorted(forces, force, side="left"))
    if k == 0 or forces[k] == force:
        return float(volts[k])
    f0, f1 = forces[k - 1], forces[k]
    v0, v1 = volts[k - 1], volts[k]
    return float(v0 + (force - f0) * (v1 - v0) / (f1 - f0))


def load_curve(path: str | Path) -> tuple[tuple[float, float], ...]:
    """Read ``voltage_mV<TAB>force_N`` lines; ``#`` starts a comment."""
    knots = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split("\t") if "\t" in line else line.split()
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: expected 'voltage_mV<TAB>force_N'")
        knots.append((float(parts[0]), float(parts[1])))
    return tuple(knots)


def load_model(path: str | Path, r_pulldown_ohm: float = 10_000.0,
               v_supply_mV: float = 3300.0) -> CalibrationModel:
    return CalibrationModel(r_pulldown_ohm, v_supply_mV, load_curve(path))


def dump_curve(curve: Sequence[tuple[float, float]], path: str | Path) -> None:
    lines = ["# voltage_mV\tforce_N"] + [f"{v!r}\t{f!r}" for v, f in curve]
    Path(path).write_text("\n".join(lines) + "\n")
