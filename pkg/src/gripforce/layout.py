"""Glove sensor layout and hand roles."""
from __future__ import annotations

import enum
from dataclasses import dataclass

from .protocol import Glove


class HandRole(enum.Enum):
    DOMINANT = "dominant"
    NONDOMINANT = "nondominant"

    @classmethod
    def parse(cls, text: str) -> "HandRole":
        key = text.strip().lower().replace("-", "").replace("_", "")
        for role in cls:
            if role.value == key:
                return role
        raise ValueError(f"unknown hand {text!r}; expected 'dominant' or 'nondominant'")


def parse_glove(text: str) -> Glove:
    try:
        return Glove[text.strip().upper()]
    except KeyError:
        raise ValueError(f"unknown glove {text!r}; expected 'left' or 'right'") from None


def glove_for(role: HandRole, dominant_glove: Glove) -> Glove:
    if role is HandRole.DOMINANT:
        return dominant_glove
    return Glove(1 - dominant_glove)


def role_for(glove: Glove, dominant_glove: Glove) -> HandRole:
    return HandRole.DOMINANT if glove == dominant_glove else HandRole.NONDOMINANT


@dataclass(frozen=True)
class SensorSpec:
    sensor_id: int
    diameter_mm: int
    anatomical_site: str


# Four 5 mm sensors on middle phalanges, eight 10 mm on fingertips and palm.
SENSOR_LAYOUT: dict[int, SensorSpec] = {s.sensor_id: s for s in (
    SensorSpec(1, 10, "distal phalanx, index finger"),
    SensorSpec(2, 10, "distal phalanx, middle finger"),
    SensorSpec(3, 10, "distal phalanx, ring finger"),
    SensorSpec(4, 10, "distal phalanx, small finger"),
    SensorSpec(5, 5, "middle phalanx, middle finger"),
    SensorSpec(6, 5, "middle phalanx, ring finger"),
    SensorSpec(7, 5, "middle phalanx, small finger"),
    SensorSpec(8, 5, "middle phalanx, index finger"),
    SensorSpec(9, 10, "palm, distal hypothenar"),
    SensorSpec(10, 10, "thumb metacarpal, near the wrist"),
    SensorSpec(11, 10, "palm, centre"),
    SensorSpec(12, 10, "palm, proximal hypothenar"),
)}

SENSOR_IDS = tuple(SENSOR_LAYOUT)
STRATEGIC_SENSORS = (5, 6, 7, 10)
