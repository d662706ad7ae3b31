"""Relative placement codec between a reference box and a target box.

A placement is a 28-component vector: three reals (relative rotation angle
and one closest-edge offset per footprint axis) plus 25 indicator bits
(16 for the closest-edge-pair case on both axes, 4 for attachment, 5 for
alignment at right-angle multiples).  The bits let decoding snap targets to
exact contact and exact right angles, which jittery real-valued offsets
cannot guarantee on their own.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import OBB, normalize_angle, rot2

DIM = 28

ATTACH_NONE = 0
ATTACH_AXIS1 = 1
ATTACH_AXIS2 = 2
ATTACH_BOTH = 3

ALIGN_OTHER = 4


@dataclass(frozen=True)
class RelationConfig:
    """Tolerances used by relation detection and the codec."""
    support_overlap_min: float = 0.5
    support_gap_max: float = 0.05
    surround_size_ratio: tuple[float, float] = (0.75, 1.33)
    surround_radius_max: float = 1.0
    attach_tol: float = 0.05
    align_tol: float = math.radians(5.0)

    def __post_init__(self):
        lo, hi = self.surround_size_ratio
        if not (lo <= 1.0 <= hi):
            raise ValueError("surround_size_ratio interval must contain 1")
        for name in ("support_overlap_min", "support_gap_max",
                     "surround_radius_max", "attach_tol", "align_tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class RelPos:
    """Decoded form of the 28-vector; bit groups stored as indices."""
    angle: float
    offset_h: float
    offset_v: float
    case_h: int   # 0..3: 2*(ref edge is max) + (tgt edge is max)
    case_v: int
    attach: int   # 0..3, see ATTACH_* constants
    align: int    # 0..3 = multiples of pi/2, 4 = other

    def to_vector(self) -> np.ndarray:
        v = np.zeros(DIM)
        v[0] = self.angle
        v[1] = self.offset_h
        v[2] = self.offset_v
        v[3 + 4 * self.case_h + self.case_v] = 1.0
        v[19 + self.attach] = 1.0
        v[23 + self.align] = 1.0
        return v

    @staticmethod
    def from_vector(v: np.ndarray) -> "RelPos":
        """Harden a real-valued 28-vector by per-group argmax."""
        v = np.asarray(v, dtype=float)
        if v.shape != (DIM,):
            raise ValueError(f"expected a {DIM}-vector, got shape {v.shape}")
        edge = int(np.argmax(v[3:19]))
        return RelPos(angle=float(v[0]), offset_h=float(v[1]), offset_v=float(v[2]),
                      case_h=edge // 4, case_v=edge % 4,
                      attach=int(np.argmax(v[19:23])),
                      align=int(np.argmax(v[23:28])))

    def validate(self) -> None:
        if not (0 <= self.case_h <= 3 and 0 <= self.case_v <= 3):
            raise ValueError("edge case out of range")
        if not 0 <= self.attach <= 3:
            raise ValueError("attach index out of range")
        if not 0 <= self.align <= 4:
            raise ValueError("align index out of range")


def relative_angle(ref: OBB, tgt: OBB) -> float:
    return normalize_angle(tgt.angle - ref.angle)


def closest_edge_case(ref_lo: float, ref_hi: float,
                      tgt_lo: float, tgt_hi: float) -> tuple[int, float]:
    """Pick the closest of the 4 (ref edge, tgt edge) pairs along one axis.

    Case index = 2*(ref edge is max) + (tgt edge is max); ties go to the
    lowest index.  Returns (case, signed offset tgt_edge - ref_edge).
    """
    best_case, best_off = 0, tgt_lo - ref_lo
    for case, (re, te) in enumerate(
            [(ref_lo, tgt_lo), (ref_lo, tgt_hi), (ref_hi, tgt_lo), (ref_hi, tgt_hi)]):
        off = te - re
        if abs(off) < abs(best_off) - 1e-15:
            best_case, best_off = case, off
    return best_case, best_off


def encode(ref: OBB, tgt: OBB, cfg: RelationConfig = RelationConfig()) -> RelPos:
    """Encode the target's footprint pose relative to the reference box."""
    ang = relative_angle(ref, tgt)
    # Offsets compare reference edges with the target footprint's bounding
    # extents measured in the reference local frame.
    cx, cy = ref.to_local(tgt.center)
    hx, hy = _frame_half_extents(tgt.size_x, tgt.size_y, ang)
    case_h, off_h = closest_edge_case(-ref.size_x / 2, ref.size_x / 2, cx - hx, cx + hx)
    case_v, off_v = closest_edge_case(-ref.size_y / 2, ref.size_y / 2, cy - hy, cy + hy)

    align = ALIGN_OTHER
    for k in range(4):
        if abs(normalize_angle(ang - k * math.pi / 2.0)) <= cfg.align_tol:
            align = k
            break

    attach = ATTACH_NONE
    if align != ALIGN_OTHER:
        on_h = abs(off_h) <= cfg.attach_tol
        on_v = abs(off_v) <= cfg.attach_tol
        if on_h and on_v:
            attach = ATTACH_BOTH
        elif on_h:
            attach = ATTACH_AXIS1
        elif on_v:
            attach = ATTACH_AXIS2
    return RelPos(ang, off_h, off_v, case_h, case_v, attach, align)


def decode(ref: OBB, rp: RelPos, tgt_sizes: tuple[float, float, float],
           snap: bool = True, elevation: float | None = None) -> OBB:
    """Place a target box of the given sizes relative to the reference.

    With ``snap`` on, alignment bits force exact right angles and attach
    bits force exact edge contact on the indicated axes.
    """
    sx, sy, sz = tgt_sizes
    if sx <= 0 or sy <= 0 or sz <= 0:
        raise ValueError(f"target sizes must be positive, got {tgt_sizes}")
    rp.validate()

    ang = rp.angle
    off_h, off_v = rp.offset_h, rp.offset_v
    if snap:
        if rp.align != ALIGN_OTHER:
            ang = rp.align * math.pi / 2.0
        if rp.attach in (ATTACH_AXIS1, ATTACH_BOTH):
            off_h = 0.0
        if rp.attach in (ATTACH_AXIS2, ATTACH_BOTH):
            off_v = 0.0

    hx, hy = _frame_half_extents(sx, sy, ang)
    cx = _center_from_edge(rp.case_h, off_h, ref.size_x / 2.0, hx)
    cy = _center_from_edge(rp.case_v, off_v, ref.size_y / 2.0, hy)
    world = ref.to_world(np.array([cx, cy]))
    return OBB(center_x=float(world[0]), center_y=float(world[1]),
               elevation=ref.elevation if elevation is None else elevation,
               size_x=sx, size_y=sy, size_z=sz,
               angle=normalize_angle(ref.angle + ang))


def _frame_half_extents(sx: float, sy: float, angle: float) -> tuple[float, float]:
    """Half-extents of a rotated sx-by-sy footprint's bounding box."""
    c, s = abs(math.cos(angle)), abs(math.sin(angle))
    return (c * sx + s * sy) / 2.0, (s * sx + c * sy) / 2.0


def _center_from_edge(case: int, offset: float, ref_half: float, tgt_half: float) -> float:
    ref_edge = ref_half if case >= 2 else -ref_half
    tgt_edge = ref_edge + offset
    # Case parity says whether the chosen target edge was its min or max.
    return tgt_edge + tgt_half if case % 2 == 0 else tgt_edge - tgt_half
