"""Synthetic bedroom-style corpus generator with known ground-truth relations.

Every generated scene records a manifest of the relations it was built
with (support edges, surround groups, wall assignments), which the
relation-detection tests use as an oracle.  Placements are constructed so
that attachments are exact and everything else keeps a clearance well
above the codec's attachment tolerance; this makes the ground-truth
placement round trip exact under snapping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import OBB, footprint_intersection_area, normalize_angle
from .scene import Room, Scene, SceneObject


class TemplateError(Exception):
    """The template's objects cannot fit the requested room."""


@dataclass(frozen=True)
class TemplateConfig:
    room_width: tuple[float, float] = (3.8, 4.6)
    room_depth: tuple[float, float] = (3.8, 4.6)
    wall_height: float = 2.6
    wardrobe_prob: float = 0.9
    desk_group_prob: float = 0.85
    size_jitter: float = 0.05
    # base dims (size_x = extent perpendicular to the wall for wall objects)
    bed_dims: tuple[float, float, float] = (2.0, 1.6, 0.5)
    nightstand_dims: tuple[float, float, float] = (0.5, 0.5, 0.55)
    lamp_dims: tuple[float, float, float] = (0.2, 0.2, 0.4)
    wardrobe_dims: tuple[float, float, float] = (0.6, 1.2, 2.0)
    desk_dims: tuple[float, float, float] = (0.6, 1.2, 0.75)
    computer_dims: tuple[float, float, float] = (0.35, 0.5, 0.45)
    chair_dims: tuple[float, float, float] = (0.45, 0.45, 0.9)

    @property
    def categories(self) -> tuple[str, ...]:
        return ("bed", "nightstand", "lamp", "wardrobe", "desk", "computer", "chair")


@dataclass
class SceneManifest:
    """Ground truth the generator committed to for one scene."""
    support_pairs: list[tuple[str, str]] = field(default_factory=list)
    surround_groups: list[tuple[str, str, str]] = field(default_factory=list)
    wall_assignment: dict[str, int] = field(default_factory=dict)


def synthesize_corpus(template: TemplateConfig, seed: int, count: int) -> list[Scene]:
    return [s for s, _ in synthesize_with_manifests(template, seed, count)]


def synthesize_with_manifests(template: TemplateConfig, seed: int,
                              count: int) -> list[tuple[Scene, SceneManifest]]:
    if count <= 0:
        raise ValueError("count must be positive")
    # imported here: hierarchy sits above this module in the layering
    from .hierarchy import build_hierarchy, validate_tree
    from .relpos import RelationConfig

    rng = np.random.default_rng(seed)
    cfg = RelationConfig()
    out = []
    while len(out) < count:
        for attempt in range(50):
            scene, manifest = _make_scene(template, rng)
            # keep only draws whose hierarchy round-trips placements
            # exactly; rare accidental near-attachments are redrawn
            if all(validate_tree(build_hierarchy(scene, cfg, mode),
                                 relpos_tol=1e-9).ok
                   for mode in ("full", "wall_only", "none")):
                out.append((scene, manifest))
                break
        else:
            raise TemplateError("could not draw a clean scene in 50 attempts")
    return out


def _jit(rng, base: float, frac: float) -> float:
    return base * (1.0 + rng.uniform(-frac, frac))


def _make_scene(t: TemplateConfig, rng: np.random.Generator) -> tuple[Scene, SceneManifest]:
    width = rng.uniform(*t.room_width)
    depth = rng.uniform(*t.room_depth)
    room = Room(width=width, depth=depth, wall_height=t.wall_height)
    manifest = SceneManifest()
    objects: list[SceneObject] = []
    counter = [0]

    def oid(cat: str) -> str:
        counter[0] += 1
        return f"{cat}_{counter[0]}"

    def side_len(wall: int) -> float:
        return depth if wall % 2 == 0 else width

    def boundary(wall: int) -> float:
        return width / 2.0 if wall % 2 == 0 else depth / 2.0

    def place_on_wall(wall: int, dims, lateral: float, elevation: float = 0.0) -> OBB:
        """Box flush against the wall, local +x pointing into the room."""
        ang = wall * math.pi / 2.0
        along = np.array([-math.sin(ang), math.cos(ang)])
        center = (boundary(wall) - dims[0] / 2.0) \
            * np.array([math.cos(ang), math.sin(ang)]) + lateral * along
        return OBB(float(center[0]), float(center[1]), elevation,
                   dims[0], dims[1], dims[2], normalize_angle(ang + math.pi))

    walls = list(rng.permutation(4))
    bed_wall, ward_wall, desk_wall = int(walls[0]), int(walls[1]), int(walls[2])

    # Bed with flanking nightstand+lamp stacks against bed_wall.
    bed_dims = tuple(_jit(rng, d, t.size_jitter) for d in t.bed_dims)
    ns_dims = [tuple(_jit(rng, d, t.size_jitter) for d in t.nightstand_dims)
               for _ in range(2)]
    group_half = bed_dims[1] / 2.0 + max(n[1] for n in ns_dims)
    margin = side_len(bed_wall) / 2.0 - group_half - 0.25
    if margin < 0:
        raise TemplateError("bed with flanking nightstands does not fit along the wall")
    bed_lat = rng.uniform(-margin, margin)
    bed = SceneObject(oid("bed"), "bed", place_on_wall(bed_wall, bed_dims, bed_lat))
    objects.append(bed)
    manifest.wall_assignment[bed.id] = bed_wall

    stands = []
    for side, nd in zip((-1.0, 1.0), ns_dims):
        lat = bed_lat + side * (bed_dims[1] / 2.0 + nd[1] / 2.0)
        ns = SceneObject(oid("nightstand"), "nightstand",
                        place_on_wall(bed_wall, nd, lat))
        objects.append(ns)
        stands.append(ns)
        manifest.wall_assignment[ns.id] = bed_wall
        lamp_dims = tuple(_jit(rng, d, t.size_jitter) for d in t.lamp_dims)
        ang = ns.obb.angle
        off = rng.uniform(-0.05, 0.05, size=2)
        lc = ns.obb.to_world(off)
        lamp = SceneObject(oid("lamp"), "lamp",
                           OBB(float(lc[0]), float(lc[1]), ns.obb.top,
                               lamp_dims[0], lamp_dims[1], lamp_dims[2], ang))
        objects.append(lamp)
        manifest.support_pairs.append((ns.id, lamp.id))
        manifest.wall_assignment[lamp.id] = bed_wall
    # nearer surrounder (smaller depth along the wall) comes first
    order = (0, 1) if ns_dims[0][1] <= ns_dims[1][1] else (1, 0)
    manifest.surround_groups.append(
        (bed.id, stands[order[0]].id, stands[order[1]].id))

    if rng.uniform() < t.wardrobe_prob:
        wd = tuple(_jit(rng, d, t.size_jitter) for d in t.wardrobe_dims)
        wmargin = side_len(ward_wall) / 2.0 - wd[1] / 2.0 - 0.25
        for _ in range(20):
            lat = rng.uniform(-wmargin, wmargin)
            ward = SceneObject(oid("wardrobe"), "wardrobe",
                               place_on_wall(ward_wall, wd, lat))
            if _clear(ward.obb, objects, 0.12):
                objects.append(ward)
                manifest.wall_assignment[ward.id] = ward_wall
                break

    if rng.uniform() < t.desk_group_prob:
        dd = tuple(_jit(rng, d, t.size_jitter) for d in t.desk_dims)
        dmargin = side_len(desk_wall) / 2.0 - dd[1] / 2.0 - 0.35
        for _ in range(20):
            lat = rng.uniform(-dmargin, dmargin)
            desk = SceneObject(oid("desk"), "desk", place_on_wall(desk_wall, dd, lat))
            cd = tuple(_jit(rng, d, t.size_jitter) for d in t.chair_dims)
            gap = rng.uniform(0.1, 0.3)
            # keep the chair strictly nearest its own wall, and clear of
            # accidental edge alignment with the desk along the wall
            bound = side_len(desk_wall) / 2.0 - (dd[0] + gap + cd[0] / 2.0) - 0.1
            chair_lat = lat + rng.choice([-1.0, 1.0]) * rng.uniform(0.12, 0.2)
            chair_lat = float(np.clip(chair_lat, -bound, bound))
            ang = desk_wall * math.pi / 2.0
            inward = -np.array([math.cos(ang), math.sin(ang)])
            along = np.array([-math.sin(ang), math.cos(ang)])
            cc = (boundary(desk_wall) - dd[0] - gap - cd[0] / 2.0) \
                * np.array([math.cos(ang), math.sin(ang)]) + chair_lat * along
            chair = SceneObject(oid("chair"), "chair",
                                OBB(float(cc[0]), float(cc[1]), 0.0,
                                    cd[0], cd[1], cd[2], desk.obb.angle))
            if _clear(desk.obb, objects, 0.12) and _clear(chair.obb, objects, 0.12):
                pcdims = tuple(_jit(rng, d, t.size_jitter) for d in t.computer_dims)
                off = rng.uniform(-0.03, 0.03, size=2)
                pc_center = desk.obb.to_world(off)
                pc = SceneObject(oid("computer"), "computer",
                                 OBB(float(pc_center[0]), float(pc_center[1]),
                                     desk.obb.top, pcdims[0], pcdims[1], pcdims[2],
                                     desk.obb.angle))
                objects.extend([desk, chair, pc])
                manifest.support_pairs.append((desk.id, pc.id))
                for o in (desk, chair, pc):
                    manifest.wall_assignment[o.id] = desk_wall
                break

    return Scene(room=room, objects=tuple(objects), room_type="bedroom"), manifest


def _clear(box: OBB, placed: list[SceneObject], clearance: float) -> bool:
    grown = OBB(box.center_x, box.center_y, box.elevation,
                box.size_x + 2 * clearance, box.size_y + 2 * clearance,
                box.size_z, box.angle)
    return all(footprint_intersection_area(grown, o.obb) <= 0.0 for o in placed)
