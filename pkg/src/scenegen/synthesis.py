"""From latents to placed scenes: sampling, absolute placement recovery,
catalog retrieval, top-view rendering, and placed-scene files.

Placement recovery runs each subtree in its own local frame and re-anchors
it rigidly where the parent's placement vector puts its aggregate box; the
codec is rigid-motion covariant, so a tree built from a real scene realizes
back to the original poses exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import hierarchy as H
from .geometry import OBB, normalize_angle, rot2
from .hierarchy import SceneTree, TreeNode, aggregate_of
from .model import ModelParams
from .relpos import decode as decode_relpos
from .rvnn import DecodeLimits, decode_tree_free
from .scene import FLOOR, WALL, WALL_THICKNESS, Room

PLACED_FORMAT = "grains-placed/1"


class RealizationError(Exception):
    """A node's placement vector could not be decoded."""


@dataclass(frozen=True)
class Placement:
    category: str
    obb: OBB
    model_ref: str | None = None


@dataclass
class PlacedScene:
    room: Room
    placements: list[Placement]
    source_tree: SceneTree


# --- placement recovery ---------------------------------------------------

def _rigid_map(placed: list[tuple[TreeNode, OBB]], src: OBB, dst: OBB
               ) -> list[tuple[TreeNode, OBB]]:
    """Apply the rigid motion taking box ``src`` onto box ``dst``."""
    dth = normalize_angle(dst.angle - src.angle)
    rot = rot2(dth)
    dz = dst.elevation - src.elevation
    out = []
    for leaf, obb in placed:
        center = dst.center + rot @ (obb.center - src.center)
        out.append((leaf, obb.moved(float(center[0]), float(center[1]),
                                    obb.angle + dth, obb.elevation + dz)))
    return out


def _realize(node: TreeNode, path: str
             ) -> tuple[OBB, list[tuple[TreeNode, OBB]], float]:
    """Aggregate box, leaf poses, and standing-plane height of a subtree,
    all in its own local frame (reference leaf at the origin, angle 0,
    bottom at elevation 0).

    The standing plane ("ground") is the level things in this subtree rest
    on: a floor contributes its top face, anything else its bottom.  The
    placement vector carries no vertical data, so siblings of a non-support
    node are placed with their grounds coinciding, and supported children
    sit on the reference's top face.
    """
    if node.kind == H.LEAF:
        o = node.obj.obb
        box = OBB(0.0, 0.0, 0.0, o.size_x, o.size_y, o.size_z, 0.0)
        ground = box.top if node.obj.category == FLOOR else 0.0
        return box, [(node, box)], ground
    if len(node.relpos) != len(node.children) - 1:
        raise RealizationError(f"node {path or '/'}: placement vectors missing")
    ref_agg, placed, ground = _realize(node.children[0], f"{path}/0")
    aggs = [ref_agg]
    for i, (child, rp) in enumerate(zip(node.children[1:], node.relpos)):
        sub_agg, sub_placed, sub_ground = _realize(child, f"{path}/{i + 1}")
        if node.kind == H.SUPPORT:
            elev = ref_agg.top
        else:
            elev = sub_agg.elevation + ground - sub_ground
        try:
            target = decode_relpos(
                ref_agg, rp, (sub_agg.size_x, sub_agg.size_y, sub_agg.size_z),
                snap=True, elevation=elev)
        except ValueError as e:
            raise RealizationError(f"node {path or '/'} child {i + 1}: {e}") from e
        placed.extend(_rigid_map(sub_placed, sub_agg, target))
        aggs.append(target)
    return aggregate_of(aggs), placed, ground


def _derive_room(leaves: list[tuple[TreeNode, OBB]],
                 room_prior: Room | None) -> Room:
    if room_prior is not None:
        return room_prior
    walls = [obb for leaf, obb in leaves if leaf.obj.category == WALL]
    if len(walls) == 4:
        # opposite walls are the farther-apart pairing; the pair separated
        # along x spans the width
        pairings = (((0, 1), (2, 3)), ((0, 2), (1, 3)), ((0, 3), (1, 2)))
        pairing = max(pairings, key=lambda pr: sum(
            float(np.linalg.norm(walls[a].center - walls[b].center))
            for a, b in pr))
        width = depth = None
        for a, b in pairing:
            d = walls[b].center - walls[a].center
            span = float(np.linalg.norm(d)) - (walls[a].size_y + walls[b].size_y) / 2.0
            if abs(d[0]) >= abs(d[1]):
                width = span
            else:
                depth = span
        height = float(np.mean([w.size_z for w in walls]))
        if width and depth and width > 0 and depth > 0:
            return Room(width=width, depth=depth, wall_height=height)
    # fall back to the bounding extent of whatever was placed
    xs = [x for _, o in leaves for x in (o.center_x - o.size_x, o.center_x + o.size_x)]
    ys = [y for _, o in leaves for y in (o.center_y - o.size_y, o.center_y + o.size_y)]
    span_x = max(max(xs) - min(xs), 1.0)
    span_y = max(max(ys) - min(ys), 1.0)
    return Room(width=span_x, depth=span_y, wall_height=2.6)


def realize_leaf_poses(tree: SceneTree) -> list[tuple[TreeNode, OBB]]:
    """Absolute pose of every leaf (walls and floor included), anchored so
    the floor sits at the origin with its top face at height zero."""
    _, placed, _ = _realize(tree.root, "")
    floors = [(leaf, obb) for leaf, obb in placed
              if leaf.obj.category == FLOOR]
    if floors:
        leaf, src = floors[0]
        dst = OBB(0.0, 0.0, -src.size_z, src.size_x, src.size_y, src.size_z, 0.0)
        placed = _rigid_map(placed, src, dst)
    return placed


def realize_placements(tree: SceneTree, room_prior: Room | None = None,
                       catalog: "ModelCatalog | None" = None) -> PlacedScene:
    """Placed scene with absolute object poses in the room frame."""
    placed = realize_leaf_poses(tree)
    room = _derive_room(placed, room_prior)
    placements = []
    for leaf, obb in placed:
        if leaf.obj.category in (WALL, FLOOR):
            continue
        ref = None
        if catalog is not None:
            try:
                ref = retrieve_model(catalog, leaf.obj.category,
                                     (obb.size_x, obb.size_y, obb.size_z))
            except KeyError:
                ref = None
        placements.append(Placement(category=leaf.obj.category, obb=obb,
                                    model_ref=ref))
    return PlacedScene(room=room, placements=placements, source_tree=tree)


def sample_scene(params: ModelParams, rng: np.random.Generator,
                 limits: DecodeLimits = DecodeLimits()) -> SceneTree:
    z = rng.standard_normal(params.config.z_dim)
    return decode_tree_free(params, z, limits)


# --- catalog retrieval ----------------------------------------------------

@dataclass(frozen=True)
class CatalogEntry:
    id: str
    category: str
    dims: tuple[float, float, float]


@dataclass
class ModelCatalog:
    entries: list[CatalogEntry] = field(default_factory=list)

    def __post_init__(self):
        ids = [e.id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("catalog ids must be unique")
        for e in self.entries:
            if any(d <= 0 for d in e.dims):
                raise ValueError(f"catalog entry {e.id} has non-positive dims")


def load_catalog(path: str | Path) -> ModelCatalog:
    """Catalog file: one JSON record {id, category, dims} per line."""
    entries = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line:
            continue
        rec = json.loads(line)
        entries.append(CatalogEntry(id=str(rec["id"]), category=str(rec["category"]),
                                    dims=tuple(float(d) for d in rec["dims"])))
    return ModelCatalog(entries=entries)


def retrieve_model(catalog: ModelCatalog, category: str,
                   dims: tuple[float, float, float]) -> str:
    """Same-category entry minimizing squared log-dimension distance."""
    cands = [e for e in catalog.entries if e.category == category]
    if not cands:
        raise KeyError(f"no catalog entries for category {category!r}")
    best = min(cands, key=lambda e: (sum(
        (math.log(d) - math.log(ed)) ** 2 for d, ed in zip(dims, e.dims)), e.id))
    return best.id


# --- rendering ------------------------------------------------------------

_PALETTE = ("#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948",
            "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac")


def _color_for(category: str) -> str:
    return _PALETTE[sum(category.encode()) % len(_PALETTE)]


def render_topview(scene: PlacedScene, scale: float = 100.0) -> str:
    """Deterministic SVG of the room outline and object footprints."""
    hw, hd = scene.room.width / 2.0, scene.room.depth / 2.0
    pad = 0.3
    x0, y0 = -(hw + pad), -(hd + pad)
    w, h = 2 * (hw + pad), 2 * (hd + pad)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" '
        f'viewBox="{x0 * scale:.1f} {y0 * scale:.1f} {w * scale:.1f} {h * scale:.1f}">',
        f'<rect x="{-hw * scale:.1f}" y="{-hd * scale:.1f}" '
        f'width="{2 * hw * scale:.1f}" height="{2 * hd * scale:.1f}" '
        f'fill="#fcfcf8" stroke="#333" stroke-width="3"/>',
    ]
    for p in scene.placements:
        o = p.obb
        cx, cy = o.center_x * scale, -o.center_y * scale
        sx, sy = o.size_x * scale, o.size_y * scale
        deg = -math.degrees(o.angle)
        parts.append(
            f'<g transform="translate({cx:.1f} {cy:.1f}) rotate({deg:.1f})">'
            f'<rect x="{-sx / 2:.1f}" y="{-sy / 2:.1f}" width="{sx:.1f}" '
            f'height="{sy:.1f}" fill="{_color_for(p.category)}" fill-opacity="0.75" '
            f'stroke="#222" stroke-width="1.5"/>'
            f'<text x="0" y="0" font-size="11" text-anchor="middle" '
            f'fill="#111">{p.category}</text></g>')
    parts.append('</svg>')
    return '\n'.join(parts)


# --- placed-scene files ---------------------------------------------------

def _placement_to_record(p: Placement) -> dict:
    o = p.obb
    rec = {"category": p.category,
           "center": [o.center_x, o.center_y], "elevation": o.elevation,
           "size": [o.size_x, o.size_y, o.size_z], "angle": o.angle}
    if p.model_ref is not None:
        rec["model_ref"] = p.model_ref
    return rec


def scene_to_doc(scene: PlacedScene) -> dict:
    return {
        "format_version": PLACED_FORMAT,
        "room": {"width": scene.room.width, "depth": scene.room.depth,
                 "wall_height": scene.room.wall_height},
        "placements": [_placement_to_record(p) for p in scene.placements],
        "tree": {"room_type": scene.source_tree.room_type,
                 "root": H._node_to_record(scene.source_tree.root)},
    }


def scene_from_doc(doc: dict, where: str = "document") -> PlacedScene:
    if doc.get("format_version") != PLACED_FORMAT:
        raise ValueError(f"{where}: unsupported placed-scene format")
    room = Room(**doc["room"])
    placements = [
        Placement(category=rec["category"],
                  obb=OBB(rec["center"][0], rec["center"][1], rec["elevation"],
                          rec["size"][0], rec["size"][1], rec["size"][2],
                          rec["angle"]),
                  model_ref=rec.get("model_ref"))
        for rec in doc["placements"]]
    tree = SceneTree(root=H._node_from_record(doc["tree"]["root"]),
                     room_type=doc["tree"]["room_type"])
    H.recompute_aggregates(tree.root)
    return PlacedScene(room=room, placements=placements, source_tree=tree)


def export_scene(scene: PlacedScene, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scene_to_doc(scene)), encoding="utf-8")


def import_scene(path: str | Path) -> PlacedScene:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ValueError(f"cannot parse placed-scene file {path}: {e}") from e
    return scene_from_doc(doc, where=str(path))
