"""Layout-guided generation and hierarchy-guided editing.

Both applications run on geometry-consistent trees: every leaf carries an
absolute pose and internal placement vectors agree with the leaf poses.
``bake_tree`` turns any decodable tree (e.g. a freshly generated one) into
that form; editing operations keep it.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import hierarchy as H
from .analysis import GraphNode, SceneGraph, graph_kernel
from .geometry import OBB, footprint_intersection_area
from .hierarchy import SceneTree, TreeNode, build_hierarchy, make_internal, leaf_node
from .model import ModelParams
from .relpos import DIM as RELPOS_DIM
from .relpos import RelationConfig, RelPos, decode as decode_relpos
from .rvnn import DecodeLimits, decode_tree_free, encode_trees, to_feature_tree, vae_head
from .scene import Room, Scene, SceneObject
from .synthesis import PlacedScene, _rigid_map, realize_leaf_poses, realize_placements

LAYOUT_FORMAT = "grains-layout/1"
UNKNOWN_CATEGORY = "?"
LAYOUT_BOX_HEIGHT = 0.5


class EditError(Exception):
    pass


# --- geometry-consistent trees --------------------------------------------

def _with_leaf_poses(node: TreeNode, poses: dict[int, OBB],
                     cfg: RelationConfig) -> TreeNode:
    if node.kind == H.LEAF:
        o = node.obj
        return leaf_node(SceneObject(id=o.id, category=o.category,
                                     obb=poses[id(node)]))
    children = [_with_leaf_poses(c, poses, cfg) for c in node.children]
    return make_internal(node.kind, children, cfg)


def bake_tree(tree: SceneTree, cfg: RelationConfig = RelationConfig(),
              passes: int = 2) -> SceneTree:
    """Realize the tree and write absolute poses back into it, re-deriving
    aggregates and placement vectors from the realized geometry.

    A second realize/re-encode pass makes snapping a fixed point, so the
    result round-trips through the validator exactly.
    """
    out = tree
    for _ in range(passes):
        poses = {id(leaf): obb for leaf, obb in realize_leaf_poses(out)}
        root = _with_leaf_poses(out.root, poses, cfg)
        out = SceneTree(root=root, room_type=tree.room_type)
    return out


def _reorder_cooccur(node: TreeNode) -> list[TreeNode]:
    """Children of a co-occurrence node, larger footprint first."""
    a, b = node.children
    if a.agg.footprint_area < b.agg.footprint_area:
        return [b, a]
    return [a, b]


def _rebuild(node: TreeNode, cfg: RelationConfig) -> TreeNode:
    if node.kind == H.LEAF:
        return leaf_node(node.obj)
    children = [_rebuild(c, cfg) for c in node.children]
    probe = TreeNode(kind=node.kind, children=children)
    if node.kind == H.COOCCUR:
        children = _reorder_cooccur(probe)
    return make_internal(node.kind, children, cfg)


# --- 2D-layout-guided generation ------------------------------------------

@dataclass(frozen=True)
class LayoutBox:
    center_x: float
    center_y: float
    size_x: float
    size_y: float
    angle: float = 0.0


@dataclass
class Layout2D:
    width: float
    depth: float
    boxes: list[LayoutBox] = field(default_factory=list)

    def __post_init__(self):
        if self.width <= 0 or self.depth <= 0:
            raise ValueError("layout room must have positive extent")
        room = OBB(0.0, 0.0, 0.0, self.width, self.depth, 1.0, 0.0)
        for i, b in enumerate(self.boxes):
            obb = OBB(b.center_x, b.center_y, 0.0, b.size_x, b.size_y,
                      LAYOUT_BOX_HEIGHT, b.angle)
            if footprint_intersection_area(room, obb) <= 0.0:
                raise ValueError(f"layout box {i} lies outside the room")


def save_layout(layout: Layout2D, path: str | Path) -> None:
    doc = {"format_version": LAYOUT_FORMAT,
           "room": {"width": layout.width, "depth": layout.depth},
           "boxes": [{"center": [b.center_x, b.center_y],
                      "size": [b.size_x, b.size_y], "angle": b.angle}
                     for b in layout.boxes]}
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load_layout(path: str | Path) -> Layout2D:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format_version") != LAYOUT_FORMAT:
        raise ValueError(f"{path}: unsupported layout format")
    return layout_from_doc(doc)


def layout_from_doc(doc: dict) -> Layout2D:
    boxes = [LayoutBox(center_x=b["center"][0], center_y=b["center"][1],
                       size_x=b["size"][0], size_y=b["size"][1],
                       angle=b.get("angle", 0.0))
             for b in doc["boxes"]]
    return Layout2D(width=doc["room"]["width"], depth=doc["room"]["depth"],
                    boxes=boxes)


def _layout_scene(layout: Layout2D) -> tuple[Scene, list[tuple[str, str]]]:
    """Unlabeled pseudo-scene plus overlap-based support pairs."""
    objects = tuple(
        SceneObject(id=f"b{i}", category=UNKNOWN_CATEGORY,
                    obb=OBB(b.center_x, b.center_y, 0.0, b.size_x, b.size_y,
                            LAYOUT_BOX_HEIGHT, b.angle))
        for i, b in enumerate(layout.boxes))
    room = Room(width=layout.width, depth=layout.depth, wall_height=2.6)
    scene = Scene(room=room, objects=objects, room_type="custom")
    # in a flat layout "rests on" degenerates to footprint overlap: the
    # smaller box is treated as supported by the most-overlapping larger one
    supports: list[tuple[str, str]] = []
    for b in objects:
        best = None
        for a in objects:
            if a.id == b.id or a.obb.footprint_area <= b.obb.footprint_area:
                continue
            inter = footprint_intersection_area(a.obb, b.obb)
            if inter < 0.5 * b.obb.footprint_area:
                continue
            if best is None or (-inter, a.id) < best:
                best = (-inter, a.id)
        if best is not None:
            supports.append((best[1], b.id))
    return scene, supports


def layout_to_scenes(params: ModelParams, layout: Layout2D, n_samples: int,
                     mode: str = "mean", seed: int = 0,
                     cfg: RelationConfig = RelationConfig(),
                     limits: DecodeLimits = DecodeLimits()) -> list[PlacedScene]:
    """Generate labeled scenes guided by an unlabeled 2D box layout."""
    if mode not in ("mean", "sample"):
        raise ValueError(f"unknown mode {mode!r}")
    if not layout.boxes:
        raise ValueError("layout has no boxes")
    scene, supports = _layout_scene(layout)
    tree = build_hierarchy(scene, cfg,
                           wall_root_mode=params.config.wall_root_mode,
                           support_pairs=supports)
    ftree = to_feature_tree(tree, params)
    top = encode_trees(params, [ftree])
    room = Room(width=layout.width, depth=layout.depth, wall_height=2.6)
    out = []
    if mode == "mean":
        z, _, _ = vae_head(params, top, rng=None)
        zs = [z[0]]
    else:
        rng = np.random.default_rng(seed)
        zs = []
        for _ in range(n_samples):
            z, _, _ = vae_head(params, top, rng=rng)
            zs.append(z[0])
    for z in zs:
        decoded = decode_tree_free(params, z, limits)
        out.append(realize_placements(decoded, room_prior=room))
    return out


# --- hierarchy-guided editing ---------------------------------------------

def _resolve(tree: SceneTree, path: list[int]) -> tuple[TreeNode, TreeNode]:
    """(parent, node) for a non-root path."""
    if not path:
        raise EditError("path must address a proper subtree, not the root")
    try:
        parent = tree.root.at_path(path[:-1])
        node = parent.children[path[-1]]
    except IndexError as e:
        raise EditError(str(e)) from e
    return parent, node


@dataclass
class Candidate:
    pool_index: int
    path: list[int]
    score: float
    subtree: TreeNode


def _context_graph(parent: TreeNode, skip: int) -> SceneGraph:
    nodes = []
    for i, c in enumerate(parent.children):
        if i == skip:
            continue
        for leaf in c.leaves():
            o = leaf.obj
            nodes.append(GraphNode(o.category, o.obb.footprint_area, o.obb.diag))
    return SceneGraph(nodes=nodes, edges=[])


def candidate_subtrees(pool: list[SceneTree], tree: SceneTree,
                       path: list[int], k: int) -> list[Candidate]:
    """Subtrees from the pool whose sibling context resembles the selected
    node's, ranked by graph-kernel similarity; same node kind only."""
    parent, node = _resolve(tree, path)
    query = _context_graph(parent, path[-1])
    cands = []

    def walk(pi: int, n: TreeNode, p: list[int]) -> None:
        for i, c in enumerate(n.children):
            if c.kind == node.kind:
                score = graph_kernel(query, _context_graph(n, i), p=0)
                cands.append(Candidate(pi, p + [i], score, c))
            walk(pi, c, p + [i])

    for pi, t in enumerate(pool):
        walk(pi, t.root, [])
    cands.sort(key=lambda c: (-c.score, c.pool_index, c.path))
    return cands[:k]


def replace_subtree(tree: SceneTree, path: list[int], donor: TreeNode,
                    cfg: RelationConfig = RelationConfig(),
                    limits: DecodeLimits = DecodeLimits()) -> SceneTree:
    """Splice a donor subtree in place of the addressed node.

    The donor is re-anchored rigidly at the old subtree's aggregate pose;
    ancestor aggregates and placement vectors are re-derived.
    """
    tree = copy.deepcopy(tree)
    parent, old = _resolve(tree, path)
    donor = copy.deepcopy(donor)
    if donor.kind != old.kind:
        raise EditError(f"donor node kind {donor.kind!r} does not match "
                        f"slot kind {old.kind!r}")
    if donor.agg is None or old.agg is None:
        raise EditError("replace requires geometry-consistent trees")
    leaves = [(leaf, leaf.obj.obb) for leaf in donor.leaves()]
    for leaf, obb in _rigid_map(leaves, donor.agg, old.agg):
        leaf.obj = SceneObject(id=leaf.obj.id, category=leaf.obj.category, obb=obb)
    parent.children[path[-1]] = donor
    new_tree = SceneTree(root=_rebuild(tree.root, cfg), room_type=tree.room_type)
    if new_tree.root.count_nodes() > limits.max_nodes:
        raise EditError(f"result exceeds the {limits.max_nodes}-node limit")
    _check_ids(new_tree)
    return bake_tree(new_tree, cfg)


def _check_ids(tree: SceneTree) -> None:
    ids = [l.obj.id for l in tree.root.leaves()]
    if len(set(ids)) != len(ids):
        # splices can bring in colliding leaf ids; rename deterministically
        seen: set[str] = set()
        for leaf in tree.root.leaves():
            oid = leaf.obj.id
            while oid in seen:
                oid += "'"
            seen.add(oid)
            if oid != leaf.obj.id:
                leaf.obj = SceneObject(id=oid, category=leaf.obj.category,
                                       obb=leaf.obj.obb)


def delete_subtree(tree: SceneTree, path: list[int],
                   cfg: RelationConfig = RelationConfig()) -> SceneTree:
    """Remove the addressed subtree, collapsing its parent by type rules."""
    tree = copy.deepcopy(tree)
    parent, node = _resolve(tree, path)
    for leaf in node.leaves():
        if leaf.obj.category in ("wall", "floor"):
            raise EditError(f"cannot delete mandatory {leaf.obj.category} leaf")
    if parent.kind == H.ROOT:
        raise EditError("cannot delete a direct child of the root")
    rest = [c for i, c in enumerate(parent.children) if i != path[-1]]
    if parent.kind == H.SURROUND:
        if len(rest) == 2 and path[-1] != 0:
            # degrade: central plus the remaining flank co-occur
            replacement = TreeNode(kind=H.COOCCUR, children=rest)
        else:
            replacement = rest[0] if len(rest) == 1 else \
                TreeNode(kind=H.COOCCUR, children=rest)
    else:
        replacement = rest[0]
    if len(path) == 1:
        tree.root = replacement
    else:
        grand = tree.root.at_path(path[:-2])
        grand.children[path[-2]] = replacement
    return bake_tree(SceneTree(root=_rebuild(tree.root, cfg),
                               room_type=tree.room_type), cfg)


def move_subtree(tree: SceneTree, path: list[int], relpos: RelPos | np.ndarray,
                 cfg: RelationConfig = RelationConfig()) -> SceneTree:
    """Re-place a non-reference child according to a new placement vector."""
    rp = _as_relpos(relpos)
    tree = copy.deepcopy(tree)
    parent, node = _resolve(tree, path)
    if path[-1] == 0:
        raise EditError("cannot move a reference (first) child")
    if node.agg is None or parent.children[0].agg is None:
        raise EditError("move requires geometry-consistent trees")
    ref = parent.children[0].agg
    old = node.agg
    target = decode_relpos(ref, rp, (old.size_x, old.size_y, old.size_z),
                           snap=True, elevation=old.elevation)
    leaves = [(leaf, leaf.obj.obb) for leaf in node.leaves()]
    for leaf, obb in _rigid_map(leaves, old, target):
        leaf.obj = SceneObject(id=leaf.obj.id, category=leaf.obj.category, obb=obb)
    return bake_tree(SceneTree(root=_rebuild(tree.root, cfg),
                               room_type=tree.room_type), cfg)


def _as_relpos(value: RelPos | np.ndarray) -> RelPos:
    if isinstance(value, RelPos):
        value.validate()
        return value
    v = np.asarray(value, dtype=float)
    if v.shape != (RELPOS_DIM,):
        raise EditError(f"placement vector must have {RELPOS_DIM} entries")
    for lo, hi in ((3, 19), (19, 23), (23, 28)):
        block = v[lo:hi]
        if not (np.all(np.isin(block, (0.0, 1.0))) and block.sum() == 1.0):
            raise EditError("placement indicator bits must be one-hot")
    return RelPos.from_vector(v)
