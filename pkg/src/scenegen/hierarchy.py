"""Relation detection and scene hierarchy construction.

A scene becomes a typed tree: support stacks are merged first, then
surround groups, then everything left in a wall cluster is merged into
binary co-occurrence nodes; each cluster joins its wall, and floor plus
the four wall nodes form the root.  Every internal node stores placement
vectors of its non-reference children relative to its first child.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import OBB, aabb_hull, footprint_intersection_area, rot2
from .relpos import RelationConfig, RelPos, encode, decode
from .scene import FLOOR, WALL, Scene, SceneObject

TREE_FORMAT = "grains-tree/1"

LEAF = "leaf"
SUPPORT = "support"
SURROUND = "surround"
COOCCUR = "cooccur"
WALLNODE = "wall"
ROOT = "root"

ARITY = {SUPPORT: 2, COOCCUR: 2, WALLNODE: 2, SURROUND: 3, ROOT: 5}


@dataclass
class TreeNode:
    kind: str
    children: list["TreeNode"] = field(default_factory=list)
    relpos: list[RelPos] = field(default_factory=list)
    obj: SceneObject | None = None     # leaves only
    agg: OBB | None = None             # aggregate box, absolute frame

    def leaves(self) -> list["TreeNode"]:
        if self.kind == LEAF:
            return [self]
        out = []
        for c in self.children:
            out.extend(c.leaves())
        return out

    def count_nodes(self) -> int:
        return 1 + sum(c.count_nodes() for c in self.children)

    def depth(self) -> int:
        return 1 + max((c.depth() for c in self.children), default=0)

    def at_path(self, path: list[int]) -> "TreeNode":
        node = self
        for i in path:
            if not 0 <= i < len(node.children):
                raise IndexError(f"path step {i} invalid at {node.kind} node")
            node = node.children[i]
        return node


@dataclass
class SceneTree:
    root: TreeNode
    room_type: str = "custom"


def leaf_node(obj: SceneObject) -> TreeNode:
    return TreeNode(kind=LEAF, obj=obj, agg=obj.obb)


def aggregate_of(boxes: list[OBB]) -> OBB:
    """Tight axis-aligned hull of the boxes in the first box's frame."""
    ref = boxes[0]
    local = [(np.array([ref.to_local(p) for p in b.corners()]), b)
             for b in boxes]
    lo_x, hi_x, lo_y, hi_y, lo_z, hi_z = aabb_hull(local)
    center = ref.to_world(np.array([(lo_x + hi_x) / 2.0, (lo_y + hi_y) / 2.0]))
    return OBB(float(center[0]), float(center[1]), lo_z,
               hi_x - lo_x, hi_y - lo_y, hi_z - lo_z, ref.angle)


def make_internal(kind: str, children: list[TreeNode],
                  cfg: RelationConfig) -> TreeNode:
    """Internal node with aggregate box and relative placements filled in."""
    agg = aggregate_of([c.agg for c in children])
    rels = [encode(children[0].agg, c.agg, cfg) for c in children[1:]]
    return TreeNode(kind=kind, children=children, relpos=rels, agg=agg)


# --- relation detection ---------------------------------------------------

def detect_support_pairs(scene: Scene,
                         cfg: RelationConfig = RelationConfig()) -> list[tuple[str, str]]:
    """(supporter, supported) pairs; each object keeps its lowest-gap supporter."""
    best: dict[str, tuple[float, str]] = {}
    for a in scene.objects:
        for b in scene.objects:
            if a.id == b.id:
                continue
            gap = abs(b.obb.elevation - a.obb.top)
            if gap > cfg.support_gap_max:
                continue
            inter = footprint_intersection_area(a.obb, b.obb)
            if inter < cfg.support_overlap_min * b.obb.footprint_area:
                continue
            cur = best.get(b.id)
            if cur is None or (gap, a.id) < cur:
                best[b.id] = (gap, a.id)
    pairs = [(sup_id, b_id) for b_id, (_, sup_id) in best.items()]
    pairs.sort()
    return pairs


def _boundary_distance(central: OBB, pt: np.ndarray) -> float:
    lx, ly = central.to_local(pt)
    dx = max(0.0, abs(lx) - central.size_x / 2.0)
    dy = max(0.0, abs(ly) - central.size_y / 2.0)
    return math.hypot(dx, dy)


def detect_surround_groups(scene: Scene, cfg: RelationConfig,
                           support_pairs: list[tuple[str, str]]
                           ) -> list[tuple[str, str, str]]:
    """(central, nearer surrounder, farther surrounder) triples.

    Surrounders share a category, have similar footprint area, sit near the
    central box, and lie on opposite sides of its long axis.  Supported
    objects stay inside their stacks and never join a group.
    """
    supported = {b for _, b in support_pairs}
    free = [o for o in scene.objects if o.id not in supported]
    lo, hi = cfg.surround_size_ratio
    used: set[str] = set()
    groups = []
    for central in free:
        if central.id in used:
            continue
        cands = []
        for s in free:
            if s.id == central.id or s.id in used:
                continue
            d = _boundary_distance(central.obb, s.obb.center)
            if d <= cfg.surround_radius_max:
                cands.append((d, s))
        by_cat: dict[str, list[tuple[float, SceneObject]]] = {}
        for d, s in cands:
            by_cat.setdefault(s.category, []).append((d, s))
        for cat in sorted(by_cat):
            members = sorted(by_cat[cat], key=lambda t: (t[0], t[1].id))
            pair = _pick_surrounders(central.obb, members, lo, hi)
            if pair is None:
                continue
            s1, s2 = pair
            groups.append((central.id, s1.id, s2.id))
            used.update({central.id, s1.id, s2.id})
            break
    return groups


def _pick_surrounders(central: OBB, members, lo, hi):
    long_is_x = central.size_x >= central.size_y
    def side(o: SceneObject) -> float:
        lx, ly = central.to_local(o.obb.center)
        return ly if long_is_x else lx
    for i, (d1, s1) in enumerate(members):
        for d2, s2 in members[i + 1:]:
            ratio = s1.obb.footprint_area / s2.obb.footprint_area
            if not (lo <= ratio <= hi):
                continue
            if side(s1) * side(s2) >= 0:
                continue
            return (s1, s2) if d1 <= d2 else (s2, s1)
    return None


def assign_wall_clusters(scene: Scene,
                         support_pairs: list[tuple[str, str]]) -> dict[str, int]:
    """Wall index per object; support stacks follow their base object."""
    supporter = {b: a for a, b in support_pairs}

    def base_of(oid: str) -> str:
        while oid in supporter:
            oid = supporter[oid]
        return oid

    walls = scene.room.walls
    assignment = {}
    for o in scene.objects:
        base = scene.object_by_id(base_of(o.id))
        dists = []
        for idx, w in enumerate(walls):
            normal = rot2(w.angle) @ np.array([0.0, 1.0])
            dists.append((abs(float(np.dot(base.obb.center - w.center, normal))), idx))
        assignment[o.id] = min(dists)[1]
    return assignment


# --- tree construction ----------------------------------------------------

def build_hierarchy(scene: Scene, cfg: RelationConfig = RelationConfig(),
                    wall_root_mode: str = "full",
                    support_pairs: list[tuple[str, str]] | None = None
                    ) -> SceneTree:
    """Typed hierarchy for a scene.  ``support_pairs`` overrides detection
    (2D layouts redefine support as footprint overlap)."""
    if wall_root_mode not in ("full", "wall_only", "none"):
        raise ValueError(f"unknown wall_root_mode {wall_root_mode!r}")
    walls = scene.room.walls
    if len(walls) != 4:
        raise ValueError("room must have exactly 4 walls")

    supports = detect_support_pairs(scene, cfg) if support_pairs is None \
        else sorted(support_pairs)
    groups = detect_surround_groups(scene, cfg, supports)
    clusters = assign_wall_clusters(scene, supports)

    # support stacks, bottom-up
    supported_of: dict[str, list[str]] = {}
    for a, b in supports:
        supported_of.setdefault(a, []).append(b)
    supported_ids = {b for _, b in supports}

    def stack_node(oid: str) -> TreeNode:
        node = leaf_node(scene.object_by_id(oid))
        for child in sorted(supported_of.get(oid, [])):
            node = make_internal(SUPPORT, [node, stack_node(child)], cfg)
        return node

    roots: dict[str, TreeNode] = {
        o.id: stack_node(o.id) for o in scene.objects if o.id not in supported_ids}

    # surround groups over stack roots
    for central, s1, s2 in groups:
        node = make_internal(
            SURROUND, [roots.pop(central), roots.pop(s1), roots.pop(s2)], cfg)
        roots[central] = node

    def merge_cooccur(nodes: list[TreeNode]) -> TreeNode:
        nodes = list(nodes)
        while len(nodes) > 1:
            best = None
            for i in range(len(nodes)):
                for j in range(i + 1, len(nodes)):
                    d = float(np.linalg.norm(nodes[i].agg.center - nodes[j].agg.center))
                    if best is None or d < best[0] - 1e-12:
                        best = (d, i, j)
            _, i, j = best
            a, b = nodes[i], nodes[j]
            if a.agg.footprint_area < b.agg.footprint_area:
                a, b = b, a
            merged = make_internal(COOCCUR, [a, b], cfg)
            nodes = [n for k, n in enumerate(nodes) if k not in (i, j)]
            nodes.append(merged)
        return nodes[0]

    floor_leaf = leaf_node(
        SceneObject(id="floor", category=FLOOR, obb=scene.room.floor))
    wall_leaves = [
        leaf_node(SceneObject(id=f"wall_{k}", category=WALL, obb=walls[k]))
        for k in range(4)]

    if wall_root_mode == "none":
        pool = list(roots.values()) + wall_leaves + [floor_leaf]
        return SceneTree(root=merge_cooccur(pool), room_type=scene.room_type)

    cluster_roots: dict[int, list[TreeNode]] = {k: [] for k in range(4)}
    for oid, node in roots.items():
        cluster_roots[clusters[oid]].append(node)

    wall_nodes = []
    for k in range(4):
        members = sorted(cluster_roots[k],
                         key=lambda n: -n.agg.footprint_area)
        if not members:
            wall_nodes.append(wall_leaves[k])
        else:
            grouped = merge_cooccur(members)
            wall_nodes.append(make_internal(WALLNODE, [wall_leaves[k], grouped], cfg))

    if wall_root_mode == "wall_only":
        m1 = make_internal(WALLNODE, [wall_nodes[0], wall_nodes[2]], cfg)
        m2 = make_internal(WALLNODE, [wall_nodes[1], wall_nodes[3]], cfg)
        m = make_internal(WALLNODE, [m1, m2], cfg)
        top = make_internal(SUPPORT, [floor_leaf, m], cfg)
        return SceneTree(root=top, room_type=scene.room_type)

    root = make_internal(ROOT, [floor_leaf] + wall_nodes, cfg)
    return SceneTree(root=root, room_type=scene.room_type)


def recompute_aggregates(node: TreeNode) -> None:
    """Rebuild internal aggregate boxes bottom-up from absolute leaf poses.

    Used after deserialization; stored placement vectors are left untouched.
    """
    if node.kind == LEAF:
        node.agg = node.obj.obb
        return
    for c in node.children:
        recompute_aggregates(c)
    node.agg = aggregate_of([c.agg for c in node.children])


# --- validation -----------------------------------------------------------

@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_tree(tree: SceneTree, structural_only: bool = False,
                  relpos_tol: float = 1e-6) -> ValidationReport:
    """Check node invariants; with ``structural_only`` skip geometry checks
    (used for freely generated trees that carry no aggregate boxes)."""
    rep = ValidationReport()

    def visit(node: TreeNode, path: str) -> None:
        if node.kind == LEAF:
            if node.children:
                rep.violations.append(f"leaf-children:{path}")
            return
        want = ARITY.get(node.kind)
        if want is None:
            rep.violations.append(f"unknown-kind:{node.kind}:{path}")
            return
        if len(node.children) != want:
            tag = "root-arity" if node.kind == ROOT else f"{node.kind}-arity"
            rep.violations.append(f"{tag}:{path}")
            return
        if len(node.relpos) != want - 1:
            rep.violations.append(f"relpos-count:{path}")
        # a wall node pairs a wall leaf with its cluster; merges of wall
        # nodes (reduced wall/root handling) chain wall nodes directly
        if node.kind == WALLNODE and node.children[0].kind not in (LEAF, WALLNODE):
            rep.violations.append(f"wall-first-child:{path}")
        if node.kind == ROOT:
            floor = node.children[0]
            if floor.kind != LEAF or (floor.obj and floor.obj.category != FLOOR):
                rep.violations.append(f"root-floor-first:{path}")
        if not structural_only:
            _check_geometry(node, path, rep, relpos_tol)
        for i, c in enumerate(node.children):
            visit(c, f"{path}/{i}")

    visit(tree.root, "")
    return rep


def _check_geometry(node: TreeNode, path: str, rep: ValidationReport,
                    tol: float) -> None:
    if any(c.agg is None for c in node.children):
        rep.violations.append(f"missing-agg:{path}")
        return
    if node.kind == COOCCUR:
        if node.children[0].agg.footprint_area < node.children[1].agg.footprint_area - 1e-12:
            rep.violations.append(f"coocur-order:{path}")
    if node.kind == SURROUND:
        c1 = node.children[1].leaves()[0]
        c2 = node.children[2].leaves()[0]
        if c1.obj and c2.obj and c1.obj.category != c2.obj.category:
            rep.violations.append(f"surround-category:{path}")
    ref = node.children[0].agg
    for i, (child, rp) in enumerate(zip(node.children[1:], node.relpos)):
        got = decode(ref, rp, (child.agg.size_x, child.agg.size_y, child.agg.size_z),
                     snap=True, elevation=child.agg.elevation)
        err = float(np.linalg.norm(got.center - child.agg.center))
        ang_err = abs(math.remainder(got.angle - child.agg.angle, 2 * math.pi))
        if err > tol or ang_err > 1e-6:
            rep.violations.append(f"relpos-mismatch:{path}/{i + 1}")


# --- serialization --------------------------------------------------------

def _node_to_record(node: TreeNode) -> dict:
    rec: dict = {"kind": node.kind}
    if node.obj is not None:
        o = node.obj
        rec["object"] = {"id": o.id, "category": o.category,
                         "center": [o.obb.center_x, o.obb.center_y],
                         "elevation": o.obb.elevation,
                         "size": [o.obb.size_x, o.obb.size_y, o.obb.size_z],
                         "angle": o.obb.angle}
    if node.relpos:
        rec["relpos"] = [rp.to_vector().tolist() for rp in node.relpos]
    if node.children:
        rec["children"] = [_node_to_record(c) for c in node.children]
    return rec


def _node_from_record(rec: dict) -> TreeNode:
    obj = None
    if "object" in rec:
        o = rec["object"]
        obj = SceneObject(id=o["id"], category=o["category"],
                          obb=OBB(o["center"][0], o["center"][1], o["elevation"],
                                  o["size"][0], o["size"][1], o["size"][2], o["angle"]))
    node = TreeNode(
        kind=rec["kind"],
        children=[_node_from_record(c) for c in rec.get("children", [])],
        relpos=[RelPos.from_vector(np.array(v)) for v in rec.get("relpos", [])],
        obj=obj,
        agg=obj.obb if obj is not None else None)
    return node


def save_trees(trees: list[SceneTree], path: str | Path) -> None:
    doc = {"header": {"format_version": TREE_FORMAT},
           "trees": [{"room_type": t.room_type, "root": _node_to_record(t.root)}
                     for t in trees]}
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load_trees(path: str | Path) -> list[SceneTree]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    header = doc.get("header", {})
    if header.get("format_version") != TREE_FORMAT:
        raise ValueError(f"{path}: unsupported tree file format")
    trees = [SceneTree(root=_node_from_record(t["root"]), room_type=t["room_type"])
             for t in doc["trees"]]
    for t in trees:
        recompute_aggregates(t.root)
    return trees
