"""Evaluation metrics: relation-graph kernels for scene similarity,
co-occurrence statistics, and pairwise placement distributions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import OBB
from .hierarchy import (assign_wall_clusters, detect_support_pairs,
                        detect_surround_groups)
from .relpos import RelationConfig
from .scene import FLOOR, WALL, Scene, Vocabulary

KERNEL_SIGMA = 0.5
DEFAULT_WALK_LENGTH = 3

SUPPORT_EDGE = "support"
SURROUND_EDGE = "surround"
COOCCUR_EDGE = "cooccur"
WALL_EDGE = "against-wall"


@dataclass(frozen=True)
class GraphNode:
    category: str
    footprint_area: float
    diag_size: float


@dataclass
class SceneGraph:
    nodes: list[GraphNode]
    edges: list[tuple[int, int, str]]  # undirected, relation-labeled

    def __post_init__(self):
        seen = set()
        for a, b, rel in self.edges:
            key = (min(a, b), max(a, b), rel)
            if a == b or key in seen:
                raise ValueError("scene graph must be simple")
            seen.add(key)


def build_scene_graph(scene: Scene,
                      cfg: RelationConfig = RelationConfig()) -> SceneGraph:
    """Relation graph over the scene's objects plus its four walls.

    Edges: support pairs, surround flanks, against-wall for each stack
    base, and co-occurrence between remaining stack bases sharing a wall
    cluster.
    """
    objects = list(scene.objects)
    index = {o.id: i for i, o in enumerate(objects)}
    nodes = [GraphNode(o.category, o.obb.footprint_area, o.obb.diag)
             for o in objects]
    walls = scene.room.walls
    wall_index = {}
    for k, w in enumerate(walls):
        wall_index[k] = len(nodes)
        nodes.append(GraphNode(WALL, w.footprint_area, w.diag))

    supports = detect_support_pairs(scene, cfg)
    groups = detect_surround_groups(scene, cfg, supports)
    clusters = assign_wall_clusters(scene, supports)
    edges: list[tuple[int, int, str]] = []
    related = set()

    def add(a: int, b: int, rel: str) -> None:
        key = (min(a, b), max(a, b))
        if a != b and key not in related:
            edges.append((a, b, rel))
            related.add(key)

    for sup, supported in supports:
        add(index[sup], index[supported], SUPPORT_EDGE)
    for central, s1, s2 in groups:
        add(index[central], index[s1], SURROUND_EDGE)
        add(index[central], index[s2], SURROUND_EDGE)

    supported_ids = {b for _, b in supports}
    bases = [o for o in objects if o.id not in supported_ids]
    for o in bases:
        add(index[o.id], wall_index[clusters[o.id]], WALL_EDGE)
    for i, a in enumerate(bases):
        for b in bases[i + 1:]:
            if clusters[a.id] == clusters[b.id]:
                add(index[a.id], index[b.id], COOCCUR_EDGE)
    return SceneGraph(nodes=nodes, edges=edges)


# --- random-walk kernel ---------------------------------------------------

def _node_kernel_matrix(g1: SceneGraph, g2: SceneGraph,
                        sigma: float) -> np.ndarray:
    k = np.zeros((len(g1.nodes), len(g2.nodes)))
    for i, u in enumerate(g1.nodes):
        for j, v in enumerate(g2.nodes):
            if u.category == v.category:
                d = math.log(u.footprint_area) - math.log(v.footprint_area)
                k[i, j] = math.exp(-(d * d) / (sigma * sigma))
    return k


def _adjacency(g: SceneGraph) -> dict[str, np.ndarray]:
    out: dict[str, np.ndarray] = {}
    n = len(g.nodes)
    for a, b, rel in g.edges:
        m = out.setdefault(rel, np.zeros((n, n)))
        m[a, b] = m[b, a] = 1.0
    return out


def _graph_key(g: SceneGraph) -> tuple:
    return (len(g.nodes), len(g.edges),
            tuple((n.category, n.footprint_area, n.diag_size)
                  for n in g.nodes),
            tuple(g.edges))


def graph_kernel_raw(g1: SceneGraph, g2: SceneGraph,
                     p: int = DEFAULT_WALK_LENGTH,
                     sigma: float = KERNEL_SIGMA) -> float:
    """Unnormalized walk kernel: sum over pairs of same-length walks (up
    to p edges) of the product of node and edge kernels along them."""
    if p < 0:
        raise ValueError("walk length must be >= 0")
    if not g1.nodes or not g2.nodes:
        return 0.0
    # order the arguments canonically so symmetry holds bit-for-bit
    # despite non-associative float accumulation
    if _graph_key(g2) < _graph_key(g1):
        g1, g2 = g2, g1
    w = _node_kernel_matrix(g1, g2, sigma)
    a1, a2 = _adjacency(g1), _adjacency(g2)
    rels = set(a1) & set(a2)
    total = float(w.sum())
    t = w
    for _ in range(p):
        step = np.zeros_like(w)
        for rel in rels:
            step += a1[rel] @ t @ a2[rel].T
        t = w * step
        total += float(t.sum())
    return total


def graph_kernel(g1: SceneGraph, g2: SceneGraph,
                 p: int = DEFAULT_WALK_LENGTH,
                 sigma: float = KERNEL_SIGMA) -> float:
    """Normalized similarity k(a,b)/sqrt(k(a,a) k(b,b)) in [0, 1]."""
    k12 = graph_kernel_raw(g1, g2, p, sigma)
    if k12 == 0.0:
        return 0.0
    k11 = graph_kernel_raw(g1, g1, p, sigma)
    k22 = graph_kernel_raw(g2, g2, p, sigma)
    return k12 / math.sqrt(k11 * k22)


def nearest_neighbors(query: SceneGraph, corpus: list[SceneGraph], k: int,
                      p: int = DEFAULT_WALK_LENGTH) -> list[tuple[int, float]]:
    """Top-k corpus indices by normalized kernel, ties broken by index."""
    scored = [(graph_kernel(query, g, p), i) for i, g in enumerate(corpus)]
    scored.sort(key=lambda t: (-t[0], t[1]))
    return [(i, s) for s, i in scored[:k]]


# --- co-occurrence --------------------------------------------------------

@dataclass
class CooccurrenceMatrix:
    categories: tuple[str, ...]
    pair_counts: np.ndarray    # scenes containing both c1 and c2
    totals: np.ndarray         # scenes containing c
    probs: np.ndarray          # P(c1|c2) = pair/totals[c2]; NaN if undefined

    def prob(self, c1: str, c2: str) -> float:
        i, j = self.categories.index(c1), self.categories.index(c2)
        return float(self.probs[i, j])


def cooccurrence_matrix(corpus: list[Scene],
                        vocab: Vocabulary) -> CooccurrenceMatrix:
    return cooccurrence_from_category_sets(
        [{o.category for o in scene.objects} for scene in corpus], vocab)


def cooccurrence_from_category_sets(sets: list[set[str]],
                                    vocab: Vocabulary) -> CooccurrenceMatrix:
    cats = tuple(c for c in vocab.names if c not in (WALL, FLOOR))
    idx = {c: i for i, c in enumerate(cats)}
    n = len(cats)
    pair = np.zeros((n, n))
    total = np.zeros(n)
    for categories in sets:
        present = sorted({idx[c] for c in categories if c in idx})
        for i in present:
            total[i] += 1
            for j in present:
                pair[i, j] += 1
    with np.errstate(invalid="ignore", divide="ignore"):
        probs = np.where(total[None, :] > 0, pair / total[None, :], np.nan)
    return CooccurrenceMatrix(categories=cats, pair_counts=pair,
                              totals=total, probs=probs)


def cooccurrence_similarity(training: CooccurrenceMatrix,
                            generated: CooccurrenceMatrix,
                            n_training: int, n_generated: int,
                            min_support: float = 0.05
                            ) -> dict[tuple[str, str], float]:
    """s(c1|c2) = 1 - |Pt - Pg| over pairs co-occurring in at least
    ``min_support`` of either corpus."""
    if training.categories != generated.categories:
        raise ValueError("co-occurrence matrices use different vocabularies")
    out = {}
    cats = training.categories
    for i, c1 in enumerate(cats):
        for j, c2 in enumerate(cats):
            if i == j:
                continue
            ft = training.pair_counts[i, j] / max(n_training, 1)
            fg = generated.pair_counts[i, j] / max(n_generated, 1)
            if ft < min_support and fg < min_support:
                continue
            pt, pg = training.probs[i, j], generated.probs[i, j]
            if math.isnan(pt) or math.isnan(pg):
                continue
            out[(c1, c2)] = 1.0 - abs(pt - pg)
    return out


def cooccurrence_report(matrix: CooccurrenceMatrix) -> str:
    """Plain-text table of P(row | column), deterministic ordering."""
    cats = matrix.categories
    width = max((len(c) for c in cats), default=4) + 2
    lines = ["".ljust(width) + "".join(c.ljust(width) for c in cats)]
    for i, c1 in enumerate(cats):
        cells = []
        for j in range(len(cats)):
            v = matrix.probs[i, j]
            cells.append(("-" if math.isnan(v) else f"{v:.3f}").ljust(width))
        lines.append(c1.ljust(width) + "".join(cells))
    return "\n".join(lines) + "\n"


# --- pairwise placement distribution --------------------------------------

@dataclass
class RelposDistribution:
    ref_category: str
    tgt_category: str
    points: np.ndarray          # target centers in reference local frames
    ref_size: tuple[float, float]  # mean reference footprint
    note: str = ""


def relpos_distribution(corpus: list[Scene], ref_category: str,
                        tgt_category: str) -> RelposDistribution:
    pts = []
    sizes = []
    for scene in corpus:
        refs = [o for o in scene.objects if o.category == ref_category]
        tgts = [o for o in scene.objects if o.category == tgt_category]
        for r in refs:
            sizes.append((r.obb.size_x, r.obb.size_y))
            for t in tgts:
                pts.append(r.obb.to_local(t.obb.center))
    if not pts:
        return RelposDistribution(ref_category, tgt_category,
                                  np.zeros((0, 2)), (0.0, 0.0),
                                  note="pair absent from corpus")
    mean = np.mean(np.array(sizes), axis=0)
    return RelposDistribution(ref_category, tgt_category, np.array(pts),
                              (float(mean[0]), float(mean[1])))


def relpos_distribution_svg(dist: RelposDistribution,
                            scale: float = 100.0) -> str:
    """Scatter of target centers around the mean reference rectangle."""
    hx, hy = dist.ref_size[0] / 2.0, dist.ref_size[1] / 2.0
    if len(dist.points):
        span = max(float(np.max(np.abs(dist.points))), hx, hy) + 0.5
    else:
        span = max(hx, hy, 1.0) + 0.5
    s = span * scale
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" '
        f'viewBox="{-s:.1f} {-s:.1f} {2 * s:.1f} {2 * s:.1f}">',
        f'<rect x="{-hx * scale:.1f}" y="{-hy * scale:.1f}" '
        f'width="{2 * hx * scale:.1f}" height="{2 * hy * scale:.1f}" '
        f'fill="none" stroke="#e15759" stroke-width="2"/>',
    ]
    for x, y in dist.points:
        parts.append(f'<circle cx="{x * scale:.1f}" cy="{-y * scale:.1f}" '
                     f'r="3" fill="#4e79a7" fill-opacity="0.6"/>')
    parts.append("</svg>")
    return "\n".join(parts)
