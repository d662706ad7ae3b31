import itertools
import math

import numpy as np
import pytest

from scenegen.analysis import (COOCCUR_EDGE, DEFAULT_WALK_LENGTH,
                               KERNEL_SIGMA, SUPPORT_EDGE, SURROUND_EDGE,
                               WALL_EDGE, CooccurrenceMatrix, GraphNode,
                               SceneGraph, build_scene_graph,
                               cooccurrence_from_category_sets,
                               cooccurrence_matrix, cooccurrence_report,
                               cooccurrence_similarity, graph_kernel,
                               graph_kernel_raw, nearest_neighbors,
                               relpos_distribution, relpos_distribution_svg)
from scenegen.scene import FLOOR, WALL, Vocabulary


def brute_force_walk_kernel(g1, g2, p, sigma):
    """Oracle: enumerate all walk pairs of length 0..p explicitly."""
    def node_k(u, v):
        if u.category != v.category:
            return 0.0
        d = math.log(u.footprint_area) - math.log(v.footprint_area)
        return math.exp(-(d * d) / (sigma * sigma))

    def rels(g):
        out = {}
        for a, b, rel in g.edges:
            out.setdefault((a, b), set()).add(rel)
            out.setdefault((b, a), set()).add(rel)
        return out

    r1, r2 = rels(g1), rels(g2)
    n1, n2 = len(g1.nodes), len(g2.nodes)
    total = 0.0
    for length in range(p + 1):
        for w1 in itertools.product(range(n1), repeat=length + 1):
            if any((a, b) not in r1 for a, b in zip(w1, w1[1:])):
                continue
            for w2 in itertools.product(range(n2), repeat=length + 1):
                if any((a, b) not in r2 for a, b in zip(w2, w2[1:])):
                    continue
                k = 1.0
                for a, c in zip(w1, w2):
                    k *= node_k(g1.nodes[a], g2.nodes[c])
                # parallel edges: each matching label pair is its own walk pair
                for (a, b), (c, d) in zip(zip(w1, w1[1:]), zip(w2, w2[1:])):
                    k *= len(r1[(a, b)] & r2[(c, d)])
                total += k
    return total


def random_graph(rng, n_nodes=4, cats=("a", "b", "c")):
    nodes = [GraphNode(category=str(rng.choice(cats)),
                       footprint_area=float(rng.uniform(0.2, 3.0)),
                       diag_size=float(rng.uniform(0.3, 3.0)))
             for _ in range(n_nodes)]
    edges = []
    seen = set()
    rels = (SUPPORT_EDGE, SURROUND_EDGE, COOCCUR_EDGE, WALL_EDGE)
    for _ in range(rng.integers(1, n_nodes * 2)):
        a, b = rng.integers(n_nodes), rng.integers(n_nodes)
        rel = str(rng.choice(rels))
        if a != b and (min(a, b), max(a, b), rel) not in seen:
            seen.add((min(a, b), max(a, b), rel))
            edges.append((int(a), int(b), rel))
    return SceneGraph(nodes=nodes, edges=edges)


def test_kernel_matches_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(25):
        g1, g2 = random_graph(rng), random_graph(rng)
        for p in range(4):
            want = brute_force_walk_kernel(g1, g2, p, KERNEL_SIGMA)
            got = graph_kernel_raw(g1, g2, p, KERNEL_SIGMA)
            assert got == pytest.approx(want, rel=1e-9, abs=1e-12)


def test_kernel_symmetry_and_self_similarity():
    rng = np.random.default_rng(1)
    for _ in range(20):
        g1, g2 = random_graph(rng), random_graph(rng)
        assert graph_kernel(g1, g2) == pytest.approx(graph_kernel(g2, g1),
                                                     abs=1e-12)
        assert graph_kernel(g1, g1) == pytest.approx(1.0, abs=1e-12)
        assert 0.0 <= graph_kernel(g1, g2) <= 1.0 + 1e-12


def test_kernel_degenerate_inputs():
    g = random_graph(np.random.default_rng(2))
    empty = SceneGraph(nodes=[], edges=[])
    assert graph_kernel_raw(g, empty) == 0.0
    assert graph_kernel(g, empty) == 0.0
    with pytest.raises(ValueError):
        graph_kernel_raw(g, g, p=-1)
    with pytest.raises(ValueError):
        SceneGraph(nodes=[GraphNode("a", 1.0, 1.0)] * 2,
                   edges=[(0, 1, "support"), (1, 0, "support")])


def test_scene_graph_structure(corpus_with_manifests):
    scene, manifest = corpus_with_manifests[0]
    g = build_scene_graph(scene)
    assert len(g.nodes) == len(scene.objects) + 4
    rels = {}
    for a, b, rel in g.edges:
        rels.setdefault(rel, 0)
        rels[rel] += 1
    assert rels.get(SUPPORT_EDGE, 0) == len(manifest.support_pairs)
    assert rels.get(SURROUND_EDGE, 0) == 0 or SURROUND_EDGE in rels
    assert WALL_EDGE in rels


def test_nearest_neighbors_ranking(corpus):
    graphs = [build_scene_graph(s) for s in corpus[:8]]
    nn = nearest_neighbors(graphs[3], graphs, k=3)
    assert nn[0][0] == 3 and nn[0][1] == pytest.approx(1.0, abs=1e-12)
    assert len(nn) == 3
    assert nn[0][1] >= nn[1][1] >= nn[2][1]


VOCAB = Vocabulary(("bed", "desk", "lamp", WALL, FLOOR))


def test_cooccurrence_hand_counted():
    sets = [{"bed", "desk"}, {"bed"}, {"bed", "desk", "lamp"}, {"desk"}]
    m = cooccurrence_from_category_sets(sets, VOCAB)
    assert m.categories == ("bed", "desk", "lamp")
    # totals: bed 3, desk 3, lamp 1
    assert m.totals.tolist() == [3, 3, 1]
    assert m.pair_counts[0, 1] == 2          # bed & desk together twice
    assert m.prob("bed", "desk") == pytest.approx(2 / 3)
    assert m.prob("desk", "bed") == pytest.approx(2 / 3)
    assert m.prob("lamp", "bed") == pytest.approx(1 / 3)
    assert m.prob("bed", "lamp") == pytest.approx(1.0)
    assert m.prob("bed", "bed") == pytest.approx(1.0)


def test_cooccurrence_nan_for_absent_category():
    m = cooccurrence_from_category_sets([{"bed"}], VOCAB)
    assert math.isnan(m.prob("bed", "lamp"))
    report = cooccurrence_report(m)
    assert "-" in report and "bed" in report
    assert report == cooccurrence_report(m)


def test_cooccurrence_similarity_hand_values():
    train = cooccurrence_from_category_sets(
        [{"bed", "desk"}] * 8 + [{"bed"}] * 2, VOCAB)
    gen = cooccurrence_from_category_sets(
        [{"bed", "desk"}] * 6 + [{"bed"}] * 4, VOCAB)
    sims = cooccurrence_similarity(train, gen, 10, 10)
    # P(desk|bed): 0.8 vs 0.6 -> 0.8 similarity; P(bed|desk): 1 vs 1 -> 1
    assert sims[("desk", "bed")] == pytest.approx(0.8)
    assert sims[("bed", "desk")] == pytest.approx(1.0)
    # lamp never appears; pairs with lamp are filtered out
    assert all("lamp" not in pair for pair in sims)
    # min_support filtering: a pair too rare on both sides is dropped
    rare_t = cooccurrence_from_category_sets(
        [{"bed", "lamp"}] + [{"bed"}] * 99, VOCAB)
    rare_g = cooccurrence_from_category_sets([{"bed"}] * 100, VOCAB)
    assert ("lamp", "bed") not in cooccurrence_similarity(
        rare_t, rare_g, 100, 100)


def test_cooccurrence_matrix_from_scenes(corpus, vocab):
    m = cooccurrence_matrix(corpus, vocab)
    sets = [{o.category for o in s.objects} for s in corpus]
    m2 = cooccurrence_from_category_sets(sets, vocab)
    assert np.array_equal(m.pair_counts, m2.pair_counts)
    assert ("bed") in m.categories
    assert WALL not in m.categories and FLOOR not in m.categories


def test_cooccurrence_similarity_vocab_mismatch():
    other = Vocabulary(("bed", WALL, FLOOR))
    a = cooccurrence_from_category_sets([{"bed"}], VOCAB)
    b = cooccurrence_from_category_sets([{"bed"}], other)
    with pytest.raises(ValueError):
        cooccurrence_similarity(a, b, 1, 1)


def test_relpos_distribution(corpus):
    dist = relpos_distribution(corpus, "bed", "nightstand")
    n_pairs = sum(
        sum(1 for o in s.objects if o.category == "bed")
        * sum(1 for o in s.objects if o.category == "nightstand")
        for s in corpus)
    assert dist.points.shape == (n_pairs, 2)
    assert dist.ref_size[0] > 0
    svg = relpos_distribution_svg(dist)
    assert svg.startswith("<svg") and svg.count("<circle") == n_pairs
    absent = relpos_distribution(corpus, "bed", "piano")
    assert absent.note == "pair absent from corpus"
    assert len(absent.points) == 0
    assert "<svg" in relpos_distribution_svg(absent)
