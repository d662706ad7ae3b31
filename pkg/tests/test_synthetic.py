import numpy as np
import pytest

from scenegen.hierarchy import (assign_wall_clusters, detect_support_pairs,
                                detect_surround_groups)
from scenegen.relpos import RelationConfig
from scenegen.synthetic import (TemplateConfig, synthesize_corpus,
                                synthesize_with_manifests)

CFG = RelationConfig()


def test_determinism():
    a = synthesize_corpus(TemplateConfig(), seed=5, count=5)
    b = synthesize_corpus(TemplateConfig(), seed=5, count=5)
    for sa, sb in zip(a, b):
        assert sa.room == sb.room
        assert [o.obb for o in sa.objects] == [o.obb for o in sb.objects]
    c = synthesize_corpus(TemplateConfig(), seed=6, count=5)
    assert any(sa.room != sc.room for sa, sc in zip(a, c))


def test_count_validation():
    with pytest.raises(ValueError):
        synthesize_corpus(TemplateConfig(), seed=0, count=0)


def test_scene_contents(corpus):
    t = TemplateConfig()
    for scene in corpus:
        cats = {o.category for o in scene.objects}
        assert cats <= set(t.categories)
        assert {"bed", "nightstand", "lamp"} <= cats
        assert 4 <= len(scene.objects) <= 9
        for o in scene.objects:
            assert o.obb.elevation >= -1e-12


def test_manifest_is_detector_oracle(corpus_with_manifests):
    """The generator's committed ground truth must match what the relation
    detectors recover, over the whole fixture corpus."""
    for scene, manifest in corpus_with_manifests:
        supports = detect_support_pairs(scene, CFG)
        assert sorted(supports) == sorted(manifest.support_pairs)
        groups = detect_surround_groups(scene, CFG, supports)
        assert groups == manifest.surround_groups
        clusters = assign_wall_clusters(scene, supports)
        for oid, wall in manifest.wall_assignment.items():
            assert clusters[oid] == wall, (oid, scene)


def test_surround_order_is_nearer_first(corpus_with_manifests):
    """Flanks are ordered by distance from the central object's boundary."""
    from scenegen.hierarchy import _boundary_distance
    for scene, manifest in corpus_with_manifests:
        for central, s1, s2 in manifest.surround_groups:
            c = scene.object_by_id(central).obb
            d1 = _boundary_distance(c, scene.object_by_id(s1).obb.center)
            d2 = _boundary_distance(c, scene.object_by_id(s2).obb.center)
            assert d1 <= d2 + 1e-12


def test_supported_objects_sit_on_supporters(corpus_with_manifests):
    for scene, manifest in corpus_with_manifests:
        for sup, supported in manifest.support_pairs:
            a = scene.object_by_id(sup).obb
            b = scene.object_by_id(supported).obb
            assert b.elevation == pytest.approx(a.top, abs=CFG.support_gap_max)
