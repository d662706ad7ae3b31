import numpy as np
import pytest

from scenegen.hierarchy import build_hierarchy
from scenegen.model import ModelConfig, init_model
from scenegen.relpos import RelationConfig
from scenegen.rvnn import TrainConfig, train
from scenegen.scene import build_vocabulary
from scenegen.synthetic import TemplateConfig, synthesize_with_manifests

SMALL_DIMS = dict(code_dim=40, hidden_dim=80, root_code_dim=60,
                  root_hidden_dim=120)


@pytest.fixture(scope="session")
def corpus_with_manifests():
    return synthesize_with_manifests(TemplateConfig(), seed=11, count=40)


@pytest.fixture(scope="session")
def corpus(corpus_with_manifests):
    return [s for s, _ in corpus_with_manifests]


@pytest.fixture(scope="session")
def vocab(corpus):
    return build_vocabulary(corpus)


@pytest.fixture(scope="session")
def trees(corpus):
    cfg = RelationConfig()
    return [build_hierarchy(s, cfg) for s in corpus]


@pytest.fixture(scope="session")
def trained_small(trees, vocab):
    """A small but usable model: cheap to train once per session."""
    params = init_model(ModelConfig(vocab_size=len(vocab), **SMALL_DIMS),
                        vocab, seed=0)
    train(params, trees, TrainConfig(epochs=300, seed=0))
    return params


def tiny_config(vocab, **overrides):
    base = dict(vocab_size=len(vocab), code_dim=10, hidden_dim=14,
                root_code_dim=12, root_hidden_dim=16)
    base.update(overrides)
    return ModelConfig(**base)


def random_obb(rng, rotated=True):
    from scenegen.geometry import OBB
    return OBB(center_x=rng.uniform(-3, 3), center_y=rng.uniform(-3, 3),
               elevation=rng.uniform(0, 1),
               size_x=rng.uniform(0.1, 2.5), size_y=rng.uniform(0.1, 2.5),
               size_z=rng.uniform(0.1, 2.0),
               angle=rng.uniform(-np.pi, np.pi) if rotated else 0.0)
