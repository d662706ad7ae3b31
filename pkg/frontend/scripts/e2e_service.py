"""Spin up a real service instance for the frontend e2e tests.

Trains (once, cached) a small model on the synthetic corpus, then serves
it with a throwaway scene store. Usage: e2e_service.py PORT CACHE_DIR
"""

import sys
import tempfile
from pathlib import Path

import uvicorn

from scenegen.hierarchy import build_hierarchy
from scenegen.model import ModelConfig, init_model, load_model, save_model
from scenegen.relpos import RelationConfig
from scenegen.rvnn import TrainConfig, train
from scenegen.scene import build_vocabulary
from scenegen.service import create_app
from scenegen.synthetic import TemplateConfig, synthesize_with_manifests


def fixture_model(cache_dir: Path):
    path = cache_dir / "e2e_model.bin"
    if path.exists():
        return load_model(path)
    corpus = [s for s, _ in
              synthesize_with_manifests(TemplateConfig(), seed=11, count=40)]
    vocab = build_vocabulary(corpus)
    trees = [build_hierarchy(s, RelationConfig()) for s in corpus]
    params = init_model(
        ModelConfig(vocab_size=len(vocab), code_dim=40, hidden_dim=80,
                    root_code_dim=60, root_hidden_dim=120),
        vocab, seed=0)
    train(params, trees, TrainConfig(epochs=300, seed=0))
    cache_dir.mkdir(parents=True, exist_ok=True)
    save_model(params, path)
    return params


def main() -> None:
    port = int(sys.argv[1])
    cache_dir = Path(sys.argv[2])
    params = fixture_model(cache_dir)
    dist = Path(__file__).resolve().parent.parent / "dist"
    store = tempfile.mkdtemp(prefix="scenegen-e2e-")
    app = create_app(params, store_dir=store,
                     static_dir=dist if dist.is_dir() else None)
    uvicorn.run(app, host="127.0.0.1", port=port, log_level="error")


if __name__ == "__main__":
    main()
