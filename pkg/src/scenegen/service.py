"""Local HTTP service for generation, layout-to-scene, and editing.

The scene store is in memory with optional on-disk persistence; every
edit bumps a per-scene revision and mutating requests must present the
revision they saw (optimistic concurrency, stale writes get 409).
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Query
from fastapi.responses import Response
from fastapi.staticfiles import StaticFiles

from .analysis import cooccurrence_from_category_sets, cooccurrence_report
from .apps import (Candidate, EditError, bake_tree, candidate_subtrees,
                   delete_subtree, layout_from_doc, layout_to_scenes,
                   move_subtree, replace_subtree)
from .hierarchy import validate_tree
from .model import MODEL_FORMAT, ModelParams, load_model
from .rvnn import GenerationError
from .synthesis import (ModelCatalog, PlacedScene, load_catalog,
                        realize_placements, render_topview, sample_scene,
                        scene_from_doc, scene_to_doc)


@dataclass
class StoredScene:
    scene: PlacedScene
    revision: int = 1


@dataclass
class SceneStore:
    scenes: dict[str, StoredScene] = field(default_factory=dict)
    directory: Path | None = None
    counter: int = 0
    lock: threading.Lock = field(default_factory=threading.Lock)

    def next_id(self) -> str:
        self.counter += 1
        return f"s{self.counter}"

    def persist(self, scene_id: str) -> None:
        if self.directory is None:
            return
        entry = self.scenes[scene_id]
        doc = {"revision": entry.revision, "scene": scene_to_doc(entry.scene)}
        (self.directory / f"{scene_id}.json").write_text(
            json.dumps(doc), encoding="utf-8")

    def load_from_disk(self) -> None:
        if self.directory is None:
            return
        for path in sorted(self.directory.glob("s*.json")):
            doc = json.loads(path.read_text(encoding="utf-8"))
            scene = scene_from_doc(doc["scene"], where=str(path))
            sid = path.stem
            self.scenes[sid] = StoredScene(scene=scene,
                                           revision=doc["revision"])
            self.counter = max(self.counter, int(sid[1:]))


def _parse_path(raw: str) -> list[int]:
    if raw == "" or raw == "-":
        return []
    try:
        return [int(p) for p in raw.split("-")]
    except ValueError:
        raise HTTPException(400, f"malformed tree path {raw!r}") from None


def _scene_payload(sid: str, entry: StoredScene) -> dict:
    return {"id": sid, "revision": entry.revision,
            "scene": scene_to_doc(entry.scene)}


def create_app(params: ModelParams, catalog: ModelCatalog | None = None,
               store_dir: str | Path | None = None,
               static_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="scenegen")
    store = SceneStore(directory=Path(store_dir) if store_dir else None)
    if store.directory is not None:
        store.directory.mkdir(parents=True, exist_ok=True)
        store.load_from_disk()
    app.state.store = store

    def get_entry(sid: str) -> StoredScene:
        entry = store.scenes.get(sid)
        if entry is None:
            raise HTTPException(404, f"no scene {sid!r}")
        return entry

    def commit_edit(sid: str, entry: StoredScene, revision: int, op) -> dict:
        with store.lock:
            if entry.revision != revision:
                raise HTTPException(
                    409, f"scene {sid} is at revision {entry.revision}, "
                         f"request was for {revision}")
            try:
                new_tree = op(entry.scene.source_tree)
            except EditError as e:
                raise HTTPException(400, str(e)) from e
            report = validate_tree(new_tree)
            if not report.ok:
                raise HTTPException(
                    422, f"edit produced an invalid tree: {report.violations[:5]}")
            entry.scene = realize_placements(new_tree,
                                             room_prior=entry.scene.room,
                                             catalog=catalog)
            entry.revision += 1
            store.persist(sid)
        return _scene_payload(sid, entry)

    @app.get("/api/health")
    def health() -> dict:
        return {"status": "ok", "model": MODEL_FORMAT,
                "vocabulary": list(params.vocab.names)}

    @app.post("/api/generate")
    def generate(body: dict) -> dict:
        count = int(body.get("count", 1))
        if not 1 <= count <= 100:
            raise HTTPException(400, "count must be in 1..100")
        seed = body.get("seed")
        rng = np.random.default_rng(seed)
        made = []
        with store.lock:
            attempts = 0
            while len(made) < count and attempts < count * 20:
                attempts += 1
                try:
                    tree = sample_scene(params, rng)
                except GenerationError:
                    continue
                baked = bake_tree(tree)
                if not validate_tree(baked).ok:
                    continue
                sid = store.next_id()
                store.scenes[sid] = StoredScene(
                    scene=realize_placements(baked, catalog=catalog))
                store.persist(sid)
                made.append(sid)
            if len(made) < count:
                raise HTTPException(500, "generation kept failing validation")
        return {"scene_ids": made,
                "scenes": [_scene_payload(s, store.scenes[s]) for s in made]}

    @app.get("/api/scenes")
    def list_scenes() -> dict:
        return {"scenes": [
            {"id": sid, "revision": e.revision,
             "objects": len(e.scene.placements),
             "room": {"width": e.scene.room.width, "depth": e.scene.room.depth}}
            for sid, e in sorted(store.scenes.items(),
                                 key=lambda kv: int(kv[0][1:]))]}

    @app.get("/api/scenes/{sid}")
    def get_scene(sid: str) -> dict:
        return _scene_payload(sid, get_entry(sid))

    @app.get("/api/scenes/{sid}/render.svg")
    def render(sid: str) -> Response:
        return Response(render_topview(get_entry(sid).scene),
                        media_type="image/svg+xml")

    @app.post("/api/layout2scene")
    def layout2scene(body: dict) -> dict:
        try:
            layout = layout_from_doc(body["layout"])
            scenes = layout_to_scenes(
                params, layout, int(body.get("n_samples", 1)),
                mode=body.get("mode", "mean"), seed=body.get("seed") or 0)
        except (KeyError, ValueError, GenerationError) as e:
            raise HTTPException(400, f"layout generation failed: {e}") from e
        made = []
        with store.lock:
            for ps in scenes:
                baked = bake_tree(ps.source_tree)
                sid = store.next_id()
                store.scenes[sid] = StoredScene(scene=realize_placements(
                    baked, room_prior=ps.room, catalog=catalog))
                store.persist(sid)
                made.append(sid)
        return {"scene_ids": made,
                "scenes": [_scene_payload(s, store.scenes[s]) for s in made]}

    @app.get("/api/scenes/{sid}/subtree/{raw_path}/candidates")
    def candidates(sid: str, raw_path: str, k: int = Query(default=5)) -> dict:
        entry = get_entry(sid)
        path = _parse_path(raw_path)
        pool_ids = [p for p in sorted(store.scenes, key=lambda s: int(s[1:]))]
        pool = [store.scenes[p].scene.source_tree for p in pool_ids]
        try:
            found = candidate_subtrees(pool, entry.scene.source_tree, path, k)
        except EditError as e:
            raise HTTPException(400, str(e)) from e
        return {"candidates": [
            {"donor_scene_id": pool_ids[c.pool_index],
             "donor_path": "-".join(str(i) for i in c.path),
             "score": c.score,
             "categories": sorted(l.obj.category for l in c.subtree.leaves())}
            for c in found]}

    @app.post("/api/scenes/{sid}/subtree/{raw_path}/replace")
    def replace(sid: str, raw_path: str, body: dict) -> dict:
        entry = get_entry(sid)
        path = _parse_path(raw_path)
        donor_entry = get_entry(str(body.get("donor_scene_id")))
        donor_path = _parse_path(str(body.get("donor_path", "")))
        try:
            donor = donor_entry.scene.source_tree.root.at_path(donor_path)
        except IndexError as e:
            raise HTTPException(400, f"bad donor path: {e}") from e
        return commit_edit(sid, entry, int(body.get("revision", -1)),
                           lambda tree: replace_subtree(tree, path, donor))

    @app.post("/api/scenes/{sid}/subtree/{raw_path}/delete")
    def delete(sid: str, raw_path: str, body: dict) -> dict:
        entry = get_entry(sid)
        path = _parse_path(raw_path)
        return commit_edit(sid, entry, int(body.get("revision", -1)),
                           lambda tree: delete_subtree(tree, path))

    @app.post("/api/scenes/{sid}/subtree/{raw_path}/move")
    def move(sid: str, raw_path: str, body: dict) -> dict:
        entry = get_entry(sid)
        path = _parse_path(raw_path)
        relpos = body.get("relpos")
        if not isinstance(relpos, list):
            raise HTTPException(400, "body must carry a relpos vector")
        return commit_edit(
            sid, entry, int(body.get("revision", -1)),
            lambda tree: move_subtree(tree, path, np.asarray(relpos, dtype=float)))

    @app.get("/api/metrics/cooccurrence")
    def cooccurrence() -> dict:
        sets = [{p.category for p in e.scene.placements}
                for e in store.scenes.values()]
        matrix = cooccurrence_from_category_sets(sets, params.vocab)
        probs = [[None if np.isnan(v) else float(v) for v in row]
                 for row in matrix.probs]
        return {"categories": list(matrix.categories), "probs": probs,
                "scenes": len(sets), "report": cooccurrence_report(matrix)}

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True),
                  name="ui")
    return app


def serve(model_path: str | Path, address: str = "127.0.0.1", port: int = 8808,
          catalog_path: str | Path | None = None,
          store_dir: str | Path | None = None,
          static_dir: str | Path | None = None) -> None:
    import uvicorn

    params = load_model(model_path)
    catalog = load_catalog(catalog_path) if catalog_path else None
    app = create_app(params, catalog=catalog, store_dir=store_dir,
                     static_dir=static_dir)
    uvicorn.run(app, host=address, port=port, log_level="warning")
