"""Scene data model, corpus file I/O, filtering, and leaf vectors.

Corpus files use the "grains-scene/1" format: a JSON document with a header
(format version, room type, category names) and one record per scene.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .geometry import OBB, footprint_intersection_area

CORPUS_FORMAT = "grains-scene/1"
WALL = "wall"
FLOOR = "floor"
WALL_THICKNESS = 0.1

ROOM_TYPES = ("bedroom", "living", "kitchen", "office", "custom")


class CorpusError(Exception):
    """Malformed or empty corpus file."""


@dataclass(frozen=True)
class SceneObject:
    id: str
    category: str
    obb: OBB


@dataclass(frozen=True)
class Room:
    width: float
    depth: float
    wall_height: float

    @property
    def floor(self) -> OBB:
        return OBB(0.0, 0.0, -WALL_THICKNESS, self.width, self.depth,
                   WALL_THICKNESS, 0.0)

    @property
    def walls(self) -> list[OBB]:
        """Four thin wall boxes, anticlockwise seen from the top.

        Wall k sits on the side at angle k*pi/2 from the room center
        (east, north, west, south); its local y axis points into the room.
        """
        t = WALL_THICKNESS
        out = []
        for k in range(4):
            along = self.depth if k % 2 == 0 else self.width
            dist = (self.width if k % 2 == 0 else self.depth) / 2.0 + t / 2.0
            ang = k * math.pi / 2.0
            cx = dist * math.cos(ang)
            cy = dist * math.sin(ang)
            out.append(OBB(cx, cy, 0.0, along, t, self.wall_height,
                           ang + math.pi / 2.0))
        return out

    def inner_halfwidth(self) -> tuple[float, float]:
        return self.width / 2.0, self.depth / 2.0


@dataclass(frozen=True)
class Scene:
    room: Room
    objects: tuple[SceneObject, ...]
    room_type: str = "custom"

    def __post_init__(self):
        if self.room_type not in ROOM_TYPES:
            raise ValueError(f"unknown room type {self.room_type!r}")
        ids = [o.id for o in self.objects]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate object ids in scene")
        room_box = self.room.floor
        for o in self.objects:
            if footprint_intersection_area(room_box, o.obb) <= 0.0:
                raise ValueError(f"object {o.id} lies outside the room")

    def object_by_id(self, oid: str) -> SceneObject:
        for o in self.objects:
            if o.id == oid:
                return o
        raise KeyError(oid)


@dataclass(frozen=True)
class Vocabulary:
    names: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise ValueError("vocabulary names must be unique")
        for special in (WALL, FLOOR):
            if self.names.count(special) != 1:
                raise ValueError(f"vocabulary must contain {special!r} exactly once")

    def __len__(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown category {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self.names


@dataclass(frozen=True)
class FilterConfig:
    min_objects: int = 4
    max_objects: int = 20
    min_category_frequency: float = 0.01

    def __post_init__(self):
        if not (0 < self.min_objects <= self.max_objects):
            raise ValueError("need 0 < min_objects <= max_objects")


@dataclass
class FilterReport:
    scenes_in: int = 0
    scenes_kept: int = 0
    dropped_too_few: int = 0
    dropped_too_many: int = 0
    categories_dropped: list[str] = field(default_factory=list)
    objects_dropped: int = 0

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def build_vocabulary(corpus: list[Scene], min_frequency: float = 0.0) -> Vocabulary:
    """Categories appearing in at least ``min_frequency`` of the scenes,
    sorted by descending scene frequency then name; wall/floor always present."""
    if not corpus:
        raise CorpusError("cannot build a vocabulary from an empty corpus")
    counts = Counter()
    for scene in corpus:
        counts.update({o.category for o in scene.objects})
    n = len(corpus)
    kept = [c for c, k in counts.items()
            if k / n >= min_frequency and c not in (WALL, FLOOR)]
    kept.sort(key=lambda c: (-counts[c], c))
    return Vocabulary(tuple(kept) + (WALL, FLOOR))


def apply_filter(corpus: list[Scene], cfg: FilterConfig) -> tuple[list[Scene], FilterReport]:
    report = FilterReport(scenes_in=len(corpus))
    counts = Counter()
    for scene in corpus:
        counts.update({o.category for o in scene.objects})
    n = max(len(corpus), 1)
    infrequent = {c for c, k in counts.items()
                  if k / n < cfg.min_category_frequency}
    report.categories_dropped = sorted(infrequent)

    kept = []
    for scene in corpus:
        objs = tuple(o for o in scene.objects if o.category not in infrequent)
        report.objects_dropped += len(scene.objects) - len(objs)
        if len(objs) < cfg.min_objects:
            report.dropped_too_few += 1
        elif len(objs) > cfg.max_objects:
            report.dropped_too_many += 1
        else:
            kept.append(replace(scene, objects=objs))
    report.scenes_kept = len(kept)
    return kept, report


def leaf_vector(obj: SceneObject, vocab: Vocabulary) -> np.ndarray:
    """[size_x, size_y, size_z] ++ one-hot(category); length 3 + |vocab|."""
    idx = vocab.index(obj.category)
    v = np.zeros(3 + len(vocab))
    v[0], v[1], v[2] = obj.obb.size_x, obj.obb.size_y, obj.obb.size_z
    v[3 + idx] = 1.0
    return v


def parse_leaf_vector(v: np.ndarray, vocab: Vocabulary) -> tuple[tuple[float, float, float], str]:
    """Inverse of leaf_vector: (sizes, category name) with argmax hardening."""
    v = np.asarray(v, dtype=float)
    if v.shape != (3 + len(vocab),):
        raise ValueError(f"leaf vector length {v.shape} does not match vocabulary")
    idx = int(np.argmax(v[3:]))
    return (float(v[0]), float(v[1]), float(v[2])), vocab.names[idx]


# --- corpus serialization -------------------------------------------------

def scene_to_record(scene: Scene) -> dict:
    return {
        "room": {"width": scene.room.width, "depth": scene.room.depth,
                 "wall_height": scene.room.wall_height},
        "objects": [
            {"id": o.id, "category": o.category,
             "center": [o.obb.center_x, o.obb.center_y],
             "elevation": o.obb.elevation,
             "size": [o.obb.size_x, o.obb.size_y, o.obb.size_z],
             "angle": o.obb.angle}
            for o in scene.objects
        ],
    }


def scene_from_record(rec: dict, room_type: str, where: str) -> Scene:
    try:
        room = Room(**rec["room"])
        objects = tuple(
            SceneObject(
                id=str(o["id"]), category=str(o["category"]),
                obb=OBB(center_x=o["center"][0], center_y=o["center"][1],
                        elevation=o["elevation"],
                        size_x=o["size"][0], size_y=o["size"][1], size_z=o["size"][2],
                        angle=o["angle"]))
            for o in rec["objects"])
        return Scene(room=room, objects=objects, room_type=room_type)
    except (KeyError, TypeError, IndexError, ValueError) as e:
        raise CorpusError(f"malformed scene record at {where}: {e}") from e


def save_corpus(corpus: list[Scene], path: str | Path,
                category_names: list[str] | None = None) -> None:
    if not corpus:
        raise CorpusError("refusing to write an empty corpus")
    room_type = corpus[0].room_type
    if category_names is None:
        category_names = sorted({o.category for s in corpus for o in s.objects})
    doc = {
        "header": {"format_version": CORPUS_FORMAT, "room_type": room_type,
                   "category_names": list(category_names)},
        "scenes": [scene_to_record(s) for s in corpus],
    }
    Path(path).write_text(json.dumps(doc, indent=1), encoding="utf-8")


def load_corpus(path: str | Path,
                filt: FilterConfig | None = None) -> tuple[list[Scene], FilterReport]:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise CorpusError(f"cannot parse corpus file {path}: {e}") from e
    header = doc.get("header")
    if not isinstance(header, dict) or header.get("format_version") != CORPUS_FORMAT:
        raise CorpusError(f"{path}: missing or unsupported corpus header")
    room_type = header.get("room_type", "custom")
    records = doc.get("scenes")
    if not isinstance(records, list):
        raise CorpusError(f"{path}: missing scene records")
    corpus = [scene_from_record(rec, room_type, f"{path}#scene[{i}]")
              for i, rec in enumerate(records)]
    report = FilterReport(scenes_in=len(corpus), scenes_kept=len(corpus))
    if filt is not None:
        corpus, report = apply_filter(corpus, filt)
    if not corpus:
        raise CorpusError(f"{path}: empty corpus after filtering")
    return corpus, report
