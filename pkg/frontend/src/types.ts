/** Wire types for the scenegen HTTP API. */

export interface RoomDoc {
  width: number;
  depth: number;
  wall_height: number;
}

export interface PlacementDoc {
  category: string;
  center: [number, number];
  elevation: number;
  size: [number, number, number];
  angle: number;
  model_ref?: string | null;
}

export interface TreeObjectDoc {
  id: string;
  category: string;
  center: [number, number];
  elevation: number;
  size: [number, number, number];
  angle: number;
}

export type NodeKind = "root" | "wall" | "support" | "cooccur" | "surround" | "leaf";

export interface TreeNodeDoc {
  kind: NodeKind;
  object?: TreeObjectDoc;
  relpos?: number[][];
  children?: TreeNodeDoc[];
}

export interface TreeDoc {
  room_type: string;
  root: TreeNodeDoc;
}

export interface SceneDoc {
  format_version: "grains-placed/1";
  room: RoomDoc;
  placements: PlacementDoc[];
  tree: TreeDoc;
}

export interface ScenePayload {
  id: string;
  revision: number;
  scene: SceneDoc;
}

export interface SceneSummary {
  id: string;
  revision: number;
  objects: number;
  room: { width: number; depth: number };
}

export interface CandidateDoc {
  donor_scene_id: string;
  donor_path: string;
  score: number;
  categories: string[];
}

export interface LayoutBoxDoc {
  center: [number, number];
  size: [number, number];
  angle: number;
}

export interface LayoutDoc {
  format_version: "grains-layout/1";
  room: { width: number; depth: number };
  boxes: LayoutBoxDoc[];
}

export interface HealthDoc {
  status: string;
  model: string;
  vocabulary: string[];
}

export interface CooccurrenceDoc {
  categories: string[];
  probs: (number | null)[][];
  scenes: number;
  report: string;
}
