/**
 * Client-side undo as inverse-operation replay.
 *
 * The service keeps no history, so every edit records the API call that
 * takes the scene back:
 *  - move      → move back with the subtree's previous relpos vector;
 *  - replace   → replace again with a donor that still holds a copy of the
 *                original subtree (found via the candidates endpoint before
 *                the edit — identity candidates score 1.0);
 *  - delete    → has no inverse (the API has no insert), recorded as such
 *                so the UI can say why undo stops there.
 */

import type { CandidateDoc, ScenePayload, TreeNodeDoc } from "./types.js";
import { currentRelpos } from "./treeutil.js";

export type InverseOp =
  | { kind: "move"; path: number[]; relpos: number[] }
  | { kind: "replace"; path: number[]; donorSceneId: string; donorPath: string }
  | { kind: "unavailable"; reason: string };

export interface EditClient {
  moveSubtree(
    sceneId: string,
    path: number[],
    revision: number,
    relpos: number[],
  ): Promise<ScenePayload>;
  replaceSubtree(
    sceneId: string,
    path: number[],
    revision: number,
    donorSceneId: string,
    donorPath: string,
  ): Promise<ScenePayload>;
}

/**
 * A donor reference that can restore the subtree about to be edited:
 * an identity-scoring candidate living in a *different* scene (the edited
 * scene itself will no longer hold the original).
 */
export function findRestoreDonor(
  candidates: CandidateDoc[],
  selfSceneId: string,
): { donorSceneId: string; donorPath: string } | null {
  for (const c of candidates) {
    if (c.donor_scene_id !== selfSceneId && c.score > 1 - 1e-9) {
      return { donorSceneId: c.donor_scene_id, donorPath: c.donor_path };
    }
  }
  return null;
}

export class UndoManager {
  private stack: InverseOp[] = [];

  get depth(): number {
    return this.stack.length;
  }

  get canUndo(): boolean {
    const top = this.stack[this.stack.length - 1];
    return top !== undefined && top.kind !== "unavailable";
  }

  /** Why the next undo is impossible, or null when it is possible. */
  get blockedReason(): string | null {
    const top = this.stack[this.stack.length - 1];
    if (top === undefined) return "nothing to undo";
    return top.kind === "unavailable" ? top.reason : null;
  }

  clear(): void {
    this.stack = [];
  }

  /** Call before a move edit, with the pre-edit tree. */
  recordMove(preTree: TreeNodeDoc, path: number[]): void {
    const relpos = currentRelpos(preTree, path);
    this.stack.push(
      relpos
        ? { kind: "move", path, relpos }
        : { kind: "unavailable", reason: "reference children cannot move back" },
    );
  }

  /** Call before a replace edit, with a restore donor found beforehand. */
  recordReplace(
    path: number[],
    restore: { donorSceneId: string; donorPath: string } | null,
  ): void {
    this.stack.push(
      restore
        ? { kind: "replace", path, ...restore }
        : {
            kind: "unavailable",
            reason: "no other scene holds a copy of the replaced subtree",
          },
    );
  }

  recordDelete(): void {
    this.stack.push({
      kind: "unavailable",
      reason: "the service cannot re-insert a deleted subtree",
    });
  }

  /**
   * Replay the most recent inverse op. On failure (including revision
   * conflicts) the op stays on the stack so the user can reload and retry.
   */
  async undo(
    client: EditClient,
    sceneId: string,
    revision: number,
  ): Promise<ScenePayload> {
    const top = this.stack[this.stack.length - 1];
    if (top === undefined || top.kind === "unavailable") {
      throw new Error(top === undefined ? "nothing to undo" : top.reason);
    }
    const result =
      top.kind === "move"
        ? await client.moveSubtree(sceneId, top.path, revision, top.relpos)
        : await client.replaceSubtree(
            sceneId,
            top.path,
            revision,
            top.donorSceneId,
            top.donorPath,
          );
    this.stack.pop();
    return result;
  }
}
