import { describe, expect, it } from "vitest";

import { ApiError } from "../src/api.js";
import type { ScenePayload, TreeNodeDoc } from "../src/types.js";
import { findRestoreDonor, UndoManager, type EditClient } from "../src/undo.js";

const RELPOS = Array.from({ length: 28 }, (_, i) => i / 28);

const TREE: TreeNodeDoc = {
  kind: "root",
  children: [
    { kind: "leaf" },
    { kind: "support", relpos: [RELPOS], children: [{ kind: "leaf" }, { kind: "leaf" }] },
  ],
};

const PAYLOAD = { id: "s1", revision: 5, scene: {} } as unknown as ScenePayload;

interface Call {
  method: string;
  args: unknown[];
}

function recordingClient(fail?: ApiError): { client: EditClient; calls: Call[] } {
  const calls: Call[] = [];
  const client: EditClient = {
    async moveSubtree(...args) {
      calls.push({ method: "move", args });
      if (fail) throw fail;
      return PAYLOAD;
    },
    async replaceSubtree(...args) {
      calls.push({ method: "replace", args });
      if (fail) throw fail;
      return PAYLOAD;
    },
  };
  return { client, calls };
}

describe("findRestoreDonor", () => {
  const mk = (id: string, score: number) => ({
    donor_scene_id: id,
    donor_path: "3-1",
    score,
    categories: ["desk"],
  });

  it("picks an identity candidate from another scene", () => {
    const donor = findRestoreDonor([mk("s1", 1.0), mk("s2", 1.0), mk("s3", 0.8)], "s1");
    expect(donor).toEqual({ donorSceneId: "s2", donorPath: "3-1" });
  });

  it("rejects self and non-identity candidates", () => {
    expect(findRestoreDonor([mk("s1", 1.0), mk("s3", 0.97)], "s1")).toBeNull();
  });
});

describe("UndoManager", () => {
  it("replays a move with the previous relpos vector", async () => {
    const undo = new UndoManager();
    undo.recordMove(TREE, [1, 1]);
    expect(undo.canUndo).toBe(true);
    const { client, calls } = recordingClient();
    await undo.undo(client, "s1", 4);
    expect(calls).toEqual([{ method: "move", args: ["s1", [1, 1], 4, RELPOS] }]);
    expect(undo.depth).toBe(0);
  });

  it("replays a replace against the recorded restore donor", async () => {
    const undo = new UndoManager();
    undo.recordReplace([2], { donorSceneId: "s7", donorPath: "2" });
    const { client, calls } = recordingClient();
    await undo.undo(client, "s1", 3);
    expect(calls).toEqual([{ method: "replace", args: ["s1", [2], 3, "s7", "2"] }]);
  });

  it("marks deletes and reference-child moves as non-undoable", () => {
    const undo = new UndoManager();
    undo.recordDelete();
    expect(undo.canUndo).toBe(false);
    expect(undo.blockedReason).toContain("re-insert");
    undo.recordMove(TREE, [1, 0]);
    expect(undo.canUndo).toBe(false);
    expect(undo.blockedReason).toContain("reference children");
  });

  it("keeps the op on the stack when replay conflicts", async () => {
    const undo = new UndoManager();
    undo.recordMove(TREE, [1, 1]);
    const { client } = recordingClient(new ApiError(409, "stale"));
    await expect(undo.undo(client, "s1", 1)).rejects.toMatchObject({ status: 409 });
    expect(undo.depth).toBe(1);
    expect(undo.canUndo).toBe(true);
  });

  it("refuses to undo past an unavailable entry", async () => {
    const undo = new UndoManager();
    undo.recordMove(TREE, [1, 1]);
    undo.recordDelete();
    const { client, calls } = recordingClient();
    await expect(undo.undo(client, "s1", 2)).rejects.toThrow("re-insert");
    expect(calls).toHaveLength(0);
  });
});
