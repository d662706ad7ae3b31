import { describe, expect, it } from "vitest";

import type { TreeNodeDoc } from "../src/types.js";
import {
  currentRelpos,
  isPrefix,
  leafCategoriesAt,
  leafIdsAt,
  nodeAtPath,
  pathOfObject,
  pathsEqual,
  placementObjectIds,
} from "../src/treeutil.js";

function leaf(id: string, category: string): TreeNodeDoc {
  return {
    kind: "leaf",
    object: { id, category, center: [0, 0], elevation: 0, size: [1, 1, 1], angle: 0 },
  };
}

const RELPOS_A = Array(28).fill(0.25);
const RELPOS_B = Array(28).fill(0.75);

const TREE: TreeNodeDoc = {
  kind: "root",
  children: [
    leaf("o1", "floor"),
    leaf("o2", "wall"),
    {
      kind: "support",
      relpos: [RELPOS_A],
      children: [leaf("o3", "desk"), leaf("o4", "lamp")],
    },
    {
      kind: "cooccur",
      relpos: [RELPOS_B],
      children: [leaf("o5", "bed"), leaf("o6", "chair")],
    },
  ],
};

describe("nodeAtPath", () => {
  it("resolves nested paths", () => {
    expect(nodeAtPath(TREE, []).kind).toBe("root");
    expect(nodeAtPath(TREE, [2, 1]).object?.id).toBe("o4");
  });

  it("throws on out-of-range indices", () => {
    expect(() => nodeAtPath(TREE, [9])).toThrow(RangeError);
    expect(() => nodeAtPath(TREE, [2, 0, 0])).toThrow(RangeError);
  });
});

describe("leaf collection", () => {
  it("gathers ids under a subtree", () => {
    expect(leafIdsAt(TREE, [2])).toEqual(["o3", "o4"]);
    expect(leafIdsAt(TREE, [])).toHaveLength(6);
  });

  it("sorts categories", () => {
    expect(leafCategoriesAt(TREE, [3])).toEqual(["bed", "chair"]);
  });

  it("placement ids skip walls and floor, in tree order", () => {
    expect(placementObjectIds(TREE)).toEqual(["o3", "o4", "o5", "o6"]);
  });
});

describe("pathOfObject", () => {
  it("finds leaves and misses unknowns", () => {
    expect(pathOfObject(TREE, "o6")).toEqual([3, 1]);
    expect(pathOfObject(TREE, "nope")).toBeNull();
  });
});

describe("path predicates", () => {
  it("compares paths", () => {
    expect(pathsEqual([1, 2], [1, 2])).toBe(true);
    expect(pathsEqual([1], [1, 2])).toBe(false);
    expect(isPrefix([2], [2, 1])).toBe(true);
    expect(isPrefix([2, 1], [2])).toBe(false);
  });
});

describe("currentRelpos", () => {
  it("returns the vector placing a non-reference child", () => {
    expect(currentRelpos(TREE, [2, 1])).toEqual(RELPOS_A);
    expect(currentRelpos(TREE, [3, 1])).toEqual(RELPOS_B);
  });

  it("is null for reference children and the root", () => {
    expect(currentRelpos(TREE, [2, 0])).toBeNull();
    expect(currentRelpos(TREE, [])).toBeNull();
  });
});
