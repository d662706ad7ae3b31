/** Pure helpers over the serialized scene tree. */

import type { TreeNodeDoc } from "./types.js";

export function nodeAtPath(root: TreeNodeDoc, path: number[]): TreeNodeDoc {
  let node = root;
  for (const i of path) {
    const children = node.children ?? [];
    if (i < 0 || i >= children.length) {
      throw new RangeError(`no child ${i} under a ${node.kind} node`);
    }
    node = children[i];
  }
  return node;
}

/** Object ids of every leaf under the node at `path`. */
export function leafIdsAt(root: TreeNodeDoc, path: number[]): string[] {
  const ids: string[] = [];
  const walk = (n: TreeNodeDoc) => {
    if (n.object) ids.push(n.object.id);
    for (const c of n.children ?? []) walk(c);
  };
  walk(nodeAtPath(root, path));
  return ids;
}

/** Leaf categories under `path`, sorted — handy for comparing subtrees. */
export function leafCategoriesAt(root: TreeNodeDoc, path: number[]): string[] {
  const cats: string[] = [];
  const walk = (n: TreeNodeDoc) => {
    if (n.object) cats.push(n.object.category);
    for (const c of n.children ?? []) walk(c);
  };
  walk(nodeAtPath(root, path));
  return cats.sort();
}

/** The tree path of the leaf holding object `id`, or null. */
export function pathOfObject(root: TreeNodeDoc, id: string): number[] | null {
  const walk = (n: TreeNodeDoc, path: number[]): number[] | null => {
    if (n.object?.id === id) return path;
    const children = n.children ?? [];
    for (let i = 0; i < children.length; i++) {
      const found = walk(children[i], [...path, i]);
      if (found) return found;
    }
    return null;
  };
  return walk(root, []);
}

/**
 * Object ids aligned with the scene's `placements` array: leaves in tree
 * order, walls and floor skipped (mirrors how the service realizes scenes).
 */
export function placementObjectIds(root: TreeNodeDoc): string[] {
  const ids: string[] = [];
  const walk = (n: TreeNodeDoc) => {
    if (n.object && n.object.category !== "wall" && n.object.category !== "floor") {
      ids.push(n.object.id);
    }
    for (const c of n.children ?? []) walk(c);
  };
  walk(root);
  return ids;
}

export function pathsEqual(a: number[], b: number[]): boolean {
  return a.length === b.length && a.every((v, i) => v === b[i]);
}

/** True when `prefix` is a (non-strict) prefix of `path`. */
export function isPrefix(prefix: number[], path: number[]): boolean {
  return prefix.length <= path.length && prefix.every((v, i) => v === path[i]);
}

/** One-line label for a tree node. */
export function describeNode(node: TreeNodeDoc): string {
  if (node.object) return `${node.object.category} (${node.object.id})`;
  const n = (node.children ?? []).length;
  return `${node.kind} ×${n}`;
}

/**
 * The relpos vector that currently places the child at `path` relative to
 * its parent's reference child, or null for reference children (index 0)
 * and the root.
 */
export function currentRelpos(
  root: TreeNodeDoc,
  path: number[],
): number[] | null {
  if (path.length === 0) return null;
  const index = path[path.length - 1];
  if (index === 0) return null;
  const parent = nodeAtPath(root, path.slice(0, -1));
  return parent.relpos?.[index - 1] ?? null;
}
