/** Hierarchy panel: a nested list with click-to-select nodes. */

import type { TreeNodeDoc } from "./types.js";
import { describeNode, pathsEqual } from "./treeutil.js";

export function renderTreePanel(
  container: HTMLElement,
  root: TreeNodeDoc,
  selected: number[] | null,
  onSelect: (path: number[]) => void,
): void {
  container.textContent = "";
  const build = (node: TreeNodeDoc, path: number[]): HTMLElement => {
    const item = document.createElement("div");
    item.className = "tree-node";
    const label = document.createElement("span");
    label.className = `tree-label kind-${node.kind}`;
    if (selected && pathsEqual(path, selected)) {
      label.classList.add("selected");
    }
    label.textContent = describeNode(node);
    label.dataset.path = path.join("-");
    label.addEventListener("click", (ev) => {
      ev.stopPropagation();
      onSelect(path);
    });
    item.append(label);
    const children = node.children ?? [];
    if (children.length > 0) {
      const nest = document.createElement("div");
      nest.className = "tree-children";
      children.forEach((c, i) => nest.append(build(c, [...path, i])));
      item.append(nest);
    }
    return item;
  };
  container.append(build(root, []));
}
