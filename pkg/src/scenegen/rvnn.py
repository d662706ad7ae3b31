"""Recursive variational autoencoder over scene hierarchies.

Training batches are level-scheduled: nodes of the same kind at the same
tree height (encoding) or depth (decoding) across the whole minibatch are
run through their shared MLP as one matrix, which turns the per-node
vector products into large GEMMs.  Gradients are exact analytic
backpropagation through the encode and decode recursions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import hierarchy as H
from .hierarchy import SceneTree, TreeNode
from .model import NODE_CLASSES, ModelParams, save_model
from .neural import AdamState, adam_step, softmax
from .relpos import DIM as RELPOS_DIM
from .relpos import RelPos
from .scene import FLOOR, WALL, SceneObject, Vocabulary
from .geometry import OBB


class GenerationError(Exception):
    """Free decoding exceeded its node or depth limits."""


class TrainingError(Exception):
    pass


CLASS_INDEX = {k: i for i, k in enumerate(NODE_CLASSES)}


# --- feature trees --------------------------------------------------------

@dataclass
class FNode:
    kind: str
    children: list["FNode"] = field(default_factory=list)
    leaf_feat: np.ndarray | None = None
    rel_feats: list[np.ndarray] = field(default_factory=list)
    # filled by the batch scheduler
    nid: int = -1
    tree: int = -1
    height: int = 0
    depth: int = 0


def leaf_features(sizes, category: str, vocab: Vocabulary,
                  size_scale: float, labels_enabled: bool) -> np.ndarray:
    """Sizes plus label block; unknown categories get a uniform block."""
    v = np.zeros(3 + len(vocab))
    v[:3] = np.asarray(sizes) / size_scale
    if labels_enabled:
        if category in vocab:
            v[3 + vocab.index(category)] = 1.0
        else:
            v[3:] = 1.0 / len(vocab)
    return v


def relpos_features(rp: RelPos, ref, tgt, cfg) -> np.ndarray:
    """Placement feature vector per the configured position mode."""
    v = np.zeros(RELPOS_DIM)
    if cfg.position_mode == "relative":
        raw = rp.to_vector()
        v[:] = raw
        v[0] = raw[0] / math.pi
        v[1] = raw[1] / cfg.offset_scale
        v[2] = raw[2] / cfg.offset_scale
    elif cfg.position_mode == "absolute":
        v[0] = tgt.center_x / cfg.offset_scale
        v[1] = tgt.center_y / cfg.offset_scale
        v[2] = tgt.angle / math.pi
    else:  # center_translation
        local = ref.to_local(tgt.center)
        v[0] = rp.angle / math.pi
        v[1] = local[0] / cfg.offset_scale
        v[2] = local[1] / cfg.offset_scale
    return v


def to_feature_tree(tree: SceneTree, params: ModelParams) -> FNode:
    cfg, vocab = params.config, params.vocab

    def conv(node: TreeNode) -> FNode:
        if node.kind == H.LEAF:
            o = node.obj
            feat = leaf_features((o.obb.size_x, o.obb.size_y, o.obb.size_z),
                                 o.category, vocab, cfg.size_scale,
                                 cfg.labels_enabled)
            return FNode(kind=H.LEAF, leaf_feat=feat)
        fchildren = [conv(c) for c in node.children]
        rels = [relpos_features(rp, node.children[0].agg, c.agg, cfg)
                for rp, c in zip(node.relpos, node.children[1:])]
        return FNode(kind=node.kind, children=fchildren, rel_feats=rels)

    return conv(tree.root)


ENC_OF = {H.SUPPORT: "supp_enc", H.COOCCUR: "coocc_enc", H.SURROUND: "surr_enc",
          H.WALLNODE: "wall_enc", H.ROOT: "root_enc"}
DEC_OF = {H.SUPPORT: "supp_dec", H.COOCCUR: "coocc_dec", H.SURROUND: "surr_dec",
          H.WALLNODE: "wall_dec", H.ROOT: "root_dec"}


def _slices(arity: int, n: int, r: int):
    code_sl, rel_sl = [slice(0, n)], []
    pos = n
    for _ in range(1, arity):
        code_sl.append(slice(pos, pos + n))
        pos += n
        rel_sl.append(slice(pos, pos + r))
        pos += r
    return code_sl, rel_sl


class _Batch:
    """Flattens a list of feature trees and groups nodes for scheduling."""

    def __init__(self, roots: list[FNode]):
        self.nodes: list[FNode] = []
        self.tops = roots
        for ti, root in enumerate(roots):
            self._assign(root, ti, 0)
        self.leaves = [n for n in self.nodes if n.kind == H.LEAF]
        self.internal = [n for n in self.nodes if n.kind != H.LEAF]
        self.classified = [n for n in self.nodes if n.depth > 0]
        self.n_trees = len(roots)
        self.counts = np.zeros((self.n_trees, 3))  # leaves, relpos, classified
        for n in self.nodes:
            if n.kind == H.LEAF:
                self.counts[n.tree, 0] += 1
            else:
                self.counts[n.tree, 1] += len(n.rel_feats)
            if n.depth > 0:
                self.counts[n.tree, 2] += 1

        def groups(nodes, level):
            table: dict[tuple[int, str], list[FNode]] = {}
            for n in nodes:
                table.setdefault((getattr(n, level), n.kind), []).append(n)
            return [table[k] for k in sorted(table)]

        self.enc_groups = groups(self.internal, "height")
        self.dec_groups = groups(self.internal, "depth")

    def _assign(self, node: FNode, ti: int, depth: int) -> int:
        node.nid = len(self.nodes)
        node.tree = ti
        node.depth = depth
        self.nodes.append(node)
        h = 0
        for c in node.children:
            h = max(h, self._assign(c, ti, depth + 1) + 1)
        node.height = h
        return h


@dataclass
class LossBreakdown:
    recon_leaf: float
    recon_relpos: float
    classifier: float
    kl: float
    total: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


# --- forward / backward ---------------------------------------------------

def compute_loss(params: ModelParams, trees: list[FNode],
                 rng: np.random.Generator, with_grads: bool = True):
    """Loss breakdown and (optionally) gradients for a minibatch.

    Reconstruction terms are means over contributing nodes per tree, then
    over the batch; KL and classifier terms likewise.
    """
    cfg = params.config
    n, r = cfg.code_dim, cfg.relpos_dim
    batch = _Batch(trees)
    B = batch.n_trees
    codes = np.zeros((len(batch.nodes), max(n, cfg.top_code_dim)))

    # encode: leaves, then internal nodes by ascending height
    leaf_ids = [nd.nid for nd in batch.leaves]
    X_leaf = np.stack([nd.leaf_feat for nd in batch.leaves])
    Y, enc_leaf_cache = params.box_enc.forward(X_leaf)
    codes[leaf_ids, :n] = Y

    enc_passes = []
    for group in batch.enc_groups:
        kind = group[0].kind
        enc = getattr(params, ENC_OF[kind])
        code_sl, rel_sl = _slices(len(group[0].children), n, r)
        X = np.zeros((len(group), enc.in_dim))
        for row, nd in enumerate(group):
            for sl, c in zip(code_sl, nd.children):
                X[row, sl] = codes[c.nid, :n]
            for sl, rel in zip(rel_sl, nd.rel_feats):
                X[row, sl] = rel
        Y, cache = enc.forward(X)
        out_dim = Y.shape[1]
        for row, nd in enumerate(group):
            codes[nd.nid, :out_dim] = Y[row]
        enc_passes.append((group, cache, code_sl, rel_sl, out_dim))

    top_dim = cfg.top_code_dim
    R = np.stack([codes[t.nid, :top_dim] for t in batch.tops])

    # VAE head
    mu = params.vae_mu.forward(R)
    logvar = params.vae_logvar.forward(R)
    eps = rng.standard_normal(mu.shape)
    z = mu + np.exp(0.5 * logvar) * eps
    Rd, expand_cache = params.vae_expand.forward(z)
    kl_per_tree = 0.5 * np.sum(np.exp(logvar) + mu * mu - 1.0 - logvar, axis=1)
    kl = float(np.mean(kl_per_tree))

    # teacher-forced decode by descending into the reference topology
    dec_codes = np.zeros_like(codes)
    for row, t in enumerate(batch.tops):
        dec_codes[t.nid, :top_dim] = Rd[row]
    dec_passes = []
    for group in batch.dec_groups:
        kind = group[0].kind
        dec = getattr(params, DEC_OF[kind])
        code_sl, rel_sl = _slices(len(group[0].children), n, r)
        in_dim = dec.in_dim
        X = np.stack([dec_codes[nd.nid, :in_dim] for nd in group])
        Y, cache = dec.forward(X)
        for row, nd in enumerate(group):
            for sl, c in zip(code_sl, nd.children):
                dec_codes[c.nid, :n] = Y[row, sl]
        dec_passes.append((group, X, Y, cache, code_sl, rel_sl))

    # losses on decoder outputs
    w_leaf = 1.0 / (B * batch.counts[:, 0])
    w_rel = np.where(batch.counts[:, 1] > 0, 1.0 / (B * np.maximum(batch.counts[:, 1], 1)), 0.0)
    w_cls = np.where(batch.counts[:, 2] > 0, 1.0 / (B * np.maximum(batch.counts[:, 2], 1)), 0.0)

    X_leaf_dec = np.stack([dec_codes[nd.nid, :n] for nd in batch.leaves])
    P_leaf, dec_leaf_cache = params.box_dec.forward(X_leaf_dec)
    leaf_diff = P_leaf - X_leaf
    leaf_w = np.array([w_leaf[nd.tree] for nd in batch.leaves])
    recon_leaf = float(np.sum(leaf_w * np.sum(leaf_diff ** 2, axis=1)))

    recon_rel = 0.0
    rel_grads = []  # aligned with dec_passes: (rows, sl, grad_block) filled later
    for group, X, Y, cache, code_sl, rel_sl in dec_passes:
        rows_w = np.array([w_rel[nd.tree] for nd in group])
        for j, sl in enumerate(rel_sl):
            true = np.stack([nd.rel_feats[j] for nd in group])
            diff = Y[:, sl] - true
            recon_rel += float(np.sum(rows_w * np.sum(diff ** 2, axis=1)))

    # node classifier on decoded codes (root excluded)
    Xc = np.stack([dec_codes[nd.nid, :n] for nd in batch.classified])
    Hc, clsfr_cache = params.clsfr_hidden.forward(Xc)
    logits = params.clsfr_out.forward(Hc)
    p = softmax(logits)
    labels = np.array([CLASS_INDEX[nd.kind] for nd in batch.classified])
    cls_w = np.array([w_cls[nd.tree] for nd in batch.classified])
    picked = p[np.arange(len(labels)), labels]
    cls_loss = float(np.sum(cls_w * -np.log(np.maximum(picked, 1e-300))))

    total = (recon_leaf + recon_rel + cfg.classifier_weight * cls_loss
             + cfg.kl_weight * kl)
    breakdown = LossBreakdown(recon_leaf, recon_rel, cls_loss, kl, total)
    if not with_grads:
        return breakdown, None

    # --- backward ---
    grads = params.zero_grads()
    gdec = np.zeros_like(dec_codes)

    # leaves: reconstruction through box_dec
    gP = (2.0 * leaf_w)[:, None] * leaf_diff
    gX = params.box_dec.backward(dec_leaf_cache, gP, grads["box_dec"])
    for row, nd in enumerate(batch.leaves):
        gdec[nd.nid, :n] += gX[row]

    # classifier
    glog = p.copy()
    glog[np.arange(len(labels)), labels] -= 1.0
    glog *= (cfg.classifier_weight * cls_w)[:, None]
    gH = params.clsfr_out.backward(Hc, glog, grads["clsfr_out"])
    gXc = params.clsfr_hidden.backward(clsfr_cache, gH, grads["clsfr_hidden"])
    for row, nd in enumerate(batch.classified):
        gdec[nd.nid, :n] += gXc[row]

    # internal decoders, deepest first
    for group, X, Y, cache, code_sl, rel_sl in reversed(dec_passes):
        dec = getattr(params, DEC_OF[group[0].kind])
        gY = np.zeros_like(Y)
        rows_w = np.array([w_rel[nd.tree] for nd in group])
        for j, sl in enumerate(rel_sl):
            true = np.stack([nd.rel_feats[j] for nd in group])
            gY[:, sl] = (2.0 * rows_w)[:, None] * (Y[:, sl] - true)
        for row, nd in enumerate(group):
            for sl, c in zip(code_sl, nd.children):
                gY[row, sl] += gdec[c.nid, :n]
        gX = dec.backward(cache, gY, grads[DEC_OF[group[0].kind]])
        in_dim = dec.in_dim
        for row, nd in enumerate(group):
            gdec[nd.nid, :in_dim] += gX[row]

    # VAE backward
    gRd = np.stack([gdec[t.nid, :top_dim] for t in batch.tops])
    gz = params.vae_expand.backward(expand_cache, gRd, grads["vae_expand"])
    kw = cfg.kl_weight / B
    gmu = gz + kw * mu
    glv = gz * eps * 0.5 * np.exp(0.5 * logvar) + kw * 0.5 * (np.exp(logvar) - 1.0)
    gR = params.vae_mu.backward(R, gmu, grads["vae_mu"])
    gR += params.vae_logvar.backward(R, glv, grads["vae_logvar"])

    genc = np.zeros_like(codes)
    for row, t in enumerate(batch.tops):
        genc[t.nid, :top_dim] = gR[row]

    for (group, cache, code_sl, rel_sl, out_dim) in reversed(enc_passes):
        enc = getattr(params, ENC_OF[group[0].kind])
        gY = np.stack([genc[nd.nid, :out_dim] for nd in group])
        gX = enc.backward(cache, gY, grads[ENC_OF[group[0].kind]])
        for row, nd in enumerate(group):
            for sl, c in zip(code_sl, nd.children):
                genc[c.nid, :n] += gX[row, sl]
    gY = np.stack([genc[nd.nid, :n] for nd in batch.leaves])
    params.box_enc.backward(enc_leaf_cache, gY, grads["box_enc"])

    return breakdown, grads


def encode_trees(params: ModelParams, trees: list[FNode]) -> np.ndarray:
    """Top (root) codes for a list of feature trees, no sampling."""
    cfg = params.config
    n, r = cfg.code_dim, cfg.relpos_dim
    batch = _Batch(trees)
    codes = np.zeros((len(batch.nodes), max(n, cfg.top_code_dim)))
    X_leaf = np.stack([nd.leaf_feat for nd in batch.leaves])
    Y, _ = params.box_enc.forward(X_leaf)
    for row, nd in enumerate(batch.leaves):
        codes[nd.nid, :n] = Y[row]
    for group in batch.enc_groups:
        enc = getattr(params, ENC_OF[group[0].kind])
        code_sl, rel_sl = _slices(len(group[0].children), n, r)
        X = np.zeros((len(group), enc.in_dim))
        for row, nd in enumerate(group):
            for sl, c in zip(code_sl, nd.children):
                X[row, sl] = codes[c.nid, :n]
            for sl, rel in zip(rel_sl, nd.rel_feats):
                X[row, sl] = rel
        Y, _ = enc.forward(X)
        for row, nd in enumerate(group):
            codes[nd.nid, :Y.shape[1]] = Y[row]
    return np.stack([codes[t.nid, :cfg.top_code_dim] for t in batch.tops])


def vae_head(params: ModelParams, top_code: np.ndarray,
             rng: np.random.Generator | None = None):
    """Sample a latent for a top code; returns (z, mu, logvar)."""
    mu = params.vae_mu.forward(top_code)
    logvar = params.vae_logvar.forward(top_code)
    if rng is None:
        return mu, mu, logvar
    z = mu + np.exp(0.5 * logvar) * rng.standard_normal(mu.shape)
    return z, mu, logvar


def classify_node(params: ModelParams, code: np.ndarray) -> np.ndarray:
    h, _ = params.clsfr_hidden.forward(code)
    return softmax(params.clsfr_out.forward(h))


# --- free decoding --------------------------------------------------------

@dataclass(frozen=True)
class DecodeLimits:
    max_depth: int = 12
    max_nodes: int = 128


def _harden_leaf(params: ModelParams, feat: np.ndarray, oid: str) -> TreeNode:
    cfg, vocab = params.config, params.vocab
    sizes = np.clip(np.abs(feat[:3]) * cfg.size_scale, 0.05, None)
    cat = vocab.names[int(np.argmax(feat[3:]))] if cfg.labels_enabled \
        else vocab.names[0]
    obb = OBB(0.0, 0.0, 0.0, float(sizes[0]), float(sizes[1]), float(sizes[2]), 0.0)
    return H.leaf_node(SceneObject(id=oid, category=cat, obb=obb))


def _harden_relpos(params: ModelParams, feat: np.ndarray) -> RelPos:
    cfg = params.config
    v = np.array(feat, dtype=float)
    v[0] = feat[0] * math.pi
    v[1] = feat[1] * cfg.offset_scale
    v[2] = feat[2] * cfg.offset_scale
    return RelPos.from_vector(v)


def decode_tree_free(params: ModelParams, z: np.ndarray,
                     limits: DecodeLimits = DecodeLimits()) -> SceneTree:
    """Expand a latent into a full hierarchy using the node classifier.

    In full wall/root mode the five top children are positionally
    designated floor + walls; other modes start from their fixed top kind.
    """
    cfg = params.config
    n, r = cfg.code_dim, cfg.relpos_dim
    top, _ = params.vae_expand.forward(z)
    counter = [0]

    def next_id() -> str:
        counter[0] += 1
        return f"g{counter[0]}"

    budget = [0]

    def spend() -> None:
        budget[0] += 1
        if budget[0] > limits.max_nodes:
            raise GenerationError(f"node limit {limits.max_nodes} exceeded")

    def expand(code: np.ndarray, depth: int, forced: str | None = None) -> TreeNode:
        spend()
        if depth > limits.max_depth:
            raise GenerationError(f"depth limit {limits.max_depth} exceeded")
        kind = forced or NODE_CLASSES[int(np.argmax(classify_node(params, code)))]
        if kind == H.LEAF:
            feat, _ = params.box_dec.forward(code)
            return _harden_leaf(params, feat, next_id())
        dec = getattr(params, DEC_OF[kind])
        out, _ = dec.forward(code)
        code_sl, rel_sl = _slices(H.ARITY[kind], n, r)
        children = [expand(out[sl], depth + 1) for sl in code_sl]
        rels = [_harden_relpos(params, out[sl]) for sl in rel_sl]
        return TreeNode(kind=kind, children=children, relpos=rels)

    if cfg.wall_root_mode == "full":
        spend()
        out, _ = params.root_dec.forward(top)
        code_sl, rel_sl = _slices(5, n, r)
        floor = expand(out[code_sl[0]], 1, forced=H.LEAF)
        walls = [expand(out[sl], 1) for sl in code_sl[1:]]
        rels = [_harden_relpos(params, out[sl]) for sl in rel_sl]
        root = TreeNode(kind=H.ROOT, children=[floor] + walls, relpos=rels)
    else:
        start_kind = H.SUPPORT if cfg.wall_root_mode == "wall_only" else H.COOCCUR
        root = expand(top, 0, forced=start_kind)
    return SceneTree(root=root, room_type="custom")


def decode_tree_teacher(params: ModelParams, z: np.ndarray, ftree: FNode):
    """Decode along a reference topology; returns aligned predictions
    (per-leaf feature vectors, per-node relpos lists, per-node class probs)."""
    cfg = params.config
    n, r = cfg.code_dim, cfg.relpos_dim
    top, _ = params.vae_expand.forward(z)

    leaf_preds: list[tuple[FNode, np.ndarray]] = []
    rel_preds: list[tuple[FNode, list[np.ndarray]]] = []
    cls_probs: list[tuple[FNode, np.ndarray]] = []

    def walk(node: FNode, code: np.ndarray, is_top: bool) -> None:
        if not is_top:
            cls_probs.append((node, classify_node(params, code)))
        if node.kind == H.LEAF:
            feat, _ = params.box_dec.forward(code)
            leaf_preds.append((node, feat))
            return
        dec = getattr(params, DEC_OF[node.kind])
        out, _ = dec.forward(code)
        code_sl, rel_sl = _slices(len(node.children), n, r)
        rel_preds.append((node, [out[sl] for sl in rel_sl]))
        for sl, c in zip(code_sl, node.children):
            walk(c, out[sl], False)

    walk(ftree, top, True)
    return leaf_preds, rel_preds, cls_probs


# --- training -------------------------------------------------------------

@dataclass
class TrainConfig:
    epochs: int = 500
    batch_size: int | None = None
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    # Warm restarts: reset the optimizer moments every N epochs. The
    # momentum flush helps the recursive loss escape the plateaus it
    # settles into under a single long Adam run.
    restart_every: int | None = 20
    seed: int = 0
    checkpoint_path: str | None = None
    checkpoint_every: int = 0
    log_fn: object = None


def batch_size_for(corpus_size: int) -> int:
    """One tenth of the training set, at least 1."""
    return max(1, corpus_size // 10)


def train(params: ModelParams, trees: list[SceneTree],
          hyper: TrainConfig = TrainConfig()) -> list[LossBreakdown]:
    if not trees:
        raise TrainingError("empty training corpus")
    ftrees = [to_feature_tree(t, params) for t in trees]
    bs = hyper.batch_size or batch_size_for(len(ftrees))
    rng = np.random.default_rng(hyper.seed)
    adam = AdamState(lr=hyper.lr, beta1=hyper.beta1, beta2=hyper.beta2)
    arrays = params.param_arrays()
    curve = []
    for epoch in range(hyper.epochs):
        if (hyper.restart_every and epoch > 0
                and epoch % hyper.restart_every == 0):
            adam = AdamState(lr=hyper.lr, beta1=hyper.beta1,
                             beta2=hyper.beta2)
        order = rng.permutation(len(ftrees))
        sums = np.zeros(5)
        count = 0
        for start in range(0, len(ftrees), bs):
            idx = order[start:start + bs]
            batch = [ftrees[i] for i in idx]
            breakdown, grads = compute_loss(params, batch, rng)
            if not math.isfinite(breakdown.total):
                raise TrainingError(
                    f"non-finite loss at epoch {epoch}, batch starting {start} "
                    f"(tree indices {idx.tolist()})")
            adam_step(adam, arrays, ModelParams.grad_arrays(grads))
            sums += np.array([breakdown.recon_leaf, breakdown.recon_relpos,
                              breakdown.classifier, breakdown.kl,
                              breakdown.total]) * len(idx)
            count += len(idx)
        epoch_loss = LossBreakdown(*(sums / count))
        curve.append(epoch_loss)
        if hyper.log_fn:
            hyper.log_fn(epoch, epoch_loss)
        if (hyper.checkpoint_path and hyper.checkpoint_every
                and (epoch + 1) % hyper.checkpoint_every == 0):
            save_model(params, hyper.checkpoint_path)
    if hyper.checkpoint_path:
        save_model(params, hyper.checkpoint_path)
    return curve


# --- evaluation helpers ---------------------------------------------------

def evaluate(params: ModelParams, trees: list[SceneTree],
             seed: int = 0) -> dict:
    """Teacher-forced metrics: node-classifier accuracy and leaf-category
    argmax accuracy (labels on) over the given trees, using z = mu."""
    vocab = params.vocab
    cls_hit = cls_tot = cat_hit = cat_tot = 0
    for tree in trees:
        ftree = to_feature_tree(tree, params)
        top = encode_trees(params, [ftree])
        z, _, _ = vae_head(params, top, rng=None)
        leaf_preds, _, cls_probs = decode_tree_teacher(params, z[0], ftree)
        for node, probs in cls_probs:
            cls_tot += 1
            cls_hit += int(NODE_CLASSES[int(np.argmax(probs))] == node.kind)
        for node, feat in leaf_preds:
            cat_tot += 1
            cat_hit += int(np.argmax(feat[3:]) == np.argmax(node.leaf_feat[3:]))
    return {
        "classifier_accuracy": cls_hit / max(cls_tot, 1),
        "leaf_category_accuracy": cat_hit / max(cat_tot, 1),
        "nodes_classified": cls_tot,
        "leaves": cat_tot,
    }
