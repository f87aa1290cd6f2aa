"""Image scene graph over a rolling window of recent observations.

Each node concatenates an image embedding with an instance embedding built
from detected objects (normalized box, log class index, confidence through a
small MLP, top-K slots). Edges are cosine similarities; a three-layer graph
convolution with feature pooling produces a graph summary that is gated by a
projection of the goal feature map.
"""
from __future__ import annotations

import math

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .detection import Detection

__all__ = ["Detection", "InstanceEmbedder", "SceneGraphState", "add_node",
           "build_adjacency", "cosine_adjacency", "normalize_adjacency",
           "GraphReadout", "gcn_readout", "slots_from_detections",
           "format_state_dump"]

SLOT_FEATURES = 6  # x1, y1, x2, y2 (normalized), log class, confidence


def slots_from_detections(dets, img_w, img_h, n_slots):
    """Raw per-slot features for the top-K detections by confidence.

    Rows are (x1/W, y1/H, x2/W, y2/H, ln(class), conf); missing slots are
    zero. Ties keep the original detection order so the output is
    deterministic.
    """
    for d in dets:
        d.validate(img_w, img_h)
    ranked = sorted(range(len(dets)), key=lambda i: (-dets[i].confidence, i))
    slots = np.zeros((n_slots, SLOT_FEATURES), dtype=np.float32)
    for k, i in enumerate(ranked[:n_slots]):
        d = dets[i]
        slots[k] = (d.x1 / img_w, d.y1 / img_h, d.x2 / img_w, d.y2 / img_h,
                    math.log(d.class_index), d.confidence)
    return slots


class InstanceEmbedder(nn.Module):
    """Two-layer MLP per detection slot; slot embeddings are concatenated."""

    def __init__(self, n_slots=3, hidden=32, slot_dim=32):
        super().__init__()
        self.n_slots = n_slots
        self.slot_dim = slot_dim
        self.mlp = nn.Sequential(nn.Linear(SLOT_FEATURES, hidden), nn.ReLU(),
                                 nn.Linear(hidden, slot_dim))

    @property
    def out_dim(self):
        return self.n_slots * self.slot_dim

    def forward(self, slots):
        """slots [..., K, 6] -> [..., K * slot_dim]."""
        emb = self.mlp(slots)
        return emb.reshape(*slots.shape[:-2], self.out_dim)

    def embed_detections(self, dets, img_w, img_h):
        slots = torch.from_numpy(slots_from_detections(dets, img_w, img_h, self.n_slots))
        return self.forward(slots.to(next(self.parameters()).dtype))


def embed_instances(dets, img_w, img_h, embedder):
    """Functional form of the instance embedding."""
    return embedder.embed_detections(dets, img_w, img_h)


class SceneGraphState:
    """Ring buffer of node features for one environment's current episode."""

    def __init__(self, capacity, node_dim, dtype=torch.float32):
        self.capacity = capacity
        self.node_dim = node_dim
        self.features = torch.zeros(capacity, node_dim, dtype=dtype)
        self.active = torch.zeros(capacity, dtype=torch.bool)
        self.cursor = 0

    @property
    def n_active(self):
        return int(self.active.sum())

    def reset(self):
        self.features.zero_()
        self.active.zero_()
        self.cursor = 0

    def push(self, feature):
        if feature.shape[-1] != self.node_dim:
            raise ValueError(f"node dim {feature.shape[-1]} != {self.node_dim}")
        self.features[self.cursor] = feature
        self.active[self.cursor] = True
        self.cursor = (self.cursor + 1) % self.capacity


def add_node(img_feature, instance_feature, state):
    """Write the concatenated node at the ring cursor; returns the state."""
    state.push(torch.cat([img_feature, instance_feature], dim=-1))
    return state


def build_adjacency(state):
    """Cosine-similarity adjacency over the active nodes.

    Raises on an empty graph or a zero-norm node (degenerate cosine). The
    matrix is exactly symmetric with unit diagonal.
    """
    feats = state.features[state.active]
    if feats.shape[0] == 0:
        raise ValueError("scene graph has no active nodes")
    norms = feats.norm(dim=1)
    if (norms == 0).any():
        raise ValueError("zero-norm node feature; cosine undefined")
    unit = feats / norms[:, None]
    g = unit @ unit.T
    g = 0.5 * (g + g.T)
    g.fill_diagonal_(1.0)
    return g.clamp(-1.0, 1.0)


_EYE_CACHE = {}


def _eye(n, like):
    key = (n, like.dtype)
    if key not in _EYE_CACHE:
        _EYE_CACHE[key] = torch.eye(n, dtype=torch.bool).unsqueeze(0)
    return _EYE_CACHE[key]


def cosine_adjacency(feats, mask):
    """Batched adjacency: feats [B, N, d], mask [B, N] -> [B, N, N].

    Inactive rows/columns are zero; active diagonals are exactly 1.
    """
    norms = feats.norm(dim=2, keepdim=True)
    unit = feats / norms.clamp_min(1e-12)
    g = unit @ unit.transpose(1, 2)
    g = 0.5 * (g + g.transpose(1, 2))
    outer = mask[:, :, None] & mask[:, None, :]
    g = torch.where(outer, g, torch.zeros((), dtype=g.dtype))
    eye = _eye(feats.shape[1], feats) & mask[:, None, :]
    return torch.where(eye, torch.ones((), dtype=g.dtype), g).clamp(-1.0, 1.0)


def normalize_adjacency(g, mask):
    """Symmetric degree normalization of the similarity matrix.

    Entries are first shifted to [0, 1] via (g + 1) / 2 (cosine may be
    negative), masked to the active block, then scaled by D^-1/2 on both
    sides. Inactive rows stay zero.
    """
    outer = (mask[:, :, None] & mask[:, None, :]).to(g.dtype)
    a = (g + 1.0) * 0.5 * outer
    deg = a.sum(dim=2)
    inv_sqrt = torch.where(deg > 0, deg.clamp_min(1e-12).rsqrt(),
                           torch.zeros((), dtype=g.dtype))
    return a * inv_sqrt[:, :, None] * inv_sqrt[:, None, :]


class GraphReadout(nn.Module):
    """Three graph-conv layers with feature pooling, then goal-gated readout.

    Layer rule: H <- relu(G_hat @ H @ W); after layers 1 and 2 the feature
    dimension is halved by average pooling. The node mean is multiplied
    elementwise by a pooled 1x1-conv projection of the goal feature map.
    """

    def __init__(self, node_dim, goal_channels, dims=(256, 128, 64)):
        super().__init__()
        d1, d2, d3 = dims
        if d1 % 2 or d2 % 2:
            raise ValueError("first two layer widths must be even (pooled by 2)")
        self.weights = nn.ParameterList([
            nn.Parameter(torch.empty(node_dim, d1)),
            nn.Parameter(torch.empty(d1 // 2, d2)),
            nn.Parameter(torch.empty(d2 // 2, d3)),
        ])
        for w in self.weights:
            nn.init.kaiming_uniform_(w, a=math.sqrt(5))
        self.goal_proj = nn.Conv2d(goal_channels, d3, 1)
        self.out_dim = d3

    def graph_feature(self, feats, mask):
        """Mean node embedding after the three conv/pool layers: [B, d3]."""
        g_hat = normalize_adjacency(cosine_adjacency(feats, mask), mask)
        h = feats * mask[:, :, None].to(feats.dtype)
        for i, w in enumerate(self.weights):
            h = F.relu(g_hat @ (h @ w))
            if i < 2:
                b, n, d = h.shape
                h = F.avg_pool1d(h.reshape(b * n, 1, d), 2).reshape(b, n, d // 2)
        count = mask.sum(dim=1, keepdim=True).clamp_min(1).to(h.dtype)
        return (h * mask[:, :, None].to(h.dtype)).sum(dim=1) / count

    def forward(self, feats, mask, goal_map):
        h_graph = self.graph_feature(feats, mask)
        gate = self.goal_proj(goal_map).mean(dim=(2, 3))
        return gate * h_graph


def gcn_readout(state, params, f_goal):
    """Single-state functional form: params is a GraphReadout module."""
    feats = state.features.unsqueeze(0)
    mask = state.active.unsqueeze(0)
    goal = f_goal.unsqueeze(0) if f_goal.dim() == 3 else f_goal
    return params(feats, mask, goal).squeeze(0)


def format_state_dump(state, step):
    """Structured text table of the current nodes and adjacency (debugging)."""
    lines = [f"step {step} nodes {state.n_active}"]
    feats = state.features[state.active]
    for i, row in enumerate(feats):
        vals = " ".join(f"{v:.5f}" for v in row.tolist())
        lines.append(f"node {i} {vals}")
    if state.n_active:
        g = build_adjacency(state)
        for i, row in enumerate(g):
            lines.append("adj " + " ".join(f"{v:.5f}" for v in row.tolist()))
    return "\n".join(lines) + "\n"
