"""Full navigation model: dual backbone + scene graph + recurrent policy.

The scene-graph image encoder is by default a frozen copy of the observation
branch (snapshotted at a configurable training step); node image features are
therefore cached in the rollout buffer and reused during update epochs, while
instance embeddings, the graph convolution and everything upstream of the
policy are recomputed. In joint-training mode the encoder shares weights with
the live observation branch and the newest node's feature is recomputed with
gradient during updates (older window entries stay cached).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import torch
import torch.nn as nn

from .backbone import BackboneConfig, DualBackbone, EncoderBranch
from .distill import distill_loss
from .policy import RecurrentActorCritic, entropy_of, log_probs_for
from .scenegraph import GraphReadout, InstanceEmbedder


@dataclass
class ModelConfig:
    backbone: BackboneConfig = field(default_factory=BackboneConfig)
    scene_graph: bool = True
    sg_window: int = 8
    sg_slots: int = 3
    sg_slot_hidden: int = 32
    sg_slot_dim: int = 32
    sg_gcn_dims: tuple = (256, 128, 64)
    sg_joint_training: bool = False
    sg_snapshot_step: int = 0
    distill: bool = True
    distill_lambda: float = 1e-4
    gru_hidden: int = 512

    @property
    def sg_img_dim(self):
        return self.backbone.widths[-1]

    @property
    def node_dim(self):
        return self.sg_img_dim + self.sg_slots * self.sg_slot_dim


class NavModel(nn.Module):
    def __init__(self, cfg):
        super().__init__()
        cfg.backbone.validate()
        self.cfg = cfg
        self.backbone = DualBackbone(cfg.backbone)
        if cfg.scene_graph:
            self.instance_embedder = InstanceEmbedder(
                cfg.sg_slots, cfg.sg_slot_hidden, cfg.sg_slot_dim)
            self.graph_readout = GraphReadout(
                cfg.node_dim, cfg.backbone.widths[-1], cfg.sg_gcn_dims)
            if cfg.sg_joint_training:
                self.sg_encoder = None  # alias of the live observation branch
            else:
                self.sg_encoder = EncoderBranch(cfg.backbone)
                self.sg_encoder.requires_grad_(False)
            self.sg_snapshotted = False
            if cfg.sg_snapshot_step == 0:
                self.snapshot_sg_encoder()
            policy_in = cfg.backbone.feat_dim + cfg.sg_gcn_dims[-1]
        else:
            policy_in = cfg.backbone.feat_dim
        self.policy = RecurrentActorCritic(policy_in, cfg.gru_hidden)

    # --- scene-graph encoder lifecycle ---------------------------------------

    def snapshot_sg_encoder(self):
        """Copy the observation branch into the frozen scene-graph encoder."""
        if not self.cfg.scene_graph or self.cfg.sg_joint_training:
            return
        self.sg_encoder.load_state_dict(self.backbone.obs_branch.state_dict())
        self.sg_encoder.requires_grad_(False)
        self.sg_snapshotted = True

    def sg_image_feature(self, obs_img):
        """Pooled final-stage feature of the scene-graph encoder, no grad."""
        branch = (self.backbone.obs_branch if self.cfg.sg_joint_training
                  else self.sg_encoder)
        with torch.no_grad():
            return branch.forward_all(obs_img)[-1].mean(dim=(2, 3))

    def trainable_parameters(self):
        return [p for p in self.parameters() if p.requires_grad]

    # --- forward paths --------------------------------------------------------

    def encode_goal(self, goal_img):
        return self.backbone.forward_goal(goal_img)

    def _env_feature(self, sg_img, sg_slots, sg_mask, goal_map, live_img_feat=None,
                     newest=None):
        """Scene-graph feature [B, g3] from a cached window.

        live_img_feat/newest (joint-training mode) replace the newest node's
        cached image feature with a gradient-carrying one.
        """
        inst = self.instance_embedder(sg_slots)
        img = sg_img
        if live_img_feat is not None:
            img = sg_img.clone()
            img[torch.arange(img.shape[0]), newest] = live_img_feat
        nodes = torch.cat([img, inst], dim=-1)
        return self.graph_readout(nodes, sg_mask, goal_map)

    def policy_features(self, obs_img, goal_feats, sg_img, sg_slots, sg_mask,
                        newest=None):
        """Fused embedding (+ scene-graph feature) and the distill taps."""
        out = self.backbone.forward_obs(obs_img, goal_feats)
        if not self.cfg.scene_graph:
            return out.feature, out.taps
        live = None
        if self.cfg.sg_joint_training:
            live = out.obs_pooled
        f_env = self._env_feature(sg_img, sg_slots, sg_mask, out.goal_map,
                                  live, newest)
        return torch.cat([out.feature, f_env], dim=-1), out.taps

    def act(self, obs_img, goal_feats, sg_img, sg_slots, sg_mask, prev_action,
            hidden, newest=None):
        features, _ = self.policy_features(obs_img, goal_feats, sg_img, sg_slots,
                                           sg_mask, newest)
        return self.policy.step(features, prev_action, hidden)

    def compute_distill(self, taps):
        s1, s2 = self.cfg.backbone.distill_taps
        return distill_loss(taps[s1], taps[s2], self.cfg.distill_lambda)

    # --- rollout replay for PPO ------------------------------------------------

    def evaluate_rollout(self, buffer, env_idx):
        """Recompute log-probs/entropies/values for stored transitions.

        Processes the selected env columns over the full rollout: conv paths
        run as one batch, the GRU replays sequentially with hidden resets at
        episode boundaries. Returns ([T, M], [T, M], [T, M], distill scalar).
        """
        t_len, m = buffer.steps, len(env_idx)
        obs = buffer.obs[:, env_idx].reshape(t_len * m, *buffer.obs.shape[2:])
        goal_idx = buffer.goal_idx[:, env_idx].reshape(-1)
        uniq, inverse = torch.unique(goal_idx, return_inverse=True)
        goals = torch.stack([buffer.goal_images[i] for i in uniq.tolist()])
        gf = self.backbone.forward_goal(goals)
        goal_feats = type(gf)([f[inverse] for f in gf.stage_feats],
                              gf.final_map[inverse], gf.pooled[inverse])

        if self.cfg.scene_graph:
            sg_img = buffer.sg_img[:, env_idx].reshape(t_len * m, buffer.sg_img.shape[2], -1)
            sg_slots = buffer.sg_slots[:, env_idx].reshape(
                t_len * m, *buffer.sg_slots.shape[2:])
            sg_mask = buffer.sg_mask[:, env_idx].reshape(t_len * m, -1)
            newest = buffer.sg_newest[:, env_idx].reshape(-1) if self.cfg.sg_joint_training else None
        else:
            sg_img = sg_slots = sg_mask = newest = None
        features, taps = self.policy_features(obs, goal_feats, sg_img, sg_slots,
                                              sg_mask, newest)
        features = features.reshape(t_len, m, -1)

        h = buffer.h0[env_idx]
        not_done = (~buffer.done[:, env_idx]).float()
        prev_action = buffer.prev_action[:, env_idx]
        logits_seq, value_seq = [], []
        for t in range(t_len):
            if t > 0:
                h = h * not_done[t - 1].unsqueeze(-1)
            out = self.policy.step(features[t], prev_action[t], h)
            h = out.hidden
            logits_seq.append(out.action_logits)
            value_seq.append(out.value)
        logits = torch.stack(logits_seq)
        values = torch.stack(value_seq)
        actions = buffer.action[:, env_idx]
        l_dis = self.compute_distill(taps) if self.cfg.distill else torch.zeros(())
        return log_probs_for(logits, actions), entropy_of(logits), values, l_dis
