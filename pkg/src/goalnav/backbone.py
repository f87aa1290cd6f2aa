"""Dual-branch residual encoder with fusion blocks at intermediate stages.

Nine weighted layers per branch: a strided stem conv plus four residual
stages of two 3x3 convs each (shortcuts are parameter-free: average pooling
and zero channel padding). At each configured insertion point the goal-branch
feature drives a fusion block that rewrites the observation-branch feature;
stage outputs are tapped before fusion for the self-distillation loss.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import torch
import torch.nn as nn
import torch.nn.functional as F

from .fusion import make_fusion

FUSION_MODES = ("sca_wdm", "film", "none")


@dataclass
class BackboneConfig:
    resolution: int = 128
    in_channels: int = 3
    widths: tuple = (32, 64, 128, 256)
    strides: tuple = (2, 2, 2, 2)
    stem_stride: int = 2
    feat_dim: int = 512
    fusion_mode: str = "sca_wdm"
    fusion_points: tuple = (2, 3)   # 1-based stage indices, fused after the stage
    distill_taps: tuple = (2, 3)    # (shallow stage, deep stage)
    sca_local_kernel: int = 3
    wdm_reduction: int = 1
    ablation: dict = field(default_factory=dict)  # sca_spatial/sca_channel/wdm_a/x/b

    def validate(self):
        if len(self.widths) != 4 or len(self.strides) != 4:
            raise ValueError("expected exactly 4 residual stages")
        if self.fusion_mode not in FUSION_MODES:
            raise ValueError(f"fusion_mode must be one of {FUSION_MODES}")
        if any(not (1 <= p <= 4) for p in self.fusion_points):
            raise ValueError(f"fusion points out of range: {self.fusion_points}")
        s1, s2 = self.distill_taps
        if not (1 <= s1 < s2 <= 4):
            raise ValueError(f"bad distill taps: {self.distill_taps}")
        shapes = self.stage_shapes()
        c1, h1, w1 = shapes[s1 - 1]
        c2, h2, w2 = shapes[s2 - 1]
        if c2 != 2 * c1 or h1 != 2 * h2 or w1 != 2 * w2:
            raise ValueError(
                f"distill taps {self.distill_taps} break the pair contract: "
                f"stage {s1} -> {(c1, h1, w1)}, stage {s2} -> {(c2, h2, w2)}")
        if h2 * w2 <= 1:
            raise ValueError("deep tap has a single spatial location; "
                             "increase resolution or retap")
        return self

    def stage_shapes(self):
        """[C, H, W] after the stem and each stage, from the stride table.

        3x3 convs with padding 1 map size n to ceil(n / stride); the pooled
        shortcut uses ceil_mode to agree on odd sizes.
        """
        r = -(-self.resolution // self.stem_stride)
        shapes = []
        for w, s in zip(self.widths, self.strides):
            r = -(-r // s)
            shapes.append((w, r, r))
        return shapes


def _gn(channels):
    groups = 8
    while channels % groups:
        groups //= 2
    return nn.GroupNorm(groups, channels)


class ResidualStage(nn.Module):
    """Two 3x3 convs with group norm; pool-and-pad shortcut (no extra weights)."""

    def __init__(self, cin, cout, stride):
        super().__init__()
        self.conv1 = nn.Conv2d(cin, cout, 3, stride, 1)
        self.norm1 = _gn(cout)
        self.conv2 = nn.Conv2d(cout, cout, 3, 1, 1)
        self.norm2 = _gn(cout)
        self.stride = stride
        self.pad_channels = cout - cin

    def forward(self, x):
        out = self.norm2(self.conv2(F.relu(self.norm1(self.conv1(x)))))
        sc = F.avg_pool2d(x, self.stride, ceil_mode=True) if self.stride > 1 else x
        if self.pad_channels:
            sc = F.pad(sc, (0, 0, 0, 0, 0, self.pad_channels))
        return F.relu(out + sc)


class EncoderBranch(nn.Module):
    """Stem plus four residual stages; callable stage by stage."""

    def __init__(self, cfg):
        super().__init__()
        self.stem = nn.Sequential(
            nn.Conv2d(cfg.in_channels, cfg.widths[0], 3, cfg.stem_stride, 1),
            _gn(cfg.widths[0]), nn.ReLU())
        stages = []
        cin = cfg.widths[0]
        for w, s in zip(cfg.widths, cfg.strides):
            stages.append(ResidualStage(cin, w, s))
            cin = w
        self.stages = nn.ModuleList(stages)

    def forward_all(self, x):
        x = self.stem(x)
        outs = []
        for stage in self.stages:
            x = stage(x)
            outs.append(x)
        return outs


@dataclass
class GoalFeatures:
    """Goal-branch activations reused across one episode."""
    stage_feats: list          # per-stage maps
    final_map: torch.Tensor    # last stage map, feeds the scene-graph readout
    pooled: torch.Tensor       # GAP of the last stage (two-tower mode)

    def select(self, idx):
        return GoalFeatures([f[idx] for f in self.stage_feats],
                            self.final_map[idx], self.pooled[idx])


@dataclass
class BackboneOutput:
    feature: torch.Tensor      # [B, feat_dim] fused embedding
    taps: dict                 # stage index -> pre-fusion observation map
    goal_map: torch.Tensor     # [B, C4, h, w]
    obs_pooled: torch.Tensor   # [B, C4] observation-only GAP (pre-head)


class DualBackbone(nn.Module):
    def __init__(self, cfg):
        super().__init__()
        cfg.validate()
        self.cfg = cfg
        self.obs_branch = EncoderBranch(cfg)
        self.goal_branch = EncoderBranch(cfg)
        blocks = {}
        for p in cfg.fusion_points:
            if cfg.fusion_mode == "sca_wdm":
                blocks[str(p)] = make_fusion(
                    "sca_wdm", cfg.widths[p - 1],
                    local_kernel=cfg.sca_local_kernel,
                    wdm_reduction=cfg.wdm_reduction,
                    **cfg.ablation)
            else:
                blocks[str(p)] = make_fusion(cfg.fusion_mode, cfg.widths[p - 1])
        self.fusion_blocks = nn.ModuleDict(blocks)
        head_in = cfg.widths[-1] * (2 if cfg.fusion_mode == "none" else 1)
        self.head = nn.Linear(head_in, cfg.feat_dim)

    def weighted_conv_layers(self):
        """Conv layers in one encoder branch (stem + residual stages)."""
        return 1 + sum(2 for _ in self.obs_branch.stages)

    def forward_goal(self, goal_img):
        feats = self.goal_branch.forward_all(goal_img)
        return GoalFeatures(feats, feats[-1], feats[-1].mean(dim=(2, 3)))

    def forward_obs(self, obs_img, goal_feats):
        cfg = self.cfg
        if obs_img.shape[-1] != cfg.resolution or obs_img.shape[-2] != cfg.resolution:
            raise ValueError(
                f"expected {cfg.resolution}x{cfg.resolution} input, "
                f"got {tuple(obs_img.shape[-2:])}")
        x = self.obs_branch.stem(obs_img)
        taps = {}
        for i, stage in enumerate(self.obs_branch.stages, start=1):
            x = stage(x)
            if i in cfg.distill_taps:
                taps[i] = x
            if i in cfg.fusion_points:
                x = self.fusion_blocks[str(i)](x, goal_feats.stage_feats[i - 1])
        obs_pooled = x.mean(dim=(2, 3))
        pooled = obs_pooled
        if cfg.fusion_mode == "none":
            pooled = torch.cat([pooled, goal_feats.pooled], dim=1)
        return BackboneOutput(self.head(pooled), taps, goal_feats.final_map, obs_pooled)

    def forward(self, obs_img, goal_img):
        return self.forward_obs(obs_img, self.forward_goal(goal_img))


def backbone_forward(obs_img, goal_img, params):
    """Functional form: params is a DualBackbone module."""
    return params(obs_img, goal_img)
