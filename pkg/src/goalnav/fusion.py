"""Goal/observation feature fusion.

The fused map is w1 * obs + w2 * goal, where both weight volumes come from a
weight decoupler driven by spatial-channel attention over the goal-branch
feature. A minimal FiLM block is included as the ablation baseline.
"""
from __future__ import annotations

import math

import torch
import torch.nn as nn
import torch.nn.functional as F


class FusionShapeError(ValueError):
    """Input shape inconsistent with the configured channel count."""


def _check_channels(x, channels, who):
    if x.dim() != 4:
        raise FusionShapeError(f"{who} expects [B, C, H, W], got {tuple(x.shape)}")
    if x.shape[1] != channels:
        raise FusionShapeError(
            f"{who} configured for {channels} channels, got {x.shape[1]}")


class SpatialChannelAttention(nn.Module):
    """Per-channel spatial self-attention gated by local-global channel attention.

    Spatial branch: one convolution produces Q and K (split along channels),
    V is the input itself; every channel acts as an independent attention head
    of dimension 1 over the H*W locations, scaled by sqrt(input channels).
    Channel branch: 1x1 conv -> global average pool -> 1-d conv across the
    channel axis -> output 1x1 conv, producing a per-channel gate that
    multiplies the spatial attention output elementwise.
    """

    def __init__(self, channels, local_kernel=3, use_spatial=True, use_channel=True):
        super().__init__()
        if local_kernel % 2 != 1:
            raise ValueError("local_kernel must be odd")
        self.channels = channels
        self.use_spatial = use_spatial
        self.use_channel = use_channel
        self.conv_qk = nn.Conv2d(channels, 2 * channels, 1)
        self.conv_channel = nn.Conv2d(channels, channels, 1)
        self.conv_local = nn.Conv1d(1, 1, local_kernel, padding=local_kernel // 2)
        self.conv_out = nn.Conv2d(channels, channels, 1)

    def attention_rows(self, x):
        """Per-head attention matrices [B, C, L, L]; rows sum to 1."""
        b, c = x.shape[0], x.shape[1]
        l = x.shape[2] * x.shape[3]
        q, k = self.conv_qk(x).chunk(2, dim=1)
        q = q.reshape(b, c, l)
        k = k.reshape(b, c, l)
        scores = q.unsqueeze(-1) * k.unsqueeze(-2) / math.sqrt(self.channels)
        return torch.softmax(scores, dim=-1)  # rows over key locations

    def spatial_attention(self, x):
        b, c, h, w = x.shape
        attn = self.attention_rows(x)
        v = x.reshape(b, c, h * w)
        return torch.matmul(attn, v.unsqueeze(-1)).squeeze(-1).reshape(b, c, h, w)

    def channel_gate(self, x):
        b, c = x.shape[0], x.shape[1]
        pooled = self.conv_channel(x).mean(dim=(2, 3))  # [B, C]
        local = self.conv_local(pooled.unsqueeze(1)).squeeze(1)
        return self.conv_out(local.reshape(b, c, 1, 1))

    def forward(self, x):
        _check_channels(x, self.channels, "SpatialChannelAttention")
        s_w = self.spatial_attention(x) if self.use_spatial else x
        if not self.use_channel:
            return s_w
        return self.channel_gate(x) * s_w


def sca_forward(x, params):
    """Functional form: params is a SpatialChannelAttention module."""
    return params(x)


class WeightDecoupler(nn.Module):
    """Affine weight generator W = A * x + b over an attention feature.

    A: per-channel factor from pooled features through two 1x1 convs with a
    ReLU between; x: spatial map in (0, 1) from a 1x1 conv, a 3x3 depthwise
    conv and a sigmoid; b: additive map from a single 1x1 conv. The use_*
    flags implement the branch ablations (a disabled factor becomes the
    identity of its operation).
    """

    def __init__(self, channels, reduction=1, use_a=True, use_x=True, use_b=True):
        super().__init__()
        self.channels = channels
        hidden = max(channels // reduction, 1)
        self.conv_a1 = nn.Conv2d(channels, hidden, 1)
        self.conv_a2 = nn.Conv2d(hidden, channels, 1)
        self.conv_x1 = nn.Conv2d(channels, channels, 1)
        self.conv_x_dw = nn.Conv2d(channels, channels, 3, padding=1, groups=channels)
        self.conv_b = nn.Conv2d(channels, channels, 1)
        self.use_a = use_a
        self.use_x = use_x
        self.use_b = use_b

    def branch_a(self, f):
        pooled = f.mean(dim=(2, 3), keepdim=True)
        return self.conv_a2(F.relu(self.conv_a1(pooled)))

    def branch_x(self, f):
        return torch.sigmoid(self.conv_x_dw(self.conv_x1(f)))

    def forward(self, f_sca):
        _check_channels(f_sca, self.channels, "WeightDecoupler")
        w = self.branch_a(f_sca) if self.use_a else f_sca.new_ones(())
        if self.use_x:
            w = w * self.branch_x(f_sca)
        elif not self.use_a:
            w = f_sca.new_ones(f_sca.shape)
        if self.use_b:
            w = w + self.conv_b(f_sca)
        return w.expand_as(f_sca) if w.dim() != 4 else w


def wdm_forward(f_sca, params):
    """Functional form: params is a WeightDecoupler module."""
    return params(f_sca)


def fuse(x_obs, x_goal, w1, w2):
    """Elementwise weighted sum of the two branches: w1 * obs + w2 * goal."""
    if not (x_obs.shape == x_goal.shape == w1.shape == w2.shape):
        raise FusionShapeError(
            f"fuse shape mismatch: obs {tuple(x_obs.shape)}, goal {tuple(x_goal.shape)}, "
            f"w1 {tuple(w1.shape)}, w2 {tuple(w2.shape)}")
    return w1 * x_obs + w2 * x_goal


class AttentionFusion(nn.Module):
    """Full fusion block: attention over the goal feature drives two weight
    decouplers, one per branch of the weighted sum."""

    def __init__(self, channels, local_kernel=3, wdm_reduction=1,
                 sca_spatial=True, sca_channel=True,
                 wdm_a=True, wdm_x=True, wdm_b=True):
        super().__init__()
        self.sca = SpatialChannelAttention(channels, local_kernel,
                                           use_spatial=sca_spatial,
                                           use_channel=sca_channel)
        self.wdm_obs = WeightDecoupler(channels, wdm_reduction, wdm_a, wdm_x, wdm_b)
        self.wdm_goal = WeightDecoupler(channels, wdm_reduction, wdm_a, wdm_x, wdm_b)

    def forward(self, x_obs, x_goal):
        f_sca = self.sca(x_goal)
        return fuse(x_obs, x_goal, self.wdm_obs(f_sca), self.wdm_goal(f_sca))


class FilmFusion(nn.Module):
    """Minimal FiLM baseline: pooled goal feature produces per-channel
    scale/shift applied to the observation feature."""

    def __init__(self, channels):
        super().__init__()
        self.mlp = nn.Sequential(nn.Linear(channels, channels), nn.ReLU(),
                                 nn.Linear(channels, 2 * channels))

    def forward(self, x_obs, x_goal):
        gamma, beta = self.mlp(x_goal.mean(dim=(2, 3))).chunk(2, dim=1)
        return gamma[:, :, None, None] * x_obs + beta[:, :, None, None]


class IdentityFusion(nn.Module):
    """Pass-through insertion point: plain two-tower encoder."""

    def forward(self, x_obs, x_goal):
        return x_obs


def make_fusion(mode, channels, **kwargs):
    if mode == "sca_wdm":
        return AttentionFusion(channels, **kwargs)
    if mode == "film":
        return FilmFusion(channels)
    if mode == "none":
        return IdentityFusion()
    raise ValueError(f"unknown fusion mode: {mode!r}")
