"""Parameter-free self-distillation between backbone stages.

A shallow feature [C/2, 2H, 2W] is rearranged by space-to-depth into two
[C, H, W] volumes; each volume and the deep feature [C, H, W] are turned into
attention weights by a parameter-free energy rule, and the shallow volumes
are pulled toward the deep one by cosine similarity. Gradients never flow
into the deep side (it is treated as ground truth).
"""
from __future__ import annotations

import torch
import torch.nn.functional as F

DEFAULT_LAMBDA = 1e-4
LOSS_SCALE = 0.2


def space_to_depth(x):
    """Move each 2x2 spatial block into 4 channels.

    Output channel layout is channel-major: input channel c maps to output
    channels 4c..4c+3 in offset order (0,0), (0,1), (1,0), (1,1). Values are
    only rearranged, never changed.
    """
    if x.dim() == 3:
        return space_to_depth(x.unsqueeze(0)).squeeze(0)
    h, w = x.shape[-2:]
    if h % 2 or w % 2:
        raise ValueError(f"space_to_depth needs even spatial dims, got {h}x{w}")
    return F.pixel_unshuffle(x, 2)


def simam_weights(f, lam=DEFAULT_LAMBDA):
    """Parameter-free attention volume in (0, 1).

    Each activation's weight comes from its squared deviation from the
    channel mean, normalized by 4 * (channel variance + lam), shifted by 0.5
    and squashed by a sigmoid.
    """
    if f.dim() == 3:
        return simam_weights(f.unsqueeze(0), lam).squeeze(0)
    h, w = f.shape[-2:]
    if h * w <= 1:
        raise ValueError("simam_weights needs H*W > 1 (variance denominator)")
    d = (f - f.mean(dim=(-2, -1), keepdim=True)).pow(2)
    n = 4.0 * (d.sum(dim=(-2, -1), keepdim=True) / (h * w - 1) + lam)
    return torch.sigmoid(d / n + 0.5)


def check_pair(shallow, deep):
    cs, hs, ws = shallow.shape[-3:]
    cd, hd, wd = deep.shape[-3:]
    if cd != 2 * cs or hs != 2 * hd or ws != 2 * wd:
        raise ValueError(
            f"distill pair contract violated: shallow {cs}x{hs}x{ws} vs deep "
            f"{cd}x{hd}x{wd} (need channels halved, spatial doubled)")
    if hd * wd <= 1:
        raise ValueError("deep feature needs H*W > 1")


def distill_loss(shallow, deep, lam=DEFAULT_LAMBDA):
    """Cosine alignment of shallow attention volumes to the deep one.

    The deep feature is detached: this loss trains only the layers producing
    the shallow feature. Returns 0.2 * (L_c1 + L_c2), each L_c = 1 - cosine
    over the flattened attention volumes, averaged over the batch.
    """
    check_pair(shallow, deep)
    squeeze = False
    if shallow.dim() == 3:
        shallow, deep = shallow.unsqueeze(0), deep.unsqueeze(0)
        squeeze = True
    c = deep.shape[1]
    s = space_to_depth(shallow)
    m_deep = simam_weights(deep.detach(), lam).flatten(1)
    losses = []
    for part in (s[:, :c], s[:, c:]):
        m_s = simam_weights(part, lam).flatten(1)
        losses.append(1.0 - F.cosine_similarity(m_s, m_deep, dim=1))
    out = LOSS_SCALE * (losses[0] + losses[1])
    return out.squeeze(0) if squeeze else out.mean()
