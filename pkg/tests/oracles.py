"""Independent straight-line reference implementations.

Everything here is written with explicit loops over numpy float64 arrays and
shares no code with the package. Parameters are passed as plain arrays
extracted from the torch modules. These are the ground truth the production
paths are checked against.
"""
import math

import numpy as np


def conv1x1(x, w, b):
    """x [C, H, W], w [Cout, Cin], b [Cout] -> [Cout, H, W]."""
    cout = w.shape[0]
    _, h, wd = x.shape
    out = np.zeros((cout, h, wd))
    for co in range(cout):
        for i in range(h):
            for j in range(wd):
                acc = b[co]
                for ci in range(x.shape[0]):
                    acc += w[co, ci] * x[ci, i, j]
                out[co, i, j] = acc
    return out


def softmax_row(row):
    m = row.max()
    e = np.exp(row - m)
    return e / e.sum()


def sca_oracle(x, p):
    """Spatial-channel attention on one [C, H, W] input.

    p: dict with qk_w [2C, C], qk_b [2C], ch_w [C, C], ch_b [C],
       loc_w [K], loc_b scalar, out_w [C, C], out_b [C].
    """
    c, h, w = x.shape
    l = h * w
    qk = conv1x1(x, p["qk_w"], p["qk_b"])
    q = qk[:c].reshape(c, l)
    k = qk[c:].reshape(c, l)
    v = x.reshape(c, l)
    s_w = np.zeros((c, l))
    for ch in range(c):
        for a in range(l):
            scores = np.empty(l)
            for b_ in range(l):
                scores[b_] = q[ch, a] * k[ch, b_] / math.sqrt(c)
            attn = softmax_row(scores)
            acc = 0.0
            for b_ in range(l):
                acc += attn[b_] * v[ch, b_]
            s_w[ch, a] = acc
    s_w = s_w.reshape(c, h, w)

    t = conv1x1(x, p["ch_w"], p["ch_b"])
    g = np.array([t[ch].mean() for ch in range(c)])
    kk = len(p["loc_w"])
    pad = kk // 2
    g_pad = np.zeros(c + 2 * pad)
    g_pad[pad:pad + c] = g
    loc = np.empty(c)
    for ch in range(c):
        acc = p["loc_b"]
        for d in range(kk):
            acc += p["loc_w"][d] * g_pad[ch + d]
        loc[ch] = acc
    gate = np.empty(c)
    for co in range(c):
        acc = p["out_b"][co]
        for ci in range(c):
            acc += p["out_w"][co, ci] * loc[ci]
        gate[co] = acc

    out = np.empty((c, h, w))
    for ch in range(c):
        out[ch] = gate[ch] * s_w[ch]
    return out


def depthwise3x3(x, w, b):
    """x [C, H, W], w [C, 3, 3], b [C], padding 1."""
    c, h, wd = x.shape
    out = np.zeros((c, h, wd))
    for ch in range(c):
        for i in range(h):
            for j in range(wd):
                acc = b[ch]
                for di in range(3):
                    for dj in range(3):
                        ii, jj = i + di - 1, j + dj - 1
                        if 0 <= ii < h and 0 <= jj < wd:
                            acc += w[ch, di, dj] * x[ch, ii, jj]
                out[ch, i, j] = acc
    return out


def wdm_oracle(f, p):
    """Weight decoupler on one [C, H, W] input.

    p: a1_w [Ch, C], a1_b, a2_w [C, Ch], a2_b, x1_w [C, C], x1_b,
       dw_w [C, 3, 3], dw_b, b_w [C, C], b_b.
    """
    c, h, w = f.shape
    gap = np.array([f[ch].mean() for ch in range(c)]).reshape(c, 1, 1)
    hid = conv1x1(gap, p["a1_w"], p["a1_b"])
    hid = np.maximum(hid, 0.0)
    a = conv1x1(hid, p["a2_w"], p["a2_b"])  # [C, 1, 1]
    x1 = conv1x1(f, p["x1_w"], p["x1_b"])
    xs = depthwise3x3(x1, p["dw_w"], p["dw_b"])
    xs = 1.0 / (1.0 + np.exp(-xs))
    b = conv1x1(f, p["b_w"], p["b_b"])
    out = np.empty((c, h, w))
    for ch in range(c):
        out[ch] = a[ch, 0, 0] * xs[ch] + b[ch]
    return out


def space_to_depth_oracle(x):
    """[C, 2H, 2W] -> [4C, H, W], offsets (0,0),(0,1),(1,0),(1,1)."""
    c, h2, w2 = x.shape
    h, w = h2 // 2, w2 // 2
    out = np.zeros((4 * c, h, w))
    offsets = ((0, 0), (0, 1), (1, 0), (1, 1))
    for ci in range(c):
        for o, (di, dj) in enumerate(offsets):
            for i in range(h):
                for j in range(w):
                    out[4 * ci + o, i, j] = x[ci, 2 * i + di, 2 * j + dj]
    return out


def simam_oracle(f, lam=1e-4):
    c, h, w = f.shape
    out = np.empty((c, h, w))
    for ch in range(c):
        mu = f[ch].mean()
        d = (f[ch] - mu) ** 2
        n = 4.0 * (d.sum() / (h * w - 1) + lam)
        out[ch] = 1.0 / (1.0 + np.exp(-(d / n + 0.5)))
    return out


def cosine_distance_oracle(a, b):
    num = 0.0
    na = 0.0
    nb = 0.0
    for x, y in zip(a.reshape(-1), b.reshape(-1)):
        num += x * y
        na += x * x
        nb += y * y
    return 1.0 - num / (math.sqrt(na) * math.sqrt(nb))


def distill_oracle(shallow, deep, lam=1e-4):
    c = deep.shape[0]
    s = space_to_depth_oracle(shallow)
    m_d = simam_oracle(deep, lam)
    l1 = cosine_distance_oracle(simam_oracle(s[:c], lam), m_d)
    l2 = cosine_distance_oracle(simam_oracle(s[c:], lam), m_d)
    return 0.2 * (l1 + l2)


def adjacency_oracle(feats):
    """feats [N, d] -> cosine similarity matrix via the double loop."""
    n = feats.shape[0]
    g = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            num = float(np.dot(feats[i], feats[j]))
            g[i, j] = num / (np.linalg.norm(feats[i]) * np.linalg.norm(feats[j]))
    return g


def gcn_readout_oracle(feats, weights, goal_map, proj_w, proj_b):
    """Three-layer graph conv with halving average pooling, goal-gated.

    feats [N, d] (all active), weights [W0, W1, W2], goal_map [Cg, h, w],
    proj_w [g3, Cg], proj_b [g3]. Mirrors: adjacency from cosine shifted to
    [0, 1], symmetric degree normalization, relu(G_hat H W), pool after
    layers 1 and 2, node mean, gate = GAP(conv1x1(goal)).
    """
    n = feats.shape[0]
    g = adjacency_oracle(feats)
    a = (g + 1.0) / 2.0
    deg = a.sum(axis=1)
    g_hat = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            g_hat[i, j] = a[i, j] / math.sqrt(deg[i]) / math.sqrt(deg[j])
    h = feats
    for layer, w in enumerate(weights):
        h = np.maximum(g_hat @ (h @ w), 0.0)
        if layer < 2:
            d = h.shape[1]
            h = 0.5 * (h[:, 0:d:2] + h[:, 1:d:2])
    h_graph = h.mean(axis=0)
    cg = goal_map.shape[0]
    gate = np.empty(len(proj_b))
    for o in range(len(proj_b)):
        acc = proj_b[o]
        for ci in range(cg):
            acc += proj_w[o, ci] * goal_map[ci].mean()
        gate[o] = acc
    return gate * h_graph, h_graph


def gae_oracle(rewards, values, dones, gamma, lam, bootstrap):
    """Backward-recursion reference for generalized advantage estimation."""
    t = len(rewards)
    adv = np.zeros(t)
    running = 0.0
    next_v = bootstrap
    for i in range(t - 1, -1, -1):
        nd = 1.0 - float(dones[i])
        delta = rewards[i] + gamma * next_v * nd - values[i]
        running = delta + gamma * lam * nd * running
        adv[i] = running
        next_v = values[i]
    return adv, adv + values
