"""Shared test utilities: parameter extraction and finite-difference checks."""
import numpy as np
import torch


def npf(t):
    return t.detach().cpu().double().numpy()


def sca_params(m):
    return {
        "qk_w": npf(m.conv_qk.weight)[:, :, 0, 0], "qk_b": npf(m.conv_qk.bias),
        "ch_w": npf(m.conv_channel.weight)[:, :, 0, 0], "ch_b": npf(m.conv_channel.bias),
        "loc_w": npf(m.conv_local.weight)[0, 0], "loc_b": float(npf(m.conv_local.bias)[0]),
        "out_w": npf(m.conv_out.weight)[:, :, 0, 0], "out_b": npf(m.conv_out.bias),
    }


def wdm_params(m):
    return {
        "a1_w": npf(m.conv_a1.weight)[:, :, 0, 0], "a1_b": npf(m.conv_a1.bias),
        "a2_w": npf(m.conv_a2.weight)[:, :, 0, 0], "a2_b": npf(m.conv_a2.bias),
        "x1_w": npf(m.conv_x1.weight)[:, :, 0, 0], "x1_b": npf(m.conv_x1.bias),
        "dw_w": npf(m.conv_x_dw.weight)[:, 0], "dw_b": npf(m.conv_x_dw.bias),
        "b_w": npf(m.conv_b.weight)[:, :, 0, 0], "b_b": npf(m.conv_b.bias),
    }


def central_difference(loss_fn, tensor, indices, h=1e-5):
    """Central finite differences of loss_fn at the given flat indices."""
    flat = tensor.data.reshape(-1)
    grads = np.zeros(len(indices))
    for n, i in enumerate(indices):
        orig = flat[i].item()
        flat[i] = orig + h
        fp = loss_fn().item()
        flat[i] = orig - h
        fm = loss_fn().item()
        flat[i] = orig
        grads[n] = (fp - fm) / (2.0 * h)
    return grads


def assert_grad_match(loss_fn, tensors, tol=1e-4, h=1e-5, max_coords=24, seed=0):
    """Analytic (autograd) vs central-difference gradients, 64-bit.

    Checks every coordinate of small tensors and a seeded random subset of
    large ones. Relative error uses max(1, |fd|) in the denominator.
    """
    loss = loss_fn()
    grads = torch.autograd.grad(loss, tensors, allow_unused=False)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for t, g in zip(tensors, grads):
        n = t.numel()
        idx = (range(n) if n <= max_coords
               else sorted(rng.choice(n, size=max_coords, replace=False)))
        fd = central_difference(loss_fn, t, list(idx), h=h)
        an = g.detach().reshape(-1).numpy()[list(idx)]
        err = np.abs(an - fd) / np.maximum(1.0, np.abs(fd))
        worst = max(worst, float(err.max()))
        assert err.max() < tol, (
            f"gradient mismatch on {tuple(t.shape)}: max rel err {err.max():.3e}")
    return worst
