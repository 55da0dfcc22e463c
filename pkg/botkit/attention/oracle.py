#!/usr/bin/python3
"""This module implements slow reference versions of the attention layers used
to check the vectorized ones: explicit loops over position pairs and the
single-head attention form of a non-local layer."""
from typing import Tuple

import numpy as np

from botkit.schema import MHSAConfig
from botkit.tensor import Tensor, add, conv2d
from .mhsa import mhsa2d
from .params import MHSAParams, NonLocalParams

def brute_relative_logits(q: np.ndarray, r_h: np.ndarray, r_w: np.ndarray, height: int, width: int) -> np.ndarray:
    """Double loop over position pairs: q[p] . (r_h[a - i + H - 1] + r_w[c - j + W - 1])."""
    batch, heads, positions, _ = q.shape
    logits = np.zeros((batch, heads, positions, positions))
    for p in range(positions):
        i, j = divmod(p, width)
        for p_key in range(positions):
            a, c = divmod(p_key, width)
            r = r_h[a - i + height - 1] + r_w[c - j + width - 1]
            logits[:, :, p, p_key] = q[:, :, p, :] @ r
    return logits

def naive_mhsa(x: np.ndarray, params: MHSAParams, config: MHSAConfig) -> np.ndarray:
    """This function evaluates attention with explicit loops over batch, heads and
    position pairs.

    Args:
        x:
            Array[N, d, H, W].

        params:
            Layer parameters.

        config:
            Layer geometry and logit terms.

    Returns:
        Array[N, d, H, W].
    """
    batch, _, height, width = x.shape
    d_head = config.d_head
    wq, wk, wv = (getattr(params, name).numpy()[:, :, 0, 0] for name in ('wq', 'wk', 'wv'))
    out = np.zeros(x.shape)
    for b in range(batch):
        pixels = {(i, j): x[b, :, i, j] for i in range(height) for j in range(width)}
        q = {p: wq @ value * config.logit_scale for p, value in pixels.items()}
        k = {p: wk @ value for p, value in pixels.items()}
        v = {p: wv @ value for p, value in pixels.items()}
        keys = list(pixels)
        for head in range(config.heads):
            part = slice(head * d_head, (head + 1) * d_head)
            for (i, j), query in q.items():
                logits = []
                for index, (a, c) in enumerate(keys):
                    logit = 0.0
                    if config.content_logits:
                        logit += query[part] @ k[(a, c)][part]
                    if config.pos_mode == 'relative':
                        r = params.r_h.numpy()[a - i + height - 1] + params.r_w.numpy()[c - j + width - 1]
                        logit += query[part] @ r
                    elif config.pos_mode == 'absolute':
                        logit += query[part] @ params.p_abs.numpy()[index]
                    logits.append(logit)
                logits = np.array(logits)
                weights = np.exp(logits - logits.max())
                weights /= weights.sum()
                out[b, part, i, j] = sum(w * v[key][part] for w, key in zip(weights, keys))
    return out

def permute_positions(x: np.ndarray, permutation: np.ndarray) -> np.ndarray:
    """Applies one permutation to the flattened spatial positions."""
    batch, channels, height, width = x.shape
    return x.reshape(batch, channels, height * width)[:, :, permutation].reshape(x.shape)

def nonlocal_as_mhsa(params: NonLocalParams, height: int, width: int) -> Tuple[MHSAParams, MHSAConfig, Tensor]:
    """This function rewrites a non-local layer without value projection as
    position-free single-head attention on the full width. The embeddings are
    zero-padded to C rows, the query is multiplied by sqrt(C) to undo the logit
    scale, and the output projection is padded with zero columns.

    Args:
        params:
            Non-local parameters, g absent.

        height, width:
            Featuremap extent.

    Returns:
        Attention parameters, their config and the padded output projection.
    """
    theta, phi, z = params.theta.numpy(), params.phi.numpy(), params.z.numpy()
    inner, channels = theta.shape[:2]
    padding = np.zeros((channels - inner, channels, 1, 1))
    config = MHSAConfig(d_model=channels, heads=1, fm_h=height, fm_w=width, pos_mode='none')
    attention = MHSAParams(
        wq=Tensor(np.concatenate([theta * np.sqrt(float(channels)), padding])),
        wk=Tensor(np.concatenate([phi, padding])),
        wv=Tensor(np.concatenate([phi, padding])),
    )
    z_wide = Tensor(np.concatenate([z, np.zeros((channels, channels - inner, 1, 1))], axis=1))
    return attention, config, z_wide

def nonlocal_via_mhsa(x: Tensor, params: NonLocalParams) -> Tensor:
    """x + Wz' mhsa(x) with the construction of nonlocal_as_mhsa."""
    attention, config, z_wide = nonlocal_as_mhsa(params, x.shape[2], x.shape[3])
    return add(x, conv2d(mhsa2d(x, attention, config), z_wide))
