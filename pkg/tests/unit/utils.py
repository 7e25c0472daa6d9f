"""Independent reference implementations used as oracles by the unit tests."""

import numpy as np


def reference_softmax_loss(features, labels, weights):
    """Textbook softmax cross-entropy of ``XWᵀ`` with its gradients, written separately from
    the package so that agreement means something.
    """
    logits = features @ weights.T
    shifted = logits - logits.max(axis=1, keepdims=True)
    probs = np.exp(shifted)
    probs /= probs.sum(axis=1, keepdims=True)
    n = features.shape[0]
    loss = -np.mean(np.log(probs[np.arange(n), labels]))
    onehot = np.zeros_like(probs)
    onehot[np.arange(n), labels] = 1.0
    dlogits = (probs - onehot) / n
    return loss, dlogits @ weights, dlogits.T @ features


def naive_conv2d(x, weight, bias, stride=1, padding=0):
    """Seven nested loops, no vectorisation."""
    n, c, h, w = x.shape
    f, _, k, _ = weight.shape
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    out_h = (h + 2 * padding - k) // stride + 1
    out_w = (w + 2 * padding - k) // stride + 1
    out = np.zeros((n, f, out_h, out_w))
    for b in range(n):
        for o in range(f):
            for i in range(out_h):
                for j in range(out_w):
                    total = bias[o]
                    for ch in range(c):
                        for di in range(k):
                            for dj in range(k):
                                total += (
                                    xp[b, ch, i * stride + di, j * stride + dj]
                                    * weight[o, ch, di, dj]
                                )
                    out[b, o, i, j] = total
    return out


def naive_maxpool(x):
    n, c, h, w = x.shape
    out = np.zeros((n, c, h // 2, w // 2))
    for b in range(n):
        for ch in range(c):
            for i in range(h // 2):
                for j in range(w // 2):
                    out[b, ch, i, j] = x[b, ch, 2 * i : 2 * i + 2, 2 * j : 2 * j + 2].max()
    return out


def angle_psi(c, m):
    """ψ evaluated through θ = acos(c) directly."""
    theta = np.arccos(np.clip(c, -1.0, 1.0))
    k = np.minimum(np.floor(theta * m / np.pi), m - 1)
    return (-1.0) ** k * np.cos(m * theta) - 2.0 * k


def blob_config_text(**sections) -> str:
    """A small blob experiment as INI text. Keyword arguments add ``section__key`` values."""
    values = {
        "data": {
            "source": "blobs",
            "blob_classes": "3",
            "blob_dim": "2",
            "blob_per_class": "40",
            "blob_spread": "0.3",
            "fractions": "0.8, 0.1, 0.1",
        },
        "network": {"architecture": "dense 8, prelu, dense 2", "feature_dim": "2"},
        "loss": {
            "m": "2",
            "lambda_initial": "10",
            "lambda_min": "0.5",
            "lambda_gamma": "0.5",
            "lambda_window": "10",
        },
        "optim": {"learning_rate": "0.01", "batch_size": "32", "max_iterations": "30"},
    }
    for name, value in sections.items():
        section, key = name.split("__")
        values.setdefault(section, {})[key] = str(value)
    blocks = []
    for section, entries in values.items():
        blocks.append(f"[{section}]\n" + "\n".join(f"{k} = {v}" for k, v in entries.items()))
    return "\n\n".join(blocks) + "\n"
