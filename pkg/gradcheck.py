"""Centered finite-difference checks of the hand-derived network gradients."""

import numpy as np

from network import GradientSet, softmax_cross_entropy


def loss_at(net, X, y):
    logits, _ = net.forward(X)
    loss, _ = softmax_cross_entropy(logits, y)
    return loss


def analytic_gradients(net, X, y):
    logits, trace = net.forward(X)
    _, dlogits = softmax_cross_entropy(logits, y)
    return net.backward(trace, dlogits)


def numerical_gradients(net, X, y, h=1e-6):
    """Gradient of the mean cross-entropy by (L(p + h) - L(p - h)) / 2h, one parameter at a time.

    Parameters are restored after each perturbation.

    Returns:
        GradientSet: Same layout as Network.backward
    """
    per_layer = []
    for layer in net.layers:
        layer_grads = []
        for p in layer.parameters():
            g = np.zeros_like(p)
            flat_p = p.reshape(-1)
            flat_g = g.reshape(-1)
            for idx in range(flat_p.size):
                original = flat_p[idx]
                flat_p[idx] = original + h
                plus = loss_at(net, X, y)
                flat_p[idx] = original - h
                minus = loss_at(net, X, y)
                flat_p[idx] = original
                flat_g[idx] = (plus - minus) / (2.0 * h)
            layer_grads.append(g)
        per_layer.append(layer_grads)
    return GradientSet(per_layer)


def max_relative_error(analytic, numeric):
    """max |a - n| / max(1, |a|) over every parameter."""
    worst = 0.0
    for a, n in zip(analytic.arrays(), numeric.arrays()):
        a = np.asarray(a)
        n = np.asarray(n)
        if a.shape != n.shape:
            raise ValueError(f"Gradient shapes differ: {a.shape} vs {n.shape}")
        if a.size:
            worst = max(worst, float(np.max(np.abs(a - n) / np.maximum(1.0, np.abs(a)))))
    return worst
