"""
Parameter update rules: Adam (used for every experiment), and SGD with
optional momentum.

Parameters and gradients are lists of numpy arrays laid out like
Network.parameters(); updates happen in place.
"""

import numpy as np

from numcore import ShapeError


def _check_shapes(params, grads, reference):
    if len(params) != len(grads) or len(params) != len(reference):
        raise ShapeError(f"{len(params)} parameter arrays, {len(grads)} gradients, {len(reference)} state slots")
    for idx, (p, g, r) in enumerate(zip(params, grads, reference)):
        if p.shape != np.shape(g) or p.shape != r.shape:
            raise ShapeError(f"Parameter {idx} has shape {p.shape}, gradient {np.shape(g)}, state {r.shape}")


class AdamState:
    """First/second moment estimates and step counter for Adam."""

    def __init__(self, params, lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = [np.zeros_like(p, dtype=np.float64) for p in params]
        self.v = [np.zeros_like(p, dtype=np.float64) for p in params]
        self.t = 0


def adam_step(params, grads, state):
    """One bias-corrected Adam update.

    Args:
        params: List of parameter arrays, updated in place
        grads: Gradients matching params
        state: AdamState for these params

    Returns:
        tuple: (params, state)
    """
    _check_shapes(params, grads, state.m)
    state.t += 1
    correction1 = 1.0 - state.beta1 ** state.t
    correction2 = 1.0 - state.beta2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * np.square(g)
        m_hat = m / correction1
        v_hat = v / correction2
        p -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params, state


class SgdState:
    """Velocity buffers for SGD with momentum."""

    def __init__(self, params, lr=0.01, momentum=0.0):
        if not 0.0 <= momentum < 1.0:
            raise ValueError(f"momentum must lie in [0, 1), got {momentum}")
        self.lr = lr
        self.momentum = momentum
        self.velocity = [np.zeros_like(p, dtype=np.float64) for p in params]


def sgd_step(params, grads, lr, momentum, velocity):
    """v <- momentum * v + g; theta <- theta - lr * v. momentum = 0 is plain SGD.

    Returns:
        tuple: (params, velocity)
    """
    if not 0.0 <= momentum < 1.0:
        raise ValueError(f"momentum must lie in [0, 1), got {momentum}")
    _check_shapes(params, grads, velocity)
    for p, g, v in zip(params, grads, velocity):
        v *= momentum
        v += g
        p -= lr * v
    return params, velocity


class Adam:
    """Adam bound to a parameter list."""

    name = "adam"

    def __init__(self, params, lr=0.001):
        self.state = AdamState(params, lr=lr)

    def step(self, params, grads):
        adam_step(params, grads, self.state)


class SGD:
    """SGD (with momentum when momentum > 0) bound to a parameter list."""

    name = "sgd"

    def __init__(self, params, lr=0.01, momentum=0.0):
        self.state = SgdState(params, lr=lr, momentum=momentum)

    def step(self, params, grads):
        sgd_step(params, grads, self.state.lr, self.state.momentum, self.state.velocity)


OPTIMIZERS = ("adam", "sgd")


def make_optimizer(name, params, lr, momentum=0.0):
    if name == "adam":
        return Adam(params, lr=lr)
    if name == "sgd":
        return SGD(params, lr=lr, momentum=momentum)
    raise ValueError(f"Unknown optimizer {name!r}; expected one of {OPTIMIZERS}")
