"""
Training loop shared by experiments, pruning fine-tunes and the timing bench.
"""

import logging

import numpy as np

from metrics import accuracy, macro_f1
from network import softmax_cross_entropy
from numcore import as_matrix
from optim import make_optimizer

logger = logging.getLogger(__name__)


class TrainingDivergedError(RuntimeError):
    """Raised when the training loss stops being finite."""


def iterate_batches(n, batch_size, rng):
    """Index batches for one epoch: everything at once, or shuffled mini-batches."""
    if batch_size is None or batch_size >= n:
        return [slice(None)]
    order = rng.permutation(n)
    return [order[start:start + batch_size] for start in range(0, n, batch_size)]


def train_step(net, X, y, optimizer, params, masks=None):
    """Forward, backward and one optimizer update on a single batch; returns the loss."""
    logits, trace = net.forward(X)
    loss, dlogits = softmax_cross_entropy(logits, y)
    if not np.isfinite(loss):
        raise TrainingDivergedError(f"Loss became {loss}")
    grads = net.backward(trace, dlogits).arrays()
    if masks is not None:
        masks.mask_gradients(grads)
    optimizer.step(params, grads)
    if masks is not None:
        masks.apply(net)
    return loss


def train_network(net, X, y, lr=0.001, epochs=500, batch_size=None, rng=None,
                  optimizer="adam", momentum=0.0, masks=None):
    """Train a network in place.

    Args:
        net: Network to train
        X: Training features, already scaled to [-1, 1]
        y: Integer labels
        lr: Learning rate
        epochs: Number of passes over the data
        batch_size: None for full-batch descent, else the mini-batch size
        rng: numpy Generator used to shuffle mini-batches
        optimizer: "adam" or "sgd"
        momentum: SGD momentum
        masks: Optional MaskSet; masked parameters and their gradients are
            zeroed on every step so they stay frozen at 0

    Returns:
        list: Mean training loss per epoch
    """
    X = as_matrix(X, "training features")
    y = np.asarray(y, dtype=np.int64)
    rng = rng if rng is not None else np.random.default_rng(0)

    params = net.parameters()
    opt = make_optimizer(optimizer, params, lr, momentum)
    if masks is not None:
        masks.apply(net)

    n = X.shape[0]
    history = []
    for epoch in range(epochs):
        total = 0.0
        for idx in iterate_batches(n, batch_size, rng):
            xb, yb = X[idx], y[idx]
            try:
                loss = train_step(net, xb, yb, opt, params, masks)
            except TrainingDivergedError as e:
                raise TrainingDivergedError(f"{e} at epoch {epoch}") from None
            total += loss * yb.shape[0]
        history.append(total / n)

    if not all(np.all(np.isfinite(p)) for p in params):
        raise TrainingDivergedError("Parameters became non-finite during training")
    logger.debug(f"Trained {net} for {epochs} epochs, final loss {history[-1] if history else float('nan'):.6f}")
    return history


def evaluate(net, X, y, n_classes):
    """Return (accuracy %, macro-F1 %) of the network on a labelled set."""
    preds = net.predict(X)
    return accuracy(preds, y), macro_f1(preds, y, n_classes)
