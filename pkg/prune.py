"""
Pruning for trained networks.

Two strategies share one layer-by-layer procedure (forward_prune):

* threshold: every weight or coefficient whose magnitude is below tau is
  zeroed on its own, with no regard to which expansion it belongs to.
* group: for a Chebyshev layer, the k+1 coefficients linking output o to
  input i are removed together when their Euclidean norm is below tau.

Pruned positions are frozen at exactly zero: fine-tuning zeroes both the
parameters and their gradients at masked positions on every step. Biases
are never pruned.
"""

import logging
import math

import numpy as np

from models import PruneReport
from network import ChebyAdaptiveLayer
from numcore import ShapeError
from run_logger import RunLogger
from training import TrainingDivergedError

logger = logging.getLogger(__name__)

STRATEGIES = (PruneReport.STRATEGY_THRESHOLD, PruneReport.STRATEGY_GROUP)

DEFAULT_PERCENTILES = (50, 70, 80, 90)


class PruneDivergedError(RuntimeError):
    """Raised when fine-tuning after a prune step stops producing a finite loss.

    The network has already been restored to the checkpoint taken before the
    failing layer was pruned; `masks` holds the matching MaskSet.
    """

    def __init__(self, message, layer=None, masks=None):
        super().__init__(message)
        self.layer = layer
        self.masks = masks


class MaskSet:
    """Boolean masks mirroring Network.parameters(); True = active, False = zeroed and frozen."""

    def __init__(self, masks):
        self.masks = [np.asarray(m, dtype=bool) for m in masks]

    @classmethod
    def full(cls, net):
        return cls([np.ones(p.shape, dtype=bool) for p in net.parameters()])

    def check(self, net):
        params = net.parameters()
        if len(params) != len(self.masks):
            raise ShapeError(f"MaskSet holds {len(self.masks)} masks, network has {len(params)} parameter arrays")
        for idx, (p, m) in enumerate(zip(params, self.masks)):
            if p.shape != m.shape:
                raise ShapeError(f"Mask {idx} has shape {m.shape}, parameter has {p.shape}")
        return self

    def layer_mask(self, layer_index):
        """Mask of a layer's weight tensor (index 2l; index 2l+1 is its bias)."""
        return self.masks[2 * layer_index]

    def set_layer_mask(self, layer_index, mask):
        current = self.masks[2 * layer_index]
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != current.shape:
            raise ShapeError(f"Mask shape {mask.shape} does not match layer {layer_index} weights {current.shape}")
        self.masks[2 * layer_index] = mask

    def apply(self, net):
        """Zero every masked parameter in place."""
        for p, m in zip(net.parameters(), self.masks):
            p[~m] = 0.0

    def mask_gradients(self, grads):
        for g, m in zip(grads, self.masks):
            g[~m] = 0.0

    def zeroed_count(self, layer_index=None):
        if layer_index is not None:
            return int(np.count_nonzero(~self.layer_mask(layer_index)))
        return int(sum(np.count_nonzero(~m) for m in self.masks))

    def copy(self):
        return MaskSet([m.copy() for m in self.masks])


def threshold_prune(params, tau):
    """Mask that is False exactly where |param| < tau."""
    if math.isnan(tau) or tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    return np.abs(np.asarray(params, dtype=np.float64)) >= tau


def group_norm(C, o, i):
    """sqrt(sum_j C[o, i, j]^2) for one coefficient group."""
    C = np.asarray(C, dtype=np.float64)
    if C.ndim != 3:
        raise ShapeError(f"Coefficient tensor must be 3-D, got shape {C.shape}")
    if not 0 <= o < C.shape[0]:
        raise IndexError(f"Output index {o} out of range [0, {C.shape[0]})")
    if not 0 <= i < C.shape[1]:
        raise IndexError(f"Feature index {i} out of range [0, {C.shape[1]})")
    return float(np.sqrt(np.sum(C[o, i] ** 2)))


def group_norms(C):
    """Matrix of group norms, shape (out, in)."""
    C = np.asarray(C, dtype=np.float64)
    return np.sqrt(np.sum(C * C, axis=2))


def group_prune(layer, tau):
    """Mask the whole coefficient group (o, i) when its norm is below tau."""
    if math.isnan(tau) or tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    C = layer.C if isinstance(layer, ChebyAdaptiveLayer) else np.asarray(layer, dtype=np.float64)
    keep = group_norms(C) >= tau
    return np.repeat(keep[:, :, None], C.shape[2], axis=2)


def layer_statistic(layer, strategy):
    """Values compared against tau: |params| for threshold, group norms for group."""
    if strategy == PruneReport.STRATEGY_GROUP and isinstance(layer, ChebyAdaptiveLayer):
        return group_norms(layer.C).reshape(-1)
    return np.abs(layer.parameters()[0]).reshape(-1)


def prune_layer(layer, tau, strategy):
    if strategy not in STRATEGIES:
        raise ValueError(f"Unknown pruning strategy {strategy!r}; expected one of {STRATEGIES}")
    if strategy == PruneReport.STRATEGY_GROUP and isinstance(layer, ChebyAdaptiveLayer):
        return group_prune(layer, tau)
    return threshold_prune(layer.parameters()[0], tau)


def percentile_tau(values, pct):
    """Smallest tau that zeroes at least pct % of values under the `value < tau` rule."""
    if not 0 <= pct <= 100:
        raise ValueError(f"Percentile must lie in [0, 100], got {pct}")
    ordered = np.sort(np.abs(np.asarray(values, dtype=np.float64).reshape(-1)))
    n_prune = int(math.ceil(pct / 100.0 * ordered.size - 1e-9))
    if n_prune <= 0:
        return 0.0
    return float(np.nextafter(ordered[n_prune - 1], np.inf))


def _resolve_tau(tau, layer_index, layer):
    if callable(tau):
        return float(tau(layer_index, layer))
    if isinstance(tau, dict):
        return float(tau[layer_index])
    if isinstance(tau, (list, tuple, np.ndarray)):
        return float(tau[layer_index])
    return float(tau)


def layer_breakdown(net, masks):
    rows = []
    for idx, layer in enumerate(net.layers):
        total = int(masks.layer_mask(idx).size)
        zeroed = masks.zeroed_count(idx)
        rows.append({
            "layer": idx,
            "type": layer.KIND,
            "total": total,
            "zeroed": zeroed,
            "compression": 100.0 * zeroed / total if total else 0.0,
        })
    return rows


def forward_prune(net, tau, fine_tune, order=None, strategy=PruneReport.STRATEGY_THRESHOLD,
                  masks=None, evaluate=None):
    """Prune layers one at a time, fine-tuning the surviving parameters after each.

    Args:
        net: Trained Network, pruned in place
        tau: Threshold as a float, a per-layer sequence or dict, or a
            callable (layer_index, layer) -> float evaluated just before the
            layer is pruned, so it sees the fine-tuned values left by the
            earlier layers
        fine_tune: Callable (net, masks) -> final loss; must keep masked
            positions at zero (train_network(..., masks=masks) does)
        order: Layer indices to prune; pruned in ascending order. All layers if None
        strategy: "threshold" or "group"
        masks: Existing MaskSet to extend; new masks are combined with it so
            pruned positions never reactivate
        evaluate: Optional callable (net) -> accuracy recorded before and after

    Returns:
        tuple: (net, MaskSet, PruneReport)
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"Unknown pruning strategy {strategy!r}; expected one of {STRATEGIES}")
    n_layers = len(net.layers)
    order = sorted(set(range(n_layers) if order is None else order))
    for idx in order:
        if not 0 <= idx < n_layers:
            raise IndexError(f"Layer index {idx} out of range [0, {n_layers})")

    masks = (masks.copy() if masks is not None else MaskSet.full(net)).check(net)
    accuracy_before = evaluate(net) if evaluate is not None else None
    taus = []

    for idx in order:
        layer = net.layers[idx]
        tau_l = _resolve_tau(tau, idx, layer)
        taus.append(tau_l)
        checkpoint = [p.copy() for p in net.parameters()]
        previous = masks.copy()

        new_mask = prune_layer(layer, tau_l, strategy) & masks.layer_mask(idx)
        newly_zeroed = int(np.count_nonzero(masks.layer_mask(idx) & ~new_mask))
        masks.set_layer_mask(idx, new_mask)
        masks.apply(net)
        RunLogger.log_event("prune_layer", {
            "layer": idx, "strategy": strategy, "tau": tau_l,
            "newly_zeroed": newly_zeroed, "zeroed": masks.zeroed_count(idx),
        })
        if newly_zeroed == 0:
            continue

        try:
            loss = fine_tune(net, masks)
        except TrainingDivergedError as e:
            logger.error(f"Fine-tuning after pruning layer {idx} diverged: {e}")
            loss = float("nan")
        if loss is not None and not np.isfinite(loss):
            net.load_parameters(checkpoint)
            raise PruneDivergedError(
                f"Fine-tuning diverged after pruning layer {idx}; parameters restored to the last good checkpoint",
                layer=idx, masks=previous,
            )
        masks.apply(net)

    accuracy_after = evaluate(net) if evaluate is not None else None
    report = PruneReport(strategy, taus, layer_breakdown(net, masks), accuracy_before, accuracy_after)
    logger.info(f"{report}; accuracy {accuracy_before} -> {accuracy_after}")
    return net, masks, report


def sweep_percentiles(net, percentiles, fine_tune, evaluate, strategy=PruneReport.STRATEGY_THRESHOLD,
                      order=None, tolerance=1.0):
    """Try per-layer percentile thresholds on clones of a trained network.

    Picks the highest compression whose accuracy stays within `tolerance`
    points of the unpruned network; if none does, the most accurate candidate.

    Returns:
        tuple: (pruned net, MaskSet, PruneReport, frontier rows)
    """
    percentiles = sorted(set(percentiles))
    if not percentiles:
        raise ValueError("At least one percentile is required")
    baseline = evaluate(net)

    candidates = []
    frontier = []
    for pct in percentiles:
        def tau_at(idx, layer, pct=pct):
            return percentile_tau(layer_statistic(layer, strategy), pct)

        try:
            pruned, masks, report = forward_prune(net.copy(), tau_at, fine_tune, order, strategy, evaluate=evaluate)
        except PruneDivergedError as e:
            logger.warning(f"Percentile {pct} abandoned: {e}")
            frontier.append({"percentile": pct, "failed": str(e)})
            continue
        report.percentile = pct
        report.accuracy_before = baseline
        candidates.append((pruned, masks, report))
        frontier.append(report.to_dict())

    if not candidates:
        raise PruneDivergedError("Every percentile in the sweep diverged during fine-tuning")

    acceptable = [c for c in candidates if c[2].accuracy_after >= baseline - tolerance]
    if acceptable:
        best = max(acceptable, key=lambda c: (c[2].compression, c[2].accuracy_after))
    else:
        logger.warning(f"No percentile kept accuracy within {tolerance} points of {baseline:.3f}")
        best = max(candidates, key=lambda c: (c[2].accuracy_after, c[2].compression))
    pruned, masks, report = best
    return pruned, masks, report, frontier
