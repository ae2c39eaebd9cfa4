"""
CSV exports behind the decision-boundary and adaptive-weight figures.

Exports are plain data; any plotting tool can render them.
"""

import csv
import logging
import os

import numpy as np

from data import apply_scaler
from network import ChebyAdaptiveLayer
from run_logger import RunLogger

logger = logging.getLogger(__name__)

BOUNDARY_FIELDS = ["kind", "x", "y", "true", "predicted", "misclassified"]
CURVE_FIELDS = ["o", "i", "x", "w"]


def write_csv(path, fieldnames, rows):
    """Write dict rows; None becomes an empty cell."""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow({key: ("" if row.get(key) is None else row.get(key)) for key in fieldnames})
    RunLogger.log_export(os.path.splitext(os.path.basename(path))[0], path, len(rows))
    return path


def _feature_pair(n_features, pair):
    if pair is None:
        if n_features != 2:
            raise ValueError(
                f"Model takes {n_features} features; choose the two to plot with a feature pair"
            )
        return 0, 1
    a, b = (int(v) for v in pair)
    if a == b or not (0 <= a < n_features and 0 <= b < n_features):
        raise ValueError(f"Feature pair ({a}, {b}) is invalid for {n_features} features")
    return a, b


def export_boundary_grid(net, resolution, dataset=None, scaler=None, pair=None):
    """Predicted class on a resolution x resolution lattice over [-1, 1]^2.

    Features outside the chosen pair are held at 0 on the lattice. When a
    dataset is given, one row per sample follows with its scaled coordinates,
    true and predicted class, and whether it was misclassified.

    Args:
        net: Trained Network
        resolution: Lattice points per axis (>= 2)
        dataset: Optional labelled samples (raw features) to overlay
        scaler: ScalerParams that maps the dataset onto the network's input
            range; None if the dataset is already scaled
        pair: Feature indices (a, b) plotted on the x and y axes

    Returns:
        list: Row dicts with keys BOUNDARY_FIELDS
    """
    if resolution < 2:
        raise ValueError(f"Resolution must be >= 2, got {resolution}")
    a, b = _feature_pair(net.in_features, pair)

    axis = np.linspace(-1.0, 1.0, resolution)
    gx, gy = np.meshgrid(axis, axis, indexing="ij")
    lattice = np.zeros((resolution * resolution, net.in_features))
    lattice[:, a] = gx.reshape(-1)
    lattice[:, b] = gy.reshape(-1)
    predicted = net.predict(lattice)

    rows = [
        {"kind": "grid", "x": float(x), "y": float(y), "true": None, "predicted": int(p), "misclassified": None}
        for x, y, p in zip(lattice[:, a], lattice[:, b], predicted)
    ]

    if dataset is not None:
        X = apply_scaler(scaler, dataset.X) if scaler is not None else dataset.X
        test_pred = net.predict(X)
        for point, truth, p in zip(X, dataset.y, test_pred):
            rows.append({
                "kind": "test",
                "x": float(point[a]),
                "y": float(point[b]),
                "true": int(truth),
                "predicted": int(p),
                "misclassified": int(truth != p),
            })
    logger.info(f"Boundary grid: {resolution}x{resolution} lattice, {len(rows) - resolution ** 2} samples")
    return rows


def export_weight_curves(net, layer_index, samples):
    """Tabulate w(x) = sum_j C[o, i, j] T_j(x) for every connection of a Chebyshev layer.

    Returns:
        list: Row dicts (o, i, x, w) at `samples` evenly spaced x in [-1, 1]
    """
    if not 0 <= layer_index < len(net.layers):
        raise IndexError(f"Layer index {layer_index} out of range [0, {len(net.layers)})")
    layer = net.layers[layer_index]
    if not isinstance(layer, ChebyAdaptiveLayer):
        raise ValueError(f"Layer {layer_index} is {layer}; weight curves need a Chebyshev-adaptive layer")
    if samples < 2:
        raise ValueError(f"Need at least 2 samples, got {samples}")

    xs = np.linspace(-1.0, 1.0, samples)
    rows = []
    for o in range(layer.out_features):
        for i in range(layer.in_features):
            for x, w in zip(xs, layer.weight_curve(o, i, xs)):
                rows.append({"o": o, "i": i, "x": float(x), "w": float(w)})
    return rows
