"""
Forward and backward passes for MLP and Chebyshev-adaptive networks.

A Chebyshev-adaptive connection replaces the fixed weight w_i with an
input-dependent weight w_i(x_i) = sum_j c_ij T_j(x_i). In weight form a
neuron computes y = sum_i x_i w_i(x_i) + b; in expansion form it consumes
the raw basis, y = sum_i sum_j c_ij T_j(x_i) + b. Gradients are derived by
hand per layer type: the coefficient gradient is the product of the
upstream gradient and the basis feature each coefficient multiplies.

The module also owns the model file format shared with pruning and the
experiment harness.
"""

import json
import logging

import numpy as np

from chebybasis import cheb_deriv_expand, cheb_expand, squash, squash_deriv
from data import ScalerParams
from numcore import ShapeError, as_matrix, relu, row_argmax

logger = logging.getLogger(__name__)

MODEL_FORMAT_VERSION = 1

# Inputs this far beyond [-1, 1] are accepted by the identity map
RANGE_TOLERANCE = 1e-9


class InputRangeError(ValueError):
    """Raised when an identity-mapped Chebyshev layer sees |x| > 1."""

    def __init__(self, feature, value, sample):
        self.feature = feature
        self.value = value
        self.sample = sample
        super().__init__(
            f"Input feature {feature} is outside [-1, 1] (value {value!r} in sample {sample}); "
            "scale the data or use the clamp/squash input map"
        )


class ModelFormatError(ValueError):
    """Raised when a model document cannot be read back."""


class DenseLayer:
    """Fully connected layer with fixed weights: y = W x + b."""

    KIND = "dense"
    PARAM_NAMES = ("W", "b")

    def __init__(self, W, b=None):
        self.W = as_matrix(W, "W").copy()
        out_features = self.W.shape[0]
        if b is None:
            self.b = np.zeros(out_features)
        else:
            self.b = np.array(b, dtype=np.float64).reshape(-1)
        if self.b.shape != (out_features,):
            raise ShapeError(f"Bias has {self.b.size} entries, layer has {out_features} outputs")

    @property
    def in_features(self):
        return self.W.shape[1]

    @property
    def out_features(self):
        return self.W.shape[0]

    def parameters(self):
        return [self.W, self.b]

    def forward(self, x):
        return x @ self.W.T + self.b, {"x": x}

    def backward(self, cache, dy):
        x = cache["x"]
        grads = [dy.T @ x, dy.sum(axis=0)]
        return grads, dy @ self.W

    def copy(self):
        return DenseLayer(self.W, self.b)

    def __str__(self):
        return f"Dense({self.in_features}->{self.out_features})"


class ChebyAdaptiveLayer:
    """Layer whose connection weights are Chebyshev series in their own input.

    The coefficient tensor C has shape (out, in, k + 1). In weight form with
    k = 0 the layer is exactly a DenseLayer with W = C[:, :, 0].
    """

    KIND = "cheby"
    PARAM_NAMES = ("C", "b")

    MODE_WEIGHT = "weight"
    MODE_EXPANSION = "expansion"
    MODES = (MODE_WEIGHT, MODE_EXPANSION)

    MAP_IDENTITY = "identity"
    MAP_CLAMP = "clamp"
    MAP_SQUASH = "squash"
    INPUT_MAPS = (MAP_IDENTITY, MAP_CLAMP, MAP_SQUASH)

    def __init__(self, C, b=None, mode=MODE_WEIGHT, input_map=MAP_IDENTITY):
        self.C = np.array(C, dtype=np.float64)
        if self.C.ndim != 3 or self.C.shape[2] < 1:
            raise ShapeError(f"Coefficient tensor must have shape (out, in, k + 1), got {self.C.shape}")
        if mode not in self.MODES:
            raise ValueError(f"Unknown layer mode {mode!r}; expected one of {self.MODES}")
        if input_map not in self.INPUT_MAPS:
            raise ValueError(f"Unknown input map {input_map!r}; expected one of {self.INPUT_MAPS}")
        self.mode = mode
        self.input_map = input_map

        out_features = self.C.shape[0]
        if b is None:
            self.b = np.zeros(out_features)
        else:
            self.b = np.array(b, dtype=np.float64).reshape(-1)
        if self.b.shape != (out_features,):
            raise ShapeError(f"Bias has {self.b.size} entries, layer has {out_features} outputs")

    @property
    def in_features(self):
        return self.C.shape[1]

    @property
    def out_features(self):
        return self.C.shape[0]

    @property
    def k(self):
        return self.C.shape[2] - 1

    def parameters(self):
        return [self.C, self.b]

    def map_input(self, x):
        if self.input_map == self.MAP_CLAMP:
            return np.clip(x, -1.0, 1.0)
        if self.input_map == self.MAP_SQUASH:
            return squash(x)
        # T_0 is bounded everywhere, so only k >= 1 needs the range check
        if self.k >= 1:
            outside = np.abs(x) > 1.0 + RANGE_TOLERANCE
            if np.any(outside):
                sample, feature = (int(i) for i in np.argwhere(outside)[0])
                raise InputRangeError(feature, float(x[sample, feature]), sample)
        return x

    def map_input_deriv(self, x):
        if self.input_map == self.MAP_CLAMP:
            return ((x > -1.0) & (x < 1.0)).astype(np.float64)
        if self.input_map == self.MAP_SQUASH:
            return squash_deriv(x)
        return np.ones_like(x)

    def forward(self, x):
        """Apply the layer to a batch.

        Args:
            x: Matrix of shape (batch, in)

        Returns:
            tuple: (y of shape (batch, out), cache for backward)
        """
        x = as_matrix(x, "layer input")
        if x.shape[1] != self.in_features:
            raise ShapeError(f"Layer expects {self.in_features} features, got {x.shape[1]}")
        x_mapped = self.map_input(x)
        basis = cheb_expand(x_mapped, self.k)
        if self.mode == self.MODE_WEIGHT:
            features = x_mapped[..., None] * basis
        else:
            features = basis
        width = self.in_features * (self.k + 1)
        y = features.reshape(x.shape[0], width) @ self.C.reshape(self.out_features, width).T + self.b
        cache = {"x": x, "x_mapped": x_mapped, "basis": basis, "features": features}
        return y, cache

    def backward(self, cache, dy):
        features = cache["features"]
        x_mapped = cache["x_mapped"]
        batch = features.shape[0]

        width = self.in_features * (self.k + 1)
        flat_C = self.C.reshape(self.out_features, width)
        grad_C = (dy.T @ features.reshape(batch, width)).reshape(self.C.shape)
        grad_b = dy.sum(axis=0)

        grad_features = (dy @ flat_C).reshape(features.shape)
        basis_deriv = cheb_deriv_expand(x_mapped, self.k)
        if self.mode == self.MODE_WEIGHT:
            # d/dx [x T_j(x)] = T_j(x) + x T_j'(x)
            feature_deriv = cache["basis"] + x_mapped[..., None] * basis_deriv
        else:
            feature_deriv = basis_deriv
        dx = np.sum(grad_features * feature_deriv, axis=-1)
        if self.input_map != self.MAP_IDENTITY:
            dx = dx * self.map_input_deriv(cache["x"])
        return [grad_C, grad_b], dx

    def weight_curve(self, o, i, x):
        """Adaptive weight w(x) = sum_j C[o, i, j] T_j(x) of one connection."""
        return cheb_expand(np.asarray(x, dtype=np.float64), self.k) @ self.C[o, i]

    def copy(self):
        return ChebyAdaptiveLayer(self.C, self.b, mode=self.mode, input_map=self.input_map)

    def __str__(self):
        return f"Cheby({self.in_features}->{self.out_features}, k={self.k}, {self.mode}, {self.input_map})"


class ForwardTrace:
    """Per-layer caches recorded by Network.forward for the backward pass."""

    def __init__(self):
        self.caches = []
        self.pre_activations = []
        self.post_activations = []

    def __len__(self):
        return len(self.caches)


class GradientSet:
    """Parameter gradients laid out exactly like Network.parameters()."""

    def __init__(self, layers):
        self.layers = layers

    def arrays(self):
        return [g for layer in self.layers for g in layer]

    def flatten(self, layer_index):
        """Row-major coefficient (or weight) gradient followed by the bias gradient."""
        return np.concatenate([g.reshape(-1) for g in self.layers[layer_index]])

    def __iter__(self):
        return iter(self.layers)

    def __len__(self):
        return len(self.layers)


class Network:
    """Ordered stack of dense or Chebyshev-adaptive layers.

    Hidden layers are followed by ReLU; the last layer emits raw logits and
    the softmax lives in softmax_cross_entropy.
    """

    def __init__(self, layers):
        if not layers:
            raise ValueError("A network needs at least one layer")
        for idx in range(1, len(layers)):
            if layers[idx - 1].out_features != layers[idx].in_features:
                raise ShapeError(
                    f"Layer {idx - 1} emits {layers[idx - 1].out_features} values "
                    f"but layer {idx} expects {layers[idx].in_features}"
                )
        self.layers = list(layers)

    @property
    def in_features(self):
        return self.layers[0].in_features

    @property
    def n_classes(self):
        return self.layers[-1].out_features

    @property
    def is_chebyshev(self):
        return any(isinstance(layer, ChebyAdaptiveLayer) for layer in self.layers)

    def parameters(self):
        """Flat list of parameter arrays (weights then bias, layer by layer)."""
        return [p for layer in self.layers for p in layer.parameters()]

    def parameter_count(self):
        return int(sum(p.size for p in self.parameters()))

    def prunable_count(self):
        return int(sum(layer.parameters()[0].size for layer in self.layers))

    def forward(self, x):
        """Run the network on a batch.

        Args:
            x: Matrix of shape (batch, in_features)

        Returns:
            tuple: (logits of shape (batch, n_classes), ForwardTrace)
        """
        h = as_matrix(x, "input batch")
        if h.shape[1] != self.in_features:
            raise ShapeError(f"Network expects {self.in_features} features, got {h.shape[1]}")

        trace = ForwardTrace()
        last = len(self.layers) - 1
        for idx, layer in enumerate(self.layers):
            z, cache = layer.forward(h)
            trace.caches.append(cache)
            trace.pre_activations.append(z)
            h = z if idx == last else relu(z)
            trace.post_activations.append(h)
        return h, trace

    def backward(self, trace, dlogits):
        """Backpropagate dL/dlogits through the trace of a matching forward call."""
        if len(trace) != len(self.layers):
            raise ShapeError(f"Trace has {len(trace)} layers, network has {len(self.layers)}")
        dlogits = as_matrix(dlogits, "dlogits")
        if dlogits.shape != trace.pre_activations[-1].shape:
            raise ShapeError(f"dlogits shape {dlogits.shape} does not match logits {trace.pre_activations[-1].shape}")
        for idx, layer in enumerate(self.layers):
            z = trace.pre_activations[idx]
            if z.shape[1] != layer.out_features:
                raise ShapeError(f"Trace layer {idx} has {z.shape[1]} outputs, network layer has {layer.out_features}")

        grads = [None] * len(self.layers)
        upstream = dlogits
        for idx in range(len(self.layers) - 1, -1, -1):
            layer_grads, dx = self.layers[idx].backward(trace.caches[idx], upstream)
            grads[idx] = layer_grads
            if idx > 0:
                upstream = dx * (trace.pre_activations[idx - 1] > 0)
        return GradientSet(grads)

    def predict(self, x):
        logits, _ = self.forward(x)
        return row_argmax(logits)

    def copy(self):
        return Network([layer.copy() for layer in self.layers])

    def load_parameters(self, arrays):
        """Copy values from a list shaped like parameters() into this network."""
        params = self.parameters()
        if len(arrays) != len(params):
            raise ShapeError(f"Expected {len(params)} parameter arrays, got {len(arrays)}")
        for target, source in zip(params, arrays):
            if target.shape != np.shape(source):
                raise ShapeError(f"Parameter shape {np.shape(source)} does not match {target.shape}")
            target[...] = source

    def __str__(self):
        return " -> ".join(str(layer) for layer in self.layers)


def softmax(logits):
    shifted = logits - np.max(logits, axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits, labels):
    """Mean cross-entropy of softmax(logits) against integer labels.

    Returns:
        tuple: (loss, dlogits) where dlogits = (softmax - onehot) / batch
    """
    logits = as_matrix(logits, "logits")
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    batch, n_classes = logits.shape
    if labels.shape[0] != batch:
        raise ShapeError(f"{labels.shape[0]} labels for a batch of {batch}")
    if batch == 0:
        raise ValueError("Cannot compute a loss on an empty batch")
    if np.any((labels < 0) | (labels >= n_classes)):
        bad = int(labels[(labels < 0) | (labels >= n_classes)][0])
        raise ValueError(f"Label {bad} is outside [0, {n_classes})")

    shifted = logits - np.max(logits, axis=1, keepdims=True)
    log_probs = shifted - np.log(np.sum(np.exp(shifted), axis=1, keepdims=True))
    rows = np.arange(batch)
    loss = -float(np.mean(log_probs[rows, labels]))

    dlogits = np.exp(log_probs)
    dlogits[rows, labels] -= 1.0
    dlogits /= batch
    return loss, dlogits


def build_network(n_features, hidden, n_classes, kind="cheby", k=3,
                  mode=ChebyAdaptiveLayer.MODE_WEIGHT, rng=None,
                  hidden_map=ChebyAdaptiveLayer.MAP_SQUASH):
    """Create an MLP or a Chebyshev-adaptive network.

    Parameters are drawn uniformly from [-s, s] with
    s = sqrt(6 / (in * (k + 1) + out)); biases start at zero. An MLP and a
    k = 0 Chebyshev network built from equally seeded generators receive
    identical values.

    Args:
        n_features: Input width
        hidden: Hidden layer widths, e.g. [4, 2]
        n_classes: Output width
        kind: "mlp" or "cheby"
        k: Chebyshev order (ignored for "mlp")
        mode: Chebyshev layer mode
        rng: numpy Generator; a fresh unseeded one if None
        hidden_map: Input map of hidden Chebyshev layers when k >= 1

    Returns:
        Network: The initialised network
    """
    if kind not in ("mlp", "cheby"):
        raise ValueError(f"Unknown network kind {kind!r}")
    if k < 0:
        raise ValueError(f"Chebyshev order must be >= 0, got {k}")
    rng = rng if rng is not None else np.random.default_rng()

    sizes = [int(n_features), *[int(h) for h in hidden], int(n_classes)]
    if min(sizes) < 1:
        raise ValueError(f"Layer sizes must be positive, got {sizes}")

    layers = []
    for idx, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        if kind == "mlp":
            scale = np.sqrt(6.0 / (fan_in + fan_out))
            layers.append(DenseLayer(rng.uniform(-scale, scale, size=(fan_out, fan_in))))
        else:
            scale = np.sqrt(6.0 / (fan_in * (k + 1) + fan_out))
            C = rng.uniform(-scale, scale, size=(fan_out, fan_in, k + 1))
            if idx == 0 or k == 0:
                input_map = ChebyAdaptiveLayer.MAP_IDENTITY
            else:
                input_map = hidden_map
            layers.append(ChebyAdaptiveLayer(C, mode=mode, input_map=input_map))
    return Network(layers)


def _layer_to_dict(layer):
    entry = {
        "type": layer.KIND,
        "in": layer.in_features,
        "out": layer.out_features,
        "k": None,
        "mode": None,
        "input_map": None,
        "params": np.concatenate([p.reshape(-1) for p in layer.parameters()]).tolist(),
    }
    if isinstance(layer, ChebyAdaptiveLayer):
        entry.update({"k": layer.k, "mode": layer.mode, "input_map": layer.input_map})
    return entry


def _layer_from_dict(entry, position):
    try:
        kind = entry["type"]
        n_in, n_out = int(entry["in"]), int(entry["out"])
        params = np.array(entry["params"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as e:
        raise ModelFormatError(f"Layer {position} is malformed: {e}") from e

    if kind == DenseLayer.KIND:
        n_weights = n_out * n_in
        if params.size != n_weights + n_out:
            raise ModelFormatError(f"Layer {position} needs {n_weights + n_out} parameters, found {params.size}")
        return DenseLayer(params[:n_weights].reshape(n_out, n_in), params[n_weights:])
    if kind == ChebyAdaptiveLayer.KIND:
        k = int(entry.get("k") or 0)
        n_coeffs = n_out * n_in * (k + 1)
        if params.size != n_coeffs + n_out:
            raise ModelFormatError(f"Layer {position} needs {n_coeffs + n_out} parameters, found {params.size}")
        return ChebyAdaptiveLayer(
            params[:n_coeffs].reshape(n_out, n_in, k + 1),
            params[n_coeffs:],
            mode=entry.get("mode") or ChebyAdaptiveLayer.MODE_WEIGHT,
            input_map=entry.get("input_map") or ChebyAdaptiveLayer.MAP_IDENTITY,
        )
    raise ModelFormatError(f"Layer {position} has unknown type {kind!r}")


def model_to_dict(net, scaler=None, metadata=None):
    return {
        "format_version": MODEL_FORMAT_VERSION,
        "layers": [_layer_to_dict(layer) for layer in net.layers],
        "scaler": scaler.to_dict() if scaler is not None else None,
        "metadata": metadata or {},
    }


def model_from_dict(doc):
    if not isinstance(doc, dict) or doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise ModelFormatError(f"Unsupported model format version: {doc.get('format_version') if isinstance(doc, dict) else doc!r}")
    layers = [_layer_from_dict(entry, idx) for idx, entry in enumerate(doc.get("layers") or [])]
    if not layers:
        raise ModelFormatError("Model document has no layers")
    try:
        net = Network(layers)
    except ShapeError as e:
        raise ModelFormatError(str(e)) from e
    scaler = ScalerParams.from_dict(doc["scaler"]) if doc.get("scaler") else None
    return net, scaler, doc.get("metadata") or {}


def save_model(path, net, scaler=None, metadata=None):
    """Write a network (and the scaler fitted for it) to a JSON model file."""
    with open(path, "w", encoding="utf-8") as f:
        json.dump(model_to_dict(net, scaler, metadata), f, indent=2)
    logger.info(f"Saved model {net} to {path}")


def load_model(path):
    """Read a model file.

    Returns:
        tuple: (Network, ScalerParams or None, metadata dict)
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            doc = json.load(f)
    except json.JSONDecodeError as e:
        raise ModelFormatError(f"{path} is not valid JSON: {e}") from e
    return model_from_dict(doc)
