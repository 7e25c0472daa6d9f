"""Feature-extractor composition: architecture notation, shape algebra, initialization,
and whole-network forward/backward passes.

Parameters live in an ordered ``dict`` keyed ``"<index>.<kind>.<name>"``; the bias-free
loss classifier is stored under :data:`CLASSIFIER_KEY`.
"""

import logging
import re
from dataclasses import dataclass
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np

from ..exceptions import ShapeMismatch, ValidationError
from ..models.network import LayerKind, LayerSpec, NetworkSpec
from . import layers

CLASSIFIER_KEY = "classifier.weight"
PRELU_INITIAL_SLOPE = 0.25

Params = Dict[str, np.ndarray]

logger = logging.getLogger("lsoftmax")


# ARCHITECTURE NOTATION

_CONV_UNIT = re.compile(
    r"^conv\s+(?P<k>\d+)x(?P=k)\s+(?P<c>\d+)"
    r"(?:\s+x(?P<n>\d+))?(?:\s+pad\s*(?P<p>\d+))?(?:\s+stride\s*(?P<s>\d+))?$"
)
_DENSE_UNIT = re.compile(r"^(?:dense|fc)\s+(?P<w>\d+)$")


def parse_architecture(text: str, input_shape: Sequence[int]) -> List[LayerSpec]:
    """Expand the compact layer notation into ``LayerSpec`` objects.

    Units are separated by commas::

        conv 5x5 32 x2 pad 2, pool, conv 5x5 64 x2 pad 2, pool, dense 2

    ``conv KxK C [xN] [pad P] [stride S]`` is N convolution units, each a conv2d followed by
    a per-channel PReLU; padding defaults to ``(K-1)//2``. ``pool`` is 2×2 max pooling with
    stride 2. ``dense W`` is a fully connected layer with bias and no activation; a flatten
    is inserted automatically when it follows an image tensor. ``prelu`` and ``flatten`` may
    be written explicitly.
    """
    shape = tuple(int(i) for i in input_shape)
    specs: List[LayerSpec] = []

    def push(spec: LayerSpec):
        nonlocal shape
        shape = _layer_output_shape(spec, shape)
        specs.append(spec)

    for raw in (part.strip().lower() for part in text.split(",")):
        if not raw:
            continue
        if conv := _CONV_UNIT.match(raw):
            kernel = int(conv["k"])
            padding = int(conv["p"]) if conv["p"] is not None else (kernel - 1) // 2
            for _ in range(int(conv["n"] or 1)):
                if len(shape) != 3:
                    raise ShapeMismatch(f"'{raw}' needs an image input, got shape {shape}")
                push(
                    LayerSpec(
                        kind=LayerKind.conv2d,
                        in_channels=shape[0],
                        out_channels=int(conv["c"]),
                        kernel_size=kernel,
                        stride=int(conv["s"] or 1),
                        padding=padding,
                    )
                )
                push(LayerSpec(kind=LayerKind.prelu, channels=shape[0]))
        elif dense := _DENSE_UNIT.match(raw):
            if len(shape) != 1:
                push(LayerSpec(kind=LayerKind.flatten))
            push(
                LayerSpec(
                    kind=LayerKind.dense, in_features=shape[0], out_features=int(dense["w"])
                )
            )
        elif raw in ("pool", "maxpool"):
            push(LayerSpec(kind=LayerKind.maxpool2x2))
        elif raw == "prelu":
            push(LayerSpec(kind=LayerKind.prelu, channels=shape[0]))
        elif raw == "flatten":
            push(LayerSpec(kind=LayerKind.flatten))
        else:
            raise ValidationError(f"Unrecognized layer unit '{raw}'")
    return specs


def build_network_spec(text: str, input_shape: Sequence[int], feature_dim: int) -> NetworkSpec:
    return NetworkSpec(
        input_shape=tuple(input_shape),
        layers=parse_architecture(text, input_shape),
        feature_dim=feature_dim,
    )


# SHAPE ALGEBRA


def _layer_output_shape(spec: LayerSpec, shape: Tuple[int, ...]) -> Tuple[int, ...]:
    kind = spec.kind
    if kind == LayerKind.dense:
        if shape != (spec.in_features,):
            raise ShapeMismatch(f"dense expects ({spec.in_features},), got {shape}")
        return (spec.out_features,)
    if kind == LayerKind.conv2d:
        if len(shape) != 3 or shape[0] != spec.in_channels:
            raise ShapeMismatch(f"conv2d expects {spec.in_channels} x H x W, got {shape}")
        out_h, out_w = layers.conv2d_output_hw(
            shape[1], shape[2], spec.kernel_size, spec.stride, spec.padding
        )
        return (spec.out_channels, out_h, out_w)
    if kind == LayerKind.maxpool2x2:
        if len(shape) != 3 or shape[1] < 2 or shape[2] < 2:
            raise ShapeMismatch(f"maxpool2x2 expects C x H x W with H, W >= 2, got {shape}")
        return (shape[0], shape[1] // 2, shape[2] // 2)
    if kind == LayerKind.prelu:
        if shape[0] != spec.channels:
            raise ShapeMismatch(f"prelu expects {spec.channels} channels, got {shape}")
        return shape
    if kind == LayerKind.flatten:
        return (int(np.prod(shape)),)
    raise ValidationError(f"Unknown layer kind {kind}")


def output_shape(layer_specs: Sequence[LayerSpec], input_shape: Sequence[int]) -> Tuple[int, ...]:
    """Statically composed per-sample output shape; raises ``ShapeMismatch`` on a bad stack."""
    shape = tuple(int(i) for i in input_shape)
    for spec in layer_specs:
        shape = _layer_output_shape(spec, shape)
    return shape


def parameter_count(spec: NetworkSpec, num_classes: int) -> int:
    return sum(p.size for p in init_params(spec, num_classes, seed=0).values())


# INITIALIZATION


def _he_normal(rng: np.random.Generator, shape: Tuple[int, ...], fan_in: int) -> np.ndarray:
    return rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)


def init_params(spec: NetworkSpec, num_classes: int, seed: int) -> Params:
    """Fan-in scaled Gaussian weights (std = sqrt(2 / fan_in)), zero biases, PReLU slopes 0.25,
    and a ``num_classes × feature_dim`` classifier. Deterministic for a fixed seed.
    """
    rng = np.random.default_rng(seed)
    params: Params = {}
    for index, layer in enumerate(spec.layers):
        prefix = f"{index}.{layer.kind.value}"
        if layer.kind == LayerKind.dense:
            params[f"{prefix}.weight"] = _he_normal(
                rng, (layer.out_features, layer.in_features), layer.in_features
            )
            params[f"{prefix}.bias"] = np.zeros(layer.out_features)
        elif layer.kind == LayerKind.conv2d:
            fan_in = layer.in_channels * layer.kernel_size**2
            params[f"{prefix}.weight"] = _he_normal(
                rng,
                (layer.out_channels, layer.in_channels, layer.kernel_size, layer.kernel_size),
                fan_in,
            )
            params[f"{prefix}.bias"] = np.zeros(layer.out_channels)
        elif layer.kind == LayerKind.prelu:
            params[f"{prefix}.slope"] = np.full(layer.channels, PRELU_INITIAL_SLOPE)
    params[CLASSIFIER_KEY] = _he_normal(rng, (num_classes, spec.feature_dim), spec.feature_dim)
    return params


# FORWARD / BACKWARD


@dataclass(frozen=True)
class Tape:
    """Per-call record of layer inputs and caches, consumed by :func:`network_backward`."""

    inputs: Tuple[np.ndarray, ...]
    caches: Tuple[Any, ...]


def _check_params(spec: NetworkSpec, params: Params):
    for index, layer in enumerate(spec.layers):
        prefix = f"{index}.{layer.kind.value}"
        names = {
            LayerKind.dense: ("weight", "bias"),
            LayerKind.conv2d: ("weight", "bias"),
            LayerKind.prelu: ("slope",),
        }.get(layer.kind, ())
        for name in names:
            if f"{prefix}.{name}" not in params:
                raise ShapeMismatch(f"parameter '{prefix}.{name}' missing for layer {index}")


def network_forward(spec: NetworkSpec, params: Params, batch: np.ndarray):
    """Run the feature extractor. Returns ``(features N × D, tape)``."""
    x = np.asarray(batch, dtype=np.float64)
    if x.shape[1:] != tuple(spec.input_shape):
        raise ShapeMismatch(
            f"batch sample shape {x.shape[1:]} does not match network input {spec.input_shape}"
        )
    _check_params(spec, params)
    inputs, caches = [], []
    for index, layer in enumerate(spec.layers):
        prefix = f"{index}.{layer.kind.value}"
        inputs.append(x)
        cache = None
        if layer.kind == LayerKind.dense:
            x = layers.dense_forward(x, params[f"{prefix}.weight"], params[f"{prefix}.bias"])
        elif layer.kind == LayerKind.conv2d:
            x = layers.conv2d_forward(
                x,
                params[f"{prefix}.weight"],
                params[f"{prefix}.bias"],
                stride=layer.stride,
                padding=layer.padding,
            )
        elif layer.kind == LayerKind.maxpool2x2:
            x, cache = layers.maxpool_forward(x)
        elif layer.kind == LayerKind.prelu:
            x = layers.prelu_forward(x, params[f"{prefix}.slope"])
        elif layer.kind == LayerKind.flatten:
            x = layers.flatten_forward(x)
        caches.append(cache)
        layers.ensure_finite(x, f"output of layer {index} ({layer.kind.value})")
    return x, Tape(inputs=tuple(inputs), caches=tuple(caches))


def network_backward(spec: NetworkSpec, params: Params, tape: Tape, grad_features: np.ndarray):
    """Back-propagate ``∂L/∂features``. Returns ``(parameter gradients, ∂L/∂input)``.

    The classifier gradient is not included; it comes from the loss.
    """
    grads: Params = {}
    grad = np.asarray(grad_features, dtype=np.float64)
    for index in reversed(range(len(spec.layers))):
        layer = spec.layers[index]
        prefix = f"{index}.{layer.kind.value}"
        x = tape.inputs[index]
        if layer.kind == LayerKind.dense:
            grad, grads[f"{prefix}.weight"], grads[f"{prefix}.bias"] = layers.dense_backward(
                grad, x, params[f"{prefix}.weight"]
            )
        elif layer.kind == LayerKind.conv2d:
            grad, grads[f"{prefix}.weight"], grads[f"{prefix}.bias"] = layers.conv2d_backward(
                grad, x, params[f"{prefix}.weight"], stride=layer.stride, padding=layer.padding
            )
        elif layer.kind == LayerKind.maxpool2x2:
            grad = layers.maxpool_backward(grad, tape.caches[index], x.shape)
        elif layer.kind == LayerKind.prelu:
            grad, grads[f"{prefix}.slope"] = layers.prelu_backward(
                grad, x, params[f"{prefix}.slope"]
            )
        elif layer.kind == LayerKind.flatten:
            grad = layers.flatten_backward(grad, x.shape)
        layers.ensure_finite(grad, f"gradient into layer {index} ({layer.kind.value})")
    return grads, grad
