import logging
from bisect import bisect_right
from dataclasses import dataclass, field, replace
from typing import Callable, Iterator, List, Optional, Sequence

import numpy as np

from . import loss as lsoftmax_loss
from .data import DatasetSplit, Subset
from .exceptions import EmptyEvalSet, NonFiniteGradient, ShapeMismatch
from .models.network import NetworkSpec
from .models.training import TrainConfig
from .nn.network import CLASSIFIER_KEY, Params, init_params, network_backward, network_forward

logger = logging.getLogger("lsoftmax")

EVAL_BATCH_SIZE = 1000


@dataclass(frozen=True)
class IterationRecord:
    """Immutable snapshot handed to training hooks and written to ``metrics.csv``."""

    iteration: int
    lambda_: float
    learning_rate: float
    train_loss: float
    val_error: Optional[float] = None


@dataclass
class TrainState:
    iteration: int
    params: Params
    velocity: Params
    lambda_: float = 0.0
    loss_history: List[float] = field(default_factory=list)


@dataclass(frozen=True)
class TrainResult:
    state: TrainState
    records: List[IterationRecord]


Hook = Callable[[IterationRecord], None]


def initial_state(params: Params) -> TrainState:
    return TrainState(
        iteration=0,
        params={name: value.copy() for name, value in params.items()},
        velocity={name: np.zeros_like(value) for name, value in params.items()},
    )


def lr_at(config: TrainConfig, iteration: int) -> float:
    """Staircase schedule: each drop in ``lr_drop_iterations`` applies from that iteration on."""
    drops = bisect_right(config.lr_drop_iterations, iteration)
    return config.learning_rate * config.lr_drop_factor**drops


def _decays(name: str) -> bool:
    return not name.endswith(".bias")


def sgd_step(state: TrainState, grads: Params, config: TrainConfig) -> TrainState:
    """One momentum SGD update: ``v ← μv − η(g + wd·θ)``, ``θ ← θ + v``.

    Weight decay applies to weights and PReLU slopes but not to biases. Any non-finite
    gradient aborts with ``NonFiniteGradient``.
    """
    if set(grads) != set(state.params):
        raise ShapeMismatch(
            f"gradient keys {sorted(grads)} do not match parameters {sorted(state.params)}"
        )
    for name, grad in grads.items():
        if grad.shape != state.params[name].shape:
            raise ShapeMismatch(
                f"gradient '{name}' shape {grad.shape} != parameter {state.params[name].shape}"
            )
        bad = int(np.count_nonzero(~np.isfinite(grad)))
        if bad:
            logger.error(
                "NonFiniteGradient %s iteration=%s bad=%s lambda=%g",
                name,
                state.iteration,
                bad,
                state.lambda_,
            )
            raise NonFiniteGradient(name, state.iteration, bad)

    lr = lr_at(config, state.iteration)
    params, velocity = {}, {}
    for name, theta in state.params.items():
        step = grads[name] + config.weight_decay * theta if _decays(name) else grads[name]
        velocity[name] = config.momentum * state.velocity[name] - lr * step
        params[name] = theta + velocity[name]
    return replace(state, iteration=state.iteration + 1, params=params, velocity=velocity)


def _batches(rng: np.random.Generator, size: int, batch_size: int) -> Iterator[np.ndarray]:
    """Epoch-wise shuffled mini-batch indices; the final short batch of an epoch is kept."""
    batch_size = min(batch_size, size)
    while True:
        order = rng.permutation(size)
        for start in range(0, size, batch_size):
            yield order[start : start + batch_size]


def extract_features(spec: NetworkSpec, params: Params, inputs: np.ndarray) -> np.ndarray:
    """Features for a whole array, evaluated in chunks to bound memory."""
    chunks = [
        network_forward(spec, params, inputs[start : start + EVAL_BATCH_SIZE])[0]
        for start in range(0, inputs.shape[0], EVAL_BATCH_SIZE)
    ]
    if not chunks:
        return np.zeros((0, spec.feature_dim))
    return np.concatenate(chunks, axis=0)


def evaluate_error(spec: NetworkSpec, params: Params, subset: Subset) -> float:
    """Classification error of the plain inner-product rule on ``subset``."""
    if len(subset) == 0:
        raise EmptyEvalSet("Cannot evaluate error on an empty set")
    features = extract_features(spec, params, subset.inputs)
    predictions = lsoftmax_loss.predict(features, params[CLASSIFIER_KEY])
    return float(np.mean(predictions != subset.labels))


def train(
    network: NetworkSpec,
    data: DatasetSplit,
    config: TrainConfig,
    hooks: Sequence[Hook] = (),
    params: Optional[Params] = None,
    reference_softmax: bool = False,
) -> TrainResult:
    """Train the feature extractor and classifier with the (λ-blended) L-Softmax loss.

    :param network: The feature extractor.
    :param data: Dataset; ``train`` is used for steps, ``val`` for interval validation.
    :param config: Optimization settings, margin and λ schedule.
    :param hooks: Callables receiving an :class:`IterationRecord` after every iteration.
    :param params: Starting parameters (defaults to ``init_params`` with ``config.seed``).
    :param reference_softmax: Compute the loss with the plain softmax reference instead of
        the L-Softmax path (only meaningful for ``m == 1``).
    """
    if len(data.train) == 0:
        raise EmptyEvalSet("Training split is empty")
    if params is None:
        params = init_params(network, data.num_classes, seed=config.seed)
    state = initial_state(params)
    rng = np.random.default_rng(config.seed)
    batches = _batches(rng, len(data.train), config.batch_size)
    records: List[IterationRecord] = []

    logger.info(
        "TrainStart m=%s iterations=%s batch=%s train=%s",
        config.margin,
        config.max_iterations,
        config.batch_size,
        len(data.train),
    )
    for _ in range(config.max_iterations):
        t = state.iteration
        lambda_ = lsoftmax_loss.lambda_at(config.lambda_schedule, t)
        index = next(batches)
        inputs, labels = data.train.inputs[index], data.train.labels[index]

        features, tape = network_forward(network, state.params, inputs)
        weights = state.params[CLASSIFIER_KEY]
        if reference_softmax:
            result = lsoftmax_loss.plain_softmax(features, labels, weights)
        else:
            result = lsoftmax_loss.backward(features, labels, weights, config.margin, lambda_)
        grads, _ = network_backward(network, state.params, tape, result.grad_x)
        grads[CLASSIFIER_KEY] = result.grad_w

        state.lambda_ = lambda_
        learning_rate = lr_at(config, t)
        state = sgd_step(state, grads, config)
        state.loss_history.append(result.loss)

        val_error = None
        if config.val_interval and (t + 1) % config.val_interval == 0 and len(data.val):
            val_error = evaluate_error(network, state.params, data.val)

        record = IterationRecord(
            iteration=t,
            lambda_=lambda_,
            learning_rate=learning_rate,
            train_loss=result.loss,
            val_error=val_error,
        )
        records.append(record)
        logger.debug(
            "TrainIteration %s loss=%.6f lambda=%g lr=%g", t, result.loss, lambda_, learning_rate
        )
        if val_error is not None:
            logger.info("TrainValidation %s loss=%.6f val_error=%.4f", t, result.loss, val_error)
        for hook in hooks:
            hook(record)

    logger.info(
        "TrainFinish iterations=%s final_loss=%s",
        state.iteration,
        f"{state.loss_history[-1]:.6f}" if state.loss_history else "n/a",
    )
    return TrainResult(state=state, records=records)
