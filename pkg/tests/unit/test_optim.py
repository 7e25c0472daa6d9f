import numpy as np
import pytest
from pydantic import ValidationError as PydanticValidationError

from lsoftmax import loss
from lsoftmax.data import DatasetSplit, make_blobs
from lsoftmax.exceptions import EmptyEvalSet, NonFiniteGradient, ShapeMismatch
from lsoftmax.models.training import LambdaSchedule, TrainConfig
from lsoftmax.nn import CLASSIFIER_KEY, build_network_spec, init_params
from lsoftmax.optim import evaluate_error, initial_state, lr_at, sgd_step, train


def scalar_state(value=1.0, name="w.weight"):
    return initial_state({name: np.array([value])})


# LEARNING RATE


@pytest.mark.parametrize(
    "iteration,expected", [(0, 0.1), (11999, 0.1), (12000, 0.01), (14999, 0.01), (15000, 0.001)]
)
def test_lr_at_staircase(iteration, expected):
    config = TrainConfig(learning_rate=0.1, lr_drop_iterations=[12000, 15000])
    assert lr_at(config, iteration) == pytest.approx(expected, rel=1e-12)


def test_lr_at_constant_without_drops():
    config = TrainConfig(learning_rate=0.05)
    assert {lr_at(config, t) for t in (0, 10, 10**6)} == {0.05}


def test_lr_drops_must_increase():
    with pytest.raises(PydanticValidationError):
        TrainConfig(lr_drop_iterations=[15000, 12000])
    with pytest.raises(PydanticValidationError):
        TrainConfig(lr_drop_iterations=[100, 100])


# SGD STEP


def test_sgd_step_plain():
    config = TrainConfig(learning_rate=0.1, momentum=0.0, weight_decay=0.0)
    state = sgd_step(scalar_state(1.0), {"w.weight": np.array([2.0])}, config)
    assert state.params["w.weight"][0] == pytest.approx(0.8, abs=1e-15)
    assert state.iteration == 1


def test_sgd_step_momentum_unrolled():
    config = TrainConfig(learning_rate=0.1, momentum=0.9, weight_decay=0.0)
    grads = {"w.weight": np.array([2.0])}
    state = sgd_step(sgd_step(scalar_state(1.0), grads, config), grads, config)
    v1 = -0.1 * 2.0
    v2 = 0.9 * v1 - 0.1 * 2.0
    assert state.velocity["w.weight"][0] == pytest.approx(v2, abs=1e-15)
    assert state.params["w.weight"][0] == pytest.approx(1.0 + v1 + v2, abs=1e-15)


def test_sgd_step_weight_decay_skips_biases():
    config = TrainConfig(learning_rate=0.1, momentum=0.0, weight_decay=0.0005)
    state = initial_state({"0.dense.weight": np.array([1.0]), "0.dense.bias": np.array([1.0])})
    zero = {"0.dense.weight": np.array([0.0]), "0.dense.bias": np.array([0.0])}
    for _ in range(3):
        state = sgd_step(state, zero, config)
    assert state.params["0.dense.weight"][0] == pytest.approx((1 - 0.1 * 0.0005) ** 3)
    assert state.params["0.dense.bias"][0] == 1.0


def test_sgd_step_does_not_mutate_input():
    config = TrainConfig(learning_rate=0.1, momentum=0.5)
    state = scalar_state(1.0)
    sgd_step(state, {"w.weight": np.array([2.0])}, config)
    assert state.params["w.weight"][0] == 1.0
    assert state.velocity["w.weight"][0] == 0.0


def test_sgd_step_rejects_non_finite():
    state = scalar_state(1.0)
    with pytest.raises(NonFiniteGradient) as excinfo:
        sgd_step(state, {"w.weight": np.array([np.nan])}, TrainConfig())
    assert excinfo.value.name == "w.weight"
    assert excinfo.value.iteration == 0
    assert excinfo.value.bad_count == 1


def test_sgd_step_rejects_mismatched_gradients():
    with pytest.raises(ShapeMismatch):
        sgd_step(scalar_state(), {"w.weight": np.zeros(2)}, TrainConfig())
    with pytest.raises(ShapeMismatch):
        sgd_step(scalar_state(), {"other": np.zeros(1)}, TrainConfig())


# TRAINING


def two_blobs():
    return make_blobs(n_per_class=50, classes=2, dim=2, spread=0.5, seed=0)


def linear_spec():
    return build_network_spec("", (2,), 2)


def training_accuracy(spec, result, data):
    return 1.0 - evaluate_error(spec, result.state.params, data.train)


def test_train_m1_separates_blobs():
    data = two_blobs()
    config = TrainConfig(learning_rate=0.05, batch_size=20, max_iterations=200, margin=1)
    result = train(linear_spec(), data, config)
    assert training_accuracy(linear_spec(), result, data) >= 0.99


def test_train_m4_with_lambda_schedule_separates_blobs():
    data = two_blobs()
    schedule = LambdaSchedule(lambda_initial=1000, lambda_min=5, gamma=0.5, window=20)
    config = TrainConfig(
        learning_rate=0.01, batch_size=20, max_iterations=300, margin=4, lambda_schedule=schedule
    )
    result = train(linear_spec(), data, config)
    assert training_accuracy(linear_spec(), result, data) >= 0.99


def test_train_zero_iterations_returns_initialization():
    data = two_blobs()
    result = train(linear_spec(), data, TrainConfig(max_iterations=0, seed=4))
    expected = init_params(linear_spec(), num_classes=2, seed=4)
    assert np.array_equal(result.state.params[CLASSIFIER_KEY], expected[CLASSIFIER_KEY])
    assert result.records == []


def test_train_is_bitwise_deterministic(blobs):
    spec = build_network_spec("dense 8, prelu, dense 2", blobs.input_shape, 2)
    config = TrainConfig(
        learning_rate=0.02,
        batch_size=32,
        max_iterations=40,
        margin=3,
        lambda_schedule=LambdaSchedule(lambda_initial=2, lambda_min=2),
        seed=1,
    )
    first = train(spec, blobs, config)
    second = train(spec, blobs, config)
    for name, value in first.state.params.items():
        assert np.array_equal(value, second.state.params[name]), name
    losses = [r.train_loss for r in first.records]
    assert len(losses) == 40 and all(np.isfinite(losses))
    assert losses == [r.train_loss for r in second.records]


def test_train_threads_lambda_schedule_through_hooks(blobs):
    schedule = LambdaSchedule(lambda_initial=100, lambda_min=2, gamma=0.7, window=3)
    config = TrainConfig(
        learning_rate=0.01,
        batch_size=16,
        max_iterations=25,
        margin=2,
        lambda_schedule=schedule,
        lr_drop_iterations=[10],
    )
    seen = []
    train(build_network_spec("", (2,), 2), blobs, config, hooks=[seen.append])
    assert [r.iteration for r in seen] == list(range(25))
    assert [r.lambda_ for r in seen] == [loss.lambda_at(schedule, t) for t in range(25)]
    assert [r.learning_rate for r in seen] == [lr_at(config, t) for t in range(25)]


def test_train_reports_validation_error(blobs):
    config = TrainConfig(learning_rate=0.05, batch_size=16, max_iterations=10, val_interval=5)
    result = train(build_network_spec("", (2,), 2), blobs, config)
    evaluated = [r.iteration for r in result.records if r.val_error is not None]
    assert evaluated == [4, 9]
    assert all(0.0 <= r.val_error <= 1.0 for r in result.records if r.val_error is not None)


@pytest.mark.parametrize("m", [1, 2, 3, 4])
def test_train_loss_descends(m, blobs):
    spec = build_network_spec("dense 8, prelu, dense 2", blobs.input_shape, 2)
    schedule = LambdaSchedule(lambda_initial=2, lambda_min=2)
    config = TrainConfig(
        learning_rate=0.02,
        batch_size=32,
        max_iterations=300,
        margin=m,
        lambda_schedule=schedule,
        seed=1,
    )
    history = train(spec, blobs, config).state.loss_history
    tenth = len(history) // 10
    assert np.mean(history[-tenth:]) < np.mean(history[:tenth])


def test_m1_matches_reference_softmax_trajectory(blobs):
    spec = build_network_spec("dense 6, prelu, dense 2", blobs.input_shape, 2)
    schedule = LambdaSchedule(lambda_initial=5, lambda_min=0, gamma=0.5, window=5)
    config = TrainConfig(
        learning_rate=0.05, batch_size=16, max_iterations=30, margin=1, lambda_schedule=schedule
    )
    lsoftmax_run = train(spec, blobs, config)
    reference_run = train(spec, blobs, config, reference_softmax=True)
    assert lsoftmax_run.state.loss_history == reference_run.state.loss_history
    for name, value in lsoftmax_run.state.params.items():
        assert np.array_equal(value, reference_run.state.params[name]), name


def test_huge_lambda_tracks_softmax_trajectory():
    data = two_blobs()
    spec = linear_spec()
    base = dict(learning_rate=0.01, batch_size=20, max_iterations=100, seed=2)
    softmax_run = train(spec, data, TrainConfig(margin=1, **base))
    blended_run = train(
        spec,
        data,
        TrainConfig(
            margin=4, lambda_schedule=LambdaSchedule(lambda_initial=1e6, lambda_min=1e6), **base
        ),
    )
    losses = np.array([r.train_loss for r in blended_run.records])
    reference = np.array([r.train_loss for r in softmax_run.records])
    assert losses.shape == (100,)
    assert np.max(np.abs(losses - reference)) <= 1e-3
    delta = blended_run.state.params[CLASSIFIER_KEY] - softmax_run.state.params[CLASSIFIER_KEY]
    assert np.max(np.abs(delta)) <= 1e-3


def test_train_rejects_empty_training_split():
    data = make_blobs(n_per_class=5, classes=2, dim=2, spread=0.1, seed=0)
    empty = DatasetSplit(
        train=data.train.take(np.arange(0)),
        val=data.val,
        test=data.test,
        num_classes=2,
    )
    with pytest.raises(EmptyEvalSet):
        train(linear_spec(), empty, TrainConfig(max_iterations=1))
