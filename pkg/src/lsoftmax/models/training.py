from enum import Enum
from typing import List

from pydantic import ConfigDict, Field, field_validator, model_validator

from . import BaseModel


class LambdaDecay(str, Enum):
    step = "step"
    inverse = "inverse"


class LambdaSchedule(BaseModel):
    """Annealing schedule for the blend weight λ of the target-class logit.

    :param lambda_initial: λ at iteration 0 (defaults to `0`, i.e. no blending).
    :type lambda_initial: float

    :param lambda_min: Floor that λ never drops below (defaults to `0`).
    :type lambda_min: float

    :param kind: ``step`` multiplies λ by ``gamma`` once every ``window`` iterations.
        ``inverse`` uses ``lambda_initial / (1 + inverse_rate * t)``.
    :type kind: LambdaDecay

    :param gamma: Multiplicative factor in ``(0, 1]`` for the ``step`` rule. ``1`` keeps λ
        constant.
    :type gamma: float

    :param window: Number of iterations between ``step`` decays.
    :type window: int

    :param inverse_rate: Rate of the ``inverse`` rule.
    :type inverse_rate: float
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    lambda_initial: float = Field(default=0.0, ge=0.0)
    lambda_min: float = Field(default=0.0, ge=0.0)
    kind: LambdaDecay = LambdaDecay.step
    gamma: float = Field(default=1.0, gt=0.0, le=1.0)
    window: int = Field(default=1, ge=1)
    inverse_rate: float = Field(default=0.1, ge=0.0)

    @model_validator(mode="after")
    def _initial_not_below_floor(self):
        if self.lambda_initial < self.lambda_min:
            raise ValueError(
                f"lambda_initial ({self.lambda_initial}) must be >= lambda_min ({self.lambda_min})"
            )
        return self


class TrainConfig(BaseModel):
    """Optimization run configuration. Defaults are the published MNIST settings.

    :param learning_rate: Base learning rate (defaults to `0.1`).
    :type learning_rate: float

    :param lr_drop_iterations: Iterations at which the learning rate is multiplied by
        ``lr_drop_factor``. Must be strictly increasing.
    :type lr_drop_iterations: List[int]

    :param lr_drop_factor: Learning rate multiplier applied at each drop (defaults to `0.1`).
    :type lr_drop_factor: float

    :param momentum: Momentum coefficient in ``[0, 1)`` (defaults to `0.9`).
    :type momentum: float

    :param weight_decay: L2 coefficient applied to weights and PReLU slopes, never to biases
        (defaults to `0.0005`).
    :type weight_decay: float

    :param batch_size: Mini-batch size (defaults to `256`). Capped at the training set size.
    :type batch_size: int

    :param max_iterations: Number of SGD steps. `0` returns the initial parameters.
    :type max_iterations: int

    :param margin: The integer margin ``m`` (defaults to `1`, plain softmax).
    :type margin: int

    :param lambda_schedule: The λ annealing schedule.
    :type lambda_schedule: LambdaSchedule

    :param seed: Seed for initialization and mini-batch shuffling.
    :type seed: int

    :param val_interval: Evaluate validation error every N iterations (`0` disables).
    :type val_interval: int
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    learning_rate: float = Field(default=0.1, gt=0.0)
    lr_drop_iterations: List[int] = Field(default_factory=list)
    lr_drop_factor: float = Field(default=0.1, gt=0.0)
    momentum: float = Field(default=0.9, ge=0.0, lt=1.0)
    weight_decay: float = Field(default=0.0005, ge=0.0)
    batch_size: int = Field(default=256, ge=1)
    max_iterations: int = Field(default=1000, ge=0)
    margin: int = Field(default=1, ge=1)
    lambda_schedule: LambdaSchedule = Field(default_factory=LambdaSchedule)
    seed: int = 0
    val_interval: int = Field(default=0, ge=0)

    @field_validator("lr_drop_iterations")
    @classmethod
    def _strictly_increasing(cls, value: List[int]) -> List[int]:
        if any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError("lr_drop_iterations must be strictly increasing")
        if any(i < 0 for i in value):
            raise ValueError("lr_drop_iterations must be nonnegative")
        return value
