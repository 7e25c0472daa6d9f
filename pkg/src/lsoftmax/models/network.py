from enum import Enum
from typing import List, Optional, Tuple

from pydantic import ConfigDict, Field, model_validator

from . import BaseModel


class LayerKind(str, Enum):
    dense = "dense"
    conv2d = "conv2d"
    maxpool2x2 = "maxpool2x2"
    prelu = "prelu"
    flatten = "flatten"


class LayerSpec(BaseModel):
    """A single layer of the feature extractor. Only the fields relevant to ``kind`` are
    used; :func:`~lsoftmax.nn.network.parse_architecture` fills them from the compact notation.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: LayerKind

    # dense
    in_features: Optional[int] = Field(default=None, ge=1)
    out_features: Optional[int] = Field(default=None, ge=1)

    # conv2d
    in_channels: Optional[int] = Field(default=None, ge=1)
    out_channels: Optional[int] = Field(default=None, ge=1)
    kernel_size: Optional[int] = Field(default=None, ge=1)
    stride: int = Field(default=1, ge=1)
    padding: int = Field(default=0, ge=0)

    # prelu
    channels: Optional[int] = Field(default=None, ge=1)

    @model_validator(mode="after")
    def _required_fields(self):
        required = {
            LayerKind.dense: ("in_features", "out_features"),
            LayerKind.conv2d: ("in_channels", "out_channels", "kernel_size"),
            LayerKind.prelu: ("channels",),
        }.get(self.kind, ())
        missing = [name for name in required if getattr(self, name) is None]
        if missing:
            raise ValueError(f"{self.kind.value} layer requires: {', '.join(missing)}")
        return self


class NetworkSpec(BaseModel):
    """Declarative description of the feature extractor that feeds the loss.

    :param input_shape: Per-sample input shape, ``(C, H, W)`` for images or ``(D,)`` for vectors.
    :type input_shape: Tuple[int, ...]

    :param layers: Ordered layer list. An empty list is the identity feature map.
    :type layers: List[LayerSpec]

    :param feature_dim: ``D``, the per-sample width of the final output (input of the loss).
    :type feature_dim: int
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    input_shape: Tuple[int, ...]
    layers: List[LayerSpec] = Field(default_factory=list)
    feature_dim: int = Field(ge=1)

    @model_validator(mode="after")
    def _shapes_compose(self):
        # Imported here: the shape algebra lives with the layer implementations.
        from ..nn.network import output_shape

        out = output_shape(self.layers, self.input_shape)
        if out != (self.feature_dim,):
            raise ValueError(
                f"network output shape {out} does not match feature_dim {self.feature_dim}"
            )
        return self
