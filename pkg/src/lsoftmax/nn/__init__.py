from .network import (
    CLASSIFIER_KEY,
    Params,
    Tape,
    build_network_spec,
    init_params,
    network_backward,
    network_forward,
    output_shape,
    parameter_count,
    parse_architecture,
)

__all__ = [
    "CLASSIFIER_KEY",
    "Params",
    "Tape",
    "build_network_spec",
    "init_params",
    "network_backward",
    "network_forward",
    "output_shape",
    "parameter_count",
    "parse_architecture",
]
