from trendlag.nn.kernels import BACKEND, available_backends
from trendlag.nn.layers import (
    Network,
    NetworkSpec,
    NonFiniteError,
    Parameter,
    build_network,
    conv1d_forward,
    dense_forward,
    dropout_forward,
    glorot_normal,
)
from trendlag.nn.serialize import load_weights, save_weights, weight_checksum, weights_to_bytes

__all__ = [
    "BACKEND",
    "Network",
    "NetworkSpec",
    "NonFiniteError",
    "Parameter",
    "available_backends",
    "build_network",
    "conv1d_forward",
    "dense_forward",
    "dropout_forward",
    "glorot_normal",
    "load_weights",
    "save_weights",
    "weight_checksum",
    "weights_to_bytes",
]
