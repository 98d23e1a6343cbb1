from .tensor import (
    Param,
    assert_finite,
    get_default_dtype,
    kaiming_uniform,
    precision,
    read_tensor,
    set_default_dtype,
    tensor_to_bytes,
    write_tensor,
    zeros,
)
from .ops import (
    ConvSpec,
    activation,
    activation_backward,
    conv2d,
    conv2d_backward,
    conv2d_shared,
    conv2d_shared_backward,
    dense,
    dense_backward,
    elementwise,
    elementwise_backward,
    flatten,
    flatten_backward,
    max_pool2d,
    max_pool2d_backward,
    pool_output_extent,
)

__all__ = [
    'Param',
    'ConvSpec',
    'assert_finite',
    'get_default_dtype',
    'set_default_dtype',
    'precision',
    'kaiming_uniform',
    'zeros',
    'read_tensor',
    'write_tensor',
    'tensor_to_bytes',
    'conv2d',
    'conv2d_backward',
    'conv2d_shared',
    'conv2d_shared_backward',
    'max_pool2d',
    'max_pool2d_backward',
    'pool_output_extent',
    'dense',
    'dense_backward',
    'activation',
    'activation_backward',
    'elementwise',
    'elementwise_backward',
    'flatten',
    'flatten_backward',
]
