from .encoder import Encoder, EncoderConfig, EncoderLayer, FeatureMap
from .cgru import CGruState, CGruWeights, ConvGRU, GateActivations, gates, step, zero_state
from .head import HeadConfig, RegressionHead
from .network import DiameterNetwork, ModelConfig, build_profile, expected_keys, expected_shapes

__all__ = [
    'Encoder',
    'EncoderConfig',
    'EncoderLayer',
    'FeatureMap',
    'CGruState',
    'CGruWeights',
    'ConvGRU',
    'GateActivations',
    'gates',
    'step',
    'zero_state',
    'HeadConfig',
    'RegressionHead',
    'DiameterNetwork',
    'ModelConfig',
    'build_profile',
    'expected_keys',
    'expected_shapes',
]
