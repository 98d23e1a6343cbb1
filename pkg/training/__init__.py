from .losses import (
    CycleInfo,
    DiameterTrace,
    LossConfig,
    cyclic_loss,
    cyclic_loss_grad,
    detect_period,
    mse,
    mse_grad,
    total_loss,
    training_cycle,
)
from .optimizer import Adam, AdamState, adam_step
from .checkpoint import Checkpoint, checkpoint_from_network, load_checkpoint, network_from_checkpoint, save_checkpoint
from .evaluation import EvalReport, KsResult, SequenceResult, evaluate, ks_compare, relative_error
from .trainer import TrainConfig, Trainer, run_ablation, train

__all__ = [
    'CycleInfo',
    'DiameterTrace',
    'LossConfig',
    'cyclic_loss',
    'cyclic_loss_grad',
    'detect_period',
    'mse',
    'mse_grad',
    'total_loss',
    'training_cycle',
    'Adam',
    'AdamState',
    'adam_step',
    'Checkpoint',
    'checkpoint_from_network',
    'load_checkpoint',
    'network_from_checkpoint',
    'save_checkpoint',
    'EvalReport',
    'KsResult',
    'SequenceResult',
    'evaluate',
    'ks_compare',
    'relative_error',
    'TrainConfig',
    'Trainer',
    'run_ablation',
    'train',
]
