"""From-scratch neural network engine: layers, losses, Adam, training."""

from .gradcheck import gradient_check, well_conditioned_instance
from .losses import weighted_cross_entropy
from .network import Network, NetworkSpec, build_network
from .optim import adam_step
from .training import TrainConfig, TrainingHistory, train_network

__all__ = [
    "Network",
    "NetworkSpec",
    "TrainConfig",
    "TrainingHistory",
    "adam_step",
    "build_network",
    "gradient_check",
    "train_network",
    "weighted_cross_entropy",
    "well_conditioned_instance",
]
