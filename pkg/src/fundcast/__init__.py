"""Actor-critic forecasting of crowdfunding funding progress, with an
option-switching actor that adapts to fast- and slow-growing phases of
the funding cycle."""

__version__ = "0.1.0"

from .autodiff import Tensor, no_grad
from .config import RunConfig, load_config
from .env import Campaign, CrowdfundingEnv, load_dataset, reward_kernel, save_dataset
from .evaluation import EvalReport, UShapeReport, evaluate, forecast, ushape_analysis
from .generator import GeneratorConfig, generate_campaigns
from .losses import LossWeights
from .networks import PolicyNets
from .replay import ReplayBuffer, Trajectory
from .training import Trainer, rollout, train

__all__ = [
    "Campaign",
    "CrowdfundingEnv",
    "EvalReport",
    "GeneratorConfig",
    "LossWeights",
    "PolicyNets",
    "ReplayBuffer",
    "RunConfig",
    "Tensor",
    "Trainer",
    "Trajectory",
    "UShapeReport",
    "evaluate",
    "forecast",
    "generate_campaigns",
    "load_config",
    "load_dataset",
    "no_grad",
    "reward_kernel",
    "rollout",
    "save_dataset",
    "train",
    "ushape_analysis",
]
