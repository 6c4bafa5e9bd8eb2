"""Off-policy actor-critic training with error-seeking exploration."""

from .envs import make, env_ids, MdpSpec, StepResult, Transition
from .harness import TrainConfig, MetricsRow, train, evaluate
from .see import AblationMode, MixDecision

__all__ = [
    "make", "env_ids", "MdpSpec", "StepResult", "Transition",
    "TrainConfig", "MetricsRow", "train", "evaluate",
    "AblationMode", "MixDecision",
]
