"""Attention-loss-adjusted prioritized experience replay (ALAP) and baselines."""

from alap.agents import DdpgAgent, DqnAgent, RunConfig, RunRecord, StepReport, train_run, train_step
from alap.attention import BetaEstimator
from alap.nn import Mlp, copy_target
from alap.priority import Scheme, SchemeConfig
from alap.replay import MirrorBuffer, NotReadyError, PrioritizedBuffer, ReplayPair, Transition
from alap.sum_tree import SumTree

__all__ = [
    "BetaEstimator", "DdpgAgent", "DqnAgent", "MirrorBuffer", "Mlp", "NotReadyError",
    "PrioritizedBuffer", "ReplayPair", "RunConfig", "RunRecord", "Scheme", "SchemeConfig",
    "StepReport", "SumTree", "Transition", "copy_target", "train_run", "train_step",
]
__version__ = "0.1.0"
