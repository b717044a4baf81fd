"""Hybrid actor-critic / double-Q solver for joint antenna allocation and precoding."""

from .agents import AgentHyperparams, ReplayBuffer, ddpg_update, ddqn_update, update_targets
from .env import EnvAction, EnvState, env_step, reset_state
from .nets import Adam, Mlp, RunningNorm, polyak_update
from .train import (
    PolicyArtifact,
    baseline_rollout,
    build_networks,
    load_policy,
    rollout_policy,
    save_policy,
    train,
    write_curve_csv,
)
