"""Replay memory and the two learners: actor-critic and double-Q.

The actor-critic half handles the continuous precoding vector, the
double-Q half the discrete antenna-configuration index.  Both train from
the same shared replay buffer and soft-update their target copies every
``target_period`` steps.
"""

from dataclasses import dataclass

import numpy as np

from ..numerics import ContractError, NumericalFailureError
from .nets import polyak_update


@dataclass(frozen=True)
class AgentHyperparams:
    """Training constants; defaults follow the published configuration."""

    zeta: float = 0.99              # discount
    nu: float = 5e-5                # Adam learning rate, all networks
    tau_polyak: float = 1e-3        # soft target-update coefficient
    batch: int = 64
    target_period: int = 100        # steps between target updates
    episodes: int = 2500
    steps_per_episode: int = 500
    buffer_capacity: int = 20000
    eps_start: float = 1.0          # config exploration, linear decay
    eps_end: float = 0.05
    eps_decay_frac: float = 1.0 / 3.0   # fraction of training spent decaying
    noise_sigma_start: float = 0.1  # Gaussian noise on the precoding action
    noise_sigma_end: float = 0.01

    def __post_init__(self):
        if not 0.0 <= self.zeta < 1.0:
            raise ContractError("zeta must lie in [0, 1)")
        if not 0.0 < self.tau_polyak <= 1.0:
            raise ContractError("tau_polyak must lie in (0, 1]")
        if min(self.batch, self.target_period, self.episodes,
               self.steps_per_episode, self.buffer_capacity) < 1:
            raise ContractError("counts must be positive")

    def epsilon_at(self, step, total_steps):
        horizon = max(1.0, self.eps_decay_frac * total_steps)
        frac = min(step / horizon, 1.0)
        return self.eps_start + (self.eps_end - self.eps_start) * frac

    def noise_sigma_at(self, step, total_steps):
        frac = min(step / max(1.0, total_steps), 1.0)
        return self.noise_sigma_start + (self.noise_sigma_end - self.noise_sigma_start) * frac


class ReplayBuffer:
    """FIFO ring of transitions with uniform minibatch sampling.

    Sampling within one minibatch is without replacement.  Storage is
    preallocated flat arrays (states as raw (s1, s2) pairs, not features,
    so the running feature normalizer can evolve during training).
    """

    def __init__(self, capacity, ap_dim):
        if capacity < 1:
            raise ContractError("capacity must be positive")
        self.capacity = capacity
        self.states = np.zeros((capacity, 2))
        self.actions_p = np.zeros((capacity, ap_dim))
        self.actions_c = np.zeros(capacity, dtype=int)
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, 2))
        self.size = 0
        self.cursor = 0

    def push(self, state, a_p, a_c, reward, next_state):
        if not (np.isfinite(reward) and np.all(np.isfinite(a_p))):
            raise NumericalFailureError("non-finite transition rejected by replay buffer")
        i = self.cursor
        self.states[i] = (state.s1, state.s2)
        self.actions_p[i] = a_p
        self.actions_c[i] = a_c
        self.rewards[i] = reward
        self.next_states[i] = (next_state.s1, next_state.s2)
        self.cursor = (self.cursor + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def __len__(self):
        return self.size

    def sample(self, batch, rng):
        if batch > self.size:
            raise ContractError("cannot sample more transitions than stored")
        idx = rng.choice(self.size, size=batch, replace=False)
        return {
            "states": self.states[idx],
            "actions_p": self.actions_p[idx],
            "actions_c": self.actions_c[idx],
            "rewards": self.rewards[idx],
            "next_states": self.next_states[idx],
        }


def _features(normalizer, raw_states):
    s1 = np.maximum(raw_states[:, 0], 1e-30)
    feats = np.column_stack([np.log10(s1), np.log2(1.0 + raw_states[:, 1])])
    return normalizer.transform(feats)


def ddpg_update(batch, actor, actor_target, critic, critic_target,
                actor_adam, critic_adam, hp, normalizer):
    """One actor-critic step on a sampled minibatch.

    The critic regresses onto the bootstrapped target
    y = r + zeta * Q'(s', mu'(s')); the actor ascends the sample mean of
    Q(s, mu(s)) through the critic's action-input gradient.
    Returns (critic_loss, actor_objective).
    """
    feats = _features(normalizer, batch["states"])
    next_feats = _features(normalizer, batch["next_states"])
    batch_size = feats.shape[0]

    next_actions = actor_target(next_feats)
    next_q = critic_target(np.hstack([next_feats, next_actions]))[:, 0]
    targets = batch["rewards"] + hp.zeta * next_q

    critic_in = np.hstack([feats, batch["actions_p"]])
    q_pred, cache = critic.forward(critic_in)
    err = q_pred[:, 0] - targets
    critic_loss = float(np.mean(err ** 2))
    grads, _ = critic.backward((2.0 * err / batch_size)[:, None], cache)
    if not all(np.all(np.isfinite(g)) for g in grads):
        raise NumericalFailureError("non-finite critic gradient")
    critic_adam.step(critic.params(), grads)

    actions, actor_cache = actor.forward(feats)
    q_of_actor, critic_cache = critic.forward(np.hstack([feats, actions]))
    actor_objective = float(np.mean(q_of_actor))
    _, dq_dinput = critic.backward(np.full((batch_size, 1), 1.0 / batch_size), critic_cache)
    dq_daction = dq_dinput[:, feats.shape[1]:]
    actor_grads, _ = actor.backward(-dq_daction, actor_cache)
    if not all(np.all(np.isfinite(g)) for g in actor_grads):
        raise NumericalFailureError("non-finite actor gradient")
    actor_adam.step(actor.params(), actor_grads)
    return critic_loss, actor_objective


def ddqn_update(batch, qnet, q_target, adam, hp, normalizer):
    """One double-Q step: the target network selects the next action, the
    online network evaluates it.  Returns the minibatch loss."""
    feats = _features(normalizer, batch["states"])
    next_feats = _features(normalizer, batch["next_states"])
    batch_size = feats.shape[0]

    best_next = np.argmax(q_target(next_feats), axis=1)
    online_next = qnet(next_feats)
    targets = batch["rewards"] + hp.zeta * online_next[np.arange(batch_size), best_next]

    q_all, cache = qnet.forward(feats)
    chosen = batch["actions_c"]
    err = q_all[np.arange(batch_size), chosen] - targets
    loss = float(np.mean(err ** 2))
    grad_out = np.zeros_like(q_all)
    grad_out[np.arange(batch_size), chosen] = 2.0 * err / batch_size
    grads, _ = qnet.backward(grad_out, cache)
    if not all(np.all(np.isfinite(g)) for g in grads):
        raise NumericalFailureError("non-finite double-Q gradient")
    adam.step(qnet.params(), grads)
    return loss


def update_targets(pairs, tau):
    """Soft-update each (target, online) pair."""
    for target, online in pairs:
        polyak_update(target, online, tau)
