"""Joint training loop, policy serialization and evaluation rollouts.

One seeded generator drives the whole run; per step the draw order is
fixed (precoding noise, exploration coin, config draw when exploring,
minibatch indices), so training is reproducible bit for bit.  The channel
is redrawn each episode (episode-level coherence) unless frozen; the
stored power at device 2 carries across steps within an episode.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from ..allocation import allocate_antennas, enumerate_configs
from ..channel import partition, sample_channel
from ..metrics import CovariancePair, PowerBudget, clamp_harvest, effective_sinr, harvested_power, info_rate
from ..numerics import ContractError
from .agents import AgentHyperparams, ReplayBuffer, ddpg_update, ddqn_update, update_targets
from .env import EnvAction, EnvState, env_step, reset_state
from .nets import Adam, Mlp, RunningNorm

ACTOR_HIDDEN = (256, 128)
DDQN_HIDDEN = (64, 64)

_ARTIFACT_MAGIC = "fdswipt-policy v1"


@dataclass
class PolicyArtifact:
    """Everything needed to replay a trained policy."""

    m: int
    n: int
    seed: int
    p_s: float
    alpha: float
    hyperparams: dict
    norm_count: float
    norm_mean: np.ndarray
    norm_m2: np.ndarray
    nets: dict = field(default_factory=dict)   # name -> Mlp

    @property
    def ap_dim(self):
        return self.m * self.m + self.n * self.n

    def normalizer(self):
        return RunningNorm(dim=2, count=self.norm_count,
                           mean=self.norm_mean.copy(), m2=self.norm_m2.copy())


def _episode_channel_seed(seed, episode):
    # Stable per-episode derivation; SeedSequence hashes the tuple.
    return int(np.random.SeedSequence((seed, episode)).generate_state(1)[0])


def build_networks(m, n, n_configs, rng):
    """Online and target networks in their documented construction order."""
    ap_dim = m * m + n * n
    actor = Mlp((2, *ACTOR_HIDDEN, ap_dim), ("relu", "relu", "sigmoid"), rng)
    critic = Mlp((2 + ap_dim, *ACTOR_HIDDEN, 1), ("relu", "relu", "linear"), rng)
    qnet = Mlp((2, *DDQN_HIDDEN, n_configs), ("relu", "relu", "linear"), rng)
    return {
        "actor": actor, "actor_target": actor.clone(),
        "critic": critic, "critic_target": critic.clone(),
        "qnet": qnet, "qnet_target": qnet.clone(),
    }


def train(chan_params, budget, hp=None, seed=0, freeze_channel=False, quiet=True):
    """Run the hybrid training loop.

    Returns (PolicyArtifact, curve) where curve is a list of per-episode
    rows ``(episode, mean_reward, mean_harvested_w, epsilon)``.
    """
    hp = hp or AgentHyperparams()
    rng = np.random.default_rng(seed)
    configs = enumerate_configs(chan_params.m, chan_params.n)
    sigma2 = chan_params.sigma2
    nets = build_networks(chan_params.m, chan_params.n, len(configs), rng)
    adams = {
        "actor": Adam(nets["actor"].params(), hp.nu),
        "critic": Adam(nets["critic"].params(), hp.nu),
        "qnet": Adam(nets["qnet"].params(), hp.nu),
    }
    ap_dim = chan_params.m ** 2 + chan_params.n ** 2
    buffer = ReplayBuffer(hp.buffer_capacity, ap_dim)
    normalizer = RunningNorm(dim=2)

    total_steps = hp.episodes * hp.steps_per_episode
    curve = []
    step_count = 0
    for episode in range(hp.episodes):
        chan_seed = _episode_channel_seed(seed, 0 if freeze_channel else episode)
        chan = sample_channel(chan_params, chan_seed)
        state = reset_state(chan, budget, sigma2, configs, rng)
        normalizer.update(state.features())
        reward_sum = 0.0
        harvested_sum = 0.0
        epsilon = hp.epsilon_at(step_count, total_steps)
        for _ in range(hp.steps_per_episode):
            epsilon = hp.epsilon_at(step_count, total_steps)
            sigma_noise = hp.noise_sigma_at(step_count, total_steps)
            feats = normalizer.transform(state.features())

            a_p = nets["actor"](feats)[0]
            a_p = np.clip(a_p + sigma_noise * rng.standard_normal(ap_dim), 0.0, 1.0)
            if rng.random() < epsilon:
                a_c = int(rng.integers(len(configs)))
            else:
                a_c = int(np.argmax(nets["qnet"](feats)[0]))

            next_state, reward = env_step(
                state, EnvAction(a_p=a_p, a_c=a_c), chan, budget, sigma2, configs)
            buffer.push(state, a_p, a_c, reward, next_state)
            normalizer.update(next_state.features())
            reward_sum += reward
            harvested_sum += next_state.s1

            if len(buffer) >= hp.batch:
                batch = buffer.sample(hp.batch, rng)
                ddpg_update(batch, nets["actor"], nets["actor_target"],
                            nets["critic"], nets["critic_target"],
                            adams["actor"], adams["critic"], hp, normalizer)
                ddqn_update(batch, nets["qnet"], nets["qnet_target"],
                            adams["qnet"], hp, normalizer)
            step_count += 1
            if step_count % hp.target_period == 0:
                update_targets(
                    [(nets["actor_target"], nets["actor"]),
                     (nets["critic_target"], nets["critic"]),
                     (nets["qnet_target"], nets["qnet"])], hp.tau_polyak)
            state = next_state
        curve.append((episode,
                      reward_sum / hp.steps_per_episode,
                      harvested_sum / hp.steps_per_episode,
                      epsilon))
        if not quiet and (episode + 1) % 25 == 0:
            print(f"episode {episode + 1}/{hp.episodes}: "
                  f"mean reward {curve[-1][1]:.3f} bps/Hz, eps {epsilon:.3f}")

    artifact = PolicyArtifact(
        m=chan_params.m, n=chan_params.n, seed=seed, p_s=budget.p_s,
        alpha=budget.alpha, hyperparams=_hp_dict(hp),
        norm_count=normalizer.count, norm_mean=normalizer.mean.copy(),
        norm_m2=normalizer.m2.copy(), nets=nets)
    return artifact, curve


def _hp_dict(hp):
    return {
        "zeta": hp.zeta, "nu": hp.nu, "tau_polyak": hp.tau_polyak,
        "batch": hp.batch, "target_period": hp.target_period,
        "episodes": hp.episodes, "steps_per_episode": hp.steps_per_episode,
        "buffer_capacity": hp.buffer_capacity,
        "eps_start": hp.eps_start, "eps_end": hp.eps_end,
        "eps_decay_frac": hp.eps_decay_frac,
        "noise_sigma_start": hp.noise_sigma_start,
        "noise_sigma_end": hp.noise_sigma_end,
    }


def write_curve_csv(curve, stream):
    stream.write("episode,mean_reward,mean_harvested_w,epsilon\n")
    for episode, reward, harvested, epsilon in curve:
        stream.write(f"{episode},{reward:.17g},{harvested:.17g},{epsilon:.17g}\n")


def save_policy(artifact, path):
    """Flat text serialization: header lines, then row-major parameter blocks."""
    with open(path, "w") as fh:
        fh.write(_ARTIFACT_MAGIC + "\n")
        fh.write(f"m {artifact.m}\nn {artifact.n}\nseed {artifact.seed}\n")
        fh.write(f"p_s {float(artifact.p_s)!r}\nalpha {float(artifact.alpha)!r}\n")
        fh.write("hyperparams " + json.dumps(artifact.hyperparams, sort_keys=True) + "\n")
        fh.write(f"norm_count {float(artifact.norm_count)!r}\n")
        fh.write("norm_mean " + " ".join(repr(float(v)) for v in artifact.norm_mean) + "\n")
        fh.write("norm_m2 " + " ".join(repr(float(v)) for v in artifact.norm_m2) + "\n")
        for name in sorted(artifact.nets):
            net = artifact.nets[name]
            sizes = ",".join(str(s) for s in net.sizes)
            acts = ",".join(net.activations)
            fh.write(f"net {name} sizes {sizes} activations {acts}\n")
            for i, (w, b) in enumerate(zip(net.weights, net.biases)):
                fh.write(f"param {name} w{i} {w.shape[0]} {w.shape[1]}\n")
                for row in w:
                    fh.write(" ".join(repr(float(v)) for v in row) + "\n")
                fh.write(f"param {name} b{i} 1 {b.shape[0]}\n")
                fh.write(" ".join(repr(float(v)) for v in b) + "\n")


def load_policy(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != _ARTIFACT_MAGIC:
        raise ContractError("not a policy artifact file")
    header = {}
    nets = {}
    pos = 1
    while pos < len(lines):
        parts = lines[pos].split()
        if parts[0] == "net":
            name = parts[1]
            sizes = tuple(int(s) for s in parts[3].split(","))
            acts = tuple(parts[5].split(","))
            net = Mlp(sizes, acts, np.random.default_rng(0))
            nets[name] = net
            pos += 1
        elif parts[0] == "param":
            name, tag = parts[1], parts[2]
            rows, cols = int(parts[3]), int(parts[4])
            block = np.array([[float(v) for v in lines[pos + 1 + r].split()]
                              for r in range(rows)])
            layer = int(tag[1:])
            if tag.startswith("w"):
                nets[name].weights[layer] = block
            else:
                nets[name].biases[layer] = block[0]
            pos += 1 + rows
        else:
            key = parts[0]
            if key == "hyperparams":
                header[key] = json.loads(lines[pos].split(None, 1)[1])
            elif key in ("norm_mean", "norm_m2"):
                header[key] = np.array([float(v) for v in parts[1:]])
            else:
                header[key] = parts[1]
            pos += 1
    return PolicyArtifact(
        m=int(header["m"]), n=int(header["n"]), seed=int(header["seed"]),
        p_s=float(header["p_s"]), alpha=float(header["alpha"]),
        hyperparams=header["hyperparams"], norm_count=float(header["norm_count"]),
        norm_mean=header["norm_mean"], norm_m2=header["norm_m2"], nets=nets)


def rollout_policy(artifact, chan, budget, steps, sigma2, rng=None):
    """Greedy rollout (no exploration) of a frozen policy.

    Returns (mean_reward, mean_harvested_w).
    """
    configs = enumerate_configs(artifact.m, artifact.n)
    normalizer = artifact.normalizer()
    actor = artifact.nets["actor"]
    qnet = artifact.nets["qnet"]
    rng = rng or np.random.default_rng(0)
    state = reset_state(chan, budget, sigma2, configs, rng)
    reward_sum = 0.0
    harvested_sum = 0.0
    for _ in range(steps):
        feats = normalizer.transform(state.features())
        a_p = np.clip(actor(feats)[0], 0.0, 1.0)
        a_c = int(np.argmax(qnet(feats)[0]))
        state, reward = env_step(state, EnvAction(a_p=a_p, a_c=a_c),
                                 chan, budget, sigma2, configs)
        reward_sum += reward
        harvested_sum += state.s1
    return reward_sum / steps, harvested_sum / steps


def baseline_rollout(chan, budget, steps, sigma2, prefer_max_gain=False):
    """Greedy-allocation + equal-power reference under the same dynamics.

    Device 2 spends everything it stored in the previous slot each step.
    """
    config = allocate_antennas(chan, budget.p_s, budget.p_q, prefer_max_gain=prefer_max_gain)
    sub = partition(chan, config, sigma2)
    s1 = budget.p_s
    reward_sum = 0.0
    harvested_sum = 0.0
    for _ in range(steps):
        pair = CovariancePair(
            q1=(budget.p_s / config.m_h) * np.eye(config.m_h, dtype=complex),
            q2=(s1 / config.n_i) * np.eye(config.n_i, dtype=complex),
        )
        reward_sum += info_rate(sub, pair)
        s1 = clamp_harvest(harvested_power(sub, pair), budget.p_s)
        harvested_sum += s1
    return reward_sum / steps, harvested_sum / steps
