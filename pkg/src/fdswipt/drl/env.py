"""MDP view of the full-duplex SWIPT link.

State is (stored power at device 2, link SINR); the hybrid action carries
a bounded precoding vector for the actor-critic half and an antenna
configuration index for the Q-learning half.  Reward is the achieved info
rate, so the identity reward == log2(1 + next SINR) holds by construction.
"""

import math
from dataclasses import dataclass

import numpy as np

from ..channel import partition
from ..metrics import CovariancePair, clamp_harvest, effective_sinr, harvested_power, info_rate
from ..numerics import ContractError


@dataclass(frozen=True)
class EnvState:
    """s1: power available at device 2 (watts); s2: effective SINR (linear)."""

    s1: float
    s2: float

    def features(self):
        """Log-compressed view fed to the networks (raw watts span ~15 decades)."""
        return np.array([math.log10(max(self.s1, 1e-30)), math.log2(1.0 + self.s2)])


@dataclass(frozen=True)
class EnvAction:
    """a_p: precoding entries in [0, 1], length M^2 + N^2; a_c: config index."""

    a_p: np.ndarray
    a_c: int


def _covariance_from_action(block, cap):
    """Nonnegative precoder from action entries, trace-rescaled into the cap.

    Requested power is the squared Frobenius norm of the sliced block; it is
    kept when feasible and scaled down onto the trace ball otherwise.
    """
    w = np.asarray(block, dtype=float)
    requested = float((w * w).sum())
    if requested > cap > 0.0:
        w = w * math.sqrt(cap / requested)
    elif cap <= 0.0:
        w = np.zeros_like(w)
    q = w @ w.T
    return w, q.astype(complex)


def env_step(state, action, chan, budget, sigma2, configs):
    """Apply one hybrid action and return (next_state, reward in bps/Hz).

    The precoding vector is sliced per the chosen configuration: the first
    m_h^2 entries of the device-1 block (of size M^2) form W1 and the first
    n_i^2 entries of the device-2 block form W2.  W1 may spend up to the
    device-1 budget; W2 up to the currently stored power s1.  Harvested
    power is clamped at p_s before being carried into the next state.
    """
    if not 0 <= action.a_c < len(configs):
        raise ContractError(f"config index {action.a_c} outside [0, {len(configs)})")
    config = configs[action.a_c]
    m, n = chan.m, chan.n
    a_p = np.asarray(action.a_p, dtype=float)
    if a_p.shape != (m * m + n * n,):
        raise ContractError(f"precoding action must have length {m * m + n * n}")

    m_h, n_i = config.m_h, config.n_i
    _, q1 = _covariance_from_action(a_p[: m_h * m_h].reshape(m_h, m_h), budget.p_s)
    _, q2 = _covariance_from_action(
        a_p[m * m: m * m + n_i * n_i].reshape(n_i, n_i), state.s1)

    sub = partition(chan, config, sigma2)
    pair = CovariancePair(q1=q1, q2=q2)
    rate = info_rate(sub, pair)
    harvested = harvested_power(sub, pair)
    next_state = EnvState(s1=clamp_harvest(harvested, budget.p_s), s2=effective_sinr(rate))
    return next_state, rate


def reset_state(chan, budget, sigma2, configs, rng):
    """Initial state of an episode: device 2 fully charged, SINR from a
    random configuration under equal-power precoding."""
    config = configs[int(rng.integers(len(configs)))]
    sub = partition(chan, config, sigma2)
    pair = CovariancePair(
        q1=(budget.p_s / config.m_h) * np.eye(config.m_h, dtype=complex),
        q2=(budget.p_s / config.n_i) * np.eye(config.n_i, dtype=complex),
    )
    return EnvState(s1=budget.p_s, s2=effective_sinr(info_rate(sub, pair)))
