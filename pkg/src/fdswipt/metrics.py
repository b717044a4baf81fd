"""Performance functionals of the full-duplex SWIPT link.

Information rate of the device-2 -> device-1 link, harvested power at
device 2, the weighted rate/energy objective, and the time-switching
(harvest-then-transmit) reference scheme.
"""

from dataclasses import dataclass

import numpy as np

from .numerics import ContractError, DomainError, hermitian_logdet, psd_sqrt_factor

LN2 = float(np.log(2.0))


@dataclass(frozen=True)
class PowerBudget:
    """Power limits and objective trade-off.

    p_s : transmit budget at device 1 (watts)
    p_h : power available at device 2, harvested in the previous slot
    p_q : QoS power target; defaults to p_s
    alpha : rate/energy trade-off, strictly inside (0, 1)
    raw_objective : mix harvested watts directly into the objective instead
        of normalizing by p_s (fidelity mode for reproducing the published
        high-power behavior)
    """

    p_s: float
    p_h: float = None
    p_q: float = None
    alpha: float = 0.5
    raw_objective: bool = False

    def __post_init__(self):
        if self.p_s <= 0:
            raise ContractError("p_s must be positive")
        if self.p_h is None:
            object.__setattr__(self, "p_h", self.p_s)
        if self.p_q is None:
            object.__setattr__(self, "p_q", self.p_s)
        if not 0.0 < self.alpha < 1.0:
            raise ContractError("alpha must lie strictly inside (0, 1)")
        if not 0.0 <= self.p_h <= self.p_s + 1e-12:
            raise ContractError("p_h must satisfy 0 <= p_h <= p_s")


@dataclass(frozen=True)
class CovariancePair:
    """Transmit covariances: q1 (m_h x m_h) at device 1, q2 (n_i x n_i) at device 2."""

    q1: np.ndarray
    q2: np.ndarray


def info_rate(sub, qp):
    """Info rate log2|I + (Sigma1 + S1 Q1 S1^H)^-1 H_it Q2 H_it^H| in bps/Hz.

    Evaluated through noise-whitened singular values so that the noise
    floor enters analytically: with G_x = L^-1 S1 F1 and
    G_s = L^-1 H_it F2 (L the Cholesky factor of Sigma1, F_i PSD factors of
    the covariances),

        rate = sum log2(1 + s_i([G_x G_s])^2) - sum log2(1 + s_i(G_x)^2).

    Forming Sigma1 + S1 Q1 S1^H explicitly would drown a 1e-14 W noise
    floor in the roundoff of watt-scale interference terms; the whitened
    form stays exact at any transmit power.
    """
    try:
        lower = np.linalg.cholesky(sub.sigma1)
    except np.linalg.LinAlgError:
        raise DomainError("noise covariance is singular") from None
    inv_l = np.linalg.inv(lower)
    g_x = inv_l @ sub.si_p1 @ psd_sqrt_factor(qp.q1)
    g_s = inv_l @ sub.h_it @ psd_sqrt_factor(qp.q2)
    s_noise = np.linalg.svd(g_x, compute_uv=False)
    s_total = np.linalg.svd(np.hstack([g_x, g_s]), compute_uv=False)
    rate = float(np.log2(1.0 + s_total ** 2).sum() - np.log2(1.0 + s_noise ** 2).sum())
    return max(rate, 0.0)


def harvested_power(sub, qp):
    """Received power at device 2: Tr(H_eh Q1 H_eh^H + S2 Q2 S2^H + Sigma2), watts."""
    t1 = np.einsum("ij,jk,ik->", sub.h_eh, qp.q1, sub.h_eh.conj())
    t2 = np.einsum("ij,jk,ik->", sub.si_p2, qp.q2, sub.si_p2.conj())
    return float((t1 + t2).real + np.trace(sub.sigma2).real)


def weighted_objective(rate, energy, budget):
    """alpha * rate + (1 - alpha) * energy, energy in units of p_s by default."""
    scaled = energy if budget.raw_objective else energy / budget.p_s
    return float(budget.alpha * rate + (1.0 - budget.alpha) * scaled)


def effective_sinr(rate):
    """Scalar SINR gamma with rate == log2(1 + gamma)."""
    if rate < 0:
        raise ContractError("rate must be nonnegative")
    return float(2.0 ** rate - 1.0)


def clamp_harvest(energy, p_s):
    """Harvest carry-over cap: stored power cannot exceed the device-1 budget."""
    return min(energy, p_s)


def time_switching_rate(chan, budget, ts_tau, sigma2):
    """Harvest-then-transmit reference rate in bps/Hz.

    A fraction ``ts_tau`` of the slot charges device 2 with an equal-power
    full-array energy signal from device 1 (stored power capped at p_s); the
    remaining fraction carries half-duplex (SI-free) equal-power MIMO
    transmission from device 2 over all antennas.
    """
    if not 0.0 < ts_tau < 1.0:
        raise ContractError("ts_tau must lie strictly inside (0, 1)")
    n, m = chan.h.shape
    harvest_rate_w = budget.p_s / m * float(np.linalg.norm(chan.h) ** 2) + n * sigma2
    p2_power = clamp_harvest(ts_tau * harvest_rate_w, budget.p_s)
    q2 = p2_power / n * np.eye(n, dtype=complex)
    # Reverse link is h.T; received covariance at device 1 is h.T q2 conj(h).
    gram = chan.h.T @ q2 @ chan.h.conj()
    rate_full = hermitian_logdet(np.eye(m, dtype=complex) + gram / sigma2)
    return float((1.0 - ts_tau) * rate_full)
