"""Antenna-partition enumeration, the greedy allocation and a grid oracle.

A configuration splits each device's antennas into a nonempty EH set and a
nonempty IT set.  There are (2^M - 2) * (2^N - 2) such partitions; they are
ordered by the (device-1 EH bitmask, device-2 EH bitmask) pair, which makes
the index ``delta`` a closed-form function of the masks.
"""

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import channel as channel_mod
from . import metrics as metrics_mod
from .numerics import ContractError


@dataclass(frozen=True)
class SubsystemConfig:
    """One antenna partition; index sets are 1-based, sorted tuples."""

    delta: int
    p1_eh: tuple
    p1_it: tuple
    p2_eh: tuple
    p2_it: tuple

    def __post_init__(self):
        for name in ("p1_eh", "p1_it", "p2_eh", "p2_it"):
            object.__setattr__(self, name, tuple(sorted(getattr(self, name))))
            if not getattr(self, name):
                raise ContractError(f"{name} must be nonempty")

    def validate(self, m, n):
        if sorted(self.p1_eh + self.p1_it) != list(range(1, m + 1)):
            raise ContractError("device-1 EH/IT sets must partition 1..M")
        if sorted(self.p2_eh + self.p2_it) != list(range(1, n + 1)):
            raise ContractError("device-2 EH/IT sets must partition 1..N")

    @property
    def m_h(self):
        return len(self.p1_eh)

    @property
    def m_i(self):
        return len(self.p1_it)

    @property
    def n_h(self):
        return len(self.p2_eh)

    @property
    def n_i(self):
        return len(self.p2_it)


def _mask(indices):
    return sum(1 << (i - 1) for i in indices)


def config_from_eh_sets(m, n, p1_eh, p2_eh):
    """Build the configuration with the given EH sets; delta is derived."""
    p1_eh = tuple(sorted(p1_eh))
    p2_eh = tuple(sorted(p2_eh))
    p1_it = tuple(i for i in range(1, m + 1) if i not in p1_eh)
    p2_it = tuple(i for i in range(1, n + 1) if i not in p2_eh)
    if not p1_eh or not p1_it or not p2_eh or not p2_it:
        raise ContractError("each device needs at least one EH and one IT antenna")
    # Valid EH masks are exactly the integers 1 .. 2^K - 2, so the rank of a
    # mask within the enumeration is mask - 1.
    delta = (_mask(p1_eh) - 1) * (2 ** n - 2) + (_mask(p2_eh) - 1)
    return SubsystemConfig(delta=delta, p1_eh=p1_eh, p1_it=p1_it, p2_eh=p2_eh, p2_it=p2_it)


def enumerate_configs(m, n):
    """All (2^M - 2)(2^N - 2) partitions, ordered by EH bitmasks."""
    if m < 2 or n < 2:
        raise ContractError("enumeration requires at least two antennas per device")
    configs = []
    for mask1 in range(1, 2 ** m - 1):
        p1_eh = tuple(i for i in range(1, m + 1) if mask1 & (1 << (i - 1)))
        for mask2 in range(1, 2 ** n - 1):
            p2_eh = tuple(i for i in range(1, n + 1) if mask2 & (1 << (i - 1)))
            configs.append(config_from_eh_sets(m, n, p1_eh, p2_eh))
    assert all(cfg.delta == pos for pos, cfg in enumerate(configs))
    return configs


def serialize_config(config):
    p1 = ",".join(str(i) for i in config.p1_eh)
    p2 = ",".join(str(i) for i in config.p2_eh)
    return f"delta={config.delta};p1_eh={p1};p2_eh={p2}"


def parse_config(text, m, n):
    fields = dict(part.split("=", 1) for part in text.strip().split(";"))
    p1_eh = tuple(int(tok) for tok in fields["p1_eh"].split(","))
    p2_eh = tuple(int(tok) for tok in fields["p2_eh"].split(","))
    config = config_from_eh_sets(m, n, p1_eh, p2_eh)
    if "delta" in fields and int(fields["delta"]) != config.delta:
        raise ContractError("serialized delta does not match the EH sets")
    return config


def allocate_antennas(chan, p_s, p_q, prefer_max_gain=False):
    """Greedy antenna allocation.

    Starts with every antenna on IT, moves the minimum-|h|^2 transmit/receive
    pair to EH, then keeps moving the antenna with the smallest direct-link
    norm (device 1 wins ties) until the equal-power EH budget estimate
    ``sum_EH P_S |h|^2 / M_h`` reaches ``p_q`` or either IT set is down to
    one antenna.  ``prefer_max_gain`` flips the initial pair selection to
    the maximum-gain pair for sensitivity studies.
    """
    h = chan.h
    n, m = h.shape
    gains = np.abs(h) ** 2

    pick = np.argmax(gains) if prefer_max_gain else np.argmin(gains)
    n_star, m_star = np.unravel_index(pick, gains.shape)
    p1_eh = {int(m_star) + 1}
    p2_eh = {int(n_star) + 1}
    p1_it = set(range(1, m + 1)) - p1_eh
    p2_it = set(range(1, n + 1)) - p2_eh

    col_norms = np.linalg.norm(h, axis=0)
    row_norms = np.linalg.norm(h, axis=1)

    def eh_budget():
        rows = np.asarray(sorted(p2_eh)) - 1
        cols = np.asarray(sorted(p1_eh)) - 1
        return p_s * float(gains[np.ix_(rows, cols)].sum()) / len(p1_eh)

    while eh_budget() < p_q and len(p1_it) > 1 and len(p2_it) > 1:
        m_candidates = sorted(p1_it)
        n_candidates = sorted(p2_it)
        z1 = col_norms[np.asarray(m_candidates) - 1]
        z2 = row_norms[np.asarray(n_candidates) - 1]
        m_star = m_candidates[int(np.argmin(z1))]
        n_star = n_candidates[int(np.argmin(z2))]
        if z1.min() <= z2.min():
            p1_eh.add(m_star)
            p1_it.discard(m_star)
        else:
            p2_eh.add(n_star)
            p2_it.discard(n_star)

    return config_from_eh_sets(m, n, p1_eh, p2_eh)


MAX_EXHAUSTIVE_ANTENNAS = 3


def _diag_grid(dim, cap, levels):
    """Diagonal loadings on the simplex {p >= 0, sum(p) <= cap}, lexicographic."""
    axis = np.linspace(0.0, cap, levels)
    for combo in itertools.product(axis, repeat=dim):
        if sum(combo) <= cap + 1e-12:
            yield np.asarray(combo)


def exhaustive_search(chan, budget, power_grid, sigma2):
    """Small-instance oracle: every configuration x diagonal power grid.

    Ties are broken by the lowest configuration index, then the earliest
    grid point in lexicographic order (strict improvement required to move).
    """
    if chan.m > MAX_EXHAUSTIVE_ANTENNAS or chan.n > MAX_EXHAUSTIVE_ANTENNAS:
        raise ContractError(
            f"exhaustive search is guarded to at most {MAX_EXHAUSTIVE_ANTENNAS} "
            f"antennas per device"
        )
    if power_grid < 2:
        raise ContractError("power_grid must be at least 2")

    best = None
    for config in enumerate_configs(chan.m, chan.n):
        sub = channel_mod.partition(chan, config, sigma2)
        for q1_diag in _diag_grid(config.m_h, budget.p_s, power_grid):
            q1 = np.diag(q1_diag).astype(complex)
            for q2_diag in _diag_grid(config.n_i, budget.p_q, power_grid):
                q2 = np.diag(q2_diag).astype(complex)
                pair = metrics_mod.CovariancePair(q1=q1, q2=q2)
                rate = metrics_mod.info_rate(sub, pair)
                energy = metrics_mod.harvested_power(sub, pair)
                obj = metrics_mod.weighted_objective(rate, energy, budget)
                if best is None or obj > best[2]:
                    best = (config, pair, obj)
    return best
