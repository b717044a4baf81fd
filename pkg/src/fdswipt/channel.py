"""Channel generation, noise statistics and per-configuration slicing.

The direct link between the two devices is an N x M Rayleigh matrix ``h``
(unit mean entry power) and is transpose symmetric: the reverse link is
``h.T``.  Each device also sees a Rician self-interference channel
(``h1``: M x M at device 1, ``h2``: N x N at device 2) whose power can be
attenuated by a configurable number of dB to model SI cancellation.
"""

import math
from dataclasses import dataclass

import numpy as np

from .numerics import ContractError
from .units import db_to_linear

DEFAULT_NOISE_PSD_DBM_HZ = -169.0
DEFAULT_BANDWIDTH_HZ = 1e6
DEFAULT_RICIAN_K_DB = 10.0
DEFAULT_SI_ATTENUATION_DB = 0.0

_EXPORT_MAGIC = "fdswipt-channel v1"


@dataclass(frozen=True)
class ChannelParams:
    """Static link parameters; antenna counts must be at least two per device."""

    m: int
    n: int
    rician_k_db: float = DEFAULT_RICIAN_K_DB
    si_attenuation_db: float = DEFAULT_SI_ATTENUATION_DB
    noise_psd_dbm_hz: float = DEFAULT_NOISE_PSD_DBM_HZ
    bandwidth_hz: float = DEFAULT_BANDWIDTH_HZ

    def __post_init__(self):
        if self.m < 2 or self.n < 2:
            raise ContractError("both devices need at least two antennas")
        if self.bandwidth_hz <= 0:
            raise ContractError("bandwidth must be positive")

    @property
    def sigma2(self):
        """AWGN power per antenna in watts."""
        return noise_power(self.noise_psd_dbm_hz, self.bandwidth_hz)


@dataclass(frozen=True)
class ChannelRealization:
    """One coherence interval of CSI.

    ``h`` is the N x M direct link, ``h1``/``h2`` the full (unsliced)
    self-interference matrices at device 1 / device 2.
    """

    h: np.ndarray
    h1: np.ndarray
    h2: np.ndarray
    seed: int

    @property
    def n(self):
        return self.h.shape[0]

    @property
    def m(self):
        return self.h.shape[1]


@dataclass(frozen=True)
class SubsystemChannels:
    """Channel blocks of one antenna partition.

    h_it : (m_i, n_i) info link into device 1's IT antennas
    h_eh : (n_h, m_h) energy link into device 2's EH antennas
    si_p1: (m_i, m_h) self-interference at device 1
    si_p2: (n_h, n_i) self-interference at device 2
    sigma1, sigma2: diagonal AWGN covariances on the receive antennas
    """

    h_it: np.ndarray
    h_eh: np.ndarray
    si_p1: np.ndarray
    si_p2: np.ndarray
    sigma1: np.ndarray
    sigma2: np.ndarray


def _crandn(rng, rows, cols):
    # Unit mean-square complex Gaussian entries.
    return (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / math.sqrt(2.0)


def sample_channel(params, rng_seed):
    """Draw one channel realization, deterministic in ``rng_seed``.

    Draw order is fixed (direct link, then SI at device 1, then SI at
    device 2) so that serialized realizations can be regenerated across
    versions.  Direct-link entries are CN(0, 1); SI entries are Rician with
    the configured K-factor (deterministic unit line-of-sight component)
    scaled so their mean power equals the configured SI attenuation.
    """
    rng = np.random.default_rng(rng_seed)
    h = _crandn(rng, params.n, params.m)

    k_db = params.rician_k_db
    si_gain = math.sqrt(db_to_linear(-params.si_attenuation_db))
    if math.isinf(k_db) and k_db > 0:
        los_w, nlos_w = 1.0, 0.0
    else:
        k = db_to_linear(k_db)
        los_w = math.sqrt(k / (k + 1.0))
        nlos_w = math.sqrt(1.0 / (k + 1.0))

    def rician(dim):
        scatter = _crandn(rng, dim, dim)
        los = np.ones((dim, dim), dtype=complex)
        return si_gain * (los_w * los + nlos_w * scatter)

    h1 = rician(params.m)
    h2 = rician(params.n)
    return ChannelRealization(h=h, h1=h1, h2=h2, seed=int(rng_seed))


def noise_power(psd_dbm_hz, bandwidth_hz):
    """Noise power in watts for a PSD in dBm/Hz over a bandwidth in Hz."""
    return 10.0 ** ((psd_dbm_hz - 30.0) / 10.0) * bandwidth_hz


def noise_covariance(psd_dbm_hz, bandwidth_hz, dim):
    """sigma^2 * I_dim in watts."""
    if dim < 1:
        raise ContractError("noise covariance dimension must be >= 1")
    return noise_power(psd_dbm_hz, bandwidth_hz) * np.eye(dim, dtype=complex)


def partition(chan, config, sigma2):
    """Slice a realization into the blocks of one antenna configuration.

    Antenna indices in ``config`` are 1-based.  The info link ``h_it`` is
    the transpose-symmetric reverse link restricted to (device-1 IT rows,
    device-2 IT columns); ``h_eh`` the forward link restricted to the EH
    sets; SI blocks cross the transmit set into the co-located receive set.
    """
    config.validate(chan.m, chan.n)
    p1_eh = np.asarray(config.p1_eh, dtype=int) - 1
    p1_it = np.asarray(config.p1_it, dtype=int) - 1
    p2_eh = np.asarray(config.p2_eh, dtype=int) - 1
    p2_it = np.asarray(config.p2_it, dtype=int) - 1

    h_it = chan.h[np.ix_(p2_it, p1_it)].T
    h_eh = chan.h[np.ix_(p2_eh, p1_eh)]
    si_p1 = chan.h1[np.ix_(p1_it, p1_eh)]
    si_p2 = chan.h2[np.ix_(p2_eh, p2_it)]
    return SubsystemChannels(
        h_it=h_it,
        h_eh=h_eh,
        si_p1=si_p1,
        si_p2=si_p2,
        sigma1=sigma2 * np.eye(len(p1_it), dtype=complex),
        sigma2=sigma2 * np.eye(len(p2_eh), dtype=complex),
    )


def _format_entry(z):
    return f"{z.real:.17g}{z.imag:+.17g}i"


def _parse_entry(token):
    return complex(token.replace("i", "j"))


def export_channel(chan, stream):
    """Write a realization in the plain-text interchange format.

    Layout: a magic line, ``M``/``N``/``seed`` header lines, then one block
    per matrix (``H``, ``H1``, ``H2``) with a ``<name> <rows> <cols>`` line
    followed by one row per line, cells as ``a+bi`` separated by spaces.
    """
    stream.write(_EXPORT_MAGIC + "\n")
    stream.write(f"M {chan.m}\nN {chan.n}\nseed {chan.seed}\n")
    for name, mat in (("H", chan.h), ("H1", chan.h1), ("H2", chan.h2)):
        stream.write(f"{name} {mat.shape[0]} {mat.shape[1]}\n")
        for row in mat:
            stream.write(" ".join(_format_entry(z) for z in row) + "\n")


def import_channel(stream):
    """Inverse of :func:`export_channel`."""
    lines = [ln.strip() for ln in stream.read().splitlines() if ln.strip()]
    if not lines or lines[0] != _EXPORT_MAGIC:
        raise ContractError("not a channel export file")
    header = {}
    pos = 1
    for _ in range(3):
        key, val = lines[pos].split()
        header[key] = int(val)
        pos += 1
    mats = {}
    while pos < len(lines):
        name, rows, cols = lines[pos].split()
        rows, cols = int(rows), int(cols)
        pos += 1
        block = np.empty((rows, cols), dtype=complex)
        for r in range(rows):
            block[r] = [_parse_entry(tok) for tok in lines[pos].split()]
            pos += 1
        mats[name] = block
    for name, shape in (("H", (header["N"], header["M"])),
                        ("H1", (header["M"], header["M"])),
                        ("H2", (header["N"], header["N"]))):
        if name not in mats or mats[name].shape != shape:
            raise ContractError(f"channel export block {name} missing or misshapen")
    return ChannelRealization(h=mats["H"], h1=mats["H1"], h2=mats["H2"], seed=header["seed"])
