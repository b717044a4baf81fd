import numpy as np
import pytest

from fdswipt.channel import SubsystemChannels


def crandn(rng, rows, cols):
    return (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / np.sqrt(2.0)


def random_hermitian(rng, dim, scale=1.0):
    a = crandn(rng, dim, dim) * scale
    return 0.5 * (a + a.conj().T)


def random_hpd(rng, dim, jitter=0.1):
    g = crandn(rng, dim, dim)
    return g @ g.conj().T + jitter * np.eye(dim)


def random_psd(rng, dim, trace_cap=None):
    g = crandn(rng, dim, dim)
    q = g @ g.conj().T
    if trace_cap is not None:
        q *= trace_cap * rng.uniform(0.2, 1.0) / np.trace(q).real
    return q


def random_subsystem(rng, m_i=2, m_h=2, n_i=2, n_h=2, sigma2=0.1, si_scale=1.0):
    """Benign-conditioning subsystem for algebraic identity tests."""
    return SubsystemChannels(
        h_it=crandn(rng, m_i, n_i),
        h_eh=crandn(rng, n_h, m_h),
        si_p1=si_scale * crandn(rng, m_i, m_h),
        si_p2=si_scale * crandn(rng, n_h, n_i),
        sigma1=sigma2 * np.eye(m_i, dtype=complex),
        sigma2=sigma2 * np.eye(n_h, dtype=complex),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)
