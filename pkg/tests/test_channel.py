import io
import math

import numpy as np
import pytest

from fdswipt.allocation import config_from_eh_sets
from fdswipt.channel import (
    ChannelParams,
    ChannelRealization,
    export_channel,
    import_channel,
    noise_covariance,
    noise_power,
    partition,
    sample_channel,
)
from fdswipt.numerics import ContractError


class TestChannelParams:
    def test_antenna_minimum(self):
        with pytest.raises(ContractError):
            ChannelParams(m=1, n=4)
        with pytest.raises(ContractError):
            ChannelParams(m=4, n=1)

    def test_bandwidth_positive(self):
        with pytest.raises(ContractError):
            ChannelParams(m=2, n=2, bandwidth_hz=0.0)


class TestSampling:
    def test_deterministic(self):
        params = ChannelParams(m=3, n=4)
        a = sample_channel(params, 99)
        b = sample_channel(params, 99)
        assert np.array_equal(a.h, b.h)
        assert np.array_equal(a.h1, b.h1)
        assert np.array_equal(a.h2, b.h2)

    def test_unit_mean_power(self):
        # >= 1e5 direct-link draws; sample mean within 2% of 1.
        params = ChannelParams(m=16, n=16)
        total = 0.0
        count = 0
        for seed in range(400):
            h = sample_channel(params, seed).h
            total += float(np.sum(np.abs(h) ** 2))
            count += h.size
        assert count >= 100_000
        assert abs(total / count - 1.0) < 0.02

    def test_infinite_k_factor_gives_los(self):
        params = ChannelParams(m=2, n=2, rician_k_db=math.inf)
        chan = sample_channel(params, 5)
        assert np.allclose(chan.h1, 1.0)
        assert np.allclose(chan.h2, 1.0)

    def test_si_attenuation_scales_power(self):
        strong = ChannelParams(m=8, n=8, si_attenuation_db=0.0)
        weak = ChannelParams(m=8, n=8, si_attenuation_db=20.0)
        p_strong = np.mean([np.mean(np.abs(sample_channel(strong, s).h1) ** 2)
                            for s in range(200)])
        p_weak = np.mean([np.mean(np.abs(sample_channel(weak, s).h1) ** 2)
                          for s in range(200)])
        assert p_weak / p_strong == pytest.approx(0.01, rel=0.05)

    def test_rician_k_estimate(self):
        # Moment estimate |mean|^2 / var of the SI entries, 3-sigma tolerance.
        k_db = 10.0
        params = ChannelParams(m=10, n=10, rician_k_db=k_db)
        entries = np.concatenate([sample_channel(params, s).h1.ravel() for s in range(1000)])
        assert entries.size >= 100_000
        k_hat = np.abs(entries.mean()) ** 2 / entries.var()
        k_true = 10.0 ** (k_db / 10.0)
        # var of the moment estimator is ~ K^2 * (2/n + ...); 3 sigma is generous here
        assert abs(k_hat - k_true) < 3.0 * k_true * math.sqrt(2.0 / entries.size) * 10


class TestNoise:
    def test_table_value(self):
        cov = noise_covariance(-169.0, 1e6, 2)
        assert cov.shape == (2, 2)
        assert cov[0, 0].real == pytest.approx(1.2589e-14, rel=1e-3)
        assert cov[0, 1] == 0.0

    def test_single_dimension(self):
        cov = noise_covariance(-169.0, 1e6, 1)
        assert cov.shape == (1, 1)
        assert cov[0, 0].real == pytest.approx(noise_power(-169.0, 1e6))

    def test_bandwidth_linearity(self):
        assert noise_power(-169.0, 2e6) == pytest.approx(2.0 * noise_power(-169.0, 1e6))

    def test_dimension_guard(self):
        with pytest.raises(ContractError):
            noise_covariance(-169.0, 1e6, 0)


class TestPartition:
    def test_two_by_two_scalar_blocks(self):
        params = ChannelParams(m=2, n=2)
        chan = sample_channel(params, 3)
        config = config_from_eh_sets(2, 2, p1_eh=(1,), p2_eh=(1,))
        sub = partition(chan, config, 1e-3)
        # EH pair (m1, n1); IT pair (m2, n2); reverse link is the transpose.
        assert sub.h_eh[0, 0] == chan.h[0, 0]
        assert sub.h_it[0, 0] == chan.h[1, 1]
        assert sub.si_p1[0, 0] == chan.h1[1, 0]
        assert sub.si_p2[0, 0] == chan.h2[0, 1]
        assert np.allclose(sub.sigma1, 1e-3 * np.eye(1))

    def test_published_eight_by_four_example(self):
        params = ChannelParams(m=8, n=4)
        chan = sample_channel(params, 11)
        config = config_from_eh_sets(8, 4, p1_eh=(3, 4, 7), p2_eh=(1,))
        sub = partition(chan, config, 1e-3)
        assert sub.h_eh.shape == (1, 3)
        assert sub.h_it.shape == (5, 3)
        assert sub.si_p1.shape == (5, 3)
        assert sub.si_p2.shape == (1, 3)

    def test_swapping_roles_swaps_blocks(self):
        params = ChannelParams(m=3, n=3)
        chan = sample_channel(params, 4)
        config = config_from_eh_sets(3, 3, p1_eh=(1, 2), p2_eh=(3,))
        swapped = config_from_eh_sets(3, 3, p1_eh=(3,), p2_eh=(1, 2))
        a = partition(chan, config, 1e-3)
        b = partition(chan, swapped, 1e-3)
        assert np.array_equal(a.h_eh, b.h_it.T)
        assert np.array_equal(a.h_it, b.h_eh.T)

    def test_blocks_tile_every_entry_once(self):
        # The EH blocks of the four configs built from {EH, IT} x {EH, IT}
        # index products cover every entry of the direct link exactly once.
        params = ChannelParams(m=4, n=3)
        chan = sample_channel(params, 8)
        p1_eh, p1_it = (2, 4), (1, 3)
        p2_eh, p2_it = (1, 3), (2,)
        covered = []
        for side1 in (p1_eh, p1_it):
            for side2 in (p2_eh, p2_it):
                cfg = config_from_eh_sets(4, 3, p1_eh=side1, p2_eh=side2)
                covered.append(partition(chan, cfg, 1.0).h_eh.ravel())
        covered = np.concatenate(covered)
        assert sorted(map(repr, covered)) == sorted(map(repr, chan.h.ravel()))

    def test_bad_config_rejected(self):
        params = ChannelParams(m=3, n=3)
        chan = sample_channel(params, 4)
        config = config_from_eh_sets(4, 3, p1_eh=(2, 4), p2_eh=(1,))
        with pytest.raises(ContractError):
            partition(chan, config, 1e-3)


class TestExportImport:
    def test_round_trip_bit_exact(self):
        params = ChannelParams(m=3, n=2)
        chan = sample_channel(params, 77)
        buf = io.StringIO()
        export_channel(chan, buf)
        back = import_channel(io.StringIO(buf.getvalue()))
        assert np.array_equal(back.h, chan.h)
        assert np.array_equal(back.h1, chan.h1)
        assert np.array_equal(back.h2, chan.h2)
        assert back.seed == chan.seed

    def test_rejects_garbage(self):
        with pytest.raises(ContractError):
            import_channel(io.StringIO("not a channel\n"))

    def test_rejects_missing_block(self):
        params = ChannelParams(m=2, n=2)
        chan = sample_channel(params, 1)
        buf = io.StringIO()
        export_channel(chan, buf)
        text = buf.getvalue().rsplit("H2", 1)[0]
        with pytest.raises(ContractError):
            import_channel(io.StringIO(text))
