import numpy as np
import pytest

from myoctl.timeseries import differentiate, resample


class TestResample:
    def test_constant_trace_is_preserved(self):
        const = np.full(4000, 0.7345)
        down = resample(const, 2000, 500)
        up = resample(down, 500, 2000)
        assert np.abs(down - 0.7345).max() < 1e-12
        assert np.abs(up - 0.7345).max() < 1e-12

    def test_length_arithmetic(self):
        down = resample(np.zeros(8000), 2000, 500)
        assert len(down) == 2000
        up = resample(np.zeros(2000), 500, 2000)
        assert len(up) == 8000

    def test_sine_down_up_round_trip(self):
        t = np.arange(8000) / 2000.0
        sig = np.sin(2 * np.pi * 10.0 * t)
        up = resample(resample(sig, 2000, 500), 500, 2000)
        guard = 257  # one filter length at the high rate
        err = up[guard:-guard] - sig[guard:-guard]
        rel = np.sqrt(np.mean(err**2)) / np.sqrt(np.mean(sig[guard:-guard] ** 2))
        assert rel < 1e-3

    def test_band_limited_composite(self):
        # Anything below 0.4x the low-rate Nyquist must survive the trip.
        t = np.arange(12000) / 2000.0
        rng = np.random.default_rng(0)
        sig = np.zeros_like(t)
        for _ in range(5):
            sig += rng.uniform(0.2, 1.0) * np.sin(
                2 * np.pi * rng.uniform(1.0, 99.0) * t + rng.uniform(0, 2 * np.pi)
            )
        up = resample(resample(sig, 2000, 500), 500, 2000)
        guard = 257
        err = up[guard:-guard] - sig[guard:-guard]
        rel = np.sqrt(np.mean(err**2)) / np.sqrt(np.mean(sig[guard:-guard] ** 2))
        assert rel < 1e-3

    def test_identity_rate(self):
        sig = np.random.default_rng(1).standard_normal(100)
        out = resample(sig, 500, 500)
        assert np.array_equal(out, sig)
        assert out is not sig

    def test_non_integer_ratio_rejected(self):
        with pytest.raises(ValueError, match="integer"):
            resample(np.zeros(100), 2000, 600)

    def test_multichannel_axis_handling(self):
        t = np.arange(4000) / 2000.0
        data = np.stack([np.sin(2 * np.pi * 5 * t), np.cos(2 * np.pi * 3 * t)])
        out = resample(data, 2000, 500, axis=1)
        assert out.shape == (2, 1000)
        out0 = resample(data[0], 2000, 500)
        assert np.allclose(out[0], out0)


class TestDifferentiate:
    def test_linear_ramp(self):
        t = np.arange(100) * 0.002
        qdot, qddot = differentiate(3.0 * t, 0.002)
        assert np.allclose(qdot, 3.0, atol=1e-12)
        assert np.allclose(qddot[1:-1], 0.0, atol=1e-9)

    def test_quadratic(self):
        t = np.arange(100) * 0.002
        qdot, qddot = differentiate(0.5 * 4.0 * t**2, 0.002)
        assert np.allclose(qddot[1:-1], 4.0, atol=1e-8)
        assert np.allclose(qdot[1:-1], 4.0 * t[1:-1], atol=1e-10)

    def test_sine_derivative_accuracy(self):
        # 5 Hz sine sampled at 500 Hz, amplitude 0.02 rad; second-order
        # stencils keep the worst-case velocity error under 1e-3 rad/s.
        t = np.arange(500) * 0.002
        omega = 2 * np.pi * 5.0
        qdot, _ = differentiate(0.02 * np.sin(omega * t), 0.002)
        exact = 0.02 * omega * np.cos(omega * t)
        assert np.abs(qdot - exact).max() < 1e-3

    def test_multijoint_shape(self):
        q = np.random.default_rng(2).standard_normal((50, 3))
        qdot, qddot = differentiate(q, 0.01)
        assert qdot.shape == q.shape
        assert qddot.shape == q.shape

    def test_preconditions(self):
        with pytest.raises(ValueError):
            differentiate(np.zeros((2, 1)), 0.002)
        with pytest.raises(ValueError):
            differentiate(np.zeros((10, 1)), 0.0)
