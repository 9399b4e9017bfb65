import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from myoctl.activation import TauMode, smoothstep, step_activation, time_constant


class TestSmoothstep:
    def test_clamped_branches(self):
        assert smoothstep(-0.3) == 0.0
        assert smoothstep(1.7) == 1.0

    def test_midpoint_exact(self):
        # 6/32 - 15/16 + 10/8 are all dyadic, so the midpoint is exactly 0.5.
        assert smoothstep(0.5) == 0.5

    def test_flat_at_both_ends(self):
        h = 1e-6
        for x0 in (0.0, 1.0):
            deriv = (smoothstep(x0 + h) - smoothstep(x0 - h)) / (2 * h)
            assert abs(deriv) < 1e-6

    def test_center_slope_is_15_eighths(self):
        h = 1e-5
        deriv = (smoothstep(0.5 + h) - smoothstep(0.5 - h)) / (2 * h)
        assert deriv == pytest.approx(15.0 / 8.0, abs=1e-9)

    def test_range_and_monotone(self):
        x = np.linspace(-1.0, 2.0, 5001)
        s = smoothstep(x)
        assert np.all((s >= 0.0) & (s <= 1.0))
        assert np.all(np.diff(s) >= 0.0)


class TestTimeConstant:
    def test_hard_rise_from_zero(self):
        assert time_constant(1.0, 0.0, 0.01, 0.04, TauMode.hard()) == pytest.approx(0.005)

    def test_hard_fall_from_one(self):
        assert time_constant(0.0, 1.0, 0.01, 0.04, TauMode.hard()) == pytest.approx(0.08)

    def test_smooth_midpoint_is_exact_average(self):
        tau = time_constant(0.3, 0.3, 0.01, 0.04, TauMode.smooth(0.005))
        assert tau == (0.01 + 0.04) / 2

    def test_smooth_is_always_positive(self):
        rng = np.random.default_rng(1)
        ctrl = rng.uniform(0, 1, 500)
        act = rng.uniform(0, 1, 500)
        tau = time_constant(ctrl, act, 0.01, 0.04, TauMode.smooth(0.005))
        assert np.all(np.asarray(tau) > 0.0)

    def test_smoothing_width_to_zero_selects_the_switch(self):
        # Pointwise limit for ctrl != act: rising picks tau_act, falling tau_deact.
        for width in (1e-3, 1e-5, 1e-8):
            up = time_constant(0.6, 0.4, 0.01, 0.04, TauMode.smooth(width))
            dn = time_constant(0.4, 0.6, 0.01, 0.04, TauMode.smooth(width))
            assert up == pytest.approx(0.01)
            assert dn == pytest.approx(0.04)

    def test_mode_validation(self):
        with pytest.raises(ValueError):
            TauMode("fuzzy")
        with pytest.raises(ValueError):
            TauMode.smooth(0.0)
        with pytest.raises(ValueError):
            TauMode("smooth")


class TestStepActivation:
    def test_fixed_point(self):
        for mode in (TauMode.hard(), TauMode.smooth(0.005)):
            assert step_activation(0.37, 0.37, 0.002, 0.01, 0.04, mode) == pytest.approx(0.37)

    def test_euler_substitution(self):
        # tau = 0.01 * (0.5 + 0) = 0.005; act' = 0 + 0.002 * (1 - 0) / 0.005 = 0.4.
        out = step_activation(0.0, 1.0, 0.002, 0.01, 0.04, TauMode.hard())
        assert out == pytest.approx(0.4)

    def test_clamped_for_huge_step(self):
        assert step_activation(0.0, 1.0, 10.0, 0.01, 0.04, TauMode.hard()) == 1.0

    def test_dt_must_be_positive(self):
        with pytest.raises(ValueError):
            step_activation(0.0, 1.0, 0.0, 0.01, 0.04, TauMode.hard())
        with pytest.raises(ValueError):
            step_activation(0.0, 1.0, -0.002, 0.01, 0.04, TauMode.hard())

    @given(
        ctrl=st.floats(0.0, 1.0),
        act0=st.floats(0.0, 1.0),
        tau_act=st.floats(0.005, 0.05),
        tau_deact=st.floats(0.005, 0.05),
        smooth=st.booleans(),
    )
    @settings(max_examples=150, deadline=None)
    def test_monotone_convergence_to_constant_control(
        self, ctrl, act0, tau_act, tau_deact, smooth
    ):
        mode = TauMode.smooth(0.005) if smooth else TauMode.hard()
        dt = 0.4 * min(tau_act, tau_deact)
        act = act0
        direction = np.sign(ctrl - act0)
        # Slowest contraction is dt / (2 * tau_deact) per step in hard mode;
        # 2000 steps close any unit gap well below the final tolerance.
        for _ in range(2000):
            nxt = step_activation(act, ctrl, dt, tau_act, tau_deact, mode)
            assert 0.0 <= nxt <= 1.0
            if direction > 0:
                assert nxt >= act - 1e-15
                assert nxt <= ctrl + 1e-12
            elif direction < 0:
                assert nxt <= act + 1e-15
                assert nxt >= ctrl - 1e-12
            act = nxt
        assert act == pytest.approx(ctrl, abs=1e-6)
