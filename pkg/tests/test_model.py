import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import naive_simulate, random_params
from tvsq.errors import ContractError, InversionRangeError, StabilityError
from tvsq.model import (
    NEAR_IDENTITY,
    REFERENCE_LINEAR_OUTPUT,
    HWParams,
    LinearOutputParams,
    filter_latent,
    filter_step,
    input_nonlinearity,
    invert_output_nonlinearity,
    output_nonlinearity,
    radius_below,
    simulate,
    simulate_linear_output,
    spectral_radius,
)

finite = st.floats(-1e3, 1e3, allow_nan=False)


class TestNonlinearities:
    def test_zero_amplitude_is_constant(self):
        assert input_nonlinearity(37.0, (0.3, 1.0, 5.0, 0.0)) == 5.0
        assert output_nonlinearity(-4.0, (0.3, 1.0, 7.0, 0.0)) == 7.0

    def test_midpoint(self):
        assert input_nonlinearity(20.0, (0.1, -2.0, 3.0, 10.0)) == pytest.approx(8.0)
        assert output_nonlinearity(20.0, (0.1, -2.0, 3.0, 10.0)) == pytest.approx(8.0)

    def test_scalar_values(self):
        assert input_nonlinearity(70.0, (0.05, -2.5, 0.0, 1.0)) == pytest.approx(1 / (1 + math.exp(-1)), abs=1e-12)
        assert output_nonlinearity(2.0, (1.0, 0.0, 0.0, 100.0)) == pytest.approx(88.0797, abs=1e-4)

    @given(q=finite, p=st.tuples(finite, finite, finite, finite))
    def test_range(self, q, p):
        y = float(input_nonlinearity(q, p))
        lo, hi = min(p[2], p[2] + p[3]), max(p[2], p[2] + p[3])
        assert lo - 1e-9 * (1 + abs(lo)) <= y <= hi + 1e-9 * (1 + abs(hi))

    def test_inverse_midpoint_and_value(self):
        g = (0.5, 1.5, 10.0, 80.0)
        assert invert_output_nonlinearity(50.0, g) == pytest.approx(-3.0)
        assert invert_output_nonlinearity(88.0797, (1, 0, 0, 100)) == pytest.approx(2.0, abs=1e-4)

    def test_inverse_round_trip(self):
        v = np.linspace(-10, 10, 201)
        g = (1.0, 0.0, 0.0, 100.0)
        assert np.max(np.abs(invert_output_nonlinearity(output_nonlinearity(v, g), g) - v)) < 1e-10

    def test_inverse_out_of_range(self):
        with pytest.raises(InversionRangeError) as exc:
            invert_output_nonlinearity(120.0, (1, 0, 0, 100))
        assert exc.value.interval == (0.0, 100.0)

    def test_inverse_margin_clips(self):
        g = (1.0, 0.0, 0.0, 100.0)
        v = invert_output_nonlinearity(np.array([-5.0, 150.0]), g, margin=1e-3)
        assert output_nonlinearity(v, g) == pytest.approx([0.1, 99.9])

    def test_inverse_needs_nonzero_slope(self):
        with pytest.raises(ContractError):
            invert_output_nonlinearity(50.0, (0.0, 0.0, 0.0, 100.0))


class TestFilterStep:
    def test_passthrough(self):
        assert filter_step([3.0, 7.0], [11.0], [1.0, 0.0], [0.0]) == 7.0

    def test_zero_input_zero_state(self):
        assert filter_step(np.ones(4), np.zeros(3), np.zeros(4), [0.3, -0.2, 0.1]) == 0.0

    def test_steady_state(self):
        b, f = [0.5, 0.25], [0.5]
        u, v = [1.0, 1.0], 0.0
        for _ in range(80):
            v = filter_step(u, [v], b, f)
        assert abs(v - 1.5) < 1e-9

    def test_chronological_order(self):
        # u_window = (u[t-1], u[t]); b0 multiplies u[t].
        assert filter_step([1.0, 2.0], [4.0], [10.0, 100.0], [0.5]) == 10 * 2 + 100 * 1 + 0.5 * 4

    def test_length_mismatch(self):
        with pytest.raises(ContractError):
            filter_step([1.0], [0.0], [1.0, 0.0], [0.0])


class TestParams:
    def test_shapes_validated(self):
        with pytest.raises(ContractError):
            HWParams(b=[1.0], f=[0.5], beta=NEAR_IDENTITY, gamma=NEAR_IDENTITY)
        with pytest.raises(ContractError):
            HWParams(b=[1.0, np.nan], f=[0.5], beta=NEAR_IDENTITY, gamma=NEAR_IDENTITY)
        with pytest.raises(ContractError):
            HWParams(b=[1.0], f=[], beta=NEAR_IDENTITY, gamma=NEAR_IDENTITY)

    def test_vector_and_dict_round_trip(self, rng):
        p = random_params(rng, 3)
        assert np.array_equal(HWParams.from_vector(p.to_vector(), 3).to_vector(), p.to_vector())
        assert np.array_equal(HWParams.from_dict(p.to_dict()).to_vector(), p.to_vector())

    def test_immutable(self, rng):
        p = random_params(rng, 2)
        with pytest.raises(ValueError):
            p.b[0] = 1.0

    def test_initial(self):
        p = HWParams.initial(4)
        assert p.b.tolist() == [0.3, 0, 0, 0, 0] and not p.f.any()
        assert p.n_params == 17


class TestSpectralRadius:
    def test_known_roots(self):
        # z^2 - 0.5 z - 0.06 = (z - 0.6)(z + 0.1)
        assert spectral_radius([0.5, 0.06]) == pytest.approx(0.6)
        assert spectral_radius([0.0, 0.0]) == 0.0
        # complex pair of modulus sqrt(0.8)
        assert spectral_radius([0.0, -0.8]) == pytest.approx(math.sqrt(0.8))

    def test_radius_below_agrees(self, rng):
        for _ in range(500):
            f = rng.normal(0, rng.uniform(0.1, 1.0), rng.integers(1, 13))
            m = rng.choice([1 - 1e-6, 0.9, 0.5])
            assert radius_below(f, m) == (spectral_radius(f) < m)


class TestSimulate:
    def test_matches_reference_recursion(self, rng):
        for _ in range(20):
            r = int(rng.integers(1, 9))
            p = random_params(rng, r)
            q = rng.uniform(0, 100, 120)
            v0 = rng.normal(0, 30, r)
            ref = naive_simulate(q, p.b, p.f, p.beta, p.gamma, v0)
            assert np.max(np.abs(simulate(q, p, v0).values - ref)) < 1e-12

    def test_near_identity_composition(self):
        p = HWParams(b=[1.0, 0.0], f=[0.0], beta=NEAR_IDENTITY, gamma=NEAR_IDENTITY)
        q = np.linspace(10, 90, 50)
        pred = simulate(q, p)
        expected = output_nonlinearity(input_nonlinearity(q, NEAR_IDENTITY), NEAR_IDENTITY)
        assert np.allclose(pred.predictions, expected[1:], atol=1e-12)
        assert np.all(np.diff(pred.predictions) > 0)

    def test_constant_input_steady_state(self, rng):
        p = random_params(rng, 3, feedback_l1=0.6)
        pred = simulate(np.full(400, 55.0), p)
        expected = output_nonlinearity(input_nonlinearity(55.0, p.beta) * p.dc_gain(), p.gamma)
        assert abs(pred.values[-1] - expected) < 1e-9

    def test_hold_starts_at_steady_state(self, rng):
        p = random_params(rng, 2)
        pred = simulate(np.full(50, 40.0), p, "hold")
        assert np.allclose(pred.values, pred.values[0], atol=1e-9)

    def test_init_policies_converge(self, rng):
        from tvsq.analysis import memory_constant

        p = random_params(rng, 4, feedback_l1=0.8)
        q = rng.uniform(30, 70, 300)
        a = simulate(q, p, "zero").values
        b = simulate(q, p, "hold").values
        tau = memory_constant(p.f)
        gap = np.abs(a - b)
        # Each tau shrinks the gap by e**-3: after 2 tau it is a few thousandths of
        # the initial gap, and 1e-6 RDMOS needs roughly 6 tau.
        assert gap[p.r + math.ceil(2 * tau)] < 0.01 * gap[p.r]
        assert np.max(gap[p.r + math.ceil(8 * tau):]) < 1e-6

    def test_warmup_values_come_from_init(self, rng):
        p = random_params(rng, 3)
        v0 = np.array([1.0, -2.0, 3.0])
        pred = simulate(rng.uniform(0, 100, 20), p, v0)
        assert pred.warmup == 3 and pred.init_policy == "pinned"
        assert np.array_equal(pred.values[:3], output_nonlinearity(v0, p.gamma))
        assert pred.predictions.size == 17

    def test_deterministic(self, rng):
        p = random_params(rng, 5)
        q = rng.uniform(0, 100, 100)
        assert np.array_equal(simulate(q, p).values, simulate(q, p).values)

    def test_unstable_rejected_unless_allowed(self):
        p = HWParams(b=[1.0, 0.0], f=[1.2], beta=NEAR_IDENTITY, gamma=NEAR_IDENTITY)
        with pytest.raises(StabilityError) as exc:
            simulate(np.ones(10), p)
        assert exc.value.rho == pytest.approx(1.2)
        assert simulate(np.ones(10), p, allow_unstable=True).values.shape == (10,)

    def test_too_short(self):
        with pytest.raises(ContractError):
            simulate(np.ones(3), HWParams.initial(3))

    def test_unknown_policy(self):
        with pytest.raises(ContractError):
            simulate(np.ones(10), HWParams.initial(1), "warm")

    def test_batch_equals_loop(self, rng):
        p = random_params(rng, 3)
        q = rng.uniform(0, 100, (4, 60))
        batch = simulate(q, p, "hold").values
        for i in range(4):
            assert np.array_equal(batch[i], simulate(q[i], p, "hold").values)


class TestLatentFilter:
    def test_linearity(self, rng):
        f = np.array([0.4, -0.2, 0.1])
        b = rng.normal(size=4)
        ua, ub = rng.normal(size=80), rng.normal(size=80)
        z = np.zeros(3)
        lhs = filter_latent(ua + ub, b, f, z)
        assert np.allclose(lhs, filter_latent(ua, b, f, z) + filter_latent(ub, b, f, z), atol=1e-12)

    def test_time_invariance(self, rng):
        f = np.array([0.5, 0.2])
        b = rng.normal(size=3)
        u = np.concatenate([np.zeros(10), rng.normal(size=60)])
        k = 7
        shifted = np.concatenate([np.zeros(k), u[:-k]])
        v = filter_latent(u, b, f, np.zeros(2))
        vs = filter_latent(shifted, b, f, np.zeros(2))
        assert np.allclose(vs[k:], v[:-k], atol=1e-12)


class TestLinearOutput:
    def test_preset_value(self):
        assert REFERENCE_LINEAR_OUTPUT(10.0) == pytest.approx(56.9924, abs=1e-12)

    def test_zero_latent(self):
        p = HWParams(b=[0.0, 0.0], f=[0.0], beta=NEAR_IDENTITY, gamma=NEAR_IDENTITY)
        pred = simulate_linear_output(np.full(10, 50.0), p, LinearOutputParams(2.0, 7.5))
        assert np.all(pred.values == 7.5)

    def test_monotone(self):
        lin = LinearOutputParams(0.5, 3.0)
        assert np.all(lin(np.arange(5.0) + 1) > lin(np.arange(5.0)))

    def test_slope_positive(self):
        with pytest.raises(ContractError):
            LinearOutputParams(0.0, 1.0)
