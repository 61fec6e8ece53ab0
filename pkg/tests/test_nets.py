"""Dense network, backprop, Adam and head-combination checks."""

import numpy as np
import pytest

from onlinepi.errors import NumericalFault
from onlinepi.nets import Adam, DenseNetwork, dueling_combine, soft_update


def _finite_difference_grads(net, x, upstream, step=1e-5):
    """Central finite differences of sum(upstream * forward(x))."""
    grads = []
    for param in net.parameters():
        g = np.zeros_like(param)
        it = np.nditer(param, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = param[idx]
            param[idx] = orig + step
            up = float(np.sum(upstream * net.forward(x)))
            param[idx] = orig - step
            down = float(np.sum(upstream * net.forward(x)))
            param[idx] = orig
            g[idx] = (up - down) / (2 * step)
        grads.append(g)
    return grads


class TestForward:
    def test_zero_weights_give_zero(self):
        net = DenseNetwork((4, 3, 2), rng=np.random.default_rng(0))
        for w in net.weights:
            w[...] = 0.0
        out = net.forward(np.ones(4))
        assert np.array_equal(out, np.zeros(2))

    def test_identity_single_layer(self):
        net = DenseNetwork((3, 3), rng=np.random.default_rng(0))
        net.weights[0][...] = np.eye(3)
        net.biases[0][...] = 0.0
        x = np.array([1.0, -2.0, 3.0])
        assert np.array_equal(net.forward(x), x)

    def test_matches_explicit_matrix_arithmetic(self):
        rng = np.random.default_rng(42)
        net = DenseNetwork((5, 7, 3), rng=rng)
        x = rng.standard_normal(5)
        # independent recomputation with explicit products
        z1 = x @ net.weights[0] + net.biases[0]
        a1 = np.where(z1 > 0, z1, 0.0)
        expected = a1 @ net.weights[1] + net.biases[1]
        np.testing.assert_allclose(net.forward(x), expected, rtol=1e-12)

    def test_deterministic(self):
        net = DenseNetwork((6, 4, 2), rng=np.random.default_rng(1))
        x = np.random.default_rng(2).standard_normal(6)
        out1, out2 = net.forward(x), net.forward(x)
        assert np.array_equal(out1, out2)

    def test_dimension_mismatch(self):
        net = DenseNetwork((4, 2), rng=np.random.default_rng(0))
        with pytest.raises(ValueError):
            net.forward(np.ones(5))


class TestBackward:
    def test_zero_upstream_zero_grads(self):
        net = DenseNetwork((3, 4, 2), rng=np.random.default_rng(3))
        grads = net.backward(np.ones(3), np.zeros(2))
        for dw, db in grads:
            assert not dw.any()
            assert not db.any()

    def test_linear_layer_outer_product(self):
        net = DenseNetwork((3, 2), rng=np.random.default_rng(4))
        x = np.array([1.0, 2.0, -1.0])
        g = np.array([0.5, -2.0])
        (dw, db), = net.backward(x, g)
        np.testing.assert_allclose(dw, np.outer(x, g))
        np.testing.assert_allclose(db, g)

    def test_against_finite_differences(self):
        rng = np.random.default_rng(5)
        for trial in range(5):
            sizes = rng.integers(2, 8, size=rng.integers(2, 4))
            net = DenseNetwork(tuple(sizes), rng=rng)
            # nudge inputs away from relu kinks
            x = rng.standard_normal(sizes[0]) + 0.1
            upstream = rng.standard_normal(sizes[-1])
            analytic = [g for pair in net.backward(x, upstream) for g in pair]
            numeric = _finite_difference_grads(net, x, upstream)
            for a, n in zip(analytic, numeric):
                denom = np.maximum(np.abs(n), 1e-8)
                rel = np.abs(a - n) / denom
                assert (rel < 1e-4).mean() >= 0.99

    def test_batched_backward_sums_over_rows(self):
        rng = np.random.default_rng(6)
        net = DenseNetwork((4, 5, 2), rng=rng)
        X = rng.standard_normal((3, 4))
        U = rng.standard_normal((3, 2))
        batched = net.backward(X, U)
        summed = None
        for i in range(3):
            row = net.backward(X[i], U[i])
            if summed is None:
                summed = [[dw.copy(), db.copy()] for dw, db in row]
            else:
                for acc, (dw, db) in zip(summed, row):
                    acc[0] += dw
                    acc[1] += db
        for (bw, bb), (sw, sb) in zip(batched, summed):
            np.testing.assert_allclose(bw, sw, rtol=1e-10)
            np.testing.assert_allclose(bb, sb, rtol=1e-10)


class TestAdam:
    def test_zero_grads_leave_params(self):
        p = np.ones((2, 2))
        opt = Adam([p], learning_rate=0.1)
        opt.step([p], [np.zeros((2, 2))])
        np.testing.assert_array_equal(p, np.ones((2, 2)))

    def test_first_step_magnitude(self):
        # hand-executed recursion: m̂ = v̂ = 1, so the step is lr / (1 + eps)
        p = np.array([1.0])
        opt = Adam([p], learning_rate=0.1)
        opt.step([p], [np.array([1.0])])
        expected = 1.0 - 0.1 * (1.0 / (1.0 + 1e-8))
        assert p[0] == pytest.approx(expected, rel=1e-12)
        assert p[0] == pytest.approx(0.9, abs=1e-6)

    def test_step_counter_and_determinism(self):
        rng = np.random.default_rng(7)
        p1 = rng.standard_normal((3, 3))
        p2 = p1.copy()
        g = rng.standard_normal((3, 3))
        o1 = Adam([p1], learning_rate=0.01)
        o2 = Adam([p2], learning_rate=0.01)
        for _ in range(5):
            o1.step([p1], [g])
            o2.step([p2], [g])
        assert o1.step_count == 5
        assert np.array_equal(p1, p2)

    def test_nonfinite_gradient_faults(self):
        p = np.ones(2)
        opt = Adam([p], learning_rate=0.1)
        with pytest.raises(NumericalFault):
            opt.step([p], [np.array([1.0, np.nan])])


class TestDuelingCombine:
    def test_mean_cancels_shift(self):
        q = dueling_combine(2.0, np.array([1.0, 2.0, 3.0]))
        np.testing.assert_allclose(q, [1.0, 2.0, 3.0])

    def test_constant_advantages_vanish(self):
        q = dueling_combine(0.0, np.array([5.0, 5.0, 5.0]))
        np.testing.assert_allclose(q, [0.0, 0.0, 0.0])

    def test_direct_substitution(self):
        q = dueling_combine(5.0, np.array([0.0, 4.0]))
        np.testing.assert_allclose(q, [3.0, 7.0])

    def test_invariant_to_advantage_shift(self):
        rng = np.random.default_rng(8)
        adv = rng.standard_normal(6)
        q1 = dueling_combine(1.5, adv)
        q2 = dueling_combine(1.5, adv + 123.456)
        np.testing.assert_allclose(q1, q2, atol=1e-9)

    def test_mean_centering_identity(self):
        rng = np.random.default_rng(9)
        adv = rng.standard_normal(5)
        q = dueling_combine(2.5, adv)
        assert np.mean(q - 2.5) == pytest.approx(0.0, abs=1e-12)

    def test_batched(self):
        rng = np.random.default_rng(10)
        vals = rng.standard_normal(4)
        advs = rng.standard_normal((4, 3))
        q = dueling_combine(vals, advs)
        for i in range(4):
            np.testing.assert_allclose(q[i], dueling_combine(vals[i], advs[i]))

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            dueling_combine(0.0, np.array([]))


class TestSoftUpdate:
    def test_tau_zero_and_one(self):
        t = np.array([2.0])
        l = np.array([4.0])
        soft_update([t], [l], 0.0)
        assert t[0] == 2.0
        soft_update([t], [l], 1.0)
        assert t[0] == 4.0

    def test_halfway(self):
        t = np.array([2.0])
        soft_update([t], [np.array([4.0])], 0.5)
        assert t[0] == pytest.approx(3.0)

    def test_double_application_closed_form(self):
        rng = np.random.default_rng(11)
        tau = 0.3
        local = rng.standard_normal(5)
        t1 = rng.standard_normal(5)
        t2 = t1.copy()
        soft_update([t1], [local], tau)
        soft_update([t1], [local], tau)
        blend = 1.0 - (1.0 - tau) ** 2
        expected = blend * local + (1 - blend) * t2
        np.testing.assert_allclose(t1, expected, rtol=1e-12)

    def test_tau_domain(self):
        with pytest.raises(ValueError):
            soft_update([np.ones(1)], [np.ones(1)], 1.5)


class TestSerialization:
    def test_round_trip(self, tmp_path):
        net = DenseNetwork((4, 6, 2), rng=np.random.default_rng(12))
        path = tmp_path / "net.npz"
        net.save(path)
        loaded = DenseNetwork.load(path)
        assert loaded.layer_sizes == net.layer_sizes
        x = np.random.default_rng(13).standard_normal(4)
        np.testing.assert_array_equal(loaded.forward(x), net.forward(x))

    def test_copy_is_independent(self):
        net = DenseNetwork((3, 2), rng=np.random.default_rng(14))
        clone = net.copy()
        net.weights[0][...] = 0.0
        assert clone.weights[0].any()
