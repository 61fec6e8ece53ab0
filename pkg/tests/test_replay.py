"""Prioritized buffer: storage semantics, sampling law, IS weights."""

import numpy as np
import pytest

from onlinepi.replay import PrioritizedBuffer


def _buffer(capacity=8, dim=2, **kwargs):
    defaults = dict(sigma=1.0, rho_start=1.0, rho_end=1.0, rho_anneal_steps=0)
    defaults.update(kwargs)
    return PrioritizedBuffer(capacity, dim, rng=np.random.default_rng(0), **defaults)


def _fill(buf, priorities):
    for i, p in enumerate(priorities):
        buf.insert(np.array([float(i), 0.0]), float(i))
    buf.update_priorities(np.arange(len(priorities)), np.asarray(priorities, dtype=float))


class TestInsert:
    def test_empty_buffer_priority_one(self):
        buf = _buffer()
        buf.insert(np.zeros(2), 0.0)
        assert buf.priorities()[0] == 1.0

    def test_adopts_current_max(self):
        buf = _buffer()
        _fill(buf, [0.2, 5.0])
        buf.insert(np.zeros(2), 0.0)
        assert buf.priorities()[2] == 5.0

    def test_fifo_eviction(self):
        buf = _buffer(capacity=2)
        for i in range(3):
            buf.insert(np.array([float(i), 0.0]), float(i))
        assert len(buf) == 2
        stored = {buf.experience_at(j).target for j in range(2)}
        assert stored == {1.0, 2.0}

    def test_dimension_mismatch(self):
        buf = _buffer()
        with pytest.raises(ValueError):
            buf.insert(np.zeros(3), 0.0)

    def test_max_follows_priority_updates(self):
        buf = _buffer()
        _fill(buf, [0.5, 0.7])
        buf.update_priorities(np.array([0]), np.array([9.0]))
        buf.insert(np.zeros(2), 0.0)
        assert buf.priorities()[2] == 9.0


class TestSampling:
    def test_sigma_zero_is_uniform(self):
        buf = _buffer(capacity=4, sigma=0.0, rho_start=0.0, rho_end=0.0)
        _fill(buf, [1.0, 2.0, 3.0, 4.0])
        np.testing.assert_allclose(buf.probabilities(), 0.25)
        idx, w = buf.sample(4)
        np.testing.assert_array_equal(w, 1.0)

    def test_probability_law(self):
        buf = _buffer(capacity=2)
        _fill(buf, [1.0, 3.0])
        np.testing.assert_allclose(buf.probabilities(), [0.25, 0.75])

    def test_probabilities_sum_to_one(self):
        buf = _buffer(capacity=16, sigma=0.6)
        _fill(buf, list(np.random.default_rng(1).uniform(0.1, 5.0, size=16)))
        assert buf.probabilities().sum() == pytest.approx(1.0)

    def test_is_weight_closed_form(self):
        buf = _buffer(capacity=2)
        _fill(buf, [1.0, 3.0])
        # P = [0.25, 0.75], raw = (2P)^-1 = [2, 2/3], normalized by 2
        expected = {0: 1.0, 1: (2.0 / 3.0) / 2.0}
        seen = set()
        for _ in range(64):
            idx, w = buf.sample(2)
            for i, weight in zip(idx, w):
                assert weight == pytest.approx(expected[int(i)])
                seen.add(int(i))
        assert seen == {0, 1}

    def test_weights_in_unit_interval_and_max_attained(self):
        buf = _buffer(capacity=8, sigma=0.7, rho_start=0.5, rho_end=0.5)
        _fill(buf, list(np.linspace(0.2, 4.0, 8)))
        lowest = int(np.argmin(buf.probabilities()))
        saw_lowest = False
        for _ in range(64):
            idx, w = buf.sample(8)
            assert (w > 0).all() and (w <= 1.0 + 1e-12).all()
            mask = idx == lowest
            if mask.any():
                saw_lowest = True
                np.testing.assert_allclose(w[mask], 1.0)
        assert saw_lowest

    def test_empirical_frequencies_converge(self):
        buf = _buffer(capacity=3)
        _fill(buf, [1.0, 2.0, 4.0])
        counts = np.zeros(3)
        per_call = 3  # batch may not exceed the buffer size
        for _ in range(100_000 // per_call + 1):
            idx, _ = buf.sample(per_call)
            counts += np.bincount(idx, minlength=3)
        freqs = counts / counts.sum()
        np.testing.assert_allclose(freqs, [1 / 7, 2 / 7, 4 / 7], atol=0.01)

    def test_insufficient_data(self):
        buf = _buffer()
        buf.insert(np.zeros(2), 0.0)
        with pytest.raises(ValueError, match="insufficient"):
            buf.sample(2)


class TestPriorityUpdates:
    def test_floor_applied(self):
        buf = _buffer()
        _fill(buf, [1.0])
        buf.update_priorities(np.array([0]), np.array([0.0]))
        assert buf.priorities()[0] == pytest.approx(1e-6)

    def test_identity_above_floor(self):
        buf = _buffer()
        _fill(buf, [1.0])
        buf.update_priorities(np.array([0]), np.array([0.7]))
        assert buf.priorities()[0] == pytest.approx(0.7)

    def test_out_of_range_index(self):
        buf = _buffer()
        _fill(buf, [1.0])
        with pytest.raises(ValueError):
            buf.update_priorities(np.array([5]), np.array([1.0]))

    def test_negative_losses_rejected(self):
        buf = _buffer()
        _fill(buf, [1.0])
        with pytest.raises(ValueError):
            buf.update_priorities(np.array([0]), np.array([-0.1]))


class TestRhoAnneal:
    def test_linear_anneal(self):
        buf = _buffer(capacity=4, rho_start=0.4, rho_end=1.0, rho_anneal_steps=10)
        _fill(buf, [1.0, 1.0, 1.0, 1.0])
        assert buf.rho == pytest.approx(0.4)
        for _ in range(5):
            buf.sample(2)
        assert buf.rho == pytest.approx(0.7)
        for _ in range(10):
            buf.sample(2)
        assert buf.rho == pytest.approx(1.0)
