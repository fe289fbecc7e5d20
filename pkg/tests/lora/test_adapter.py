import unittest

import numpy as np

from src.lora import FrozenBase, LoraAdapter, apply_reswu, effective_weight, init_adapter
from src.numkit import Tensor, ordered_matmul
from src.utils import rng_utils
from src.utils.error_utils import ConfigurationError, ShapeError


class TestInitAdapter(unittest.TestCase):
    def test_product_is_exactly_zero(self):
        """Test that B = 0 makes the initial update vanish for any shape."""
        for d, k, r in [(6, 4, 2), (1, 1, 1), (32, 8, 8)]:
            adapter = init_adapter(d, k, r, np.random.default_rng(0))
            self.assertEqual(adapter.shape, (d, k))
            self.assertTrue(np.array_equal(adapter.delta().data, np.zeros((d, k))))
            self.assertTrue(adapter.B.requires_grad and adapter.A.requires_grad)

    def test_same_stream_gives_identical_a(self):
        """Test deterministic initialisation from a keyed stream."""
        first = init_adapter(6, 4, 2, rng_utils.stream(1993, rng_utils.ADAPTER, 0), std=0.5)
        second = init_adapter(6, 4, 2, rng_utils.stream(1993, rng_utils.ADAPTER, 0), std=0.5)
        self.assertTrue(np.array_equal(first.A.data, second.A.data))
        self.assertGreater(np.abs(first.A.data).sum(), 0.0)

    def test_parameter_count(self):
        """Test r(d+k) trainable entries, fewer than the dense d*k."""
        adapter = init_adapter(6, 4, 2, np.random.default_rng(0))
        self.assertEqual(adapter.num_parameters, 20)
        self.assertLess(adapter.num_parameters, 6 * 4)

    def test_rank_out_of_range(self):
        """Test rank bounds."""
        for r in (0, 5):
            with self.assertRaises(ConfigurationError):
                init_adapter(6, 4, r, np.random.default_rng(0))
        with self.assertRaises(ConfigurationError):
            init_adapter(6, 4, 2, np.random.default_rng(0), std=-1.0)

    def test_factors_must_chain(self):
        """Test shape validation of a factor pair."""
        with self.assertRaises(ShapeError):
            LoraAdapter(B=Tensor(np.zeros((4, 2))), A=Tensor(np.zeros((3, 4))))

    def test_copy_can_freeze_a(self):
        """Test the frozen-A copy used by the shared-A variant."""
        adapter = init_adapter(4, 4, 2, np.random.default_rng(0))
        frozen = adapter.copy(train_a=False)
        self.assertTrue(frozen.B.requires_grad)
        self.assertFalse(frozen.A.requires_grad)
        self.assertIsNot(frozen.A, adapter.A)


class TestEffectiveWeight(unittest.TestCase):
    def setUp(self):
        """Set up test cases."""
        rng = np.random.default_rng(3)
        self.W0 = Tensor(rng.normal(size=(5, 3)))
        self.adapter = LoraAdapter(B=Tensor(rng.normal(size=(5, 2))), A=Tensor(rng.normal(size=(2, 3))))

    def test_fresh_adapter_returns_base(self):
        """Test W0 is returned exactly when the update and residual vanish."""
        base = FrozenBase.from_weight(self.W0)
        fresh = init_adapter(5, 3, 2, np.random.default_rng(1))
        self.assertTrue(np.array_equal(effective_weight(base, fresh).data, self.W0.data))
        self.assertTrue(np.array_equal(effective_weight(base, None).data, self.W0.data))

    def test_residual_cancels_base(self):
        """Test W_res_accum = -W0 with zero update gives the zero matrix."""
        base = FrozenBase(W0=self.W0, W_res_accum=Tensor(-self.W0.data))
        fresh = init_adapter(5, 3, 2, np.random.default_rng(1))
        self.assertTrue(np.array_equal(effective_weight(base, fresh).data, np.zeros((5, 3))))

    def test_matches_oracle_composition(self):
        """Test W0 + W_res + B @ A against an independent computation."""
        residual = np.full((5, 3), 0.25)
        base = FrozenBase(W0=self.W0, W_res_accum=Tensor(residual))
        expected = self.W0.data + residual + self.adapter.B.data @ self.adapter.A.data
        np.testing.assert_allclose(effective_weight(base, self.adapter).data, expected, atol=1e-12)

    def test_shape_mismatch(self):
        """Test adapter/base shape checks."""
        base = FrozenBase.from_weight(Tensor(np.zeros((3, 5))))
        with self.assertRaises(ShapeError):
            effective_weight(base, self.adapter)
        with self.assertRaises(ShapeError):
            FrozenBase(W0=self.W0, W_res_accum=Tensor(np.zeros((3, 5))))


class TestApplyReswu(unittest.TestCase):
    def setUp(self):
        """Set up test cases."""
        rng = np.random.default_rng(5)
        self.base = FrozenBase.from_weight(Tensor(rng.normal(size=(4, 4))))
        self.u = Tensor(rng.normal(size=(4, 4)))
        self.v = Tensor(rng.normal(size=(4, 4)))

    def test_zero_residual_leaves_base_unchanged(self):
        """Test that a zero residual is a no-op."""
        updated = apply_reswu(self.base, Tensor.zeros((4, 4)))
        self.assertTrue(np.array_equal(updated.current().data, self.base.current().data))

    def test_additivity(self):
        """Test that applying u then v equals applying u + v."""
        stepwise = apply_reswu(apply_reswu(self.base, self.u), self.v)
        combined = apply_reswu(self.base, Tensor(self.u.data + self.v.data))
        np.testing.assert_allclose(stepwise.current().data, combined.current().data, atol=1e-12)

    def test_original_weight_is_shared_and_untouched(self):
        """Test that W0 never changes and the input base is not mutated."""
        original = self.base.W0.numpy()
        updated = apply_reswu(self.base, self.u)
        self.assertIs(updated.W0, self.base.W0)
        self.assertTrue(np.array_equal(self.base.W0.data, original))
        self.assertTrue(np.array_equal(self.base.W_res_accum.data, np.zeros((4, 4))))
        np.testing.assert_array_equal(updated.W_res_accum.data, self.u.data)

    def test_shape_mismatch(self):
        """Test residual shape checks."""
        with self.assertRaises(ShapeError):
            apply_reswu(self.base, Tensor.zeros((4, 3)))

    def test_effective_weight_uses_sequential_product(self):
        """Test that the composed weight uses the deterministic product."""
        adapter = LoraAdapter(B=Tensor(np.ones((4, 2))), A=Tensor(np.ones((2, 4))))
        weight = effective_weight(apply_reswu(self.base, self.u), adapter).data
        expected = (self.base.W0.data + self.u.data) + ordered_matmul(adapter.B.data, adapter.A.data)
        self.assertTrue(np.array_equal(weight, expected))


if __name__ == '__main__':
    unittest.main()
