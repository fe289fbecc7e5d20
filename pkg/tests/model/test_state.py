import unittest

import numpy as np

from src.lora import PlacementSpec
from src.model import ModelConfig, attach_adapters, compute_loss, forward, init_backbone, to_full_finetune
from src.numkit import Tape, Tensor, backward
from src.utils.error_utils import ConfigurationError


class TestModelConfig(unittest.TestCase):
    def test_invalid_values(self):
        """Test config validation."""
        with self.assertRaises(ConfigurationError):
            ModelConfig(input_dim=8, num_classes=2, arch="cnn")
        with self.assertRaises(ConfigurationError):
            ModelConfig(input_dim=8, num_classes=2, heads=2)
        with self.assertRaises(ConfigurationError):
            ModelConfig(input_dim=9, num_classes=2, num_tokens=4)
        with self.assertRaises(ConfigurationError):
            ModelConfig(input_dim=8, num_classes=0)

    def test_matrix_shapes(self):
        """Test (out, in) shapes per architecture."""
        transformer = ModelConfig(input_dim=8, num_classes=3, depth=2, dim=4, ffn_dim=6, num_tokens=2)
        shapes = transformer.matrix_shapes()
        self.assertEqual(len(shapes), 12)
        self.assertEqual(shapes["blocks.1.fc1"], (6, 4))
        self.assertEqual(shapes["blocks.1.fc2"], (4, 6))
        linear = ModelConfig(input_dim=8, num_classes=3, arch="linear")
        self.assertEqual(linear.matrix_shapes(), {"blocks.0.fc1": (3, 8)})
        self.assertFalse(linear.has_head)
        self.assertEqual(linear.head_parameters(), 0)


class TestInitBackbone(unittest.TestCase):
    def setUp(self):
        """Set up test cases."""
        self.config = ModelConfig(input_dim=8, num_classes=4, depth=2, dim=8, ffn_dim=12, num_tokens=2)

    def test_same_seed_identical_backbone(self):
        """Test that every party derives the same frozen weights."""
        first, second = init_backbone(self.config, 1993), init_backbone(self.config, 1993)
        for name in first.bases:
            self.assertTrue(np.array_equal(first.bases[name].W0.data, second.bases[name].W0.data))
        for name in first.params:
            self.assertTrue(np.array_equal(first.params[name].data, second.params[name].data))
        self.assertTrue(np.array_equal(first.head_weight.data, second.head_weight.data))
        other = init_backbone(self.config, 1996)
        self.assertFalse(np.array_equal(first.bases["blocks.0.q"].W0.data, other.bases["blocks.0.q"].W0.data))

    def test_frozen_gradients_are_exactly_zero(self):
        """Test that only adapters and head receive gradients."""
        state = attach_adapters(init_backbone(self.config, 1), PlacementSpec(), 2, 1, std=0.5)
        x = Tensor(np.random.default_rng(0).normal(size=(3, 8)))
        with Tape() as tape:
            loss = compute_loss(forward(state, x), np.array([0, 1, 3]), "cross_entropy")
        grads = backward(tape, loss)
        for base in state.bases.values():
            self.assertFalse(np.any(grads[base.W0]))
            self.assertFalse(np.any(grads[base.W_res_accum]))
        for tensor in state.params.values():
            self.assertFalse(np.any(grads[tensor]))
        self.assertTrue(np.any(grads[state.head_weight]))
        b_grads = [grads[a.B] for a in state.adapters.values()]
        self.assertTrue(any(np.any(g) for g in b_grads))

    def test_adapter_streams_do_not_depend_on_placement(self):
        """Test that a matrix draws the same A whatever else is adapted."""
        few = attach_adapters(init_backbone(self.config, 1), PlacementSpec(ffn=(), num_blocks=1), 2, 1)
        many = attach_adapters(init_backbone(self.config, 1), PlacementSpec(blocks="all"), 2, 1)
        self.assertTrue(np.array_equal(few.adapters["blocks.0.v"].A.data, many.adapters["blocks.0.v"].A.data))
        self.assertEqual(len(few.adapters), 4)
        self.assertEqual(len(many.adapters), 12)

    def test_frozen_a(self):
        """Test that train_a=False leaves A out of the trainable set."""
        state = attach_adapters(init_backbone(self.config, 1), PlacementSpec(), 2, 1, train_a=False)
        self.assertEqual(len(state.lora_parameters()), len(state.adapters))

    def test_clone_is_independent_but_shares_bases(self):
        """Test clone semantics."""
        state = attach_adapters(init_backbone(self.config, 1), PlacementSpec(), 2, 1)
        clone = state.clone()
        self.assertIs(clone.bases["blocks.0.q"], state.bases["blocks.0.q"])
        self.assertEqual(clone.fingerprint(), state.fingerprint())
        clone.adapters["blocks.0.q"].B._assign(np.ones(clone.adapters["blocks.0.q"].B.shape))
        self.assertFalse(np.any(state.adapters["blocks.0.q"].B.data))
        self.assertNotEqual(clone.fingerprint(), state.fingerprint())

    def test_full_finetune(self):
        """Test conversion to a fully trainable backbone."""
        full = to_full_finetune(init_backbone(self.config, 1))
        self.assertTrue(full.full_finetune)
        self.assertEqual(full.bases, {})
        self.assertEqual(sum(p.size for p in full.backbone_parameters()), self.config.backbone_parameters())
        self.assertTrue(all(p.requires_grad for p in full.trainable_parameters()))
        with self.assertRaises(ConfigurationError):
            attach_adapters(full, PlacementSpec(), 2, 1)
        with self.assertRaises(ConfigurationError):
            to_full_finetune(attach_adapters(init_backbone(self.config, 1), PlacementSpec(), 2, 1))


if __name__ == '__main__':
    unittest.main()
