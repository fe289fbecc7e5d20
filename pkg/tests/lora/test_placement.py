import unittest

from src.lora import PlacementSpec, count_trainable, matrix_name
from src.model import ModelConfig
from src.utils.error_utils import ConfigurationError


class TestPlacementSpec(unittest.TestCase):
    def setUp(self):
        """Set up test cases."""
        self.model = ModelConfig(input_dim=16, num_classes=10, depth=4, dim=32, ffn_dim=64, num_tokens=4)

    def test_block_selections(self):
        """Test first / mid / last / all block ranges."""
        self.assertEqual(PlacementSpec(blocks="first").block_indices(4), [0, 1])
        self.assertEqual(PlacementSpec(blocks="mid").block_indices(4), [1, 2])
        self.assertEqual(PlacementSpec(blocks="last").block_indices(4), [2, 3])
        self.assertEqual(PlacementSpec(blocks="all").block_indices(4), [0, 1, 2, 3])
        self.assertEqual(PlacementSpec(blocks="mid", num_blocks=1).block_indices(5), [2])

    def test_adapted_matrices_in_model_order(self):
        """Test matrix selection without the feed-forward matrices."""
        names = PlacementSpec(ffn=(), blocks="first", num_blocks=1).adapted_matrices(self.model)
        self.assertEqual(names, [matrix_name(0, m) for m in ("q", "k", "v", "o")])

    def test_invalid_specs(self):
        """Test rejection of empty, unknown and out-of-depth placements."""
        with self.assertRaises(ConfigurationError):
            PlacementSpec(attention=(), ffn=())
        with self.assertRaises(ConfigurationError):
            PlacementSpec(attention=("qkv",))
        with self.assertRaises(ConfigurationError):
            PlacementSpec(blocks="top")
        with self.assertRaises(ConfigurationError):
            PlacementSpec(num_blocks=5).block_indices(4)

    def test_placement_hitting_no_matrix(self):
        """Test that an attention-only placement on the MLP selects nothing."""
        mlp = ModelConfig(input_dim=8, num_classes=2, arch="mlp", dim=8)
        with self.assertRaises(ConfigurationError):
            PlacementSpec(ffn=()).adapted_matrices(mlp)


class TestCountTrainable(unittest.TestCase):
    def setUp(self):
        """Set up test cases."""
        self.model = ModelConfig(input_dim=16, num_classes=10, depth=4, dim=32, ffn_dim=64, num_tokens=4)

    def test_head_only(self):
        """Test that no placement reports only the classifier head."""
        counts = count_trainable(None, self.model, rank=4)
        self.assertEqual(counts.lora, 0)
        self.assertEqual(counts.head, 10 * 32 + 10)
        self.assertEqual(counts.total, counts.head)

    def test_single_square_matrix(self):
        """Test r(d+k) for one adapted 8x8 matrix."""
        linear = ModelConfig(input_dim=8, num_classes=8, arch="linear")
        counts = count_trainable(PlacementSpec(blocks="all"), linear, rank=2)
        self.assertEqual(counts.lora, 32)
        self.assertEqual(counts.head, 0)

    def test_full_placement_matches_enumeration(self):
        """Test the count against an enumeration of every adapter tensor."""
        rank = 4
        counts = count_trainable(PlacementSpec(blocks="all"), self.model, rank)
        expected = sum(d * rank + rank * k for d, k in self.model.matrix_shapes().values())
        self.assertEqual(counts.lora, expected)
        self.assertEqual(len(counts.per_matrix), 4 * 6)

    def test_default_placement(self):
        """Test the default first-third placement of the desk model."""
        counts = count_trainable(PlacementSpec(), self.model, rank=4)
        per_block = 4 * 4 * (32 + 32) + 4 * (64 + 32) * 2
        self.assertEqual(counts.lora, 2 * per_block)


if __name__ == '__main__':
    unittest.main()
