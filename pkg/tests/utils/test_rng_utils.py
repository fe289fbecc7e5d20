import unittest

import numpy as np

from src.utils import rng_utils


class TestStreams(unittest.TestCase):
    def test_same_key_same_draws(self):
        """Test reproducibility of a keyed stream."""
        a = rng_utils.stream(1993, rng_utils.PARTITION, 2).normal(size=5)
        b = rng_utils.stream(1993, rng_utils.PARTITION, 2).normal(size=5)
        np.testing.assert_array_equal(a, b)

    def test_keys_separate_streams(self):
        """Test that seed, stream id and sub-keys all change the draws."""
        base = rng_utils.stream(1, rng_utils.LOCAL_TRAIN, 0, 0, 0).random(4)
        for other in (rng_utils.stream(2, rng_utils.LOCAL_TRAIN, 0, 0, 0),
                      rng_utils.stream(1, rng_utils.ADAPTER, 0, 0, 0),
                      rng_utils.stream(1, rng_utils.LOCAL_TRAIN, 0, 0, 1),
                      rng_utils.stream(1, rng_utils.LOCAL_TRAIN, 0, 1, 0)):
            self.assertFalse(np.array_equal(base, other.random(4)))

    def test_client_stream(self):
        """Test that client streams are local-training streams."""
        np.testing.assert_array_equal(rng_utils.client_stream(5, 1, 2, 3).random(3),
                                      rng_utils.stream(5, rng_utils.LOCAL_TRAIN, 1, 2, 3).random(3))

    def test_stream_ids_are_distinct(self):
        """Test the stream identifier table."""
        ids = [rng_utils.BACKBONE, rng_utils.HEAD, rng_utils.ADAPTER, rng_utils.TASK_ORDER,
               rng_utils.TRAIN_VAL_SPLIT, rng_utils.PARTITION, rng_utils.DATASET,
               rng_utils.LOCAL_TRAIN, rng_utils.VERIFY]
        self.assertEqual(ids, list(range(1, 10)))


if __name__ == '__main__':
    unittest.main()
