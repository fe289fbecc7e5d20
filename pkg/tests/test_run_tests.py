import unittest
from unittest.mock import patch

import run_tests as runner


def _test_ids(suite):
    for item in suite:
        if isinstance(item, unittest.TestSuite):
            yield from _test_ids(item)
        else:
            yield item.id()


class TestRunner(unittest.TestCase):
    def test_selected_packages(self):
        """Test that discovery stays inside the named packages."""
        ids = list(_test_ids(runner.build_suite(["partition", "metrics"])))
        self.assertTrue(ids)
        self.assertTrue(all(i.startswith(("tests.partition.", "tests.metrics.")) for i in ids))
        self.assertTrue(any(i.startswith("tests.metrics.") for i in ids))

    def test_unknown_package(self):
        """Test that a missing test package stops the runner."""
        with self.assertRaises(SystemExit):
            runner.build_suite(["no_such_package"])

    @patch.object(runner, "run_tests", return_value=False)
    def test_main_arguments(self, mock_run):
        """Test argument forwarding and the exit code."""
        self.assertEqual(runner.main(["aggregate", "--slow"]), 1)
        mock_run.assert_called_once_with(["aggregate"], True)


if __name__ == '__main__':
    unittest.main()
