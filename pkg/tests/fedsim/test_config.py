"""
Experiment configuration tests.
"""
import os
import tempfile
import unittest

import yaml

from src.config import CONFIGS_DIR
from src.fedsim import (
    ExperimentConfig,
    apply_overrides,
    dump_config,
    expand_sweep,
    load_config,
    parse_config,
    save_config,
    with_values,
)
from src.fedsim.config import get_value
from src.utils.error_utils import ConfigurationError


class TestParseConfig(unittest.TestCase):
    def test_defaults(self):
        """Test that an empty document gives the default experiment."""
        config = parse_config({})
        self.assertEqual(config, ExperimentConfig())
        self.assertEqual(config.strategy, "reswu")
        self.assertEqual(config.seeds, [1993, 1996, 1997])
        config.validate()

    def test_dump_then_parse(self):
        """Test that a dumped config parses back equal."""
        config = with_values(ExperimentConfig(), {"clients.scheme": "quantity", "clients.alpha": 2,
                                                  "lora.ffn": [], "seeds": [7]})
        self.assertEqual(parse_config(yaml.safe_load(dump_config(config))), config)
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "config.yaml")
            save_config(config, path)
            self.assertEqual(load_config(path), config)

    def test_unknown_and_ill_typed_keys(self):
        """Test that unknown keys and wrong types name the field."""
        cases = [
            ({"trian": {}}, "trian"),
            ({"train": {"epochs": 3}}, "train.epochs"),
            ({"train": {"rounds": "many"}}, "train.rounds"),
            ({"train": {"rounds": 2.5}}, "train.rounds"),
            ({"train": {"track_grad_norm": "yes"}}, "train.track_grad_norm"),
            ({"lora": {"ffn": "fc1"}}, "lora.ffn"),
            ({"seeds": 3}, "seeds"),
        ]
        for data, field in cases:
            with self.assertRaises(ConfigurationError) as ctx:
                parse_config(data)
            self.assertEqual(ctx.exception.field, field)

    def test_shipped_configs_validate(self):
        """Test every config in the configs directory."""
        for name in ("desk.yaml", "linear_surrogate.yaml"):
            load_config(CONFIGS_DIR / name).validate()
        runs = expand_sweep(load_config(CONFIGS_DIR / "placement_sweep.yaml"))
        self.assertEqual(len(runs), 8)
        for _, config in runs:
            config.validate()


class TestValidate(unittest.TestCase):
    def _field(self, values):
        with self.assertRaises(ConfigurationError) as ctx:
            with_values(ExperimentConfig(), values).validate()
        return ctx.exception.field

    def test_dual_rate_constraint(self):
        """Test that the representation rate must stay below the head rate."""
        self.assertEqual(self._field({"train.lr_lora": 0.1, "train.lr_head": 0.05}), "train.lr_lora")
        self.assertEqual(self._field({"train.lr_lora": 0.05, "train.lr_head": 0.05}), "train.lr_lora")

    def test_cross_field_rules(self):
        """Test task division, alpha range, rank and head-only rules."""
        self.assertEqual(self._field({"tasks.num_tasks": 3}), "tasks.num_tasks")
        self.assertEqual(self._field({"clients.scheme": "quantity", "clients.alpha": 3}), "clients.alpha")
        self.assertEqual(self._field({"clients.scheme": "quantity", "clients.alpha": 0}), "clients.alpha")
        self.assertEqual(self._field({"clients.beta": 0.0}), "clients.beta")
        self.assertEqual(self._field({"lora.rank": 40}), "lora.rank")
        self.assertEqual(self._field({"lora.rank": 0}), "lora.rank")
        self.assertEqual(self._field({"model.arch": "linear", "strategy": "head_only"}), "strategy")
        self.assertEqual(self._field({"strategy": "fedprox"}), "strategy")
        self.assertEqual(self._field({"seeds": []}), "seeds")
        self.assertEqual(self._field({"seeds": [1, 1]}), "seeds")
        self.assertEqual(self._field({"dataset.source": "csv"}), "dataset.train_path")

    def test_rank_ignored_without_adapters(self):
        """Test that adapter-free strategies skip the rank bound."""
        with_values(ExperimentConfig(), {"lora.rank": 40, "strategy": "full_finetune"}).validate()


class TestOverrides(unittest.TestCase):
    def setUp(self):
        """Set up test cases."""
        self.config = ExperimentConfig()

    def test_set_values_are_yaml(self):
        """Test dotted overrides parsed as YAML scalars and lists."""
        config = apply_overrides(self.config, ["train.rounds=3", "lora.ffn=[]", "clients.beta=0.1"])
        self.assertEqual(config.train.rounds, 3)
        self.assertEqual(config.lora.ffn, [])
        self.assertEqual(config.clients.beta, 0.1)
        self.assertEqual(self.config.train.rounds, ExperimentConfig().train.rounds)

    def test_strategy_shortcut_changes_only_strategy(self):
        """Test that the strategy shortcut leaves every other field alone."""
        config = apply_overrides(self.config, strategy="ffa")
        self.assertEqual(config.strategy, "ffa")
        self.assertEqual(with_values(config, {"strategy": "reswu"}), self.config)

    def test_malformed(self):
        """Test malformed and unknown overrides."""
        with self.assertRaises(ConfigurationError):
            apply_overrides(self.config, ["train.rounds"])
        with self.assertRaises(ConfigurationError):
            apply_overrides(self.config, ["train.nope=1"])
        with self.assertRaises(ConfigurationError):
            get_value(self.config, "train.rounds.x")


class TestExpandSweep(unittest.TestCase):
    def test_cartesian_product(self):
        """Test labels, order and the cleared sweep of every run."""
        config = with_values(ExperimentConfig(), {"sweep": {"lora.rank": [1, 2], "strategy": ["reswu", "naive"]}})
        runs = expand_sweep(config)
        self.assertEqual([label for label, _ in runs], ["sweep_0", "sweep_1", "sweep_2", "sweep_3"])
        self.assertEqual([(c.lora.rank, c.strategy) for _, c in runs],
                         [(1, "reswu"), (1, "naive"), (2, "reswu"), (2, "naive")])
        self.assertTrue(all(c.sweep == {} for _, c in runs))

    def test_without_sweep(self):
        """Test that a plain config expands to itself."""
        runs = expand_sweep(ExperimentConfig())
        self.assertEqual(runs, [("sweep_0", ExperimentConfig())])

    def test_invalid_sweep(self):
        """Test unknown and empty sweep keys."""
        with self.assertRaises(ConfigurationError):
            expand_sweep(with_values(ExperimentConfig(), {"sweep": {"lora.size": [1]}}))
        with self.assertRaises(ConfigurationError):
            expand_sweep(with_values(ExperimentConfig(), {"sweep": {"lora.rank": []}}))


if __name__ == '__main__':
    unittest.main()
