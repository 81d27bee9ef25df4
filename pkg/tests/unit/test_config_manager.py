import json
import os
import shutil
import tempfile
import unittest
from pathlib import Path

import yaml

from config.config_manager import ConfigManager
from core.pipeline import ConfigValidationError
from models.results import DEFAULT_RADAR_AXES, Metric
from models.series import Frequency


class TestConfigManager(unittest.TestCase):
    """Test cases for ConfigManager class."""

    def setUp(self):
        """Set up test fixtures."""
        self.test_config = {
            'inputs': {
                'actuals': [{'path': 'data/actuals.csv', 'frequency': 'monthly', 'dataset': 'demo'}],
                'forecasts': ['data/forecasts.csv'],
            },
            'evaluation': {
                'metric': 'smape',
                'alpha': 0.1,
                'rope': 10,
                'reference_model': 'ModelA',
            },
            'output': {
                'directory': 'results',
            },
            'system': {
                'max_workers': 2,
            },
        }

        # Create temporary config file for testing
        self.temp_dir = tempfile.mkdtemp()
        self.test_config_path = os.path.join(self.temp_dir, 'test_config.yaml')
        self.write_config(self.test_config)

    def tearDown(self):
        """Clean up test fixtures."""
        shutil.rmtree(self.temp_dir, ignore_errors=True)

    def write_config(self, config, path=None):
        path = path or self.test_config_path
        with open(path, 'w', encoding='utf-8') as f:
            yaml.dump(config, f, default_flow_style=False)
        return path

    def test_load_config(self):
        """Test loading configuration with defaults filled in."""
        config_manager = ConfigManager(self.test_config_path)
        run_config = config_manager.run_config

        self.assertIs(run_config.metric, Metric.SMAPE)
        self.assertEqual(run_config.alpha, 0.1)
        self.assertEqual(run_config.rope, 10.0)
        self.assertEqual(run_config.reference_model, 'ModelA')
        self.assertEqual(run_config.max_workers, 2)
        self.assertEqual(run_config.seasonality_threshold, 0.6)
        self.assertEqual(run_config.kpss_significance, 0.05)
        self.assertEqual(run_config.anomaly_level, 0.99)
        self.assertEqual(run_config.hardness_percentile, 0.9)
        self.assertEqual(run_config.radar_axes, tuple(DEFAULT_RADAR_AXES))
        self.assertEqual(run_config.actuals[0].frequency, Frequency.MONTHLY)
        self.assertEqual(run_config.ropes, (0.0, 10.0))

    def test_relative_paths_resolve_against_config_dir(self):
        """Test that relative paths are taken from the config file's directory."""
        config_manager = ConfigManager(self.test_config_path)
        base = Path(self.temp_dir).resolve()
        self.assertEqual(config_manager.run_config.actuals[0].path, base / 'data' / 'actuals.csv')
        self.assertEqual(config_manager.run_config.output_dir, base / 'results')
        roles = [role for role, _ in config_manager.get_input_paths()]
        self.assertEqual(roles, ['actuals', 'forecasts'])

    def test_load_config_file_not_found(self):
        """Test loading config when file doesn't exist."""
        with self.assertRaises(ConfigValidationError):
            ConfigManager(os.path.join(self.temp_dir, 'nonexistent.yaml'))

    def test_json_config(self):
        """Test that a JSON config file is accepted."""
        path = os.path.join(self.temp_dir, 'config.json')
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(self.test_config, f)
        self.assertEqual(ConfigManager(path).run_config.reference_model, 'ModelA')

    def test_overrides(self):
        """Test that command line overrides replace file values."""
        out_dir = os.path.join(self.temp_dir, 'elsewhere')
        config_manager = ConfigManager(self.test_config_path,
                                       {'alpha': 0.2, 'rope': 0, 'metric': 'MASE', 'out': out_dir,
                                        'workers': 4, 'reference_model': None})
        run_config = config_manager.run_config
        self.assertEqual(run_config.alpha, 0.2)
        self.assertEqual(run_config.rope, 0.0)
        self.assertIs(run_config.metric, Metric.MASE)
        self.assertEqual(run_config.max_workers, 4)
        self.assertEqual(run_config.output_dir, Path(out_dir).resolve())
        self.assertEqual(run_config.reference_model, 'ModelA')

    def test_echo_excludes_workers_and_logging(self):
        """Test that the config echo does not depend on thread count or logging."""
        one = ConfigManager(self.test_config_path, {'workers': 1, 'log_level': 'DEBUG'}).run_config.echo()
        four = ConfigManager(self.test_config_path, {'workers': 4}).run_config.echo()
        self.assertEqual(one, four)
        self.assertNotIn('system', one)
        self.assertNotIn('logging', one)

    def test_validate_config_invalid_values(self):
        """Test rejection of invalid evaluation values."""
        invalid = [
            {'alpha': 0},
            {'alpha': 1.5},
            {'rope': -1},
            {'metric': 'rmse'},
            {'kpss_significance': 0.2},
            {'anomaly_level': 1.0},
            {'dimensions': ['Overall', 'Sideways']},
            {'radar_axes': ['Overall', 'Hard']},
            {'radar_axes': ['Overall', 'Hard', 'Hard']},
            {'top_k': 0},
        ]
        for evaluation in invalid:
            with self.subTest(evaluation=evaluation):
                config = json.loads(json.dumps(self.test_config))
                config['evaluation'].update(evaluation)
                with self.assertRaises(ConfigValidationError):
                    ConfigManager(self.write_config(config))

    def test_axis_must_be_scored(self):
        """Test that a radar axis outside the dimensions is rejected."""
        config = json.loads(json.dumps(self.test_config))
        config['evaluation']['dimensions'] = ['Overall', 'Hard', 'Seasonal']
        config['evaluation']['radar_axes'] = ['Overall', 'Hard', 'Anomalies']
        with self.assertRaises(ConfigValidationError):
            ConfigManager(self.write_config(config))
        config['evaluation']['radar_axes'] = ['Overall', 'Hard', 'Monthly']
        self.assertEqual(ConfigManager(self.write_config(config)).run_config.radar_axes[-1], 'Monthly')

    def test_unknown_section(self):
        """Test that an unknown top-level section is rejected."""
        config = dict(self.test_config, plots={'format': 'png'})
        with self.assertRaises(ConfigValidationError):
            ConfigManager(self.write_config(config))

    def test_missing_sections(self):
        """Test missing actuals, forecasts and output directory."""
        config = json.loads(json.dumps(self.test_config))
        config['inputs']['actuals'] = []
        with self.assertRaises(ConfigValidationError):
            ConfigManager(self.write_config(config))

        config = json.loads(json.dumps(self.test_config))
        config['inputs']['forecasts'] = []
        path = self.write_config(config)
        with self.assertRaises(ConfigValidationError):
            ConfigManager(path)
        # annotate does not need forecasts
        self.assertEqual(ConfigManager(path, require_forecasts=False).run_config.forecasts, ())

        config = json.loads(json.dumps(self.test_config))
        del config['output']
        with self.assertRaises(ConfigValidationError):
            ConfigManager(self.write_config(config))

    def test_log_file_resolution(self):
        """Test that the log file is explicit, dated under a directory, or absent."""
        base = Path(self.temp_dir).resolve()
        self.assertIsNone(ConfigManager(self.test_config_path).run_config.log_file)

        config = json.loads(json.dumps(self.test_config))
        config['logging'] = {'directory': 'logs'}
        log_file = ConfigManager(self.write_config(config)).run_config.log_file
        self.assertTrue(log_file.startswith(str(base / 'logs')))
        self.assertRegex(log_file, r'\d{8}[/\\]runlog-\d{14}\.log$')

        config['logging']['file'] = 'run.log'
        self.assertEqual(ConfigManager(self.write_config(config)).run_config.log_file, str(base / 'run.log'))


if __name__ == '__main__':
    unittest.main()
