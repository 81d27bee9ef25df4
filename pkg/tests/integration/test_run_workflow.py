import glob
import json
import os
import re
import shutil
import tempfile
import unittest
import xml.etree.ElementTree as ET

import pandas as pd
import pytest
import yaml

from core.error_handler import ERROR_REPORT_FILE, STAGING_PREFIX
from main import main
from services.demo_service import CONFIG_FILE, FORECASTS_FILE, PERTURBED_FILE
from services.report_service import (BASELINE_FORECASTS_FILE,
                                     BASELINE_SCORES_FILE, MANIFEST_FILE,
                                     RADAR_FILE, RADAR_GID_PREFIX, RANKS_FILE,
                                     SCORES_FILE, SERIES_ANNOTATIONS_FILE,
                                     WDL_FILE, sha256_file)

QUIET = ["--log-level", "WARNING"]


def output_hashes(directory):
    return {name: sha256_file(os.path.join(directory, name)) for name in sorted(os.listdir(directory))}


def radar_vertex_count(svg_path):
    namespace = "{http://www.w3.org/2000/svg}"
    total = 0
    for group in ET.parse(svg_path).getroot().iter(f"{namespace}g"):
        if group.get("id", "").startswith(RADAR_GID_PREFIX):
            for path in group.iter(f"{namespace}path"):
                total += len(re.findall(r"[ML]", path.get("d", "")))
    return total


@pytest.mark.slow
class TestRunWorkflow(unittest.TestCase):
    """End-to-end tests on the built-in demo data."""

    @classmethod
    def setUpClass(cls):
        """Generate the demo data and run it once."""
        cls.temp_dir = tempfile.mkdtemp()
        cls.demo_dir = os.path.join(cls.temp_dir, 'demo')
        assert main(['demo', '--out', cls.demo_dir]) == 0
        cls.config_file = os.path.join(cls.demo_dir, CONFIG_FILE)
        cls.out_dir = os.path.join(cls.temp_dir, 'results')
        cls.exit_code = main(QUIET + ['run', '--config', cls.config_file, '--out', cls.out_dir, '--workers', '1'])
        cls.first_hashes = output_hashes(cls.out_dir)

    @classmethod
    def tearDownClass(cls):
        """Remove temporary files."""
        shutil.rmtree(cls.temp_dir, ignore_errors=True)

    def read_csv(self, name):
        return pd.read_csv(os.path.join(self.out_dir, name))

    def test_run_succeeds(self):
        """Test that the run exits 0 and writes the expected files."""
        self.assertEqual(self.exit_code, 0)
        for name in (SCORES_FILE, RANKS_FILE, WDL_FILE, RADAR_FILE, MANIFEST_FILE):
            self.assertIn(name, self.first_hashes)
        self.assertNotIn(ERROR_REPORT_FILE, self.first_hashes)
        self.assertFalse(glob.glob(os.path.join(self.out_dir, f"{STAGING_PREFIX}*")))

    def test_dominant_model_ranks_first_everywhere(self):
        """Test that the model with the smallest errors ranks 1 on every dimension."""
        ranks = self.read_csv(RANKS_FILE)
        model_a = ranks[ranks['model'] == 'ModelA']
        self.assertGreater(len(model_a), 0)
        self.assertTrue((model_a['rank'] == 1.0).all())
        self.assertEqual(sorted(ranks['model'].unique()), ['ModelA', 'ModelB', 'ModelC'])

    def test_radar_has_one_vertex_per_axis_and_model(self):
        """Test 3 models times 7 axes vertices in the radar chart."""
        self.assertEqual(radar_vertex_count(os.path.join(self.out_dir, RADAR_FILE)), 3 * 7)

    def test_manifest(self):
        """Test the manifest content."""
        with open(os.path.join(self.out_dir, MANIFEST_FILE), encoding='utf-8') as f:
            manifest = json.load(f)
        self.assertEqual(manifest['command'], 'run')
        self.assertEqual(manifest['status'], 'success')
        self.assertEqual(manifest['files'][SCORES_FILE], self.first_hashes[SCORES_FILE])
        self.assertEqual(len(manifest['inputs']), 2)
        self.assertEqual(manifest['totals']['annotations']['series'], 20)
        self.assertNotIn('system', manifest['config'])

    def test_baseline_scores_columns(self):
        """Test the baseline score table leads with id, baseline SMAPE and the hardness flag."""
        with open(os.path.join(self.out_dir, BASELINE_SCORES_FILE), encoding='utf-8') as f:
            header = f.readline().strip()
        self.assertTrue(header.startswith('unique_id,baseline_smape,is_hard'))
        with open(os.path.join(self.out_dir, BASELINE_FORECASTS_FILE), encoding='utf-8') as f:
            self.assertTrue(f.readline().startswith('unique_id,horizon,forecast,lower,upper,is_anomaly'))
        baseline = self.read_csv(BASELINE_SCORES_FILE)
        annotations = self.read_csv(SERIES_ANNOTATIONS_FILE).set_index('unique_id')
        self.assertEqual(len(baseline), 20)
        for row in baseline.itertuples():
            self.assertEqual(bool(row.is_hard), bool(annotations.loc[row.unique_id, 'is_hard']))
        # nearest-rank P90 over 20 series leaves at most the top two hard
        self.assertLessEqual(int(baseline['is_hard'].sum()), 2)

    def test_rerun_is_byte_identical(self):
        """Test that rerunning with more workers reproduces every file."""
        self.assertEqual(main(QUIET + ['run', '--config', self.config_file, '--out', self.out_dir,
                                       '--workers', '4']), 0)
        self.assertEqual(output_hashes(self.out_dir), self.first_hashes)

    def test_rope_controls_draws(self):
        """Test that a near copy of the best model draws at rope 10 and not at rope 0."""
        with open(self.config_file, encoding='utf-8') as f:
            config = yaml.safe_load(f)
        config['inputs']['forecasts'] = [PERTURBED_FILE, FORECASTS_FILE]
        config['evaluation']['rope_panels'] = [0]
        rope_config = os.path.join(self.demo_dir, 'rope.yaml')
        with open(rope_config, 'w', encoding='utf-8') as f:
            yaml.safe_dump(config, f)

        out_dir = os.path.join(self.temp_dir, 'rope')
        self.assertEqual(main(QUIET + ['run', '--config', rope_config, '--out', out_dir]), 0)
        wdl = pd.read_csv(os.path.join(out_dir, WDL_FILE))
        pair = wdl[(wdl['model_a'] == 'ModelA') & (wdl['model_b'] == 'ModelA-perturbed')].set_index('rope')
        self.assertGreater(pair.loc[10.0, 'draw'], 0.9)
        self.assertLess(pair.loc[0.0, 'draw'], 0.1)
        sums = wdl['win'] + wdl['draw'] + wdl['loss']
        self.assertTrue((sums == 1.0).all())

    def test_invalid_alpha_exits_2(self):
        """Test that alpha 0 is a configuration failure."""
        out_dir = os.path.join(self.temp_dir, 'alpha')
        self.assertEqual(main(QUIET + ['run', '--config', self.config_file, '--out', out_dir, '--alpha', '0']), 2)
        self.assertFalse(os.path.exists(os.path.join(out_dir, SCORES_FILE)))

    def test_unknown_reference_exits_3(self):
        """Test that a runtime failure writes an error report and no partial output."""
        out_dir = os.path.join(self.temp_dir, 'failed')
        code = main(QUIET + ['run', '--config', self.config_file, '--out', out_dir,
                             '--reference-model', 'Nope'])
        self.assertEqual(code, 3)
        self.assertEqual(os.listdir(out_dir), [ERROR_REPORT_FILE])
        with open(os.path.join(out_dir, ERROR_REPORT_FILE), encoding='utf-8') as f:
            self.assertEqual(json.load(f)['error_type'], 'UnknownModel')

    def test_annotate(self):
        """Test that annotate writes annotations without scores."""
        out_dir = os.path.join(self.temp_dir, 'annotate')
        self.assertEqual(main(QUIET + ['annotate', '--config', self.config_file, '--out', out_dir]), 0)
        files = os.listdir(out_dir)
        self.assertIn(SERIES_ANNOTATIONS_FILE, files)
        self.assertNotIn(SCORES_FILE, files)
        series = pd.read_csv(os.path.join(out_dir, SERIES_ANNOTATIONS_FILE))
        self.assertEqual(len(series), 20)

    def test_validate(self):
        """Test that validate succeeds on good input and exits 2 on bad input."""
        out_dir = os.path.join(self.temp_dir, 'validate')
        self.assertEqual(main(QUIET + ['validate', '--config', self.config_file, '--out', out_dir]), 0)
        self.assertFalse(os.path.exists(out_dir) and os.listdir(out_dir))

        broken_dir = os.path.join(self.temp_dir, 'broken')
        shutil.copytree(self.demo_dir, broken_dir)
        with open(os.path.join(broken_dir, 'actuals.csv'), 'w', encoding='utf-8') as f:
            f.write("unique_id,ds\nM001,2015-01-01\n")
        code = main(QUIET + ['validate', '--config', os.path.join(broken_dir, CONFIG_FILE), '--out', out_dir])
        self.assertEqual(code, 2)


if __name__ == '__main__':
    unittest.main()
