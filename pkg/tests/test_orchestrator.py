#!/usr/bin/env python3
"""
test_orchestrator.py

Command-line smoke tests: every subcommand on a tiny input, plus the exit
codes for invalid configuration.
"""

import io
import tempfile
import unittest
from pathlib import Path
from unittest.mock import patch

from helpers import grid_patch, write_text
from libs.wdt_oracle import DiscreteMesh
from pipelines.orchestrator import EXIT_OK, EXIT_VALIDATION, main
from tools.obj_io import write_obj

POINTS = "# x y w\n0 0 0.1\n1 0 0.05\n0 1\n0.8 0.9 0.2\n"


def run_cli(*argv):
    """Exit code and captured stdout of one CLI invocation."""
    with patch("sys.stdout", new_callable=io.StringIO) as out:
        code = main([str(a) for a in argv])
    return code, out.getvalue()


class TestCli(unittest.TestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self._tmp.name)
        self.points = write_text(self.dir, "points.txt", POINTS)

    def tearDown(self):
        self._tmp.cleanup()

    def test_triangulate(self):
        out_dir = self.dir / "tri"
        code, text = run_cli("triangulate", "--input", self.points, "--output-dir", out_dir, "--compare-oracle",
                             "--log-level", "warning")
        self.assertEqual(code, EXIT_OK)
        self.assertIn("MATCH", text)
        for name in ("soft.svg", "extraction.obj", "report.txt"):
            self.assertTrue((out_dir / name).exists(), name)

    def test_oracle_on_random_instances(self):
        code, text = run_cli("oracle", "--n", 10, "--instances", 2, "--log-level", "warning")
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(text.splitlines()[0], "MATCH")

    def test_gradcheck(self):
        code, text = run_cli("gradcheck", "--n", 6, "--configs", 1, "--loss", "size", "--log-level", "warning")
        self.assertEqual(code, EXIT_OK)
        self.assertIn("PASS", text)

    def test_metrics(self):
        patch_mesh = grid_patch(2, height=lambda u, v: 0.1 * u)
        mesh_path = self.dir / "mesh.obj"
        write_obj(DiscreteMesh(patch_mesh.vertices, patch_mesh.faces), mesh_path)
        report = self.dir / "metrics.txt"
        code, text = run_cli("metrics", "--mesh", mesh_path, "--output", report, "--log-level", "warning")
        self.assertEqual(code, EXIT_OK)
        self.assertIn("angle_mean", text)
        self.assertIn("faces = 8", report.read_text())

    def test_export(self):
        svg, obj = self.dir / "p.svg", self.dir / "p.obj"
        code, _ = run_cli("export", "--input", self.points, "--svg", svg, "--obj", obj, "--log-level", "warning")
        self.assertEqual(code, EXIT_OK)
        self.assertTrue(svg.exists() and obj.exists())
        code, _ = run_cli("export", "--input", self.points, "--log-level", "critical")
        self.assertEqual(code, EXIT_VALIDATION)

    def test_optimize(self):
        out_dir = self.dir / "opt"
        code, _ = run_cli("optimize", "--task", "size", "--n-vertices", 10, "--k", 9, "--iters", 2,
                          "--output-dir", out_dir, "--log-level", "warning")
        self.assertEqual(code, EXIT_OK)
        self.assertTrue((out_dir / "final.obj").exists())
        self.assertTrue((out_dir / "loss.csv").exists())

    def test_unknown_config_key(self):
        config = write_text(self.dir, "bad.cfg", "bogus = 1\n")
        code, _ = run_cli("optimize", "--task", "size", "--config", config, "--log-level", "critical")
        self.assertEqual(code, EXIT_VALIDATION)

    def test_invalid_value(self):
        code, _ = run_cli("optimize", "--task", "size", "--alpha=-1", "--log-level", "critical")
        self.assertEqual(code, EXIT_VALIDATION)

    def test_unknown_subcommand(self):
        with patch("sys.stderr", new_callable=io.StringIO):
            with self.assertRaises(SystemExit):
                main(["teapot"])


if __name__ == "__main__":
    unittest.main()
