"""Exit codes and output files of the sublab command line tool."""

import json
import os
import subprocess
import sys
import tempfile
import unittest
from pathlib import Path

SUBLAB = os.environ.get("SUBLAB_BIN", "sublab")
CONFIGS = Path(os.environ.get("SUBLAB_CONFIGS", Path(__file__).resolve().parents[2] / "configs"))


class CliTest(unittest.TestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.root = Path(self._tmp.name)
        self.env = dict(os.environ, SUBLAB_OUTPUT_ROOT=str(self.root))

    def tearDown(self):
        self._tmp.cleanup()

    def run_cli(self, *args):
        return subprocess.run([SUBLAB, *map(str, args)], env=self.env, capture_output=True, text=True, timeout=600)

    def write(self, name, payload):
        path = self.root / name
        path.write_text(payload if isinstance(payload, str) else json.dumps(payload))
        return path

    def manifest(self, out):
        return json.loads((self.root / out / "manifest.json").read_text())

    def test_help_and_version(self):
        self.assertEqual(self.run_cli("--help").returncode, 0)
        self.assertEqual(self.run_cli("--version").returncode, 0)

    def test_frame_inspect_writes_manifest(self):
        r = self.run_cli("frame", "inspect", "-f", "heisenberg", "-o", "inspect")
        self.assertEqual(r.returncode, 0, r.stderr)
        m = self.manifest("inspect")
        self.assertEqual(m["command"], "frame")
        self.assertTrue(m["pass"])
        for key in ("version", "config", "seed", "wall_time_seconds", "results", "outputs"):
            self.assertIn(key, m)

    def test_rank_failure_exits_one(self):
        self.assertEqual(self.run_cli("frame", "rank", "-f", "heisenberg", "-o", "ok").returncode, 0)
        r = self.run_cli("frame", "rank", "-f", "commuting3", "-o", "bad")
        self.assertEqual(r.returncode, 1)
        self.assertFalse(self.manifest("bad")["pass"])

    def test_malformed_polynomial_exits_two(self):
        frame = self.write("broken.json", {"name": "broken", "dim": 2, "step": 1, "generators": [["1", "0"], ["0", "x +* y"]]})
        r = self.run_cli("frame", "inspect", "-f", frame, "-o", "broken")
        self.assertEqual(r.returncode, 2)
        self.assertIn("position", r.stderr)

    def test_usage_errors_exit_two(self):
        self.assertEqual(self.run_cli("frame", "inspect", "--no-such-flag").returncode, 2)
        self.assertEqual(self.run_cli("volume", "--radius", "abc").returncode, 2)
        cfg = self.write("unknown.json", {"frame": "heisenberg", "radius": 0.1, "colour": "red"})
        self.assertEqual(self.run_cli("volume", "-c", cfg, "-o", "unknown").returncode, 2)

    def test_distance_roundtrip(self):
        r = self.run_cli("distance", "-f", "heisenberg", "--nodes", "9", "--verify-roundtrip", "-o", "dist")
        self.assertEqual(r.returncode, 0, r.stderr)
        self.assertTrue(any(p.suffix == ".bin" for p in (self.root / "dist").iterdir()))

    def test_solve_manufactured_passes(self):
        r = self.run_cli("solve", "-c", CONFIGS / "solve_manufactured.json", "-o", "solve")
        self.assertEqual(r.returncode, 0, r.stderr)
        m = self.manifest("solve")
        self.assertTrue(m["pass"])
        self.assertLessEqual(m["results"]["max_error"], 1e-8)
        self.assertTrue((self.root / "solve" / "solution.bin").exists())

    def test_solve_refuses_unstable_step(self):
        r = self.run_cli("solve", "-c", CONFIGS / "solve_manufactured.json", "--tau", "0.5", "-o", "unstable")
        self.assertEqual(r.returncode, 2)
        self.assertIn("cfl", r.stderr.lower())

    def test_ball_escaping_fixed_box_exits_one(self):
        cfg = self.write("escape.json", {
            "frame": "heisenberg",
            "radius": 0.3,
            "box": {"lower": [-0.2, -0.2, -0.01], "upper": [0.2, 0.2, 0.01]},
            "nodes": 9,
        })
        r = self.run_cli("volume", "-c", cfg, "-o", "escape")
        self.assertEqual(r.returncode, 1)
        self.assertIn("boundary", r.stderr)

    def test_volume_is_seed_deterministic(self):
        args = ("volume", "-f", "heisenberg", "-r", "0.2", "--samples", "20000", "--seed", "7")
        self.assertEqual(self.run_cli(*args, "-o", "v1").returncode, 0)
        self.assertEqual(self.run_cli(*args, "-o", "v2").returncode, 0)
        self.assertEqual((self.root / "v1" / "volume.csv").read_bytes(), (self.root / "v2" / "volume.csv").read_bytes())


if __name__ == "__main__":
    unittest.main(argv=sys.argv[:1], verbosity=2)
