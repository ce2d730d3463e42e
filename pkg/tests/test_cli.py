import json
import subprocess
import sys

import pytest

from renormlab import library, schemas
from renormlab.cli import main, run_scenario
from renormlab.errors import ConfigError
from renormlab.reporting import stable_dumps, strip_wall_time

from click.testing import CliRunner


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


TUBE_CFG = """
kind = "tube_classify"
seed = 3

[domain]
library = "exp_cusp"
"""

RENORM_CFG = """
kind = "renormalize"
seed = 1

[object]
library = "re_z2"
seed_point = [1.0, 0.0]

[engine]
steps = 10
"""

NORMALITY_CFG = """
kind = "normality"

[family]
library = ["re_z2", "affine_x1"]
box = [[-1.0, 1.0], [-1.0, 1.0]]

[check]
op = "marty"
resolution = 21
"""

MAP_CFG = """
kind = "map_analysis"

[map]
holo_pair = ["exp_z", "exp_minus_z"]

[check]
op = "image_probe"
functional = "product"
box = [[-3.0, 3.0], [-3.0, 3.0]]
resolution = 21
"""

TORUS_CFG = """
kind = "torus"

[family]
name = "quadratic_pair"
indices = [1, 2, 4, 8, 16, 32]
seed_point = [1.0, 0.0]
op = "torus"
"""

LIE_CFG = """
kind = "lie"

[family]
name = "g_exp_nilpotent"
indices = [4, 8, 12, 16, 20]
seed_point = [0.0, 0.0]
"""


ALL_CONFIGS = {
    "tube_classify": TUBE_CFG,
    "renormalize": RENORM_CFG,
    "normality": NORMALITY_CFG,
    "map_analysis": MAP_CFG,
    "torus": TORUS_CFG,
    "lie": LIE_CFG,
}


class TestScenarios:
    @pytest.mark.parametrize("kind", sorted(ALL_CONFIGS))
    def test_runs_and_validates(self, tmp_path, kind):
        cfg = write(tmp_path, "cfg.toml", ALL_CONFIGS[kind])
        doc = run_scenario(kind, cfg, seed=None, out_dir=str(tmp_path / "out"))
        schemas.validate_report(doc)  # published schema accepts the emitted doc
        on_disk = json.loads((tmp_path / "out" / "report.json").read_text())
        assert strip_wall_time(on_disk) == strip_wall_time(doc)

    def test_tube_verdicts(self, tmp_path):
        cfg = write(tmp_path, "cfg.toml", TUBE_CFG)
        doc = run_scenario("tube_classify", cfg, None, str(tmp_path / "o"))
        assert doc["result"]["kobayashi"] == "Hyperbolic"
        assert doc["result"]["brody"] == "Hyperbolic"

    def test_renormalize_outputs_residual_csv(self, tmp_path):
        cfg = write(tmp_path, "cfg.toml", RENORM_CFG)
        doc = run_scenario("renormalize", cfg, None, str(tmp_path / "o"))
        assert doc["result"]["report"]["class"] == "AffineNonconstant"
        csv_text = (tmp_path / "o" / "residuals.csv").read_text()
        assert csv_text.startswith("step,residual,gap_to_next")

    def test_kind_mismatch_rejected(self, tmp_path):
        cfg = write(tmp_path, "cfg.toml", TUBE_CFG)
        with pytest.raises(ConfigError):
            run_scenario("renormalize", cfg, None, str(tmp_path / "o"))

    def test_unknown_keys_rejected(self, tmp_path):
        cfg = write(tmp_path, "cfg.toml", TUBE_CFG + "\nmystery = 1\n")
        with pytest.raises(ConfigError):
            run_scenario("tube_classify", cfg, None, str(tmp_path / "o"))

    def test_malformed_toml_rejected(self, tmp_path):
        cfg = write(tmp_path, "cfg.toml", "kind = [unclosed")
        with pytest.raises(ConfigError) as ei:
            run_scenario("tube_classify", cfg, None, str(tmp_path / "o"))
        assert "parse error" in str(ei.value)

    def test_gradient_domination_with_infinite_table(self, tmp_path):
        # TOML's inf literal flows through the table, the check, and the report
        cfg = write(
            tmp_path,
            "cfg.toml",
            """
kind = "normality"

[family]
library = ["re_z2"]
box = [[-2.0, 2.0], [-2.0, 2.0]]

[check]
op = "gradient_dominated"
l_table = [[-10.0, inf], [0.0, 1.0], [10.0, inf]]
resolution = 21
""",
        )
        doc = run_scenario("normality", cfg, None, str(tmp_path / "o"))
        rep = doc["result"]["report"]
        assert rep["passed"] is False  # |grad| = 2|z| beats the finite segment
        assert rep["violations"]  # and the sanitized report carries them

    def test_levelset_scenario(self, tmp_path):
        cfg = write(
            tmp_path,
            "cfg.toml",
            """
kind = "normality"

[family]
exprs = ["(scale 3.0 (coord 0 2))"]
box = [[-1.0, 1.0], [-1.0, 1.0]]

[check]
op = "levelset"
a = 0.0
m_k = 1.0
resolution = 21
""",
        )
        doc = run_scenario("normality", cfg, None, str(tmp_path / "o"))
        rep = doc["result"]["report"]
        assert rep["passed"] is False and not rep["vacuous"]


class TestDeterminism:
    @pytest.mark.parametrize("kind", sorted(ALL_CONFIGS))
    def test_reports_byte_identical_modulo_wall_time(self, tmp_path, kind):
        cfg = write(tmp_path, "cfg.toml", ALL_CONFIGS[kind])
        a = run_scenario(kind, cfg, seed=5, out_dir=str(tmp_path / "a"))
        b = run_scenario(kind, cfg, seed=5, out_dir=str(tmp_path / "b"))
        assert stable_dumps(strip_wall_time(a)) == stable_dumps(strip_wall_time(b))


class TestCliEntry:
    def test_exit_code_on_bad_config(self, tmp_path):
        cfg = write(tmp_path, "cfg.toml", "kind = 'renormalize'\n[object]\nseed_point = [0.0]\n")
        runner = CliRunner()
        res = runner.invoke(
            main, ["renormalize", "--config", cfg, "--out", str(tmp_path / "o")]
        )
        # library/expr missing -> config error
        assert res.exit_code == 2

    def test_exit_code_on_precondition(self, tmp_path):
        cfg = write(
            tmp_path,
            "cfg.toml",
            RENORM_CFG.replace("seed_point = [1.0, 0.0]", "seed_point = [0.0, 0.0]"),
        )
        runner = CliRunner()
        res = runner.invoke(
            main, ["renormalize", "--config", cfg, "--out", str(tmp_path / "o")]
        )
        assert res.exit_code == 3  # gradient vanishes at the seed point

    def test_success_prints_status(self, tmp_path):
        cfg = write(tmp_path, "cfg.toml", TUBE_CFG)
        runner = CliRunner()
        res = runner.invoke(
            main, ["tube-classify", "--config", cfg, "--out", str(tmp_path / "o")]
        )
        assert res.exit_code == 0
        assert res.output.strip().endswith("decided")

    def test_list_library_round_trips(self):
        runner = CliRunner()
        res = runner.invoke(main, ["list-library"])
        assert res.exit_code == 0
        cat = json.loads(res.output)
        assert "exp_cusp" in cat["domains"]
        assert "three_spike" in cat["domains"]
        # every catalog entry parses through its grammar
        from renormlab.domains import parse_domain
        from renormlab.expr import parse_expr, parse_holo

        for text in cat["domains"].values():
            parse_domain(text)
        for text in cat["expressions"].values():
            parse_expr(text)
        for text in cat["holomorphic"].values():
            parse_holo(text)

    def test_installed_entry_point(self, tmp_path):
        cfg = write(tmp_path, "cfg.toml", TUBE_CFG)
        proc = subprocess.run(
            [sys.executable, "-m", "renormlab.cli"]
            if False
            else ["renormlab", "tube-classify", "--config", cfg, "--out", str(tmp_path / "o")],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr
