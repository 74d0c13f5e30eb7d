"""Command-line contract: exit codes, CSV/SVG emission, determinism,
config validation, and the oracle subcommand."""

import csv
import json
import re
import xml.etree.ElementTree as ET

import pytest

from vpelab.cli import main

import oracles


def write_config(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def fast_sweep_config(tmp_path, **extra):
    doc = {
        "preset": "givens-depol",
        "name": "fast",
        "rates": [1e-3, 1e-2],
        "replicates": 2,
    }
    doc.update(extra)
    return write_config(tmp_path, doc)


class TestRun:
    def test_run_writes_expected_csv(self, tmp_path, capsys):
        config = fast_sweep_config(tmp_path, out=str(tmp_path))
        assert main(["run", config]) == 0
        rows = list(csv.reader((tmp_path / "fast.csv").open()))
        assert rows[0] == ["rate", "replicate", "estimator", "abs_error"]
        # replicates x rates x {vpe, tomography}
        assert len(rows) - 1 == 2 * 2 * 2
        estimators = {r[2] for r in rows[1:]}
        assert estimators == {"vpe", "tomography"}

    def test_rows_are_sorted_and_parse_within_precision(self, tmp_path):
        config = fast_sweep_config(tmp_path, out=str(tmp_path))
        main(["run", config])
        rows = list(csv.reader((tmp_path / "fast.csv").open()))[1:]
        keys = [(float(r[0]), int(r[1]), r[2]) for r in rows]
        assert keys == sorted(keys)
        for r in rows:
            value = float(r[3])
            # 12 significant digits round-trip to within one part in 1e11.
            assert abs(float(f"{value:.12g}") - value) <= abs(value) * 1e-11

    def test_reruns_are_byte_identical(self, tmp_path):
        dir_a, dir_b = tmp_path / "a", tmp_path / "b"
        config = fast_sweep_config(tmp_path)
        assert main(["run", config, "--out", str(dir_a)]) == 0
        assert main(["run", config, "--out", str(dir_b)]) == 0
        assert (dir_a / "fast.csv").read_bytes() \
            == (dir_b / "fast.csv").read_bytes()

    def test_seed_override_changes_sampled_output(self, tmp_path):
        doc = {"preset": "givens-depol", "rates": [1e-3], "replicates": 2,
               "mode": "sampled", "shots": 100}
        dir_a, dir_b = tmp_path / "a", tmp_path / "b"
        config = write_config(tmp_path, doc)
        assert main(["run", config, "--seed", "1",
                     "--out", str(dir_a)]) == 0
        assert main(["run", config, "--seed", "2",
                     "--out", str(dir_b)]) == 0
        assert (dir_a / "givens-depol.csv").read_bytes() \
            != (dir_b / "givens-depol.csv").read_bytes()

    def test_svg_guide_lines_and_median_paths(self, tmp_path):
        config = fast_sweep_config(tmp_path, out=str(tmp_path))
        assert main(["run", config, "--svg"]) == 0
        root = ET.fromstring((tmp_path / "fast.svg").read_text())
        ns = {"s": "http://www.w3.org/2000/svg"}
        paths = root.findall(".//s:path", ns)
        guides = [p for p in paths if p.get("stroke-dasharray")]
        colors = {p.get("stroke") for p in guides}
        assert colors == {"#d62728", "#000000", "#1f3fbf"}
        solid = [p for p in paths if not p.get("stroke-dasharray")]
        assert len(solid) == 2          # one median line per estimator

    def test_threads_env_fallback(self, tmp_path, monkeypatch):
        config = fast_sweep_config(tmp_path, out=str(tmp_path))
        monkeypatch.setenv("VPE_LAB_THREADS", "2")
        assert main(["run", config]) == 0
        assert (tmp_path / "fast.csv").exists()

    def test_missing_config_is_config_error(self, tmp_path, capsys):
        assert main(["run", str(tmp_path / "absent.json")]) == 1

    def test_empty_result_writes_header_only_csv(self, tmp_path):
        from vpelab.cli import write_sweep_csv
        from vpelab.experiments import SweepResult
        empty = SweepResult(plan_name="empty", rates=(), rows=[],
                            failures=0, floors={})
        path = tmp_path / "empty.csv"
        write_sweep_csv(empty, str(path))
        assert path.read_text() == "rate,replicate,estimator,abs_error\n"


class TestValidate:
    def test_valid_config_round_trips_with_run(self, tmp_path, capsys):
        config = fast_sweep_config(tmp_path, out=str(tmp_path))
        assert main(["validate", config]) == 0
        assert "OK" in capsys.readouterr().out
        assert main(["run", config]) == 0

    def test_negative_rate_names_the_field(self, tmp_path, capsys):
        config = fast_sweep_config(tmp_path, rates=[-1e-3, 1e-2])
        assert main(["validate", config]) == 1
        assert "rates" in capsys.readouterr().err

    def test_unknown_key_rejected(self, tmp_path, capsys):
        config = fast_sweep_config(tmp_path, replicants=3)
        assert main(["validate", config]) == 1
        assert "replicants" in capsys.readouterr().err

    def test_wrong_type_rejected(self, tmp_path, capsys):
        config = fast_sweep_config(tmp_path, replicates="many")
        assert main(["validate", config]) == 1
        assert "replicates" in capsys.readouterr().err

    def test_unknown_preset_rejected(self, tmp_path, capsys):
        config = write_config(tmp_path, {"preset": "nope"})
        assert main(["validate", config]) == 1


class TestListExperiments:
    def test_lists_all_presets(self, capsys):
        assert main(["list-experiments"]) == 0
        out = capsys.readouterr().out
        for name in ("givens-depol", "givens-damping", "tfim-sweep",
                     "tfim-vqe", "fsw-pauli", "fsw-lowrank",
                     "sampling-convergence", "split-noise", "termwise",
                     "vqe-control-error"):
            assert name in out


class TestOracle:
    def test_hopping_chain_singles(self, capsys):
        from importlib import resources
        path = resources.files("vpelab").joinpath(
            "data", "hopping_chain_4.ham")
        assert main(["oracle", str(path)]) == 0
        out = capsys.readouterr().out
        singles = re.search(r"single-particle eigenvalues: (.*)", out)
        assert singles is not None
        assert singles.group(1).strip() == "-2, 0, 0, 2"
        ground = re.search(r"ground energy: (\S+)", out)
        assert float(ground.group(1)) == pytest.approx(-2.0, abs=1e-9)

    def test_h2_ground_energy(self, capsys):
        from importlib import resources
        path = resources.files("vpelab").joinpath("data", "h2_0.7414.ham")
        assert main(["oracle", str(path)]) == 0
        out = capsys.readouterr().out
        ground = re.search(r"ground energy: (\S+)", out)
        assert float(ground.group(1)) == pytest.approx(
            oracles.H2_FCI_EQUILIBRIUM, abs=1e-6)

    def test_missing_file_is_config_error(self, tmp_path):
        assert main(["oracle", str(tmp_path / "absent.ham")]) == 1


class TestExitCodes:
    def test_no_subcommand_is_usage_error(self, capsys):
        assert main([]) == 1

    def test_runtime_failure_returns_two(self, tmp_path, monkeypatch):
        config = fast_sweep_config(tmp_path, out=str(tmp_path))
        import vpelab.cli as cli

        def boom(plan):
            raise RuntimeError("synthetic backend failure")

        monkeypatch.setattr(cli.ex, "run_experiment", boom)
        assert main(["run", config]) == 2
