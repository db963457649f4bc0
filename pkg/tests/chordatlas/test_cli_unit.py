"""Unit tests for the chordatlas command line."""

import json
from pathlib import Path

import pytest

from src.chordatlas.config import ConfigError
from src.chordatlas.main import (
    EXIT_CHECK_FAILED,
    EXIT_ESCAPED,
    EXIT_OK,
    EXIT_SOLVER,
    EXIT_USAGE,
    build_parser,
    main,
    read_seed_file,
)
from src.chordatlas.store import read_atlases

CONFIG_DIR = Path(__file__).resolve().parents[2] / "configs"

SHIFT = """
[system]
name = "harmonic"
params = {{ mu_coupling = 1.0 }}

[solver]
samples = 32

[chord]
mu = 0.0
guesses = {guesses}

[continuation]
seeds = [{{ mu = 0.0, u = [1.0], tau = 1.5, direction = 1 }}]
ds = 5e-2
ds_max = 0.2
max_steps = 40
verify = true

[gradient]
nodes = 8
mu0 = 0.0
mu1 = 0.4
seed = {{ u = [1.0], tau = 1.5 }}
r_values = {r_values}
{rho}
"""


def _config(
    tmp_path: Path,
    guesses: str = "[{ u = [1.05], tau = 1.5 }]",
    r_values: str = "[0.0]",
    rho: str = "",
) -> Path:
    path = tmp_path / "run.toml"
    path.write_text(SHIFT.format(guesses=guesses, r_values=r_values, rho=rho), encoding="utf-8")
    return path


def _run(command: str, config: Path, out: Path, *extra: str) -> int:
    return main([command, "--config", str(config), "--out", str(out), *extra])


class TestParser:

    def test_commands(self):
        args = build_parser().parse_args(["continue", "--config", "run.toml"])
        assert args.command == "continue"
        assert args.out is None
        assert not args.verbose

    def test_unknown_command(self, tmp_path):
        assert main(["plot", "--config", str(_config(tmp_path))]) == EXIT_USAGE

    def test_missing_config_flag(self):
        assert main(["find-chord"]) == EXIT_USAGE

    def test_help(self):
        assert main(["--help"]) == EXIT_OK


class TestSeedFile:

    def test_reads_seeds(self, tmp_path):
        path = tmp_path / "seeds.json"
        path.write_text(json.dumps([{"mu": 0.1, "u": 1.1, "tau": 1.6, "direction": -1}]))
        seeds = read_seed_file(path)
        assert seeds[0].u == [1.1]
        assert seeds[0].direction == -1

    @pytest.mark.parametrize("text", ["not json", "[]", '[{"mu": 0.1}]', '{"mu": 0.1, "u": [1.0], "tau": 1.0}'])
    def test_rejects_bad_files(self, tmp_path, text):
        path = tmp_path / "seeds.json"
        path.write_text(text)
        with pytest.raises(ConfigError):
            read_seed_file(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            read_seed_file(tmp_path / "absent.json")


class TestFindChord:

    def test_single_guess(self, tmp_path):
        out = tmp_path / "out"
        assert _run("find-chord", _config(tmp_path), out) == EXIT_OK
        records = [json.loads(line) for line in (out / "chords.jsonl").read_text().splitlines()]
        assert len(records) == 1
        assert records[0]["u"] == pytest.approx([1.0])
        assert records[0]["degenerate"] is False
        assert (out / "metrics.prom").is_file()

    def test_duplicate_guesses_collapse(self, tmp_path):
        out = tmp_path / "out"
        config = _config(tmp_path, guesses="[{ u = [1.05], tau = 1.5 }, { u = [0.95], tau = 1.6 }]")
        assert _run("find-chord", config, out) == EXIT_OK
        assert len((out / "chords.jsonl").read_text().splitlines()) == 1

    def test_seed_file_replaces_guesses(self, tmp_path):
        out = tmp_path / "out"
        seeds = tmp_path / "seeds.json"
        seeds.write_text(json.dumps([{"mu": 0.5, "u": [1.4], "tau": 1.6}]))
        assert _run("find-chord", _config(tmp_path), out, "--seed-file", str(seeds)) == EXIT_OK
        record = json.loads((out / "chords.jsonl").read_text())
        assert record["mu"] == 0.5
        assert record["u"][0] == pytest.approx(2.0**0.5)

    def test_collapsed_period_is_solver_failure(self, tmp_path):
        config = _config(tmp_path, guesses="[{ u = [1.0], tau = 0.0 }]")
        assert _run("find-chord", config, tmp_path / "out") == EXIT_SOLVER

    def test_wrong_dimension_is_usage_error(self, tmp_path):
        config = _config(tmp_path, guesses="[{ u = [1.0, 0.0], tau = 1.5 }]")
        assert _run("find-chord", config, tmp_path / "out") == EXIT_USAGE

    def test_mu_outside_range_is_usage_error(self, tmp_path):
        seeds = tmp_path / "seeds.json"
        seeds.write_text(json.dumps([{"mu": 3.0, "u": [1.0], "tau": 1.5}]))
        code = _run("find-chord", _config(tmp_path), tmp_path / "out", "--seed-file", str(seeds))
        assert code == EXIT_USAGE

    def test_missing_config_file(self, tmp_path):
        assert _run("find-chord", tmp_path / "absent.toml", tmp_path / "out") == EXIT_USAGE


class TestContactCheck:

    def test_symmetric_lambda_passes(self, tmp_path):
        out = tmp_path / "out"
        assert _run("contact-check", CONFIG_DIR / "harmonic.toml", out) == EXIT_OK
        reports = [json.loads(line) for line in (out / "contact.jsonl").read_text().splitlines()]
        assert [r["mu"] for r in reports] == [0.0, 0.5, 1.0]
        assert all(r["passed"] for r in reports)

    def test_standard_lambda_fails(self, tmp_path):
        out = tmp_path / "out"
        assert _run("contact-check", CONFIG_DIR / "harmonic_standard.toml", out) == EXIT_CHECK_FAILED
        report = json.loads((out / "contact.jsonl").read_text())
        assert not report["passed"]

    def test_empty_grid(self, tmp_path):
        assert _run("contact-check", _config(tmp_path), tmp_path / "out") == EXIT_USAGE


class TestContinue:

    def test_writes_atlas_bundle(self, tmp_path):
        out = tmp_path / "out"
        assert _run("continue", _config(tmp_path), out) == EXIT_OK
        atlases = read_atlases(out / "atlas.jsonl")
        assert len(atlases) == 1
        assert atlases[0].rows[-1].mu == 1.0
        assert (out / "atlas.csv").is_file()
        assert "plot" in (out / "atlas.gp").read_text()

    def test_needs_seeds(self, tmp_path):
        config = tmp_path / "run.toml"
        config.write_text('[system]\nname = "harmonic"\n')
        assert _run("continue", config, tmp_path / "out") == EXIT_USAGE


class TestGradientFlow:

    def test_zero_stretch_parks(self, tmp_path):
        out = tmp_path / "out"
        assert _run("gradient-flow", _config(tmp_path), out) == EXIT_CHECK_FAILED
        summary = json.loads((out / "flow_summary.json").read_text())
        assert summary["mu1"] == 0.4
        assert [run["outcome"] for run in summary["runs"]] == ["parked"]
        assert (out / "flow.csv").is_file()

    def test_escape(self, tmp_path):
        out = tmp_path / "out"
        config = _config(tmp_path, r_values="[2.0]", rho="rho = 1e-6")
        assert _run("gradient-flow", config, out) == EXIT_ESCAPED
        summary = json.loads((out / "flow_summary.json").read_text())
        assert summary["runs"][0]["outcome"] == "escaped"

    def test_needs_seed(self, tmp_path):
        config = tmp_path / "run.toml"
        config.write_text('[system]\nname = "harmonic"\n')
        assert _run("gradient-flow", config, tmp_path / "out") == EXIT_USAGE
