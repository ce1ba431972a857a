import json

import pytest
from click.testing import CliRunner

from com.mhire.dlm.cli.dlm_cli import cli
from com.mhire.dlm.services.eval_services.eval_suite.eval_suite import get_task
from com.mhire.dlm.services.reward_services.reward_dsl.reward_dsl import render

SMALL_SETTINGS = {
    "n_arms": 12,
    "budget": 2,
    "loop": {"train": {"epochs": 2, "steps_per_epoch": 50}},
}


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "settings.json"
    path.write_text(json.dumps(SMALL_SETTINGS))
    return path


def write_transcript(path, *responses):
    path.write_text(json.dumps(list(responses)))
    return path


def test_gen_is_deterministic(runner, tmp_path):
    for name in ("a.json", "b.json"):
        result = runner.invoke(cli, ["gen", "--seed", "7", "--n-arms", "10", "--budget", "3",
                                     "--out", str(tmp_path / name)])
        assert result.exit_code == 0, result.output
    assert (tmp_path / "a.json").read_text() == (tmp_path / "b.json").read_text()
    instance = json.loads((tmp_path / "a.json").read_text())
    assert instance["seed"] == 7
    assert instance["budget"] == 3
    assert len(instance["arms"]) == 10

    manifest = json.loads((tmp_path / "a.manifest.json").read_text())
    assert manifest["command"] == "gen"
    assert manifest["seeds"] == {"instance": 7}
    assert manifest["artifacts"]["instance"] == "a.json"
    assert (tmp_path / manifest["artifacts"]["logs"]).exists()


def test_gen_budget_above_arms_is_usage_error(runner, tmp_path):
    result = runner.invoke(cli, ["gen", "--n-arms", "4", "--budget", "5", "--out", str(tmp_path / "x.json")])
    assert result.exit_code == 2
    assert "exceeds" in result.output
    assert not (tmp_path / "x.json").exists()


def test_version(runner):
    result = runner.invoke(cli, ["--version"])
    assert result.exit_code == 0
    assert "dlm" in result.output


def test_run_with_scripted_transcript(runner, tmp_path, small_config, task0_transcript):
    out = tmp_path / "run"
    result = runner.invoke(cli, ["--config", str(small_config), "run", "--task", "0",
                                 "--llm", f"scripted:{task0_transcript}", "--out-dir", str(out)])
    assert result.exit_code == 0, result.output

    base = render(get_task(0).base_reward)
    assert f"Selected reward: {base}" in result.output
    trace = json.loads((out / "trace.json").read_text())
    assert trace["final_reward"] == base
    assert trace["llm_calls"] == 6
    assert f"Selected reward: `{base}`" in (out / "report.md").read_text()

    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["exit_code"] == 0
    assert manifest["backend"]["kind"] == "scripted"
    assert manifest["config"]["settings"]["n_arms"] == 12
    assert manifest["seeds"] == {"instance": 7, "run": 0}
    assert set(manifest["artifacts"]) >= {"instance", "trace", "report", "logs"}
    logs = json.loads((out / "logs.json").read_text())
    assert logs


def test_rerun_from_manifest_repeats_trace(runner, tmp_path, small_config, task0_transcript):
    first, second = tmp_path / "first", tmp_path / "second"
    args = ["run", "--task", "0", "--llm", f"scripted:{task0_transcript}", "--seed", "4", "--instance-seed", "3"]
    assert runner.invoke(cli, ["--config", str(small_config), *args, "--out-dir", str(first)]).exit_code == 0
    result = runner.invoke(cli, ["--config", str(first / "manifest.json"), "run", "--out-dir", str(second)])
    assert result.exit_code == 0, result.output
    assert (first / "trace.json").read_text() == (second / "trace.json").read_text()
    assert (first / "instance.json").read_text() == (second / "instance.json").read_text()
    assert json.loads((second / "manifest.json").read_text())["seeds"] == {"instance": 3, "run": 4}


def test_explicit_flags_override_manifest_options(runner, tmp_path, small_config, task0_transcript):
    first, second = tmp_path / "first", tmp_path / "second"
    assert runner.invoke(cli, ["--config", str(small_config), "run", "--task", "0",
                               "--llm", f"scripted:{task0_transcript}", "--out-dir", str(first)]).exit_code == 0
    transcript = write_transcript(tmp_path / "t.json", "$$$ state * agent_feats[11] $$$")
    result = runner.invoke(cli, ["--config", str(first / "manifest.json"), "run", "--no-reflection",
                                 "--llm", f"scripted:{transcript}", "--out-dir", str(second)])
    assert result.exit_code == 0, result.output
    trace = json.loads((second / "trace.json").read_text())
    assert trace["task_index"] == 0
    assert trace["final_reward"] == "state * agent_feats[11]"


def test_run_needs_task_without_manifest(runner, tmp_path, small_config, task0_transcript):
    result = runner.invoke(cli, ["--config", str(small_config), "run", "--llm", f"scripted:{task0_transcript}",
                                 "--out-dir", str(tmp_path / "run")])
    assert result.exit_code == 2
    assert "--task" in result.output


def test_gen_rerun_from_manifest(runner, tmp_path):
    first, second = tmp_path / "a.json", tmp_path / "b.json"
    assert runner.invoke(cli, ["gen", "--seed", "11", "--n-arms", "6", "--budget", "2",
                               "--out", str(first)]).exit_code == 0
    result = runner.invoke(cli, ["--config", str(tmp_path / "a.manifest.json"), "gen", "--out", str(second)])
    assert result.exit_code == 0, result.output
    assert first.read_text() == second.read_text()


def test_gen_rejects_negative_seed(runner, tmp_path):
    result = runner.invoke(cli, ["gen", "--seed", "-1", "--out", str(tmp_path / "x.json")])
    assert result.exit_code == 2
    assert not (tmp_path / "x.json").exists()


def test_run_rejects_negative_instance_seed(runner, tmp_path, task0_transcript):
    result = runner.invoke(cli, ["run", "--task", "0", "--llm", f"scripted:{task0_transcript}",
                                 "--instance-seed", "-3", "--out-dir", str(tmp_path / "run")])
    assert result.exit_code == 2
    assert not (tmp_path / "run").exists()


def test_run_without_reflection(runner, tmp_path, small_config):
    transcript = write_transcript(tmp_path / "t.json", "$$$ state * agent_feats[11] $$$")
    out = tmp_path / "run"
    result = runner.invoke(cli, ["--config", str(small_config), "run", "--task", "0", "--no-reflection",
                                 "--llm", f"scripted:{transcript}", "--out-dir", str(out)])
    assert result.exit_code == 0, result.output
    trace = json.loads((out / "trace.json").read_text())
    assert trace["reflection"] is False
    assert trace["final_reward"] == "state * agent_feats[11]"


def test_run_unknown_task(runner, tmp_path, task0_transcript):
    result = runner.invoke(cli, ["run", "--task", "99", "--llm", f"scripted:{task0_transcript}",
                                 "--out-dir", str(tmp_path / "run")])
    assert result.exit_code == 2


def test_run_backend_failure_exit_code(runner, tmp_path, small_config):
    transcript = write_transcript(tmp_path / "t.json", "$$$ state $$$")
    out = tmp_path / "run"
    result = runner.invoke(cli, ["--config", str(small_config), "run", "--task", "0",
                                 "--llm", f"scripted:{transcript}", "--out-dir", str(out)])
    assert result.exit_code == 3
    assert json.loads((out / "manifest.json").read_text())["exit_code"] == 3


def test_run_with_no_usable_candidate(runner, tmp_path, small_config):
    transcript = write_transcript(tmp_path / "t.json", "no code", "still none", "nothing at all")
    result = runner.invoke(cli, ["--config", str(small_config), "run", "--task", "0", "--no-reflection",
                                 "--llm", f"scripted:{transcript}", "--out-dir", str(tmp_path / "run")])
    assert result.exit_code == 5


def test_eval_baselines(runner, tmp_path, small_config):
    out = tmp_path / "eval"
    result = runner.invoke(cli, ["--config", str(small_config), "eval", "--tasks", "0", "--seeds", "2",
                                 "--trials", "3", "--steps", "4", "--out-dir", str(out)])
    assert result.exit_code == 0, result.output
    results = json.loads((out / "results.json").read_text())
    sweep = results["tasks"][0]
    assert sweep["seeds"] == [0, 1]
    assert all(v == 0.0 for v in sweep["mnr"]["Random"]["normalized"] if v is not None)
    assert all(v == 1.0 for v in sweep["mnr"]["Base"]["normalized"] if v is not None)
    assert sweep["budget_violations"] == 0
    assert "Task 0:" in result.output
    assert "| Task |" in (out / "report.md").read_text()


def test_eval_with_selected_reward(runner, tmp_path, small_config, task0_transcript):
    run_dir, eval_dir = tmp_path / "run", tmp_path / "eval"
    assert runner.invoke(cli, ["--config", str(small_config), "run", "--task", "0",
                               "--llm", f"scripted:{task0_transcript}", "--out-dir", str(run_dir)]).exit_code == 0
    result = runner.invoke(cli, ["--config", str(small_config), "eval", "--tasks", "0", "--seeds", "2",
                                 "--trials", "2", "--steps", "3", "--reward", f"DLM={run_dir / 'trace.json'}",
                                 "--out-dir", str(eval_dir)])
    assert result.exit_code == 0, result.output
    results = json.loads((eval_dir / "results.json").read_text())
    assert results["methods"][-1] == "DLM"
    # the selected reward is the Base reward, so it reproduces Base exactly
    sweep = results["tasks"][0]
    assert sweep["raw_scores"]["DLM"] == sweep["raw_scores"]["Base"]


def test_eval_missing_reward_for_task(runner, tmp_path, small_config, task0_transcript):
    run_dir = tmp_path / "run"
    runner.invoke(cli, ["--config", str(small_config), "run", "--task", "0",
                        "--llm", f"scripted:{task0_transcript}", "--out-dir", str(run_dir)])
    result = runner.invoke(cli, ["eval", "--tasks", "0,1", "--reward", f"DLM={run_dir / 'trace.json'}",
                                 "--out-dir", str(tmp_path / "eval")])
    assert result.exit_code == 2
    assert "task 1" in result.output


@pytest.mark.parametrize("args", [["--tasks", "zero"], ["--reward", "Base=x.json"], ["--reward", "nothing"]])
def test_eval_usage_errors(runner, tmp_path, args):
    result = runner.invoke(cli, ["eval", *args, "--out-dir", str(tmp_path / "eval")])
    assert result.exit_code == 2


def test_oracle_small_suite(runner, tmp_path):
    out = tmp_path / "oracle"
    result = runner.invoke(cli, ["oracle", "--cases", "12", "--support-max", "2", "--k-max", "2",
                                 "--out-dir", str(out)])
    assert result.exit_code == 0, result.output
    assert "0 mismatches" in result.output
    report = json.loads((out / "oracle.json").read_text())
    assert report["cases_run"] == 12
    assert json.loads((out / "manifest.json").read_text())["seeds"] == {"oracle": 0}


def test_oracle_rejects_zero_cases(runner, tmp_path):
    result = runner.invoke(cli, ["oracle", "--cases", "0", "--out-dir", str(tmp_path / "oracle")])
    assert result.exit_code == 2


def test_report_rerenders_saved_artifacts(runner, tmp_path):
    out = tmp_path / "oracle"
    runner.invoke(cli, ["oracle", "--cases", "4", "--support-max", "2", "--k-max", "1", "--out-dir", str(out)])
    result = runner.invoke(cli, ["report", str(out / "oracle.json")])
    assert result.exit_code == 0
    assert result.output == (out / "report.md").read_text()

    target = tmp_path / "again.md"
    assert runner.invoke(cli, ["report", str(out / "oracle.json"), "--out", str(target)]).exit_code == 0
    assert target.read_text() == (out / "report.md").read_text()


def test_report_rejects_unknown_artifact(runner, tmp_path):
    path = tmp_path / "other.json"
    path.write_text(json.dumps({"hello": "world"}))
    result = runner.invoke(cli, ["report", str(path)])
    assert result.exit_code == 2
