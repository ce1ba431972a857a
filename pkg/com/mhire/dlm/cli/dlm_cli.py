import functools
import json
import logging
import uuid
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import click
from pydantic import ValidationError

from com.mhire.dlm.common.errors import (
    AcceptanceFailure, ConfigError, DlmError, ExitCode, MissingRewardError
)
from com.mhire.dlm.common.memory_log_handler import MemoryLogHandler, install_memory_logging
from com.mhire.dlm.config.config import APP_VERSION, Config, RunSettings, load_manifest_options, load_settings
from com.mhire.dlm.cli.dlm_cli_schema import RunManifest
from com.mhire.dlm.services.bandit_services.rmab_core.rmab_core import (
    generate_instance, instance_from_json, instance_to_json
)
from com.mhire.dlm.services.dlm_services.dlm_loop.dlm_loop import DlmLoop
from com.mhire.dlm.services.eval_services.eval_suite.eval_suite import (
    BASELINE_METHODS, get_task, load_task_catalog, run_sweep
)
from com.mhire.dlm.services.eval_services.eval_suite.eval_suite_schema import EvalReport
from com.mhire.dlm.services.eval_services.eval_utils.report_writer import (
    render_file, render_oracle, render_sweep, render_trace
)
from com.mhire.dlm.services.llm_services.llm_gateway.llm_gateway import LlmGateway, parse_backend_spec
from com.mhire.dlm.services.oracle_services.oracle_search.oracle_search import verify_suite
from com.mhire.dlm.services.reward_services.reward_dsl.reward_dsl import parse

logger = logging.getLogger(__name__)

# manifest option -> click parameter, per command; output locations are never replayed
REPLAYED_OPTIONS = {
    "gen": {"seed": "seed"},
    "run": {"task": "task_index", "llm": "llm_spec", "instance": "instance_path", "instance_seed": "instance_seed",
            "no_reflection": "no_reflection"},
    "eval": {"tasks": "tasks", "reward": "reward_specs"},
    "oracle": {"cases": "cases", "support_max": "support_max", "k_max": "k_max", "seed": "seed", "stress": "stress"},
}


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


class CommandRun:
    """Per-command bookkeeping: run id, settings, log capture and the manifest"""

    def __init__(self, ctx: click.Context, command: str, overrides: Dict[str, Any], options: Dict[str, Any]):
        self.command = command
        self.run_id = uuid.uuid4().hex[:12]
        self.started_at = _now()
        self.handler: MemoryLogHandler = ctx.obj["log_handler"]
        self.handler.bind_run(self.run_id)
        self.settings: RunSettings = load_settings(ctx.obj["config_path"], overrides)
        self.options = options
        self.seeds: Dict[str, Any] = {}
        self.backend: Optional[Dict[str, Any]] = None
        self.artifacts: Dict[str, str] = {}
        logger.info(f"Command '{command}' started as run {self.run_id}")

    def write(self, out_dir: Path, name: str, filename: str, content: str) -> Path:
        path = out_dir / filename
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
            path.write_text(content)
        except OSError as e:
            raise ConfigError(f"Cannot write {path}: {e}") from e
        self.artifacts[name] = filename
        return path

    def finish(self, out_dir: Path, manifest_name: str = "manifest.json", exit_code: int = ExitCode.SUCCESS) -> Path:
        logs_name = "logs.json" if manifest_name == "manifest.json" else manifest_name.replace("manifest", "logs")
        self.artifacts["logs"] = logs_name
        manifest = RunManifest(
            run_id=self.run_id,
            command=self.command,
            version=APP_VERSION,
            started_at=self.started_at,
            finished_at=_now(),
            config={"settings": self.settings.model_dump(mode="json"), "options": self.options},
            seeds=self.seeds,
            backend=self.backend,
            artifacts=dict(self.artifacts),
            exit_code=exit_code,
        )
        logger.info(f"Run {self.run_id} finished with exit code {exit_code}")
        out_dir.mkdir(parents=True, exist_ok=True)
        self.handler.write_json(out_dir / logs_name, run_id=self.run_id)
        path = out_dir / manifest_name
        path.write_text(manifest.model_dump_json(indent=2))
        return path


def handle_errors(command):
    """Map pipeline errors to exit codes"""
    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        ctx = click.get_current_context()
        try:
            return command(*args, **kwargs)
        except DlmError as e:
            logger.error(f"{type(e).__name__}: {e}")
            click.echo(f"Error: {e}", err=True)
            ctx.exit(e.exit_code)
        except ValidationError as e:
            click.echo(f"Error: invalid input: {e}", err=True)
            ctx.exit(ExitCode.USAGE)
    return wrapper


def manifest_default_map(config_path: Optional[Path]) -> Dict[str, Dict[str, Any]]:
    """Click default_map built from a manifest's recorded options; explicit flags still win"""
    try:
        recorded = load_manifest_options(config_path)
    except ConfigError as e:
        raise click.BadParameter(str(e), param_hint="'--config'") from e
    default_map = {}
    for command, options in recorded.items():
        names = REPLAYED_OPTIONS.get(command, {})
        default_map[command] = {names[key]: value for key, value in options.items() if key in names}
    return default_map


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              default=None, help="JSON settings file, or a previous run's manifest.json")
@click.option("--verbose", is_flag=True, help="Log at DEBUG level to the console")
@click.version_option(APP_VERSION, prog_name="dlm")
@click.pass_context
def cli(ctx: click.Context, config_path: Optional[Path], verbose: bool):
    """Language-driven reward design for budgeted restless bandits."""
    level = "DEBUG" if verbose else Config().log_level
    # subcommand contexts read their defaults from here
    ctx.default_map = manifest_default_map(config_path)
    ctx.obj = {
        "config_path": config_path,
        "log_handler": install_memory_logging(level=level, console=verbose),
    }


@cli.command()
@click.option("--seed", type=click.IntRange(min=0), default=7, show_default=True)
@click.option("--n-arms", type=click.IntRange(min=1), default=None, help="Default 48")
@click.option("--budget", type=click.IntRange(min=1), default=None, help="Default 5")
@click.option("--discount", type=float, default=None, help="Default 0.9")
@click.option("--out", "out_path", type=click.Path(dir_okay=False, path_type=Path), required=True)
@click.pass_context
@handle_errors
def gen(ctx, seed: int, n_arms: Optional[int], budget: Optional[int], discount: Optional[float], out_path: Path):
    """Generate a synthetic instance file."""
    run = CommandRun(ctx, "gen", {"n_arms": n_arms, "budget": budget, "discount": discount},
                     {"seed": seed, "out": str(out_path)})
    s = run.settings
    instance = generate_instance(seed, s.n_arms, s.budget, s.population, s.discount)
    run.seeds["instance"] = seed
    run.write(out_path.parent, "instance", out_path.name, instance_to_json(instance))
    run.finish(out_path.parent, manifest_name=f"{out_path.stem}.manifest.json")
    click.echo(f"Wrote {out_path}: {instance.n_arms} arms, budget {instance.budget}, "
               f"discount {instance.discount}, seed {seed}")


@cli.command(name="run")
@click.option("--task", "task_index", type=int, required=True,
              help="Task catalog index (0-15); read from a --config manifest when omitted")
@click.option("--llm", "llm_spec", required=True,
              help="scripted:<transcript.json> | http; read from a --config manifest when omitted")
@click.option("--instance", "instance_path", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              default=None, help="Instance file; generated from --instance-seed when omitted")
@click.option("--instance-seed", type=click.IntRange(min=0), default=7, show_default=True)
@click.option("--iterations", type=click.IntRange(min=1), default=None, help="Reflection rounds (default 2)")
@click.option("--candidates", type=click.IntRange(min=1), default=None, help="Candidates per round (default 2)")
@click.option("--seed", type=click.IntRange(min=0), default=None, help="Run seed (default 0)")
@click.option("--no-reflection", is_flag=True, help="Single generation query, no reflection round")
@click.option("--out-dir", type=click.Path(file_okay=False, path_type=Path), required=True)
@click.pass_context
@handle_errors
def run_command(ctx, task_index: int, llm_spec: str, instance_path: Optional[Path], instance_seed: int,
                iterations: Optional[int], candidates: Optional[int], seed: Optional[int], no_reflection: bool,
                out_dir: Path):
    """Run the reward-design loop for one task."""
    options = {"task": task_index, "llm": llm_spec, "instance": str(instance_path) if instance_path else None,
               "instance_seed": instance_seed, "no_reflection": no_reflection, "out_dir": str(out_dir)}
    run = CommandRun(ctx, "run", {"loop": {"iterations": iterations, "candidates_per_iter": candidates,
                                           "seed": seed}}, options)
    s = run.settings
    task = get_task(task_index)
    backend = parse_backend_spec(llm_spec)
    run.backend = backend.descriptor()

    if instance_path is not None:
        instance = instance_from_json(instance_path.read_text())
        run.seeds["instance"] = instance.rng_seed
    else:
        instance = generate_instance(instance_seed, s.n_arms, s.budget, s.population, s.discount)
        run.seeds["instance"] = instance_seed
        run.write(out_dir, "instance", "instance.json", instance_to_json(instance))
    run.seeds["run"] = s.loop.seed

    loop_config = s.loop
    if no_reflection:
        loop_config = loop_config.model_copy(update={"iterations": 1, "candidates_per_iter": 1})
    try:
        _, trace = DlmLoop(task, instance, LlmGateway(backend), loop_config, reflection=not no_reflection).run()
    except DlmError as e:
        run.finish(out_dir, exit_code=e.exit_code)
        raise

    run.write(out_dir, "trace", "trace.json", trace.model_dump_json(indent=2))
    run.write(out_dir, "report", "report.md", render_trace(trace))
    run.finish(out_dir)
    click.echo(f"Selected reward: {trace.final_reward}")
    click.echo(f"Wrote {out_dir / 'trace.json'} and {out_dir / 'report.md'} ({trace.llm_calls} LLM calls)")


def _parse_tasks(value: str) -> List[int]:
    if value == "all":
        return [task.index for task in load_task_catalog()]
    try:
        indices = [int(part) for part in value.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"--tasks expects 'all' or comma-separated indices, got '{value}'")
    for index in indices:
        get_task(index)
    return indices


def _load_method_rewards(specs: Tuple[str, ...], tasks: List[int]) -> Dict[int, Dict[str, Any]]:
    """NAME=PATH pairs pointing at run traces; every task needs a reward for every named method"""
    found: Dict[Tuple[str, int], Any] = {}
    names = []
    for spec in specs:
        name, sep, path = spec.partition("=")
        if not sep or not name or not path:
            raise ConfigError(f"--reward expects NAME=PATH, got '{spec}'")
        if name in BASELINE_METHODS:
            raise ConfigError(f"Method name '{name}' is reserved for a baseline")
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise MissingRewardError(f"Reward artifact {path} for method '{name}' is unreadable: {e}") from e
        if data.get("final_reward") is None or "task_index" not in data:
            raise MissingRewardError(f"Reward artifact {path} has no selected reward")
        found[(name, int(data["task_index"]))] = parse(data["final_reward"])
        if name not in names:
            names.append(name)

    rewards: Dict[int, Dict[str, Any]] = {}
    for task_index in tasks:
        rewards[task_index] = {}
        for name in names:
            if (name, task_index) not in found:
                raise MissingRewardError(f"Method '{name}' has no reward artifact for task {task_index}")
            rewards[task_index][name] = found[(name, task_index)]
    return rewards


@cli.command(name="eval")
@click.option("--tasks", default="all", show_default=True, help="'all' or comma-separated task indices")
@click.option("--reward", "reward_specs", multiple=True, help="NAME=trace.json; repeat per task and method")
@click.option("--seeds", "n_seeds", type=click.IntRange(min=1), default=None, help="Seeds per task (default 50)")
@click.option("--first-seed", type=click.IntRange(min=0), default=None)
@click.option("--trials", type=click.IntRange(min=1), default=None, help="Trials per seed (default 50)")
@click.option("--steps", type=click.IntRange(min=1), default=None, help="Steps per trial (default 10)")
@click.option("--workers", type=click.IntRange(min=1), default=None, help="Seed worker processes")
@click.option("--out-dir", type=click.Path(file_okay=False, path_type=Path), required=True)
@click.pass_context
@handle_errors
def eval_command(ctx, tasks: str, reward_specs: Tuple[str, ...], n_seeds: Optional[int], first_seed: Optional[int],
                 trials: Optional[int], steps: Optional[int], workers: Optional[int], out_dir: Path):
    """Evaluate baselines and selected rewards across seeds."""
    overrides = {
        "protocol": {"n_seeds": n_seeds, "first_seed": first_seed, "trials_per_seed": trials,
                     "steps_per_trial": steps},
        "workers": workers if workers is not None else Config().workers,
    }
    run = CommandRun(ctx, "eval", overrides, {"tasks": tasks, "reward": list(reward_specs), "out_dir": str(out_dir)})
    s = run.settings
    task_indices = _parse_tasks(tasks)
    method_rewards = _load_method_rewards(reward_specs, task_indices)
    run.seeds["evaluation"] = s.protocol.seeds

    sweeps = [run_sweep(get_task(i), method_rewards[i], settings=s, workers=s.workers) for i in task_indices]
    methods = list(BASELINE_METHODS) + [m for m in (method_rewards[task_indices[0]] if task_indices else {})]
    report = EvalReport(methods=methods, protocol=s.protocol, tasks=sweeps)

    run.write(out_dir, "results", "results.json", report.model_dump_json(indent=2))
    run.write(out_dir, "report", "report.md", render_sweep(report))
    run.finish(out_dir)
    for sweep in sweeps:
        summary = ", ".join(f"{m}={sweep.mnr[m].iqm:.3f}" if sweep.mnr[m].iqm is not None else f"{m}=n/a"
                            for m in methods)
        click.echo(f"Task {sweep.task_index}: {summary}")


@cli.command()
@click.option("--cases", type=click.IntRange(min=1), default=200, show_default=True)
@click.option("--support-max", type=click.IntRange(min=1), default=3, show_default=True)
@click.option("--k-max", type=click.IntRange(min=1), default=3, show_default=True)
@click.option("--seed", type=click.IntRange(min=0), default=0, show_default=True)
@click.option("--stress", is_flag=True, help="Also run non-monotone spiked oracles (informational)")
@click.option("--out-dir", type=click.Path(file_okay=False, path_type=Path), required=True)
@click.pass_context
@handle_errors
def oracle(ctx, cases: int, support_max: int, k_max: int, seed: int, stress: bool, out_dir: Path):
    """Verify grid line search against brute force on randomized monotone oracles."""
    run = CommandRun(ctx, "oracle", {}, {"cases": cases, "support_max": support_max, "k_max": k_max,
                                         "seed": seed, "stress": stress, "out_dir": str(out_dir)})
    run.seeds["oracle"] = seed
    report = verify_suite(cases, support_max, k_max, seed, stress)
    run.write(out_dir, "oracle", "oracle.json", report.model_dump_json(indent=2))
    run.write(out_dir, "report", "report.md", render_oracle(report))

    click.echo(f"{report.cases_run} cases, {report.mismatches} mismatches, {report.bound_violations} "
               f"call-bound violations, R^2={report.r_squared}")
    if stress:
        click.echo(f"Non-monotone stress: {report.stress_mismatches}/{report.stress_cases} diverged (informational)")
    if report.mismatches:
        run.finish(out_dir, exit_code=ExitCode.ACCEPTANCE)
        raise AcceptanceFailure(f"{report.mismatches} monotone cases disagree with brute force")
    run.finish(out_dir)


@cli.command()
@click.argument("artifact", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--out", "out_path", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="Write markdown here instead of stdout")
@handle_errors
def report(artifact: Path, out_path: Optional[Path]):
    """Re-render markdown from a saved trace, results or oracle JSON."""
    markdown = render_file(artifact)
    if out_path is None:
        click.echo(markdown, nl=False)
        return
    try:
        out_path.write_text(markdown)
    except OSError as e:
        raise ConfigError(f"Cannot write {out_path}: {e}") from e
    click.echo(f"Wrote {out_path}")


def main():
    cli(prog_name="dlm")


if __name__ == "__main__":
    main()
