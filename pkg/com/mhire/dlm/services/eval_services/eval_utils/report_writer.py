import json
import logging
from pathlib import Path
from typing import Any, Dict, List

from com.mhire.dlm.common.errors import ConfigError
from com.mhire.dlm.services.dlm_services.dlm_loop.dlm_loop_schema import LoopTrace, SlotStatus
from com.mhire.dlm.services.eval_services.eval_suite.eval_suite import (
    aggregate_precision_recall, feature_precision_recall, get_task, logic_recall
)
from com.mhire.dlm.services.eval_services.eval_suite.eval_suite_schema import EvalReport, MnrResult
from com.mhire.dlm.services.oracle_services.oracle_search.oracle_search_schema import OracleReport
from com.mhire.dlm.services.reward_services.reward_dsl.reward_dsl import parse

logger = logging.getLogger(__name__)


def _format_mnr(result: MnrResult) -> str:
    if result.iqm is None:
        return "n/a"
    return f"{result.iqm:.3f} ± {result.se:.3f}"


def render_trace(trace: LoopTrace) -> str:
    task = get_task(trace.task_index)
    lines = [
        f"# DLM run: task {trace.task_index} ({trace.task_label})",
        "",
        f"Prompt: {task.prompt}",
        "",
        f"Selected reward: `{trace.final_reward}`",
        "",
        f"Reflection: {'on' if trace.reflection else 'off'}. LLM calls: {trace.llm_calls}",
    ]

    for record in trace.iterations:
        lines += ["", f"## Iteration {record.iteration}", ""]
        if record.prior_best:
            lines.append("Best previous attempts: " + ", ".join(f"`{r}`" for r in record.prior_best))
        if record.skipped:
            lines.append("Every candidate failed; iteration skipped.")
        else:
            lines.append(f"Selected candidate {record.selected_index} by {record.selection_method.value}: "
                         f"`{record.selected_reward}`")
        if record.fallback_reason:
            lines.append(f"Fallback reason: {record.fallback_reason}")

        for candidate in record.candidates:
            lines += ["", f"### Candidate {candidate.slot}: {candidate.terminal_status}", ""]
            if candidate.canonical is None:
                lines.append(f"Parse errors: {'; '.join(candidate.parse_errors)}")
                continue
            scores = feature_precision_recall(parse(candidate.canonical), task)
            lines.append(f"Reward: `{candidate.canonical}`")
            lines.append(f"Feature precision {scores.precision:.2f}, recall {scores.recall:.2f}")
            if candidate.policy is not None:
                lines.append(f"Final lambda {candidate.policy.final_lambda:.4f}, training seed {candidate.training_seed}")
            if candidate.outcome is not None:
                lines += ["", "```", candidate.outcome.rendered, "```"]

    rewards = [parse(c.canonical) for c in trace.all_candidates() if c.canonical is not None]
    aggregate = aggregate_precision_recall(rewards, task)
    lines += ["", "## Feature usage", ""]
    if aggregate is None:
        lines.append("No candidate parsed.")
    else:
        lines.append(f"Precision {aggregate.precision_mean:.3f} ± {aggregate.precision_se:.3f}, "
                     f"recall {aggregate.recall_mean:.3f} ± {aggregate.recall_se:.3f} "
                     f"over {aggregate.n_candidates} candidates")
    if len(task.base_features) >= 2:
        recall = logic_recall(rewards, task)
        lines.append(f"Logic recall: {'n/a' if recall is None else f'{recall:.3f}'}")
    trained = sum(c.status != SlotStatus.FAILED for c in trace.all_candidates())
    lines.append(f"Trained candidates: {trained}/{len(trace.all_candidates())}")
    return "\n".join(lines) + "\n"


def render_sweep(report: EvalReport) -> str:
    p = report.protocol
    lines = [
        "# Evaluation sweep",
        "",
        f"{p.n_seeds} seeds from {p.first_seed}, {p.trials_per_seed} trials x {p.steps_per_trial} steps per seed",
        "",
        "## Mean normalized reward (IQM ± SE)",
        "",
        "| Task | " + " | ".join(report.methods) + " |",
        "|---" * (len(report.methods) + 1) + "|",
    ]
    for task in report.tasks:
        cells = [_format_mnr(task.mnr[m]) if m in task.mnr else "-" for m in report.methods]
        lines.append(f"| {task.task_index}. {task.task_label} | " + " | ".join(cells) + " |")

    pairs = _tested_pairs(report)
    if pairs:
        lines += ["", "## One-tailed t-tests on per-seed MNR (p-values)", "",
                  "| Task | " + " | ".join(pairs) + " |", "|---" * (len(pairs) + 1) + "|"]
        for task in report.tasks:
            cells = [f"{task.t_tests[k]:.4g}" if k in task.t_tests else "-" for k in pairs]
            lines.append(f"| {task.task_index} | " + " | ".join(cells) + " |")

    violations = sum(t.budget_violations for t in report.tasks)
    steps = sum(t.steps_checked for t in report.tasks)
    lines += ["", f"Budget violations: {violations} in {steps} checked steps"]
    return "\n".join(lines) + "\n"


def _tested_pairs(report: EvalReport) -> List[str]:
    """Every method against Random, Default and Base, in method order"""
    references = [m for m in ("Random", "Default", "Base") if m in report.methods]
    return [f"{a}>{b}" for a in report.methods for b in references if a != b]


def render_oracle(report: OracleReport) -> str:
    lines = [
        "# Grid-search verification",
        "",
        f"Cases: {report.cases_run}, mismatches: {report.mismatches}, call-bound violations: {report.bound_violations}",
    ]
    if report.r_squared is not None:
        lines.append(f"Calls ~ support x K: slope {report.slope:.3f}, intercept {report.intercept:.3f}, "
                     f"R^2 {report.r_squared:.3f}")
    if report.stress_cases:
        lines.append(f"Non-monotone stress: {report.stress_mismatches}/{report.stress_cases} cases diverged")
    lines += ["", "| support | K | cases | mean calls |", "|---|---|---|---|"]
    lines += [f"| {c.support_size} | {c.k} | {c.cases} | {c.mean_calls:.2f} |" for c in report.cells]
    return "\n".join(lines) + "\n"


def render_artifact(data: Dict[str, Any]) -> str:
    """Markdown for any saved JSON artifact, recognised by its fields"""
    if "iterations" in data:
        return render_trace(LoopTrace.model_validate(data))
    if "tasks" in data and "protocol" in data:
        return render_sweep(EvalReport.model_validate(data))
    if "cases_run" in data:
        return render_oracle(OracleReport.model_validate(data))
    raise ConfigError("Unrecognised artifact: expected a run trace, sweep results or oracle report")


def render_file(path: Path) -> str:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"Cannot read artifact {path}: {e}") from e
    logger.debug(f"Rendering artifact {path}")
    return render_artifact(data)
